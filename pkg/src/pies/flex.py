"""Flexible-load classes and their MILP fragments.

Every generator adds its decision variables to a :class:`MilpProblem` and
returns a fragment with per-period load adjustments (kW added to the
baseline demand of each carrier) and the compensation expression. The
zero-deviation decision is always feasible and costs nothing.
"""
from __future__ import annotations

from dataclasses import MISSING, dataclass, field, fields
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import BuildError, check
from .milp.problem import EQ, GE, LE, LinExpr, MilpProblem

ELECTRIC, HEAT = "electric", "heat"
MEDIA = (ELECTRIC, HEAT)
E2H, H2E, BOTH = "elec_to_heat", "heat_to_elec", "both"
DEV_TOL = 1e-6


def _window(w, path) -> Tuple[int, int]:
    check(len(w) == 2, path, "window must be [start, end]")
    a, b = int(w[0]), int(w[1])
    check(0 <= a <= b, path, f"window [{a}, {b}] must satisfy 0 <= start <= end")
    return a, b


@dataclass(frozen=True)
class ShiftableLoad:
    """Fixed-shape block whose start may move within ``window``.

    ``window`` bounds the *start* period: ``[earliest_start, latest_start]``.
    """

    name: str
    medium: str
    baseline_start: int
    profile: Tuple[float, ...]
    window: Tuple[int, int]
    comp_price: float

    def __post_init__(self):
        p = f"flex.shiftable.{self.name}"
        check(self.medium in MEDIA, f"{p}.medium", f"unknown medium {self.medium!r}")
        object.__setattr__(self, "profile", tuple(float(v) for v in self.profile))
        object.__setattr__(self, "window", _window(self.window, f"{p}.window"))
        check(len(self.profile) >= 1, f"{p}.profile", "duration must be >= 1")
        check(all(v >= 0 for v in self.profile), f"{p}.profile", "profile must be nonnegative")
        lo, hi = self.window
        check(lo <= self.baseline_start <= hi, f"{p}.window", "window must contain baseline_start")
        check(self.comp_price >= 0, f"{p}.comp_price", "must be >= 0")

    @property
    def duration(self) -> int:
        return len(self.profile)

    @property
    def energy_per_step(self) -> float:
        return float(sum(self.profile))

    def candidate_starts(self) -> List[int]:
        return list(range(self.window[0], self.window[1] + 1))

    def check_fits(self, periods: int) -> None:
        p = f"flex.shiftable.{self.name}.window"
        check(self.window[1] + self.duration <= periods, p,
              f"latest start {self.window[1]} + duration {self.duration} leaves the {periods}-period horizon")


@dataclass(frozen=True)
class TransferableLoad:
    """Energy budget served at flexible power inside ``window``."""

    name: str
    medium: str
    power_min: float
    power_max: float
    run_periods: int
    window: Tuple[int, int]
    total_energy: float
    baseline_start: int
    comp_price: float
    contiguous: bool = True

    def __post_init__(self):
        p = f"flex.transferable.{self.name}"
        check(self.medium in MEDIA, f"{p}.medium", f"unknown medium {self.medium!r}")
        object.__setattr__(self, "window", _window(self.window, f"{p}.window"))
        check(0 <= self.power_min <= self.power_max, f"{p}.power_min", "need 0 <= power_min <= power_max")
        check(self.run_periods >= 1, f"{p}.run_periods", "must be >= 1")
        lo, hi = self.window
        check(hi - lo + 1 >= self.run_periods, f"{p}.window", "window shorter than run_periods")
        check(lo <= self.baseline_start and self.baseline_start + self.run_periods - 1 <= hi,
              f"{p}.baseline_start", "baseline placement must lie inside the window")
        check(self.total_energy >= 0, f"{p}.total_energy", "must be >= 0")
        check(self.comp_price >= 0, f"{p}.comp_price", "must be >= 0")

    def energy_feasible(self, step: float) -> bool:
        lo = self.run_periods * self.power_min * step
        hi = self.run_periods * self.power_max * step
        return lo - 1e-9 <= self.total_energy <= hi + 1e-9

    def check_fits(self, periods: int, step: float) -> None:
        p = f"flex.transferable.{self.name}"
        check(self.window[1] < periods, f"{p}.window", "window leaves the horizon")
        check(self.energy_feasible(step), f"{p}.total_energy",
              "total_energy outside [run_periods*power_min*step, run_periods*power_max*step]")

    def baseline_power(self, periods: int, step: float) -> np.ndarray:
        base = np.zeros(periods)
        base[self.baseline_start:self.baseline_start + self.run_periods] = \
            self.total_energy / (self.run_periods * step)
        return base


@dataclass(frozen=True)
class CurtailableLoad:
    """Load that may be cut for runs of bounded length a bounded number of times.

    ``curtail_power`` has one entry per period of ``window``.
    """

    name: str
    medium: str
    curtail_power: Tuple[float, ...]
    min_duration: int
    max_duration: int
    max_events: int
    window: Tuple[int, int]
    comp_price: float

    def __post_init__(self):
        p = f"flex.curtailable.{self.name}"
        check(self.medium in MEDIA, f"{p}.medium", f"unknown medium {self.medium!r}")
        object.__setattr__(self, "window", _window(self.window, f"{p}.window"))
        object.__setattr__(self, "curtail_power", tuple(float(v) for v in self.curtail_power))
        check(1 <= self.min_duration <= self.max_duration, f"{p}.min_duration",
              "need 1 <= min_duration <= max_duration")
        check(self.max_events >= 0, f"{p}.max_events", "must be >= 0")
        check(len(self.curtail_power) == self.window[1] - self.window[0] + 1, f"{p}.curtail_power",
              "needs one entry per window period")
        check(all(v >= 0 for v in self.curtail_power), f"{p}.curtail_power", "must be nonnegative")
        check(self.comp_price >= 0, f"{p}.comp_price", "must be >= 0")

    def power_at(self, t: int) -> float:
        lo, hi = self.window
        return self.curtail_power[t - lo] if lo <= t <= hi else 0.0

    def check_fits(self, periods: int) -> None:
        check(self.window[1] < periods, f"flex.curtailable.{self.name}.window", "window leaves the horizon")


@dataclass(frozen=True)
class SubstitutableLoad:
    """Demand that can be served by the other carrier at ratio ``kappa``.

    ``power_min``/``power_max`` bound the power taken off the source carrier
    (electric for ``elec_to_heat``, heat for ``heat_to_elec``). ``kappa`` is
    kWh of heat per kWh of electricity.
    """

    name: str
    power_min: float
    power_max: float
    max_events: int
    window: Tuple[int, int]
    comp_price: float
    direction: str = E2H
    kappa: Optional[float] = None

    def __post_init__(self):
        p = f"flex.substitutable.{self.name}"
        object.__setattr__(self, "window", _window(self.window, f"{p}.window"))
        check(0 <= self.power_min <= self.power_max, f"{p}.power_min", "need 0 <= power_min <= power_max")
        check(self.max_events >= 0, f"{p}.max_events", "must be >= 0")
        check(self.kappa is None or self.kappa > 0, f"{p}.kappa", "must be > 0")
        check(self.direction in (E2H, H2E, BOTH), f"{p}.direction", f"unknown direction {self.direction!r}")
        check(self.comp_price >= 0, f"{p}.comp_price", "must be >= 0")

    @property
    def directions(self) -> Tuple[str, ...]:
        return (E2H, H2E) if self.direction == BOTH else (self.direction,)

    def check_fits(self, periods: int) -> None:
        check(self.window[1] < periods, f"flex.substitutable.{self.name}.window", "window leaves the horizon")


_KINDS = {
    "shiftable": ShiftableLoad,
    "transferable": TransferableLoad,
    "curtailable": CurtailableLoad,
    "substitutable": SubstitutableLoad,
}


@dataclass(frozen=True)
class FlexLoadSet:
    shiftable: Tuple[ShiftableLoad, ...] = ()
    transferable: Tuple[TransferableLoad, ...] = ()
    curtailable: Tuple[CurtailableLoad, ...] = ()
    substitutable: Tuple[SubstitutableLoad, ...] = ()

    def __post_init__(self):
        names = [ld.name for ld in self.all()]
        dupes = {n for n in names if names.count(n) > 1}
        check(not dupes, "flex", f"duplicate flexible-load names {sorted(dupes)}")

    def all(self):
        return (*self.shiftable, *self.transferable, *self.curtailable, *self.substitutable)

    def check_fits(self, periods: int, step: float) -> None:
        for ld in self.shiftable:
            ld.check_fits(periods)
        for ld in self.transferable:
            ld.check_fits(periods, step)
        for ld in (*self.curtailable, *self.substitutable):
            ld.check_fits(periods)

    @classmethod
    def from_dict(cls, data: dict) -> "FlexLoadSet":
        out = {}
        for kind, typ in _KINDS.items():
            names = {f.name for f in fields(typ)}
            items = []
            for i, raw in enumerate(data.get(kind) or []):
                raw = dict(raw)
                raw.setdefault("name", f"{kind}{i}")
                unknown = set(raw) - names
                check(not unknown, f"flex.{kind}[{i}]", f"unknown keys {sorted(unknown)}")
                missing = {f.name for f in fields(typ)
                           if f.default is MISSING and f.default_factory is MISSING} - set(raw)
                check(not missing, f"flex.{kind}[{i}]", f"missing keys {sorted(missing)}")
                items.append(typ(**raw))
            out[kind] = tuple(items)
        return cls(**out)

    def to_dict(self) -> dict:
        out = {}
        for kind in _KINDS:
            rows = []
            for ld in getattr(self, kind):
                row = {}
                for f in fields(ld):
                    v = getattr(ld, f.name)
                    row[f.name] = list(v) if isinstance(v, tuple) else v
                rows.append(row)
            out[kind] = rows
        return out


# -- MILP fragments --------------------------------------------------------


@dataclass
class FlexFragment:
    """Variables and expressions one flexible load contributes."""

    load: object
    electric: List[LinExpr]
    heat: List[LinExpr]
    cost: LinExpr
    vars: Dict[str, object] = field(default_factory=dict)


def _zero_adjustments(periods: int) -> List[LinExpr]:
    return [LinExpr() for _ in range(periods)]


def _adjustments(frag_medium: str, periods: int):
    elec, heat = _zero_adjustments(periods), _zero_adjustments(periods)
    return elec, heat, (elec if frag_medium == ELECTRIC else heat)


def shiftable_constraints(load: ShiftableLoad, problem: MilpProblem, periods: int,
                          step: float) -> FlexFragment:
    starts = [s for s in load.candidate_starts() if s + load.duration <= periods]
    if not starts or load.baseline_start not in starts:
        raise BuildError(f"shiftable load {load.name!r}: window admits no start inside the horizon")
    x = {s: problem.add_var(f"shift[{load.name}].start[{s}]", binary=True) for s in starts}
    problem.add_constraint({j: 1.0 for j in x.values()}, EQ, 1.0, f"shift[{load.name}].one_start")
    elec, heat, adj = _adjustments(load.medium, periods)
    for s, j in x.items():
        for k, p in enumerate(load.profile):
            adj[s + k].add(j, p)
    for k, p in enumerate(load.profile):
        adj[load.baseline_start + k].constant -= p
    energy = load.energy_per_step * step
    cost = LinExpr({x[load.baseline_start]: -load.comp_price * energy}, load.comp_price * energy)
    return FlexFragment(load, elec, heat, cost, {"start": x})


def transferable_constraints(load: TransferableLoad, problem: MilpProblem, periods: int,
                             step: float) -> FlexFragment:
    if not load.energy_feasible(step):
        raise BuildError(f"transferable load {load.name!r}: total_energy incompatible with "
                         f"run_periods and power bounds")
    w0, w1 = load.window
    if w1 >= periods:
        raise BuildError(f"transferable load {load.name!r}: window leaves the horizon")
    tag = f"transfer[{load.name}]"
    window = range(w0, w1 + 1)
    power = {t: problem.add_var(f"{tag}.power[{t}]", 0.0, load.power_max) for t in window}
    if load.contiguous:
        starts = range(w0, w1 - load.run_periods + 2)
        z = {s: problem.add_var(f"{tag}.start[{s}]", binary=True) for s in starts}
        problem.add_constraint({j: 1.0 for j in z.values()}, EQ, 1.0, f"{tag}.one_start")
        active = {t: problem.add_var(f"{tag}.active[{t}]", 0.0, 1.0) for t in window}
        for t in window:
            row = {active[t]: 1.0}
            for s, j in z.items():
                if s <= t < s + load.run_periods:
                    row[j] = -1.0
            problem.add_constraint(row, EQ, 0.0, f"{tag}.active_def[{t}]")
    else:
        z = {}
        active = {t: problem.add_var(f"{tag}.active[{t}]", binary=True) for t in window}
        problem.add_constraint({j: 1.0 for j in active.values()}, EQ, float(load.run_periods),
                               f"{tag}.run_periods")
    for t in window:
        problem.add_constraint({power[t]: 1.0, active[t]: -load.power_min}, GE, 0.0, f"{tag}.pmin[{t}]")
        problem.add_constraint({power[t]: 1.0, active[t]: -load.power_max}, LE, 0.0, f"{tag}.pmax[{t}]")
    problem.add_constraint({j: step for j in power.values()}, EQ, load.total_energy, f"{tag}.energy")
    base = load.baseline_power(periods, step)
    dev = problem.add_var(f"{tag}.deviated", binary=True)
    for t in window:
        problem.add_constraint({power[t]: 1.0, dev: -load.power_max}, LE, base[t], f"{tag}.dev_up[{t}]")
        problem.add_constraint({power[t]: -1.0, dev: -load.power_max}, LE, -base[t], f"{tag}.dev_dn[{t}]")
    elec, heat, adj = _adjustments(load.medium, periods)
    for t in range(periods):
        if t in power:
            adj[t].add(power[t], 1.0)
        adj[t].constant -= base[t]
    cost = LinExpr({dev: load.comp_price * load.total_energy})
    return FlexFragment(load, elec, heat, cost,
                        {"power": power, "active": active, "start": z, "deviated": dev})


def curtailable_constraints(load: CurtailableLoad, problem: MilpProblem, periods: int,
                            step: float) -> FlexFragment:
    w0, w1 = load.window
    if load.min_duration > w1 - w0 + 1:
        raise BuildError(f"curtailable load {load.name!r}: min_duration exceeds the window")
    if w1 >= periods:
        raise BuildError(f"curtailable load {load.name!r}: window leaves the horizon")
    tag = f"curtail[{load.name}]"
    window = range(w0, w1 + 1)
    lam = {t: problem.add_var(f"{tag}.on[{t}]", binary=True) for t in window}
    # Event starts are integral whenever the flags are, so they stay continuous.
    start = {t: problem.add_var(f"{tag}.event_start[{t}]", 0.0, 1.0) for t in window}
    for t in window:
        prev = lam.get(t - 1)
        row = {start[t]: 1.0, lam[t]: -1.0}
        if prev is not None:
            row[prev] = 1.0
            problem.add_constraint({start[t]: 1.0, prev: 1.0}, LE, 1.0, f"{tag}.start_ub_prev[{t}]")
        problem.add_constraint(row, GE, 0.0, f"{tag}.start_lb[{t}]")
        problem.add_constraint({start[t]: 1.0, lam[t]: -1.0}, LE, 0.0, f"{tag}.start_ub[{t}]")
        run = {lam[k]: 1.0 for k in range(t, t + load.min_duration) if k in lam}
        run[start[t]] = run.get(start[t], 0.0) - load.min_duration
        problem.add_constraint(run, GE, 0.0, f"{tag}.min_run[{t}]")
        span = range(t, t + load.max_duration + 1)
        if span[-1] <= w1:
            problem.add_constraint({lam[k]: 1.0 for k in span}, LE, float(load.max_duration),
                                   f"{tag}.max_run[{t}]")
    problem.add_constraint({j: 1.0 for j in start.values()}, LE, float(load.max_events), f"{tag}.events")
    elec, heat, adj = _adjustments(load.medium, periods)
    cost = LinExpr()
    for t in window:
        cp = load.power_at(t)
        adj[t].add(lam[t], -cp)
        cost.add(lam[t], load.comp_price * cp * step)
    return FlexFragment(load, elec, heat, cost, {"on": lam, "event_start": start})


def substitutable_constraints(load: SubstitutableLoad, problem: MilpProblem, periods: int,
                              step: float, kappa: Optional[float] = None) -> FlexFragment:
    kappa = load.kappa if load.kappa is not None else kappa
    if kappa is None or kappa <= 0:
        raise BuildError(f"substitutable load {load.name!r}: conversion ratio kappa not set")
    w0, w1 = load.window
    if w1 >= periods:
        raise BuildError(f"substitutable load {load.name!r}: window leaves the horizon")
    tag = f"subst[{load.name}]"
    window = range(w0, w1 + 1)
    elec, heat = _zero_adjustments(periods), _zero_adjustments(periods)
    cost = LinExpr()
    flags: Dict[str, Dict[int, int]] = {}
    power: Dict[str, Dict[int, int]] = {}
    for d in load.directions:
        flags[d] = {t: problem.add_var(f"{tag}.{d}.on[{t}]", binary=True) for t in window}
        power[d] = {t: problem.add_var(f"{tag}.{d}.power[{t}]", 0.0, load.power_max) for t in window}
        for t in window:
            f, p = flags[d][t], power[d][t]
            problem.add_constraint({p: 1.0, f: -load.power_min}, GE, 0.0, f"{tag}.{d}.pmin[{t}]")
            problem.add_constraint({p: 1.0, f: -load.power_max}, LE, 0.0, f"{tag}.{d}.pmax[{t}]")
            if d == E2H:
                elec[t].add(p, -1.0)
                heat[t].add(p, kappa)
                cost.add(p, load.comp_price * step)
            else:
                heat[t].add(p, -1.0)
                elec[t].add(p, 1.0 / kappa)
                cost.add(p, load.comp_price * step / kappa)
    if len(load.directions) == 2:
        for t in window:
            problem.add_constraint({flags[E2H][t]: 1.0, flags[H2E][t]: 1.0}, LE, 1.0, f"{tag}.one_way[{t}]")
    problem.add_constraint({j: 1.0 for d in flags for j in flags[d].values()}, LE,
                           float(load.max_events), f"{tag}.events")
    return FlexFragment(load, elec, heat, cost, {"on": flags, "power": power, "kappa": kappa})


def build_flex(flex: FlexLoadSet, problem: MilpProblem, periods: int, step: float, *,
               basic: bool = True, substitution: bool = True,
               kappa_default: Optional[float] = None) -> List[FlexFragment]:
    frags: List[FlexFragment] = []
    if basic:
        frags += [shiftable_constraints(ld, problem, periods, step) for ld in flex.shiftable]
        frags += [transferable_constraints(ld, problem, periods, step) for ld in flex.transferable]
        frags += [curtailable_constraints(ld, problem, periods, step) for ld in flex.curtailable]
    if substitution:
        frags += [substitutable_constraints(ld, problem, periods, step, kappa_default)
                  for ld in flex.substitutable]
    return frags


def compensation_expr(fragments: List[FlexFragment]) -> LinExpr:
    total = LinExpr()
    for frag in fragments:
        total += frag.cost
    return total


# -- decisions ---------------------------------------------------------------


@dataclass
class ShiftDecision:
    name: str
    start: int
    indicators: Dict[int, float]


@dataclass
class TransferDecision:
    name: str
    active: np.ndarray
    power: np.ndarray


@dataclass
class CurtailDecision:
    name: str
    on: np.ndarray
    event_start: np.ndarray


@dataclass
class SubstDecision:
    name: str
    kappa: float
    on: Dict[str, np.ndarray]
    power: Dict[str, np.ndarray]


@dataclass
class FlexDecisionSet:
    shiftable: List[ShiftDecision] = field(default_factory=list)
    transferable: List[TransferDecision] = field(default_factory=list)
    curtailable: List[CurtailDecision] = field(default_factory=list)
    substitutable: List[SubstDecision] = field(default_factory=list)


def _spread(mapping: Dict[int, int], x, periods: int) -> np.ndarray:
    out = np.zeros(periods)
    for t, j in mapping.items():
        out[t] = x[j]
    return out


def extract_decisions(fragments: List[FlexFragment], x, periods: int) -> FlexDecisionSet:
    out = FlexDecisionSet()
    for frag in fragments:
        ld, v = frag.load, frag.vars
        if isinstance(ld, ShiftableLoad):
            ind = {s: float(x[j]) for s, j in v["start"].items()}
            out.shiftable.append(ShiftDecision(ld.name, max(ind, key=ind.get), ind))
        elif isinstance(ld, TransferableLoad):
            out.transferable.append(TransferDecision(
                ld.name, np.round(_spread(v["active"], x, periods)), _spread(v["power"], x, periods)))
        elif isinstance(ld, CurtailableLoad):
            out.curtailable.append(CurtailDecision(
                ld.name, np.round(_spread(v["on"], x, periods)),
                np.round(_spread(v["event_start"], x, periods))))
        elif isinstance(ld, SubstitutableLoad):
            out.substitutable.append(SubstDecision(
                ld.name, v["kappa"],
                {d: np.round(_spread(m, x, periods)) for d, m in v["on"].items()},
                {d: _spread(m, x, periods) for d, m in v["power"].items()}))
    return out


def load_adjustments(flex: FlexLoadSet, decisions: FlexDecisionSet, periods: int,
                     step: float) -> Tuple[np.ndarray, np.ndarray]:
    """Per-period (electric, heat) kW added to baseline demand by ``decisions``."""
    adj = {ELECTRIC: np.zeros(periods), HEAT: np.zeros(periods)}
    by_name = {ld.name: ld for ld in flex.all()}
    for d in decisions.shiftable:
        ld = by_name[d.name]
        for k, p in enumerate(ld.profile):
            adj[ld.medium][d.start + k] += p
            adj[ld.medium][ld.baseline_start + k] -= p
    for d in decisions.transferable:
        ld = by_name[d.name]
        adj[ld.medium] += d.power - ld.baseline_power(periods, step)
    for d in decisions.curtailable:
        ld = by_name[d.name]
        adj[ld.medium] -= np.array([ld.power_at(t) for t in range(periods)]) * d.on
    for d in decisions.substitutable:
        for direction, p in d.power.items():
            if direction == E2H:
                adj[ELECTRIC] -= p
                adj[HEAT] += d.kappa * p
            else:
                adj[HEAT] -= p
                adj[ELECTRIC] += p / d.kappa
    return adj[ELECTRIC], adj[HEAT]


def compensation_cost(flex: FlexLoadSet, decisions: FlexDecisionSet, step: float) -> float:
    """Demand-response compensation recomputed from decision values."""
    by_name = {ld.name: ld for ld in flex.all()}
    total = 0.0
    for d in decisions.shiftable:
        ld = by_name[d.name]
        if d.start != ld.baseline_start:
            total += ld.comp_price * ld.energy_per_step * step
    for d in decisions.transferable:
        ld = by_name[d.name]
        base = ld.baseline_power(len(d.power), step)
        if np.max(np.abs(d.power - base)) > DEV_TOL:
            total += ld.comp_price * ld.total_energy
    for d in decisions.curtailable:
        ld = by_name[d.name]
        total += ld.comp_price * step * sum(ld.power_at(t) * d.on[t] for t in range(len(d.on)))
    for d in decisions.substitutable:
        ld = by_name[d.name]
        for direction, p in d.power.items():
            elec_side = p if direction == E2H else p / d.kappa
            total += ld.comp_price * step * float(np.sum(elec_side))
    return total
