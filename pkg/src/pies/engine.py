"""Assemble the park scheduling MILP and map solutions back to schedules."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

import numpy as np

from . import flex as fl
from .carbon import (EmissionLedger, LadderFragment, actual_emission, ladder_cost,
                     linearize_ladder, per_period_emission, tie_net)
from .errors import AuditError, BuildError
from .milp import EQ, GE, LE, MilpProblem, Solution, SolveOptions, solve
from .milp.problem import LinExpr
from .model import ParkModel, ScenarioConfig

AUDIT_TOL = 1e-4


@dataclass
class StorageVars:
    charge: List[int]
    discharge: List[int]
    soc: List[int]
    charge_flag: List[int]
    discharge_flag: List[int]
    charge_start: List[int]
    discharge_start: List[int]


@dataclass
class Layout:
    """Variable indices of an assembled problem, keyed by role."""

    model: ParkModel
    scenario: ScenarioConfig
    buy: List[int]
    sell: List[int]
    renewables: Dict[str, List[int]]
    gt: List[int]
    gb: List[int]
    eh: List[int]
    storages: Dict[str, StorageVars]
    fragments: List[fl.FlexFragment]
    electric_rows: List[int]
    heat_rows: List[int]
    ladder: Optional[LadderFragment] = None
    net_bound: float = 0.0


def _net_emission_expr(model: ParkModel, lay: Layout) -> LinExpr:
    p, dt = model.carbon, model.grid.step
    expr = LinExpr()
    for t in range(model.grid.periods):
        expr.add(lay.buy[t], dt * (p.grid_emission_factor - p.quota_elec_coeff))
        expr.add(lay.gt[t], dt * (p.gas_emission_factor / model.gt.eta_e - p.quota_elec_coeff
                                  - p.quota_heat_coeff * model.gt.heat_ratio))
        expr.add(lay.gb[t], dt * (p.gas_emission_factor / model.gb.eta - p.quota_heat_coeff))
    return expr


def net_emission_bound(model: ParkModel) -> float:
    """Bound on |actual - quota| over every dispatch the ratings allow."""
    p, dt, T = model.carbon, model.grid.step, model.grid.periods
    per_period = (abs(p.grid_emission_factor - p.quota_elec_coeff) * model.grid_import_limit
                  + abs(p.gas_emission_factor / model.gt.eta_e - p.quota_elec_coeff
                        - p.quota_heat_coeff * model.gt.heat_ratio) * model.gt.rated_electric
                  + abs(p.gas_emission_factor / model.gb.eta - p.quota_heat_coeff) * model.gb.rated_heat)
    return per_period * dt * T + 1.0


def assemble(model: ParkModel, scenario: ScenarioConfig) -> MilpProblem:
    """Build the day-ahead scheduling MILP for one scenario.

    The returned problem carries a :class:`Layout` in ``problem.layout``.
    """
    if scenario.enable_carbon_trading and not model.carbon_enabled:
        raise BuildError("carbon trading requested but disabled in the configuration")
    T, dt = model.grid.periods, model.grid.step
    prob = MilpProblem("pies")
    buy_price, sell_price = model.tariff.buy_price, model.tariff.sell_price

    buy = prob.add_vars("grid.buy", T, upper=model.grid_import_limit)
    sell = prob.add_vars("grid.sell", T, upper=model.grid_export_limit)
    for t in range(T):
        prob.add_cost(buy[t], buy_price[t] * dt)
        prob.add_cost(sell[t], -sell_price[t] * dt)

    ren = {}
    for r in model.renewables:
        idx = []
        for t in range(T):
            lower = 0.0 if r.curtailable else r.predicted[t]
            idx.append(prob.add_var(f"ren[{r.name}][{t}]", lower, r.predicted[t], cost=r.op_cost * dt))
        ren[r.name] = idx

    gt_cost = (model.gt.op_cost + model.gt.gas_price / model.gt.eta_e) * dt
    gb_cost = (model.gb.op_cost + model.gb.gas_price / model.gb.eta) * dt
    gt = [prob.add_var(f"gt[{t}]", model.gt.min_electric, model.gt.rated_electric, cost=gt_cost)
          for t in range(T)]
    gb = [prob.add_var(f"gb[{t}]", 0.0, model.gb.rated_heat, cost=gb_cost) for t in range(T)]
    eh = prob.add_vars("eh.input", T, upper=model.eh.rated_electric)

    storages = {}
    for st in model.storages:
        tag = f"store[{st.name}]"
        ch = prob.add_vars(f"{tag}.charge", T, upper=st.max_charge)
        dis = prob.add_vars(f"{tag}.discharge", T, upper=st.max_discharge)
        for t in range(T):
            prob.add_cost(ch[t], st.depreciation_cost * dt)
            prob.add_cost(dis[t], st.depreciation_cost * dt)
        soc = [prob.add_var(f"{tag}.soc[{t}]", st.soc_min, st.soc_max) for t in range(T + 1)]
        # SOC(0) is the initial state and the horizon closes back on it.
        for j in (soc[0], soc[T]):
            prob.variables[j].lower = prob.variables[j].upper = st.soc_init
        cflag = prob.add_vars(f"{tag}.charging", T, binary=True)
        dflag = prob.add_vars(f"{tag}.discharging", T, binary=True)
        cstart = prob.add_vars(f"{tag}.charge_start", T, upper=1.0)
        dstart = prob.add_vars(f"{tag}.discharge_start", T, upper=1.0)
        for t in range(T):
            prob.add_constraint({soc[t + 1]: st.capacity, soc[t]: -st.capacity,
                                 ch[t]: -st.eta_c * dt, dis[t]: dt / st.eta_d}, EQ, 0.0, f"{tag}.soc[{t}]")
            prob.add_constraint({ch[t]: 1.0, cflag[t]: -st.max_charge}, LE, 0.0, f"{tag}.ch_cap[{t}]")
            prob.add_constraint({dis[t]: 1.0, dflag[t]: -st.max_discharge}, LE, 0.0, f"{tag}.dis_cap[{t}]")
            prob.add_constraint({cflag[t]: 1.0, dflag[t]: 1.0}, LE, 1.0, f"{tag}.exclusive[{t}]")
            for kind, start, flag in (("charge", cstart, cflag), ("discharge", dstart, dflag)):
                row = {start[t]: 1.0, flag[t]: -1.0}
                if t > 0:
                    row[flag[t - 1]] = 1.0
                prob.add_constraint(row, GE, 0.0, f"{tag}.{kind}_start[{t}]")
        prob.add_constraint({j: 1.0 for j in cstart + dstart}, LE, float(st.max_cycle_events),
                            f"{tag}.cycles")
        storages[st.medium] = StorageVars(ch, dis, soc, cflag, dflag, cstart, dstart)

    frags = fl.build_flex(model.flex, prob, T, dt, basic=scenario.enable_basic_flex,
                          substitution=scenario.enable_substitution,
                          kappa_default=model.kappa_default)
    comp = fl.compensation_expr(frags)
    for j, a in comp.coeffs.items():
        prob.add_cost(j, a)
    prob.constant += comp.constant

    es, hs = storages["electric"], storages["heat"]
    erows, hrows = [], []
    for t in range(T):
        row = {buy[t]: 1.0, sell[t]: -1.0, gt[t]: 1.0, eh[t]: -1.0,
               es.discharge[t]: 1.0, es.charge[t]: -1.0}
        for idx in ren.values():
            row[idx[t]] = 1.0
        rhs = model.baseline.electric[t]
        for frag in frags:
            for j, a in frag.electric[t].coeffs.items():
                row[j] = row.get(j, 0.0) - a
            rhs += frag.electric[t].constant
        erows.append(prob.add_constraint(row, EQ, rhs, f"balance.electric[{t}]"))

        row = {gt[t]: model.gt.heat_ratio, gb[t]: 1.0, eh[t]: model.eh.cop,
               hs.discharge[t]: 1.0, hs.charge[t]: -1.0}
        rhs = model.baseline.heat[t]
        for frag in frags:
            for j, a in frag.heat[t].coeffs.items():
                row[j] = row.get(j, 0.0) - a
            rhs += frag.heat[t].constant
        hrows.append(prob.add_constraint(row, EQ, rhs, f"balance.heat[{t}]"))

    lay = Layout(model, scenario, buy, sell, ren, gt, gb, eh, storages, frags, erows, hrows)
    if scenario.enable_carbon_trading:
        lay.net_bound = net_emission_bound(model)
        lay.ladder = linearize_ladder(model.carbon, lay.net_bound, prob)
        tie_net(lay.ladder, _net_emission_expr(model, lay), prob)
    prob.layout = lay
    return prob


def count_formula(model: ParkModel, scenario: ScenarioConfig) -> Dict[str, int]:
    """Expected binary / continuous variable counts, derived from the assembly rules."""
    T = model.grid.periods
    binaries = 2 * T * len(model.storages)
    continuous = 2 * T + T * len(model.renewables) + 3 * T
    continuous += sum(2 * T + (T + 1) + 2 * T for _ in model.storages)
    if scenario.enable_basic_flex:
        for ld in model.flex.shiftable:
            binaries += len([s for s in ld.candidate_starts() if s + ld.duration <= T])
        for ld in model.flex.transferable:
            w = ld.window[1] - ld.window[0] + 1
            if ld.contiguous:
                binaries += w - ld.run_periods + 1
                continuous += 2 * w
            else:
                binaries += w
                continuous += w
            binaries += 1  # deviation flag
        for ld in model.flex.curtailable:
            w = ld.window[1] - ld.window[0] + 1
            binaries += w
            continuous += w
    if scenario.enable_substitution:
        for ld in model.flex.substitutable:
            w = ld.window[1] - ld.window[0] + 1
            binaries += w * len(ld.directions)
            continuous += w * len(ld.directions)
    if scenario.enable_carbon_trading:
        continuous += (1 if model.carbon.growth == 0 else model.carbon.tiers) + 1
    return {"binaries": binaries, "continuous": continuous}


# -- schedules -------------------------------------------------------------------


@dataclass
class StorageTrace:
    charge: np.ndarray
    discharge: np.ndarray
    soc: np.ndarray
    charge_flag: np.ndarray
    discharge_flag: np.ndarray


@dataclass
class CostBreakdown:
    f_net: float = 0.0
    f_dg: float = 0.0
    f_mt: float = 0.0
    f_gb: float = 0.0
    f_bat: float = 0.0
    f_hst: float = 0.0
    f_l: float = 0.0
    f_carbon: float = 0.0

    @property
    def total(self) -> float:
        return (self.f_net + self.f_dg + self.f_mt + self.f_gb + self.f_bat + self.f_hst
                + self.f_l + self.f_carbon)

    def to_dict(self) -> dict:
        return {**asdict(self), "total": self.total}


@dataclass
class Schedule:
    step: float
    grid_buy: np.ndarray
    grid_sell: np.ndarray
    renewables: Dict[str, np.ndarray]
    renewable_forecast: Dict[str, np.ndarray]
    gt_electric: np.ndarray
    gt_heat: np.ndarray
    gb_heat: np.ndarray
    eh_input: np.ndarray
    eh_output: np.ndarray
    storages: Dict[str, StorageTrace]
    baseline_electric: np.ndarray
    baseline_heat: np.ndarray
    electric_load: np.ndarray
    heat_load: np.ndarray
    decisions: fl.FlexDecisionSet
    costs: CostBreakdown = field(default_factory=CostBreakdown)
    emissions: Optional[EmissionLedger] = None
    emission_per_period: Optional[np.ndarray] = None
    objective: float = float("nan")
    status: str = ""

    @property
    def periods(self) -> int:
        return len(self.grid_buy)

    @property
    def net_exchange(self) -> np.ndarray:
        return self.grid_buy - self.grid_sell

    def renewable_of_kind(self, model: ParkModel, kind: str) -> np.ndarray:
        out = np.zeros(self.periods)
        for r in model.renewables:
            if r.kind == kind:
                out += self.renewables[r.name]
        return out


def _clean(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    a = np.where(np.abs(a) < 1e-11, 0.0, a)
    return a + 0.0  # drop negative zeros


def recompute_costs(sched: Schedule, model: ParkModel, scenario: ScenarioConfig) -> CostBreakdown:
    """Cost components from dispatch values and tariffs, independent of the MILP."""
    dt = model.grid.step
    buy_p = np.asarray(model.tariff.buy_price)
    sell_p = np.asarray(model.tariff.sell_price)
    c = CostBreakdown()
    c.f_net = float(np.sum(buy_p * sched.grid_buy - sell_p * sched.grid_sell) * dt)
    c.f_dg = float(sum(r.op_cost * np.sum(sched.renewables[r.name]) for r in model.renewables) * dt)
    c.f_mt = float(np.sum(sched.gt_electric) * dt * (model.gt.op_cost + model.gt.gas_price / model.gt.eta_e))
    c.f_gb = float(np.sum(sched.gb_heat) * dt * (model.gb.op_cost + model.gb.gas_price / model.gb.eta))
    for st in model.storages:
        tr = sched.storages[st.medium]
        val = st.depreciation_cost * float(np.sum(tr.charge + tr.discharge)) * dt
        if st.medium == "electric":
            c.f_bat = val
        else:
            c.f_hst = val
    c.f_l = fl.compensation_cost(model.flex, sched.decisions, dt)
    if scenario.enable_carbon_trading and sched.emissions is not None:
        c.f_carbon = ladder_cost(sched.emissions.net, model.carbon)
    return c


def extract_schedule(solution: Solution, problem: MilpProblem, audit: bool = True) -> Schedule:
    """Map solver values into a :class:`Schedule` and run the double-entry audit."""
    if not solution.ok or solution.values is None:
        raise ValueError(f"cannot extract a schedule from a {solution.status} solution")
    lay: Layout = problem.layout
    model, scenario = lay.model, lay.scenario
    x = solution.values
    T, dt = model.grid.periods, model.grid.step
    take = lambda idx: _clean([x[j] for j in idx])

    stores = {}
    for medium, sv in lay.storages.items():
        stores[medium] = StorageTrace(take(sv.charge), take(sv.discharge), take(sv.soc),
                                      np.round(take(sv.charge_flag)), np.round(take(sv.discharge_flag)))
    decisions = fl.extract_decisions(lay.fragments, x, T)
    adj_e, adj_h = fl.load_adjustments(model.flex, decisions, T, dt)
    gt_e = take(lay.gt)
    eh_in = take(lay.eh)
    sched = Schedule(
        step=dt,
        grid_buy=take(lay.buy),
        grid_sell=take(lay.sell),
        renewables={n: take(idx) for n, idx in lay.renewables.items()},
        renewable_forecast={r.name: np.asarray(r.predicted, dtype=float) for r in model.renewables},
        gt_electric=gt_e,
        gt_heat=_clean(gt_e * model.gt.heat_ratio),
        gb_heat=take(lay.gb),
        eh_input=eh_in,
        eh_output=_clean(eh_in * model.eh.cop),
        storages=stores,
        baseline_electric=np.asarray(model.baseline.electric, dtype=float),
        baseline_heat=np.asarray(model.baseline.heat, dtype=float),
        electric_load=_clean(np.asarray(model.baseline.electric) + adj_e),
        heat_load=_clean(np.asarray(model.baseline.heat) + adj_h),
        decisions=decisions,
        objective=solution.objective,
        status=solution.status,
    )
    sched.emissions = actual_emission(sched, model.carbon, model.gt.eta_e, model.gb.eta)
    sched.emission_per_period = per_period_emission(sched, model.carbon, model.gt.eta_e, model.gb.eta)
    sched.costs = recompute_costs(sched, model, scenario)
    sched.emissions.trading_cost = sched.costs.f_carbon
    if audit and abs(sched.costs.total - solution.objective) > AUDIT_TOL:
        raise AuditError(f"recomputed cost {sched.costs.total:.6f} differs from solver objective "
                         f"{solution.objective:.6f}")
    return sched


def schedule_model(model: ParkModel, scenario: ScenarioConfig,
                   opts: Optional[SolveOptions] = None):
    """Assemble, solve and extract in one call. Returns (schedule, solution, problem)."""
    problem = assemble(model, scenario)
    sol = solve(problem, opts or SolveOptions(backend="highs"))
    sched = extract_schedule(sol, problem) if sol.ok else None
    return sched, sol, problem
