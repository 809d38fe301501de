"""Ladder-type carbon trading: free quota, actual emission, tiered cost."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Dict, List

import numpy as np

from .errors import check
from .milp.problem import EQ, LinExpr, MilpProblem


@dataclass(frozen=True)
class LadderCarbonParams:
    """Emission factors, free-allowance coefficients and tier prices.

    Tier ``k`` (0-based) covers net emission ``[k*interval, (k+1)*interval)``
    at ``base_price * (1 + k*growth)``; the last tier is open-ended.
    """

    grid_emission_factor: float = 1.08
    gas_emission_factor: float = 0.20
    quota_elec_coeff: float = 0.70
    quota_heat_coeff: float = 0.10
    base_price: float = 0.25
    interval: float = 500.0
    growth: float = 0.25
    tiers: int = 4
    allow_sale: bool = True

    def __post_init__(self):
        for name in ("grid_emission_factor", "gas_emission_factor", "quota_elec_coeff",
                     "quota_heat_coeff", "base_price", "growth"):
            check(getattr(self, name) >= 0, f"carbon.{name}", "must be >= 0")
        check(self.interval > 0, "carbon.interval", "must be > 0")
        check(int(self.tiers) == self.tiers and self.tiers >= 1, "carbon.tiers", "must be an integer >= 1")

    def tier_prices(self) -> List[float]:
        return [self.base_price * (1.0 + k * self.growth) for k in range(self.tiers)]

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EmissionLedger:
    quota: float
    actual: float
    by_source: Dict[str, float] = field(default_factory=dict)
    trading_cost: float = 0.0

    @property
    def net(self) -> float:
        return self.actual - self.quota

    def to_dict(self) -> dict:
        return {"quota_kg": self.quota, "actual_kg": self.actual, "net_kg": self.net,
                "trading_cost": self.trading_cost, "by_source_kg": dict(self.by_source)}


def free_quota(schedule, p: LadderCarbonParams) -> float:
    """Allowance in kg for the energy a schedule supplies.

    ``schedule`` needs per-period ``grid_buy``, ``gt_electric``, ``gt_heat``,
    ``gb_heat`` arrays and a ``step`` in hours.
    """
    dt = schedule.step
    elec = np.sum(schedule.grid_buy) + np.sum(schedule.gt_electric)
    heat = np.sum(schedule.gb_heat) + np.sum(schedule.gt_heat)
    return float(p.quota_elec_coeff * elec * dt + p.quota_heat_coeff * heat * dt)


def per_period_emission(schedule, p: LadderCarbonParams, eta_gt: float, eta_gb: float) -> np.ndarray:
    dt = schedule.step
    grid = p.grid_emission_factor * np.asarray(schedule.grid_buy)
    fuel = np.asarray(schedule.gt_electric) / eta_gt + np.asarray(schedule.gb_heat) / eta_gb
    return (grid + p.gas_emission_factor * fuel) * dt


def actual_emission(schedule, p: LadderCarbonParams, eta_gt: float, eta_gb: float) -> EmissionLedger:
    """Emission ledger without trading cost. Exports earn no credit."""
    dt = schedule.step
    sources = {
        "grid": float(p.grid_emission_factor * np.sum(schedule.grid_buy) * dt),
        "gas_turbine": float(p.gas_emission_factor * np.sum(schedule.gt_electric) / eta_gt * dt),
        "gas_boiler": float(p.gas_emission_factor * np.sum(schedule.gb_heat) / eta_gb * dt),
    }
    return EmissionLedger(free_quota(schedule, p), float(sum(sources.values())), sources)


def ladder_cost(net: float, p: LadderCarbonParams) -> float:
    """Trading cost in currency for a net position ``net`` (kg, actual - quota)."""
    if net <= 0:
        return -p.base_price * (-net) if p.allow_sale else 0.0
    cost = 0.0
    for k, price in enumerate(p.tier_prices()):
        lo = k * p.interval
        hi = (k + 1) * p.interval if k < p.tiers - 1 else float("inf")
        if net <= lo:
            break
        cost += price * (min(net, hi) - lo)
    return cost


@dataclass
class LadderFragment:
    segments: List[int]
    sale: int
    net_row: int | None = None


def linearize_ladder(p: LadderCarbonParams, net_bound: float, problem: MilpProblem,
                     prefix: str = "carbon") -> LadderFragment:
    """Add tier-segment variables whose LP-minimal cost equals :func:`ladder_cost`.

    Segments carry ascending unit costs, so at any optimum they fill in order
    and no binaries are needed. The caller ties ``sum(segments) - sale`` to the
    net emission expression (see :func:`tie_net`).
    """
    if net_bound <= 0:
        raise ValueError("net_bound must be positive")
    prices = p.tier_prices()
    if p.growth == 0:
        prices = prices[:1]
    segments = []
    for k, price in enumerate(prices):
        last = k == len(prices) - 1
        upper = max(net_bound - k * p.interval, 0.0) if last else min(p.interval, net_bound)
        segments.append(problem.add_var(f"{prefix}.tier[{k}]", 0.0, upper, cost=price))
    sale_cost = -p.base_price if p.allow_sale else 0.0
    sale = problem.add_var(f"{prefix}.surplus", 0.0, net_bound, cost=sale_cost)
    return LadderFragment(segments, sale)


def tie_net(frag: LadderFragment, net: LinExpr, problem: MilpProblem, name: str = "carbon.net") -> int:
    row = {j: 1.0 for j in frag.segments}
    row[frag.sale] = -1.0
    for j, a in net.coeffs.items():
        row[j] = row.get(j, 0.0) - a
    frag.net_row = problem.add_constraint(row, EQ, net.constant, name)
    return frag.net_row


def fragment_cost(frag: LadderFragment, problem: MilpProblem, x) -> float:
    return float(sum(problem.objective.get(j, 0.0) * x[j] for j in (*frag.segments, frag.sale)))
