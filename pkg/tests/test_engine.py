from dataclasses import replace

import numpy as np
import pytest

from invariants import schedule_violations
from pies.carbon import fragment_cost
from pies.engine import AUDIT_TOL, assemble, count_formula, extract_schedule, schedule_model
from pies.errors import AuditError, BuildError
from pies.milp import Solution, SolveOptions, solve
from pies.model import ScenarioConfig, model_from_dict, model_to_dict

SCENARIOS = (1, 2, 3, 4)


@pytest.mark.parametrize("n", SCENARIOS)
def test_counts_match_assembly(park, n):
    scen = ScenarioConfig.numbered(n)
    prob = assemble(park, scen)
    counts = count_formula(park, scen)
    assert prob.n_binaries == counts["binaries"]
    assert prob.n_vars - prob.n_binaries == counts["continuous"]


def test_scenario_variable_families(park):
    names = lambda n: {v.name.split(".")[0].split("[")[0] for v in assemble(park, ScenarioConfig.numbered(n)).variables}
    s1, s2, s3, s4 = (names(n) for n in SCENARIOS)
    assert not s1 & {"shift", "transfer", "curtail", "subst", "carbon"}
    assert {"shift", "transfer", "curtail"} <= s2 and "subst" not in s2
    assert "subst" in s3 and "carbon" not in s3
    assert "carbon" in s4


@pytest.mark.parametrize("n", SCENARIOS)
def test_schedules_feasible(park, scenario_runs, n):
    sched, sol, _ = scenario_runs[n]
    assert sol.status == "optimal"
    assert schedule_violations(sched, park) == []


@pytest.mark.parametrize("n", SCENARIOS)
def test_audit(scenario_runs, n):
    sched, sol, _ = scenario_runs[n]
    assert abs(sched.costs.total - sol.objective) <= AUDIT_TOL
    assert sched.emissions.actual == pytest.approx(float(np.sum(sched.emission_per_period)))


def test_flex_untouched_without_flex(scenario_runs):
    sched, _, _ = scenario_runs[1]
    assert np.array_equal(sched.electric_load, sched.baseline_electric)
    assert np.array_equal(sched.heat_load, sched.baseline_heat)
    assert sched.costs.f_l == 0.0 and sched.costs.f_carbon == 0.0


def _idle_park(park):
    data = model_to_dict(park)
    T = park.grid.periods
    data["loads"] = {"electric": [0.0] * T, "heat": [0.0] * T}
    for r in data["renewables"]:
        r["predicted"] = [0.0] * T
    for s in data["storages"]:
        s["depreciation_cost"] = 0.0
    data["flex"] = {}
    data["tariff"] = {"buy_price": [0.5] * T, "sell_price": [0.4] * T, "band_labels": ["normal"] * T}
    return model_from_dict(data)


def test_idle_park_costs_nothing(park):
    idle = _idle_park(park)
    sched, sol, _ = schedule_model(idle, ScenarioConfig.numbered(1))
    assert sol.objective == pytest.approx(0.0, abs=1e-9)
    assert sched.costs.total == pytest.approx(0.0, abs=1e-9)


def test_extract_rejects_failed_solution(park):
    prob = assemble(park, ScenarioConfig.numbered(1))
    with pytest.raises(ValueError, match="infeasible"):
        extract_schedule(Solution("infeasible"), prob)


def test_audit_detects_tampered_objective(park):
    prob = assemble(park, ScenarioConfig.numbered(1))
    sol = solve(prob, SolveOptions(backend="highs"))
    sol.objective += 1.0
    with pytest.raises(AuditError):
        extract_schedule(sol, prob)


def test_carbon_disabled_rejects_scenario_4(park):
    off = replace(park, carbon_enabled=False)
    with pytest.raises(BuildError, match="carbon"):
        assemble(off, ScenarioConfig.numbered(4))
    assert assemble(off, ScenarioConfig.numbered(3)).n_vars > 0


def test_ladder_variables_match_ledger(scenario_runs, park):
    sched, sol, prob = scenario_runs[4]
    lad = prob.layout.ladder
    net = sum(sol.values[j] for j in lad.segments) - sol.values[lad.sale]
    assert net == pytest.approx(sched.emissions.net, abs=1e-6)
    assert fragment_cost(lad, prob, sol.values) == pytest.approx(sched.costs.f_carbon, abs=1e-6)


@pytest.mark.parametrize("n", SCENARIOS)
def test_highs_solutions_are_integral_and_feasible(scenario_runs, n):
    _, sol, prob = scenario_runs[n]
    b = prob.binary_indices
    assert np.array_equal(sol.values[b], np.round(sol.values[b]))
    assert prob.max_violation(sol.values) <= 1e-9
