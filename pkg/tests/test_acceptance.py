"""Acceptance criteria for the scheduling package.

Each test records one PASS/FAIL line; the lines are repeated in the pytest
terminal summary under "acceptance criteria".
"""
import filecmp
import shutil
import subprocess
import sys
import time

import numpy as np
import pytest

from instances import reduced_instance, small_park_data
from invariants import schedule_violations
from pies.carbon import LadderCarbonParams, ladder_cost, linearize_ladder, tie_net
from pies.engine import AUDIT_TOL, assemble, extract_schedule, schedule_model
from pies.milp import LinExpr, MilpProblem, SolveOptions, brute_force, export_mps, read_mps, solve
from pies.model import ScenarioConfig, example_config_text, model_from_dict, with_carbon
from pies.scenarios import peak_valley, run_scenarios, wind_curtailment

EXACT = SolveOptions(rel_gap=0.0, abs_gap=1e-9, backend="highs")


@pytest.fixture(scope="module")
def exact_runs(park):
    """Scenarios 1-4 of the shipped config solved to a zero relative gap."""
    return {n: schedule_model(park, ScenarioConfig.numbered(n), EXACT) for n in (1, 2, 3, 4)}


def test_1_oracle_equivalence(criterion):
    with criterion(1, "solve() equals brute_force() on 100 reduced instances within 1e-6") as c:
        start = time.monotonic()
        worst, largest = 0.0, 0
        opts = SolveOptions(rel_gap=0.0, abs_gap=1e-9, backend="bnb", time_limit=60.0)
        for seed in range(100):
            problem, _, _ = reduced_instance(seed)
            free = sum(problem.variables[j].lower < problem.variables[j].upper
                       for j in problem.binary_indices)
            largest = max(largest, free)
            got, ref = solve(problem, opts), brute_force(problem)
            assert got.status == ref.status == "optimal", f"seed {seed}: {got.status} vs {ref.status}"
            worst = max(worst, abs(got.objective - ref.objective))
            assert worst <= 1e-6, f"seed {seed}: {got.objective} vs {ref.objective}"
        elapsed = time.monotonic() - start
        c.detail = f"max |diff| {worst:.2e}, <= {largest} free binaries, {elapsed:.0f} s"
        assert largest <= 12
        assert elapsed <= 300.0


def test_2_ladder_exactness(criterion):
    with criterion(2, "LP-minimised ladder fragment equals ladder_cost at 200 points within 1e-6") as c:
        rng = np.random.default_rng(2)
        bound = 5000.0
        cases = [LadderCarbonParams(), LadderCarbonParams(growth=0.0),
                 LadderCarbonParams(base_price=0.4, interval=300.0, growth=0.5, tiers=6),
                 LadderCarbonParams(allow_sale=False)]
        worst = 0.0
        for p in cases:
            for net in rng.uniform(-bound, bound, 50):
                prob = MilpProblem()
                frag = linearize_ladder(p, bound, prob)
                tie_net(frag, LinExpr({}, float(net)), prob)
                got = solve(prob, SolveOptions(rel_gap=0.0, abs_gap=1e-12)).objective
                worst = max(worst, abs(got - ladder_cost(float(net), p)))
        flat = LadderCarbonParams(growth=0.0)
        for net in np.linspace(-bound, bound, 101):
            net = float(net)
            expect = flat.base_price * net if flat.allow_sale or net > 0 else 0.0
            assert ladder_cost(net, flat) == expect
        c.detail = f"max |diff| {worst:.2e} over {50 * len(cases)} points"
        assert worst <= 1e-6


def test_3_feasibility_invariants(criterion, park, exact_runs):
    with criterion(3, "every extracted schedule satisfies the feasibility invariants") as c:
        checked = 0
        for n, (sched, _, _) in exact_runs.items():
            assert schedule_violations(sched, park) == [], f"shipped scenario {n}"
            checked += 1
        for seed in range(12):
            rng = np.random.default_rng(1000 + seed)
            model = model_from_dict(small_park_data(rng, int(rng.choice([6, 8, 12]))))
            for n in (1, 2, 3, 4):
                sched, sol, _ = schedule_model(model, ScenarioConfig.numbered(n), EXACT)
                assert sol.ok and schedule_violations(sched, model) == [], f"seed {seed} scenario {n}"
                checked += 1
        for seed in range(10):
            problem, _, _ = reduced_instance(seed)
            sol = solve(problem, SolveOptions(backend="bnb", rel_gap=0.0, abs_gap=1e-9))
            model = problem.layout.model
            assert schedule_violations(extract_schedule(sol, problem), model) == [], f"reduced {seed}"
            checked += 1
        c.detail = f"{checked} schedules"


def test_4_dominance(criterion, exact_runs):
    with criterion(4, "cost(S3) <= cost(S2) <= cost(S1)") as c:
        cost = {n: exact_runs[n][0].costs.total for n in (1, 2, 3)}
        c.detail = (f"S1 {cost[1]:.2f}, S2 {cost[2]:.2f}, S3 {cost[3]:.2f}, "
                    f"S1->S2 {100 * (cost[1] - cost[2]) / cost[1]:.1f}%")
        assert cost[3] <= cost[2] + 1e-6
        assert cost[2] <= cost[1] + 1e-6


def test_5_directional_checks(criterion, park, exact_runs):
    with criterion(5, "S4 cheapest, emissions fall S1->S4, electric peak-valley and wind curtailment drop") as c:
        s = {n: exact_runs[n][0] for n in (1, 2, 3, 4)}
        cost = [s[n].costs.total for n in (1, 2, 3, 4)]
        emis = [s[n].emissions.actual for n in (1, 2, 3, 4)]
        pv = [peak_valley(s[n].electric_load) for n in (1, 2)]
        wind = [wind_curtailment(s[n], park) for n in (1, 2)]
        c.detail = (f"cost {cost[3]:.2f} < {cost[2]:.2f}; emissions {', '.join(f'{e:.1f}' for e in emis)}; "
                    f"peak-valley {pv[0]:.1f} -> {pv[1]:.1f}; wind curtailed {wind[0]:.1f} -> {wind[1]:.1f}")
        assert cost[3] < cost[2]
        assert all(a > b for a, b in zip(emis, emis[1:]))
        assert pv[1] < pv[0]
        assert wind[0] >= wind[1]


def test_6_carbon_price_monotonicity(criterion, park, exact_runs):
    with criterion(6, "doubling the carbon base price does not increase emissions") as c:
        base = exact_runs[4][0].emissions.actual
        dear = with_carbon(park, base_price=2 * park.carbon.base_price)
        sched, sol, _ = schedule_model(dear, ScenarioConfig.numbered(4), EXACT)
        c.detail = f"{base:.2f} kg -> {sched.emissions.actual:.2f} kg"
        assert sol.ok
        assert sched.emissions.actual <= base + 1e-6


def test_7_double_entry_audit(criterion, park, exact_runs, scenario_runs):
    with criterion(7, "recomputed cost breakdown matches the solver objective within 1e-4") as c:
        worst = 0.0
        for runs in (exact_runs, scenario_runs):
            for sched, sol, _ in runs.values():
                worst = max(worst, abs(sched.costs.total - sol.objective))
        c.detail = f"max |diff| {worst:.2e}"
        assert worst <= AUDIT_TOL


def _cli(*args):
    exe = shutil.which("pies")
    cmd = [exe] if exe else [sys.executable, "-m", "pies.cli"]
    return subprocess.run(cmd + list(args), capture_output=True, text=True)


def _same_tree(a, b):
    cmp = filecmp.dircmp(a, b)
    if cmp.left_only or cmp.right_only or cmp.funny_files:
        return False
    _, mismatch, errors = filecmp.cmpfiles(a, b, cmp.common_files, shallow=False)
    if mismatch or errors:
        return False
    return all(_same_tree(a / d, b / d) for d in cmp.common_dirs)


def test_8_determinism_and_runtime(criterion, park, tmp_path):
    with criterion(8, "two `pies run` runs are byte-identical, each scenario <= 120 s, MPS round trip") as c:
        config = tmp_path / "park.yaml"
        config.write_text(example_config_text(), encoding="utf-8")
        outs = [tmp_path / "a", tmp_path / "b"]
        for out in outs:
            done = _cli("run", "--config", str(config), "--out", str(out), "--export-mps")
            assert done.returncode == 0, done.stderr
        assert _same_tree(*outs), "outputs differ between runs"

        times = []
        for n in (1, 2, 3, 4):
            t0 = time.monotonic()
            report = run_scenarios(config, tmp_path / "timed", [n])
            times.append(time.monotonic() - t0)
            assert report.ok
        assert max(times) <= 120.0

        for n in (1, 4):
            problem = assemble(park, ScenarioConfig.numbered(n))
            back = read_mps(export_mps(problem, tmp_path / f"s{n}.mps"))
            assert back.n_vars == problem.n_vars and back.n_constraints == problem.n_constraints
            a, b = solve(problem, EXACT), solve(back, EXACT)
            assert abs(a.objective - b.objective) <= 1e-6
        c.detail = "slowest scenario " + f"{max(times):.2f} s"
