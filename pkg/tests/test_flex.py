import numpy as np
import pytest

from pies import flex as fl
from pies.errors import BuildError, ConfigError
from pies.milp import MilpProblem, SolveOptions, solve

T = 24


def shift_load(**kw):
    args = dict(name="s", medium="electric", baseline_start=10, profile=[10] * 4,
                window=(0, 20), comp_price=0.2)
    args.update(kw)
    return fl.ShiftableLoad(**args)


def test_shift_candidate_starts():
    ld = shift_load(profile=[10] * 3, window=(0, 21))
    ld.check_fits(T)
    assert len(ld.candidate_starts()) == 22
    with pytest.raises(ConfigError, match="horizon"):
        shift_load(window=(0, 21)).check_fits(T)


def test_shift_placement_and_cost():
    ld = shift_load()
    flex = fl.FlexLoadSet(shiftable=(ld,))
    same = fl.FlexDecisionSet(shiftable=[fl.ShiftDecision("s", 10, {})])
    e, h = fl.load_adjustments(flex, same, T, 1.0)
    assert not e.any() and not h.any()
    assert fl.compensation_cost(flex, same, 1.0) == 0.0

    moved = fl.FlexDecisionSet(shiftable=[fl.ShiftDecision("s", 3, {})])
    e, _ = fl.load_adjustments(flex, moved, T, 1.0)
    expect = np.zeros(T)
    expect[3:7] += 10
    expect[10:14] -= 10
    assert np.array_equal(e, expect)
    assert fl.compensation_cost(flex, moved, 1.0) == pytest.approx(8.0)


def _fix(problem, var, value):
    problem.variables[var].lower = problem.variables[var].upper = float(value)


def test_shift_fragment_matches_first_principles():
    ld = shift_load()
    prob = MilpProblem()
    frag = fl.shiftable_constraints(ld, prob, T, 1.0)
    _fix(prob, frag.vars["start"][3], 1)
    for e in frag.cost.coeffs:
        prob.add_cost(e, frag.cost.coeffs[e])
    sol = solve(prob, SolveOptions())
    adj = np.array([frag.electric[t].value(sol.values) for t in range(T)])
    assert adj[3] == 10 and adj[12] == -10 and adj.sum() == 0
    assert frag.cost.value(sol.values) == pytest.approx(8.0)


def test_shift_window_outside_horizon_is_build_error():
    ld = shift_load(window=(18, 22), baseline_start=22)
    with pytest.raises(BuildError):
        fl.shiftable_constraints(ld, MilpProblem(), T, 1.0)


def transfer(**kw):
    args = dict(name="tr", medium="electric", power_min=10.0, power_max=26.7, run_periods=6,
                window=(0, 23), total_energy=100.0, baseline_start=9, comp_price=0.3)
    args.update(kw)
    return fl.TransferableLoad(**args)


def _solve_fragment(builder, ld, objective=None, fixes=()):
    prob = MilpProblem()
    frag = builder(ld, prob, T, 1.0)
    for j, c in (objective or {}).items():
        prob.add_cost(j, c)
    for j, v in fixes:
        _fix(prob, j, v)
    return prob, frag, solve(prob, SolveOptions(rel_gap=0.0, abs_gap=1e-9))


def test_transfer_energy_and_run_length():
    ld = transfer()
    prob = MilpProblem()
    frag = fl.transferable_constraints(ld, prob, T, 1.0)
    # push the load to the evening by making late power cheap
    for t, j in frag.vars["power"].items():
        prob.add_cost(j, -t * 0.01)
    sol = solve(prob, SolveOptions(rel_gap=0.0, abs_gap=1e-9))
    power = np.array([sol.values[frag.vars["power"][t]] for t in range(T)])
    active = np.array([sol.values[frag.vars["active"][t]] for t in range(T)])
    assert power.sum() == pytest.approx(100.0)
    assert active.sum() == pytest.approx(6)
    on = np.flatnonzero(active > 0.5)
    assert on[-1] - on[0] == 5
    assert power[on].mean() == pytest.approx(100 / 6)
    assert np.all(power[on] >= 10 - 1e-9) and np.all(power[on] <= 26.7 + 1e-9)
    assert sol.values[frag.vars["deviated"]] == 1.0


def test_transfer_forced_and_degenerate():
    ld = transfer(window=(4, 9), baseline_start=4)
    _, frag, sol = _solve_fragment(fl.transferable_constraints, ld)
    assert all(sol.values[frag.vars["active"][t]] == pytest.approx(1.0) for t in range(4, 10))

    ld = transfer(power_min=12.0, power_max=12.0, total_energy=72.0)
    _, frag, sol = _solve_fragment(fl.transferable_constraints, ld)
    p = np.array([sol.values[j] for j in frag.vars["power"].values()])
    assert set(np.round(p[p > 1e-9], 9)) == {12.0}
    with pytest.raises(BuildError):
        fl.transferable_constraints(transfer(power_min=12.0, power_max=12.0, total_energy=70.0),
                                    MilpProblem(), T, 1.0)


def test_transfer_at_baseline_costs_nothing():
    ld = transfer()
    prob = MilpProblem()
    frag = fl.transferable_constraints(ld, prob, T, 1.0)
    for j, c in frag.cost.coeffs.items():
        prob.add_cost(j, c)
    sol = solve(prob, SolveOptions(rel_gap=0.0, abs_gap=1e-9))
    assert sol.objective == pytest.approx(0.0, abs=1e-9)
    dec = fl.extract_decisions([frag], sol.values, T)
    e, _ = fl.load_adjustments(fl.FlexLoadSet(transferable=(ld,)), dec, T, 1.0)
    assert np.allclose(e, 0.0, atol=1e-9)


def curtail(**kw):
    args = dict(name="cu", medium="electric", curtail_power=[5.0] * 7, min_duration=2,
                max_duration=5, max_events=8, window=(5, 11), comp_price=0.4)
    args.update(kw)
    return fl.CurtailableLoad(**args)


def test_curtail_examples():
    ld = curtail()
    flex = fl.FlexLoadSet(curtailable=(ld,))
    off = fl.FlexDecisionSet(curtailable=[fl.CurtailDecision("cu", np.zeros(T), np.zeros(T))])
    e, _ = fl.load_adjustments(flex, off, T, 1.0)
    assert not e.any() and fl.compensation_cost(flex, off, 1.0) == 0.0
    on = np.zeros(T)
    on[6:9] = 1
    starts = np.zeros(T)
    starts[6] = 1
    dec = fl.FlexDecisionSet(curtailable=[fl.CurtailDecision("cu", on, starts)])
    e, _ = fl.load_adjustments(flex, dec, T, 1.0)
    assert -e.sum() == pytest.approx(15.0)
    assert fl.compensation_cost(flex, dec, 1.0) == pytest.approx(6.0)


def _max_curtailment(ld):
    prob = MilpProblem()
    frag = fl.curtailable_constraints(ld, prob, T, 1.0)
    for j in frag.vars["on"].values():
        prob.add_cost(j, -1.0)
    sol = solve(prob, SolveOptions(rel_gap=0.0, abs_gap=1e-9))
    return np.array([sol.values[frag.vars["on"].get(t, 0)] if t in frag.vars["on"] else 0.0
                     for t in range(T)])


def _runs(flags):
    runs, cur = [], 0
    for f in list(flags) + [0]:
        if f > 0.5:
            cur += 1
        elif cur:
            runs.append(cur)
            cur = 0
    return runs


def test_curtail_run_lengths_and_events():
    assert _max_curtailment(curtail(max_events=0)).sum() == 0
    flags = _max_curtailment(curtail(max_events=1, max_duration=3))
    assert _runs(flags) == [3]
    flags = _max_curtailment(curtail(max_events=3, min_duration=2, max_duration=2))
    assert all(r == 2 for r in _runs(flags)) and len(_runs(flags)) <= 3
    with pytest.raises(BuildError):
        fl.curtailable_constraints(curtail(min_duration=8, max_duration=9), MilpProblem(), T, 1.0)


def test_curtail_rejects_short_power_vector():
    with pytest.raises(ConfigError, match="curtail_power"):
        curtail(curtail_power=[5.0] * 3)


def subst(**kw):
    args = dict(name="su", power_min=10.0, power_max=20.0, max_events=12, window=(7, 19),
                comp_price=0.3)
    args.update(kw)
    return fl.SubstitutableLoad(**args)


def test_substitution_examples():
    ld = subst(kappa=0.9)
    power = np.zeros(T)
    power[12] = 10.0
    flag = (power > 0).astype(float)
    dec = fl.FlexDecisionSet(substitutable=[fl.SubstDecision("su", 0.9, {fl.E2H: flag}, {fl.E2H: power})])
    e, h = fl.load_adjustments(fl.FlexLoadSet(substitutable=(ld,)), dec, T, 1.0)
    assert e[12] == -10.0 and h[12] == pytest.approx(9.0)
    assert fl.compensation_cost(fl.FlexLoadSet(substitutable=(ld,)), dec, 1.0) == pytest.approx(3.0)

    prob = MilpProblem()
    frag = fl.substitutable_constraints(ld, prob, T, 1.0)
    for j in frag.vars["on"][fl.E2H].values():
        prob.add_cost(j, -1.0)
    sol = solve(prob, SolveOptions())
    assert sum(sol.values[j] for j in frag.vars["on"][fl.E2H].values()) == pytest.approx(12)


def test_substitution_both_directions_exclusive():
    ld = subst(direction=fl.BOTH, kappa=1.0, max_events=20)
    prob = MilpProblem()
    frag = fl.substitutable_constraints(ld, prob, T, 1.0)
    for d in (fl.E2H, fl.H2E):
        for j in frag.vars["on"][d].values():
            prob.add_cost(j, -1.0)
    sol = solve(prob, SolveOptions())
    both = [sol.values[frag.vars["on"][fl.E2H][t]] + sol.values[frag.vars["on"][fl.H2E][t]]
            for t in range(7, 20)]
    assert max(both) <= 1.0 + 1e-9


def test_substitution_needs_kappa():
    with pytest.raises(BuildError, match="kappa"):
        fl.substitutable_constraints(subst(), MilpProblem(), T, 1.0)


def test_flex_set_round_trip_and_errors():
    flex = fl.FlexLoadSet(shiftable=(shift_load(),), transferable=(transfer(),),
                          curtailable=(curtail(),), substitutable=(subst(kappa=0.95),))
    assert fl.FlexLoadSet.from_dict(flex.to_dict()) == flex
    with pytest.raises(ConfigError, match="missing"):
        fl.FlexLoadSet.from_dict({"shiftable": [{"name": "x", "medium": "electric"}]})
    with pytest.raises(ConfigError, match="unknown"):
        fl.FlexLoadSet.from_dict({"curtailable": [dict(curtail().__dict__, colour=1)]})
    with pytest.raises(ConfigError, match="duplicate"):
        fl.FlexLoadSet(shiftable=(shift_load(), shift_load()))
    with pytest.raises(ConfigError, match="baseline_start"):
        shift_load(baseline_start=21)
