"""Independent feasibility checks on extracted schedules."""
from __future__ import annotations

from typing import List

import numpy as np

from pies import flex as fl

BALANCE_TOL = 1e-6
SOC_TOL = 1e-9
# kW quantities share the balance tolerance; solvers leave ~1e-8 kW residues
POWER_TOL = BALANCE_TOL
MAX_CYCLE_EVENTS = 8


def _runs(flags) -> List[tuple]:
    """(start, length) of every run of ones."""
    out, start = [], None
    for t, f in enumerate(list(flags) + [0]):
        if f > 0.5 and start is None:
            start = t
        elif f <= 0.5 and start is not None:
            out.append((start, t - start))
            start = None
    return out


def schedule_violations(sched, model) -> List[str]:
    """Every invariant a feasible schedule must satisfy; empty when all hold."""
    bad: List[str] = []
    T, dt = model.grid.periods, model.grid.step

    def need(cond, msg):
        if not cond:
            bad.append(msg)

    ren = sum(sched.renewables.values())
    es, hs = sched.storages["electric"], sched.storages["heat"]
    supply_e = sched.grid_buy - sched.grid_sell + sched.gt_electric + ren + es.discharge - es.charge
    demand_e = sched.electric_load + sched.eh_input
    need(np.max(np.abs(supply_e - demand_e)) <= BALANCE_TOL, "electric balance")
    supply_h = sched.gt_heat + sched.gb_heat + sched.eh_output + hs.discharge - hs.charge
    need(np.max(np.abs(supply_h - sched.heat_load)) <= BALANCE_TOL, "heat balance")

    for r in model.renewables:
        got = sched.renewables[r.name]
        need(np.all(got <= np.asarray(r.predicted) + POWER_TOL), f"{r.name} above forecast")
        need(np.all(got >= -POWER_TOL), f"{r.name} negative")
    need(np.all(sched.grid_buy <= model.grid_import_limit + POWER_TOL), "import limit")
    need(np.all(sched.grid_sell <= model.grid_export_limit + POWER_TOL), "export limit")
    need(np.all(sched.gt_electric <= model.gt.rated_electric + POWER_TOL), "gas turbine rating")
    need(np.all(sched.gb_heat <= model.gb.rated_heat + POWER_TOL), "gas boiler rating")
    need(np.all(sched.eh_input <= model.eh.rated_electric + POWER_TOL), "electric heater rating")

    for st in model.storages:
        tr = sched.storages[st.medium]
        tag = f"{st.medium} storage"
        step = tr.soc[1:] - tr.soc[:-1]
        expect = (st.eta_c * tr.charge - tr.discharge / st.eta_d) * dt / st.capacity
        need(np.max(np.abs(step - expect)) <= SOC_TOL, f"{tag} SOC recursion")
        need(np.all(tr.soc >= st.soc_min - SOC_TOL) and np.all(tr.soc <= st.soc_max + SOC_TOL),
             f"{tag} SOC bounds")
        need(abs(tr.soc[-1] - tr.soc[0]) <= SOC_TOL, f"{tag} SOC(T) != SOC(0)")
        need(abs(tr.soc[0] - st.soc_init) <= SOC_TOL, f"{tag} initial SOC")
        need(np.all(tr.charge_flag + tr.discharge_flag <= 1), f"{tag} charge/discharge overlap")
        need(np.all(tr.charge[tr.charge_flag == 0] <= POWER_TOL), f"{tag} charging while flag off")
        need(np.all(tr.discharge[tr.discharge_flag == 0] <= POWER_TOL), f"{tag} discharging while flag off")
        need(np.all(tr.charge <= st.max_charge + POWER_TOL) and np.all(tr.discharge <= st.max_discharge + POWER_TOL),
             f"{tag} power limits")
        events = len(_runs(tr.charge_flag)) + len(_runs(tr.discharge_flag))
        need(events <= min(st.max_cycle_events, MAX_CYCLE_EVENTS), f"{tag} {events} cycle events")

    bad += flex_violations(sched.decisions, model)
    return bad


def flex_violations(dec, model) -> List[str]:
    bad: List[str] = []
    T, dt = model.grid.periods, model.grid.step
    by_name = {ld.name: ld for ld in model.flex.all()}

    def need(cond, msg):
        if not cond:
            bad.append(msg)

    for d in dec.shiftable:
        ld = by_name[d.name]
        chosen = [s for s, v in d.indicators.items() if v > 0.5]
        need(len(chosen) == 1, f"{ld.name}: {len(chosen)} starts chosen")
        need(ld.window[0] <= d.start <= ld.window[1], f"{ld.name}: start outside window")
        need(d.start + ld.duration <= T, f"{ld.name}: block leaves the horizon")
    for d in dec.transferable:
        ld = by_name[d.name]
        w = np.zeros(T, dtype=bool)
        w[ld.window[0]:ld.window[1] + 1] = True
        need(abs(np.sum(d.power) * dt - ld.total_energy) <= 1e-6, f"{ld.name}: energy")
        need(np.all(d.power[~w] <= POWER_TOL) and np.all(d.active[~w] == 0), f"{ld.name}: outside window")
        on = d.active > 0.5
        need(np.all(d.power[on] >= ld.power_min - POWER_TOL) and np.all(d.power[on] <= ld.power_max + POWER_TOL),
             f"{ld.name}: power bounds")
        need(np.all(d.power[~on] <= POWER_TOL), f"{ld.name}: power while inactive")
        need(int(on.sum()) == ld.run_periods, f"{ld.name}: run length")
        if ld.contiguous:
            need(len(_runs(on)) == 1, f"{ld.name}: run not contiguous")
    for d in dec.curtailable:
        ld = by_name[d.name]
        runs = _runs(d.on)
        need(all(ld.window[0] <= s and s + n - 1 <= ld.window[1] for s, n in runs), f"{ld.name}: outside window")
        need(all(ld.min_duration <= n <= ld.max_duration for _, n in runs), f"{ld.name}: run length")
        need(len(runs) <= ld.max_events, f"{ld.name}: {len(runs)} events")
    for d in dec.substitutable:
        ld = by_name[d.name]
        total_on = 0
        for direction, on in d.on.items():
            p = d.power[direction]
            idx = on > 0.5
            need(np.all(p[idx] >= ld.power_min - POWER_TOL) and np.all(p[idx] <= ld.power_max + POWER_TOL),
                 f"{ld.name}: power bounds")
            need(np.all(p[~idx] <= POWER_TOL), f"{ld.name}: power while off")
            outside = np.ones(T, dtype=bool)
            outside[ld.window[0]:ld.window[1] + 1] = False
            need(not np.any(idx & outside), f"{ld.name}: outside window")
            total_on += int(idx.sum())
        need(total_on <= ld.max_events, f"{ld.name}: {total_on} events")
        if len(d.on) == 2:
            need(np.all(d.on[fl.E2H] + d.on[fl.H2E] <= 1), f"{ld.name}: both directions at once")
    return bad
