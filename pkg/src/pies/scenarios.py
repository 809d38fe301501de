"""Scenario runs, metrics and the files behind the comparison tables."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from .engine import Schedule, assemble, extract_schedule
from .errors import ConfigError
from .milp import SolveOptions, export_mps, solve
from .model import ParkModel, ScenarioConfig, load_model_file

SCENARIO_LABELS = {
    1: "no flexible loads, no carbon trading",
    2: "shiftable, transferable and curtailable loads",
    3: "scenario 2 plus substitutable loads",
    4: "scenario 3 plus ladder carbon trading",
}

COMPARISON_COLUMNS = ("scenario", "status", "total_cost", "emissions_kg", "heat_peak_valley_kw",
                      "electric_peak_valley_kw", "wind_curtailment_kwh")


def peak_valley(series: Sequence[float]) -> float:
    """Spread between the largest and smallest value of a load curve."""
    a = np.asarray(series, dtype=float)
    if a.size == 0:
        raise ValueError("peak_valley needs a nonempty series")
    return float(a.max() - a.min())


def wind_curtailment(schedule: Schedule, model: ParkModel) -> float:
    """Forecast wind energy that was not dispatched, in kWh."""
    total = 0.0
    for r in model.renewables:
        if r.kind == "wind":
            gap = schedule.renewable_forecast[r.name] - schedule.renewables[r.name]
            total += float(np.sum(gap)) * schedule.step
    return max(total, 0.0)


@dataclass
class ScenarioResult:
    number: int
    status: str
    total_cost: float = math.nan
    emissions: float = math.nan
    electric_peak_valley: float = math.nan
    heat_peak_valley: float = math.nan
    wind_curtailment: float = math.nan
    costs: Optional[dict] = None
    files: Dict[str, str] = field(default_factory=dict)
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status in ("optimal", "feasible") and not math.isnan(self.total_cost)

    def row(self) -> dict:
        return {"scenario": self.number, "status": self.status, "total_cost": self.total_cost,
                "emissions_kg": self.emissions, "heat_peak_valley_kw": self.heat_peak_valley,
                "electric_peak_valley_kw": self.electric_peak_valley,
                "wind_curtailment_kwh": self.wind_curtailment}


@dataclass
class RunReport:
    results: List[ScenarioResult] = field(default_factory=list)
    comparison_path: Optional[str] = None

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.results)

    def by_number(self, n: int) -> ScenarioResult:
        for r in self.results:
            if r.number == n:
                return r
        raise KeyError(n)


def parse_scenarios(text: str | Iterable[int] | None) -> List[int]:
    if text is None:
        return [1, 2, 3, 4]
    if isinstance(text, str):
        items = [s.strip() for s in text.split(",") if s.strip()]
        try:
            nums = [int(s) for s in items]
        except ValueError:
            raise ConfigError("scenario", f"expected a comma-separated list of 1-4, got {text!r}") from None
    else:
        nums = [int(n) for n in text]
    if not nums:
        raise ConfigError("scenario", "no scenarios selected")
    bad = [n for n in nums if n not in SCENARIO_LABELS]
    if bad:
        raise ConfigError("scenario", f"unknown scenario(s) {bad}; choose from 1, 2, 3, 4")
    return sorted(set(nums))


def summarize(number: int, schedule: Schedule, model: ParkModel) -> ScenarioResult:
    return ScenarioResult(
        number=number,
        status=schedule.status,
        total_cost=schedule.costs.total,
        emissions=schedule.emissions.actual,
        electric_peak_valley=peak_valley(schedule.electric_load),
        heat_peak_valley=peak_valley(schedule.heat_load),
        wind_curtailment=wind_curtailment(schedule, model),
        costs=schedule.costs.to_dict(),
    )


def run_scenarios(config_path, out_dir, scenarios=None, opts: Optional[SolveOptions] = None,
                  seed: Optional[int] = None, export: bool = False,
                  model: Optional[ParkModel] = None) -> RunReport:
    """Solve each requested scenario and write its files under ``out_dir``.

    A scenario that fails to produce a schedule is reported with its status
    and does not stop the others.
    """
    numbers = parse_scenarios(scenarios)
    if model is None:
        model = load_model_file(config_path, seed=seed)
    if 4 in numbers and not model.carbon_enabled:
        raise ConfigError("carbon.enabled",
                          "scenario 4 needs carbon trading but it is disabled in the config")
    opts = opts or SolveOptions(backend="highs")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    report = RunReport()
    for n in numbers:
        scen_dir = out / f"scenario_{n}"
        scen_dir.mkdir(exist_ok=True)
        problem = assemble(model, ScenarioConfig.numbered(n))
        files = {}
        if export:
            files["mps"] = str(export_mps(problem, scen_dir / "problem.mps"))
        sol = solve(problem, opts)
        if not sol.ok:
            report.results.append(ScenarioResult(n, sol.status, files=files,
                                                 message="solver returned no usable schedule"))
            continue
        sched = extract_schedule(sol, problem)
        result = summarize(n, sched, model)
        result.files = {**files, **emit_outputs(n, sched, model, sol, scen_dir)}
        report.results.append(result)

    rows = [metrics_from_files(out / f"scenario_{r.number}") if r.ok else r.row()
            for r in report.results]
    report.comparison_path = str(write_comparison(out / "comparison.csv", rows))
    return report


# -- files -------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    return repr(v + 0.0)


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_fmt(v) for v in r])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def schedule_columns(schedule: Schedule, model: ParkModel) -> Dict[str, np.ndarray]:
    """Per-period columns of ``schedule.csv`` in output order."""
    T, dt = schedule.periods, schedule.step
    cols: Dict[str, np.ndarray] = {
        "period": np.arange(T),
        "start_h": np.arange(T) * dt,
        "buy_price": np.asarray(model.tariff.buy_price, dtype=float),
        "sell_price": np.asarray(model.tariff.sell_price, dtype=float),
        "grid_buy": schedule.grid_buy,
        "grid_sell": schedule.grid_sell,
    }
    for r in model.renewables:
        cols[f"{r.kind}.{r.name}"] = schedule.renewables[r.name]
        cols[f"{r.kind}.{r.name}.forecast"] = schedule.renewable_forecast[r.name]
    cols.update({
        "gt_electric": schedule.gt_electric,
        "gt_heat": schedule.gt_heat,
        "gb_heat": schedule.gb_heat,
        "eh_input": schedule.eh_input,
        "eh_output": schedule.eh_output,
    })
    for st in model.storages:
        tr = schedule.storages[st.medium]
        key = f"{st.medium}_storage"
        cols[f"{key}.charge"] = tr.charge
        cols[f"{key}.discharge"] = tr.discharge
        cols[f"{key}.soc_start"] = tr.soc[:-1]
        cols[f"{key}.soc_end"] = tr.soc[1:]
        cols[f"{key}.charging"] = tr.charge_flag
        cols[f"{key}.discharging"] = tr.discharge_flag
    cols.update({
        "baseline_electric": schedule.baseline_electric,
        "electric_load": schedule.electric_load,
        "baseline_heat": schedule.baseline_heat,
        "heat_load": schedule.heat_load,
        "emission_kg": schedule.emission_per_period,
    })
    return cols


def flex_summary(schedule: Schedule) -> dict:
    d = schedule.decisions
    dt = schedule.step
    return {
        "shiftable": {s.name: {"start": int(s.start)} for s in d.shiftable},
        "transferable": {s.name: {"active_periods": [int(t) for t in np.flatnonzero(s.active > 0.5)],
                                  "energy_kwh": float(np.sum(s.power) * dt)}
                         for s in d.transferable},
        "curtailable": {s.name: {"curtailed_periods": [int(t) for t in np.flatnonzero(s.on > 0.5)],
                                 "events": int(round(float(np.sum(s.event_start))))}
                        for s in d.curtailable},
        "substitutable": {s.name: {k: {"periods": [int(t) for t in np.flatnonzero(v > 0.5)],
                                       "electric_kwh": float(np.sum(s.power[k]) * dt)}
                                   for k, v in s.on.items()}
                          for s in d.substitutable},
    }


def emit_outputs(number: int, schedule: Schedule, model: ParkModel, solution, scen_dir) -> Dict[str, str]:
    """Write ``schedule.csv``, ``costs.json`` and ``loads_before_after.csv``."""
    scen_dir = Path(scen_dir)
    cols = schedule_columns(schedule, model)
    rows = zip(*cols.values())
    sched_path = _write_csv(scen_dir / "schedule.csv", list(cols), rows)

    lb = {k: cols[k] for k in ("period", "start_h", "baseline_electric", "electric_load",
                                "baseline_heat", "heat_load")}
    lb_path = _write_csv(scen_dir / "loads_before_after.csv", list(lb), zip(*lb.values()))

    payload = {
        "scenario": number,
        "description": SCENARIO_LABELS[number],
        "status": solution.status,
        "objective": float(solution.objective),
        "step_h": schedule.step,
        "costs": schedule.costs.to_dict(),
        "emissions": schedule.emissions.to_dict(),
        "flex": flex_summary(schedule),
    }
    costs_path = scen_dir / "costs.json"
    try:
        costs_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {costs_path}: {exc.strerror or exc}") from exc
    return {"schedule": str(sched_path), "loads": str(lb_path), "costs": str(costs_path)}


def read_schedule_csv(path) -> Dict[str, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = [[float(v) for v in row] for row in reader]
    arr = np.array(data, dtype=float).reshape(len(data), len(header))
    return {h: arr[:, i] for i, h in enumerate(header)}


def metrics_from_files(scen_dir) -> dict:
    """Comparison metrics computed from a scenario's stored files alone."""
    scen_dir = Path(scen_dir)
    cols = read_schedule_csv(scen_dir / "schedule.csv")
    meta = json.loads((scen_dir / "costs.json").read_text(encoding="utf-8"))
    dt = float(meta["step_h"])
    curtail = 0.0
    for key in cols:
        if key.startswith("wind.") and key.endswith(".forecast"):
            curtail += float(np.sum(cols[key] - cols[key[: -len(".forecast")]])) * dt
    return {
        "scenario": int(meta["scenario"]),
        "status": meta["status"],
        "total_cost": float(meta["costs"]["total"]),
        "emissions_kg": float(np.sum(cols["emission_kg"])),
        "heat_peak_valley_kw": peak_valley(cols["heat_load"]),
        "electric_peak_valley_kw": peak_valley(cols["electric_load"]),
        "wind_curtailment_kwh": max(curtail, 0.0),
    }


def comparison_rows(out_dir, numbers: Optional[Iterable[int]] = None) -> List[dict]:
    out = Path(out_dir)
    if numbers is None:
        numbers = sorted(int(p.name.split("_")[1]) for p in out.glob("scenario_*")
                         if p.name.split("_")[1].isdigit())
    rows = []
    for n in numbers:
        d = out / f"scenario_{n}"
        if (d / "schedule.csv").exists() and (d / "costs.json").exists():
            rows.append(metrics_from_files(d))
        else:
            rows.append({c: math.nan for c in COMPARISON_COLUMNS} | {"scenario": n, "status": "missing"})
    return rows


def write_comparison(path, rows: List[dict]) -> Path:
    return _write_csv(Path(path), COMPARISON_COLUMNS, ([r[c] for c in COMPARISON_COLUMNS] for r in rows))


def compare(out_dir) -> List[dict]:
    """Re-render ``comparison.csv`` from the stored per-scenario files."""
    out = Path(out_dir)
    if not out.is_dir():
        raise FileNotFoundError(f"output directory {out} does not exist")
    rows = comparison_rows(out)
    if not rows:
        raise FileNotFoundError(f"no scenario_N directories under {out}")
    write_comparison(out / "comparison.csv", rows)
    return rows
