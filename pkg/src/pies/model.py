"""Park model: domain types, config loading and profile helpers."""
from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import yaml

from .carbon import LadderCarbonParams
from .errors import ConfigError, ConfigParseError, check
from .flex import FlexLoadSet

SCHEMA_VERSION = 1
BANDS = ("peak", "valley", "normal")
EXAMPLE_CONFIG = "example_park.yaml"


def _series(values, path: str, periods: Optional[int] = None) -> Tuple[float, ...]:
    try:
        out = tuple(float(v) for v in values)
    except (TypeError, ValueError):
        raise ConfigError(path, "expected a list of numbers") from None
    check(all(math.isfinite(v) for v in out), path, "values must be finite")
    if periods is not None:
        check(len(out) == periods, path, f"expected {periods} values, got {len(out)}")
    return out


@dataclass(frozen=True)
class TimeGrid:
    periods: int = 24
    step: float = 1.0

    def __post_init__(self):
        check(int(self.periods) == self.periods and self.periods >= 2, "grid.periods", "must be an integer >= 2")
        check(self.step > 0, "grid.step", "must be > 0")


@dataclass(frozen=True)
class Tariff:
    buy_price: Tuple[float, ...]
    sell_price: Tuple[float, ...]
    band_labels: Tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "buy_price", _series(self.buy_price, "tariff.buy_price"))
        n = len(self.buy_price)
        object.__setattr__(self, "sell_price", _series(self.sell_price, "tariff.sell_price", n))
        object.__setattr__(self, "band_labels", tuple(self.band_labels))
        check(len(self.band_labels) == n, "tariff.band_labels", f"expected {n} labels")
        for t, lab in enumerate(self.band_labels):
            check(lab in BANDS, f"tariff.band_labels[{t}]", f"unknown band {lab!r}")
        for t, (b, s) in enumerate(zip(self.buy_price, self.sell_price)):
            check(b >= 0 and s >= 0, f"tariff.buy_price[{t}]", "prices must be >= 0")
            check(b >= s, f"tariff.sell_price[{t}]",
                  f"arbitrage invariant violated: buy {b} < sell {s}")

    @classmethod
    def from_bands(cls, bands: Dict[str, Dict[str, float]], schedule: Sequence[str]) -> "Tariff":
        for t, lab in enumerate(schedule):
            check(lab in bands, f"tariff.schedule[{t}]", f"band {lab!r} has no prices")
        return cls(tuple(bands[b]["buy"] for b in schedule),
                   tuple(bands[b]["sell"] for b in schedule), tuple(schedule))


def tariff_at(tariff: Tariff, t: int) -> Tuple[float, float]:
    """(buy, sell) price for period ``t``."""
    if not 0 <= t < len(tariff.buy_price):
        raise IndexError(f"period {t} outside 0..{len(tariff.buy_price) - 1}")
    return tariff.buy_price[t], tariff.sell_price[t]


@dataclass(frozen=True)
class GasTurbineParams:
    rated_electric: float
    eta_e: float = 0.35
    eta_h: float = 0.45
    gas_price: float = 0.30
    op_cost: float = 0.0
    min_electric: float = 0.0

    def __post_init__(self):
        check(0 < self.eta_e <= 1, "gas_turbine.eta_e", "must be in (0, 1]")
        check(0 <= self.eta_h <= 1, "gas_turbine.eta_h", "must be in [0, 1]")
        check(self.eta_e + self.eta_h <= 1 + 1e-12, "gas_turbine.eta_h", "eta_e + eta_h must be <= 1")
        check(0 <= self.min_electric <= self.rated_electric, "gas_turbine.min_electric",
              "need 0 <= min_electric <= rated_electric")
        check(self.gas_price >= 0 and self.op_cost >= 0, "gas_turbine.gas_price", "costs must be >= 0")

    @property
    def heat_ratio(self) -> float:
        return self.eta_h / self.eta_e


@dataclass(frozen=True)
class GasBoilerParams:
    rated_heat: float
    eta: float = 0.90
    gas_price: float = 0.30
    op_cost: float = 0.0

    def __post_init__(self):
        check(0 < self.eta <= 1, "gas_boiler.eta", "must be in (0, 1]")
        check(self.rated_heat > 0, "gas_boiler.rated_heat", "must be > 0")
        check(self.gas_price >= 0 and self.op_cost >= 0, "gas_boiler.gas_price", "costs must be >= 0")


@dataclass(frozen=True)
class ElectricHeaterParams:
    rated_electric: float
    cop: float = 0.95

    def __post_init__(self):
        check(self.cop > 0, "electric_heater.cop", "must be > 0")
        check(self.rated_electric >= 0, "electric_heater.rated_electric", "must be >= 0")


@dataclass(frozen=True)
class RenewableProfile:
    name: str
    kind: str
    predicted: Tuple[float, ...]
    op_cost: float = 0.0
    curtailable: bool = True

    def __post_init__(self):
        p = f"renewables.{self.name}"
        check(self.kind in ("wind", "pv"), f"{p}.kind", f"unknown kind {self.kind!r}")
        object.__setattr__(self, "predicted", _series(self.predicted, f"{p}.predicted"))
        check(all(v >= 0 for v in self.predicted), f"{p}.predicted", "must be nonnegative")
        check(self.op_cost >= 0, f"{p}.op_cost", "must be >= 0")


@dataclass(frozen=True)
class StorageParams:
    name: str
    medium: str
    capacity: float
    max_charge: float
    max_discharge: float
    eta_c: float = 0.95
    eta_d: float = 0.95
    soc_min: float = 0.15
    soc_max: float = 0.95
    soc_init: float = 0.5
    max_cycle_events: int = 8
    depreciation_cost: float = 0.0

    def __post_init__(self):
        p = f"storages.{self.name}"
        check(self.medium in ("electric", "heat"), f"{p}.medium", f"unknown medium {self.medium!r}")
        check(self.capacity > 0, f"{p}.capacity", "must be > 0")
        check(0 <= self.soc_min < self.soc_max <= 1, f"{p}.soc_min",
              f"soc bounds need 0 <= soc_min < soc_max <= 1 (got {self.soc_min}, {self.soc_max})")
        check(self.soc_min <= self.soc_init <= self.soc_max, f"{p}.soc_init", "must lie in [soc_min, soc_max]")
        check(0 < self.eta_c <= 1 and 0 < self.eta_d <= 1, f"{p}.eta_c", "efficiencies must be in (0, 1]")
        check(self.max_charge > 0 and self.max_discharge > 0, f"{p}.max_charge", "power limits must be > 0")
        check(self.max_cycle_events >= 0, f"{p}.max_cycle_events", "must be >= 0")
        check(self.depreciation_cost >= 0, f"{p}.depreciation_cost", "must be >= 0")


@dataclass(frozen=True)
class BaselineLoads:
    electric: Tuple[float, ...]
    heat: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "electric", _series(self.electric, "loads.electric"))
        object.__setattr__(self, "heat", _series(self.heat, "loads.heat", len(self.electric)))
        check(all(v >= 0 for v in self.electric), "loads.electric", "must be nonnegative")
        check(all(v >= 0 for v in self.heat), "loads.heat", "must be nonnegative")


@dataclass(frozen=True)
class ScenarioConfig:
    enable_basic_flex: bool = False
    enable_substitution: bool = False
    enable_carbon_trading: bool = False

    def __post_init__(self):
        check(not self.enable_substitution or self.enable_basic_flex, "scenario.enable_substitution",
              "substitution requires the basic flexible loads")

    @classmethod
    def numbered(cls, number: int) -> "ScenarioConfig":
        """Scenarios 1-4: none, basic flex, + substitution, + carbon trading."""
        if number not in (1, 2, 3, 4):
            raise ValueError(f"unknown scenario {number}")
        return cls(number >= 2, number >= 3, number >= 4)


@dataclass(frozen=True)
class ParkModel:
    grid: TimeGrid
    tariff: Tariff
    gt: GasTurbineParams
    gb: GasBoilerParams
    eh: ElectricHeaterParams
    renewables: Tuple[RenewableProfile, ...]
    storages: Tuple[StorageParams, ...]
    baseline: BaselineLoads
    flex: FlexLoadSet = field(default_factory=FlexLoadSet)
    carbon: LadderCarbonParams = field(default_factory=LadderCarbonParams)
    grid_import_limit: float = 500.0
    grid_export_limit: float = 500.0
    carbon_enabled: bool = True
    profile_seed: Optional[int] = field(default=None, compare=False)

    def __post_init__(self):
        T = self.grid.periods
        check(len(self.tariff.buy_price) == T, "tariff", f"expected {T} periods")
        check(len(self.baseline.electric) == T, "loads.electric", f"expected {T} values")
        for r in self.renewables:
            check(len(r.predicted) == T, f"renewables.{r.name}.predicted", f"expected {T} values")
        media = sorted(s.medium for s in self.storages)
        check(media == ["electric", "heat"], "storages", "need exactly one electric and one heat storage")
        names = [r.name for r in self.renewables]
        check(len(set(names)) == len(names), "renewables", "names must be unique")
        check(self.grid_import_limit >= 0 and self.grid_export_limit >= 0, "grid_limits",
              "limits must be >= 0")
        self.flex.check_fits(T, self.grid.step)
        for ld in self.flex.curtailable:
            base = self.baseline.electric if ld.medium == "electric" else self.baseline.heat
            for t in range(ld.window[0], ld.window[1] + 1):
                check(ld.power_at(t) <= base[t] + 1e-9, f"flex.curtailable.{ld.name}.curtail_power",
                      f"period {t}: curtail power exceeds baseline load")

    def storage(self, medium: str) -> StorageParams:
        return next(s for s in self.storages if s.medium == medium)

    @property
    def kappa_default(self) -> float:
        return self.eh.cop


# -- synthetic profiles -----------------------------------------------------


def synth_profiles(seed: int, grid: TimeGrid):
    """Deterministic stand-in load and renewable forecasts.

    Electric load peaks around midday and in the evening, heat load is
    higher at night, wind blows harder at night and PV is zero until 09:00
    and after sunset. Returns ``(BaselineLoads, wind, pv)``.
    """
    rng = np.random.default_rng(seed)
    T = grid.periods
    hours = (np.arange(T) + 0.5) * grid.step * 24.0 / (T * grid.step)

    def bump(center, width):
        return np.exp(-0.5 * ((hours - center) / width) ** 2)

    elec = 264 + 176 * bump(12.5, 1.6) + 240 * bump(19.5, 1.5) + 56 * bump(9.0, 1.5)
    heat = 215 + 70 * np.cos((hours - 2.0) * 2 * np.pi / 24) + 25 * bump(18.5, 2.0)
    wind = 135 + 75 * np.cos((hours - 2.5) * 2 * np.pi / 24)
    pv = np.where((hours > 9.0) & (hours < 18.0), 160 * np.sin(np.pi * (hours - 9.0) / 9.0), 0.0)

    elec *= 1 + 0.03 * rng.standard_normal(T)
    heat *= 1 + 0.03 * rng.standard_normal(T)
    wind *= 1 + 0.08 * rng.standard_normal(T)
    pv *= 1 + 0.05 * rng.standard_normal(T)

    clean = lambda a: tuple(float(v) for v in np.round(np.maximum(a, 0.0), 3))
    return BaselineLoads(clean(elec), clean(heat)), clean(wind), clean(pv)


# -- config I/O -----------------------------------------------------------------


def _section(data: dict, key: str, required: bool = True) -> dict:
    if key not in data:
        if required:
            raise ConfigError(key, "required section missing")
        return {}
    sec = data[key]
    if not isinstance(sec, dict):
        raise ConfigError(key, "section must be a mapping")
    return sec


def _build(typ, raw: dict, path: str, **extra):
    names = {f.name for f in fields(typ)}
    unknown = set(raw) - names
    check(not unknown, path, f"unknown keys {sorted(unknown)}")
    try:
        return typ(**raw, **extra)
    except TypeError as exc:
        raise ConfigError(path, str(exc)) from None


def model_from_dict(data: dict, seed: Optional[int] = None) -> ParkModel:
    """Build and validate a :class:`ParkModel` from parsed config data.

    ``seed`` overrides ``profiles.seed`` for synthetic profiles.
    """
    if not isinstance(data, dict):
        raise ConfigParseError("<root>", "config must be a mapping")
    version = data.get("schema_version")
    check(version == SCHEMA_VERSION, "schema_version", f"expected {SCHEMA_VERSION}, got {version!r}")
    grid = _build(TimeGrid, _section(data, "grid", required=False), "grid")

    tsec = _section(data, "tariff")
    if "bands" in tsec:
        tariff = Tariff.from_bands(tsec["bands"], tsec.get("schedule") or [])
    else:
        tariff = _build(Tariff, tsec, "tariff")

    profiles = _section(data, "profiles", required=False)
    if seed is None:
        seed = profiles.get("seed")
    synth = None
    if profiles.get("source") == "synthetic":
        check(seed is not None, "profiles.seed", "synthetic profiles need a seed")
        synth = synth_profiles(int(seed), grid)
    elif profiles:
        check(profiles.get("source") == "inline", "profiles.source", "must be 'synthetic' or 'inline'")
        seed = None

    lsec = _section(data, "loads", required=synth is None)
    if lsec:
        baseline = _build(BaselineLoads, lsec, "loads")
    else:
        baseline = synth[0]

    renewables = []
    for i, raw in enumerate(data.get("renewables") or []):
        raw = dict(raw)
        raw.setdefault("name", raw.get("kind", f"ren{i}"))
        if "predicted" not in raw:
            check(synth is not None, f"renewables[{i}].predicted", "required without synthetic profiles")
            raw["predicted"] = synth[1] if raw.get("kind") == "wind" else synth[2]
        renewables.append(_build(RenewableProfile, raw, f"renewables[{i}]"))

    storages = []
    for i, raw in enumerate(data.get("storages") or []):
        raw = dict(raw)
        raw.setdefault("name", raw.get("medium", f"storage{i}"))
        storages.append(_build(StorageParams, raw, f"storages[{i}]"))

    fsec = dict(_section(data, "flex", required=False))
    curtail = []
    for i, raw in enumerate(fsec.get("curtailable") or []):
        raw = dict(raw)
        if "curtail_fraction" in raw:
            frac = float(raw.pop("curtail_fraction"))
            check(0 <= frac <= 1, f"flex.curtailable[{i}].curtail_fraction", "must be in [0, 1]")
            base = baseline.electric if raw.get("medium") == "electric" else baseline.heat
            w0, w1 = raw["window"]
            raw["curtail_power"] = [round(frac * base[t], 6) for t in range(w0, min(w1 + 1, len(base)))]
        curtail.append(raw)
    if curtail:
        fsec["curtailable"] = curtail
    flex = FlexLoadSet.from_dict(fsec)

    csec = dict(_section(data, "carbon", required=False))
    carbon_enabled = bool(csec.pop("enabled", True))
    carbon = _build(LadderCarbonParams, csec, "carbon")
    limits = _section(data, "grid_limits", required=False)

    return ParkModel(
        grid=grid,
        tariff=tariff,
        gt=_build(GasTurbineParams, _section(data, "gas_turbine"), "gas_turbine"),
        gb=_build(GasBoilerParams, _section(data, "gas_boiler"), "gas_boiler"),
        eh=_build(ElectricHeaterParams, _section(data, "electric_heater"), "electric_heater"),
        renewables=tuple(renewables),
        storages=tuple(storages),
        baseline=baseline,
        flex=flex,
        carbon=carbon,
        grid_import_limit=float(limits.get("import", 500.0)),
        grid_export_limit=float(limits.get("export", 500.0)),
        carbon_enabled=carbon_enabled,
        profile_seed=None if seed is None or synth is None else int(seed),
    )


def load_model(config_text: str, seed: Optional[int] = None) -> ParkModel:
    """Parse YAML config text into a validated :class:`ParkModel`."""
    try:
        data = yaml.safe_load(config_text)
    except yaml.YAMLError as exc:
        raise ConfigParseError("<text>", f"malformed config: {exc}") from None
    return model_from_dict(data, seed)


def load_model_file(path, seed: Optional[int] = None) -> ParkModel:
    with open(os.fspath(path), encoding="utf-8") as fh:
        return load_model(fh.read(), seed)


def example_config_text() -> str:
    return resources.files("pies.data").joinpath(EXAMPLE_CONFIG).read_text(encoding="utf-8")


def example_model(seed: Optional[int] = None) -> ParkModel:
    return load_model(example_config_text(), seed)


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def model_to_dict(model: ParkModel) -> dict:
    """Fully explicit config data; profiles are written inline."""
    return _plain({
        "schema_version": SCHEMA_VERSION,
        "grid": asdict(model.grid),
        "tariff": asdict(model.tariff),
        "grid_limits": {"import": model.grid_import_limit, "export": model.grid_export_limit},
        "gas_turbine": asdict(model.gt),
        "gas_boiler": asdict(model.gb),
        "electric_heater": asdict(model.eh),
        "renewables": [asdict(r) for r in model.renewables],
        "storages": [asdict(s) for s in model.storages],
        "profiles": {"source": "inline"},
        "loads": asdict(model.baseline),
        "flex": model.flex.to_dict(),
        "carbon": {"enabled": model.carbon_enabled, **model.carbon.to_dict()},
    })


def dump_model(model: ParkModel) -> str:
    return yaml.safe_dump(model_to_dict(model), sort_keys=False, allow_unicode=True)


def with_carbon(model: ParkModel, **changes) -> ParkModel:
    return replace(model, carbon=replace(model.carbon, **changes))
