"""Case files: one TOML document with [network], [ess], [thermal], [control]
and [sweep] sections.

Line and load tables may be given inline or as CSV files referenced by path
(relative to the case file):

    lines_file = "lines.csv"   # columns: from, to, r_ohm, x_ohm
    loads_file = "loads.csv"   # columns: bus, p_kw, q_kvar

Impedances are converted to per-unit on base_kv / base_mva, loads to MW and
MVAr, and voltage limits (given as p.u. magnitudes) to squared magnitudes.
Any omitted field takes its default from the published case-study table.
"""

from __future__ import annotations

import csv
import sys
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .control import Reduction
from .errors import CaseError
from .network import Bus, EssConfig, GridCase, Line, Tariffs
from .thermal import RackGeometry, ThermalParams

DEFAULT_SCALINGS = (0.90, 0.925, 0.95, 0.975, 1.0)
DEFAULT_WEIGHTS = tuple(round(0.05 * k, 10) for k in range(1, 21))


@dataclass(frozen=True)
class ControlSettings:
    weight: float = 0.25
    target_scale: float = 0.95
    target_mode: str = "ambient"
    reduction: Reduction = Reduction()

    def __post_init__(self):
        if not self.weight > 0:
            raise CaseError(f"control.weight must be > 0, got {self.weight!r}")
        if self.target_mode not in ("ambient", "raw"):
            raise CaseError(f"control.target_mode must be 'ambient' or 'raw', got {self.target_mode!r}")


@dataclass(frozen=True)
class SweepSpec:
    """Temperature-reference scalings s and policy weights c to enumerate."""

    target_scalings: tuple[float, ...] = DEFAULT_SCALINGS
    weights: tuple[float, ...] = DEFAULT_WEIGHTS
    reduction: Reduction = Reduction()
    target_mode: str = "ambient"

    def __post_init__(self):
        if not self.target_scalings or not self.weights:
            raise CaseError("sweep: scalings and weights must be non-empty")
        if any(s > 1 for s in self.target_scalings):
            raise CaseError("sweep.target_scalings must all be <= 1")
        if any(not c > 0 for c in self.weights):
            raise CaseError("sweep.weights must all be > 0")


@dataclass(frozen=True)
class MixedSpec:
    """Exhaustive (fan speed, current) grid for the unified formulation."""

    fan_grid: tuple[float, ...]
    current_grid: tuple[float, ...]
    temp_max: float = 318.0

    def __post_init__(self):
        if not self.fan_grid or not self.current_grid:
            raise CaseError("sweep.mixed: fan and current grids must be non-empty")
        if any(i < 0 for i in self.current_grid):
            raise CaseError("sweep.mixed: currents must be >= 0")


@dataclass(frozen=True)
class Case:
    grid: GridCase
    ess: EssConfig
    geometry: RackGeometry
    params: ThermalParams
    fan_speed: float
    current: float
    control: ControlSettings
    sweep: SweepSpec
    mixed: MixedSpec
    source: str | None = field(default=None, compare=False)

    @property
    def squared_current(self) -> float:
        return self.current**2


def _arange(start, stop, step, where):
    if not step > 0 or stop < start:
        raise CaseError(f"{where}: need step > 0 and stop >= start")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return tuple(round(start + k * step, 10) for k in range(count))


def _take(section: dict, name: str, known: set[str]):
    unknown = sorted(set(section) - known)
    if unknown:
        raise CaseError(f"[{name}]: unknown field(s) {', '.join(unknown)}")


def _number(section, key, where, default):
    value = section.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise CaseError(f"{where}.{key}: expected a number, got {value!r}")
    return float(value)


def _table(section, key, file_key, width, where, base_dir):
    if key in section and file_key in section:
        raise CaseError(f"{where}: give either {key} or {file_key}, not both")
    if file_key in section:
        path = Path(section[file_key])
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        try:
            with open(path, newline="") as fh:
                rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
        except OSError as exc:
            raise CaseError(f"{where}.{file_key}: cannot read {path}: {exc}") from None
        if rows and not _is_number(rows[0][0]):
            rows = rows[1:]  # header
        source = f"{path}"
    else:
        rows = section.get(key, [])
        source = f"{where}.{key}"
    out = []
    for k, r in enumerate(rows):
        if len(r) != width:
            raise CaseError(f"{source} row {k + 1}: expected {width} columns, got {len(r)}")
        try:
            out.append(tuple(float(v) for v in r))
        except (TypeError, ValueError):
            raise CaseError(f"{source} row {k + 1}: non-numeric entry in {r!r}") from None
    return out, source


def _is_number(text) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def _bus_id(value, where):
    if value != int(value):
        raise CaseError(f"{where}: bus id {value!r} is not an integer")
    return int(value)


def _network(sec: dict, base_dir) -> GridCase:
    known = {"base_kv", "base_mva", "slack_bus", "v_slack", "v_min", "v_max", "horizon",
             "dt_hours", "lines", "lines_file", "loads", "loads_file", "tariffs"}
    _take(sec, "network", known)
    base_kv = _number(sec, "base_kv", "network", 12.66)
    base_mva = _number(sec, "base_mva", "network", 1.0)
    if base_kv <= 0 or base_mva <= 0:
        raise CaseError("network: base_kv and base_mva must be positive")
    z_base = base_kv**2 / base_mva

    raw_lines, src = _table(sec, "lines", "lines_file", 4, "network", base_dir)
    if not raw_lines:
        raise CaseError("network: no lines given")
    lines = []
    for k, (f, t, r, x) in enumerate(raw_lines):
        where = f"{src} row {k + 1}"
        if r < 0 or x < 0:
            raise CaseError(f"{where}: negative impedance")
        lines.append(Line(_bus_id(f, where), _bus_id(t, where), r / z_base, x / z_base))

    raw_loads, src = _table(sec, "loads", "loads_file", 3, "network", base_dir)
    loads = {}
    for k, (b, p, q) in enumerate(raw_loads):
        bus = _bus_id(b, f"{src} row {k + 1}")
        pp, qq = loads.get(bus, (0.0, 0.0))
        loads[bus] = (pp + p / 1000.0 / base_mva, qq + q / 1000.0 / base_mva)

    slack = sec.get("slack_bus", 1)
    if isinstance(slack, bool) or not isinstance(slack, int):
        raise CaseError(f"network.slack_bus: expected an integer, got {slack!r}")
    ids = sorted({ln.from_bus for ln in lines} | {ln.to_bus for ln in lines} | set(loads) | {slack})
    buses = tuple(Bus(i, *loads.get(i, (0.0, 0.0))) for i in ids)

    tar = sec.get("tariffs", {})
    if not isinstance(tar, dict):
        raise CaseError("network.tariffs must be a table")
    _take(tar, "network.tariffs", {f.name for f in fields(Tariffs)})
    tariffs = Tariffs(**{f.name: _number(tar, f.name, "network.tariffs", f.default) for f in fields(Tariffs)})

    horizon = sec.get("horizon", 1)
    if isinstance(horizon, bool) or not isinstance(horizon, int):
        raise CaseError(f"network.horizon: expected an integer, got {horizon!r}")
    return GridCase(
        buses=buses,
        lines=tuple(lines),
        slack_bus=slack,
        v_slack=_number(sec, "v_slack", "network", 1.0) ** 2,
        v_min=_number(sec, "v_min", "network", 0.9) ** 2,
        v_max=_number(sec, "v_max", "network", 1.1) ** 2,
        tariffs=tariffs,
        horizon=horizon,
        dt=_number(sec, "dt_hours", "network", 5.0 / 60.0),
    )


def _ess(sec: dict) -> EssConfig:
    names = {f.name: f for f in fields(EssConfig)}
    _take(sec, "ess", set(names))
    kwargs = {}
    for name, f in names.items():
        if name not in sec:
            continue
        value = sec[name]
        if f.type in ("bool",):
            if not isinstance(value, bool):
                raise CaseError(f"ess.{name}: expected true/false, got {value!r}")
        elif f.type in ("int",):
            if isinstance(value, bool) or not isinstance(value, int):
                raise CaseError(f"ess.{name}: expected an integer, got {value!r}")
        else:
            value = _number(sec, name, "ess", None)
        kwargs[name] = value
    return EssConfig(**kwargs)


def _thermal(sec: dict):
    geo_names = [f.name for f in fields(RackGeometry)]
    par_names = {f.name: f.name for f in fields(ThermalParams)}
    par_names["lambda"] = par_names.pop("lam")
    _take(sec, "thermal", set(geo_names) | set(par_names) | {"fan_speed", "current"})
    geo_defaults = RackGeometry()
    n = sec.get("n_modules", geo_defaults.n_modules)
    if isinstance(n, bool) or not isinstance(n, int):
        raise CaseError(f"thermal.n_modules: expected an integer, got {n!r}")
    geometry = RackGeometry(
        n,
        *(_number(sec, k, "thermal", getattr(geo_defaults, k)) for k in geo_names[1:]),
    )
    par_defaults = ThermalParams()
    params = ThermalParams(**{
        attr: _number(sec, key, "thermal", getattr(par_defaults, attr)) for key, attr in par_names.items()
    })
    fan = _number(sec, "fan_speed", "thermal", 2000.0)
    current = _number(sec, "current", "thermal", 50.0)
    if current < 0:
        raise CaseError(f"thermal.current must be >= 0, got {current!r}")
    return geometry, params, fan, current


def _control(sec: dict) -> ControlSettings:
    _take(sec, "control", {"weight", "target_scale", "target_mode", "reduction"})
    reduction = sec.get("reduction", "mean")
    if not isinstance(reduction, str):
        raise CaseError(f"control.reduction: expected a string, got {reduction!r}")
    return ControlSettings(
        weight=_number(sec, "weight", "control", 0.25),
        target_scale=_number(sec, "target_scale", "control", 0.95),
        target_mode=str(sec.get("target_mode", "ambient")),
        reduction=Reduction.parse(reduction),
    )


def _float_list(sec, key, where, default):
    value = sec.get(key, default)
    if not isinstance(value, (list, tuple)) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    ):
        raise CaseError(f"{where}.{key}: expected a list of numbers")
    return tuple(float(v) for v in value)


def _grid(sec, prefix, where, default):
    explicit = f"{prefix}_grid"
    keys = (f"{prefix}_start", f"{prefix}_stop", f"{prefix}_step")
    if explicit in sec:
        if any(k in sec for k in keys):
            raise CaseError(f"{where}: give either {explicit} or {prefix}_start/stop/step")
        return _float_list(sec, explicit, where, None)
    if any(k in sec for k in keys):
        missing = [k for k in keys if k not in sec]
        if missing:
            raise CaseError(f"{where}: missing {', '.join(missing)}")
        return _arange(*(_number(sec, k, where, None) for k in keys), where)
    return default


def _sweep(sec: dict, control: ControlSettings, ambient: float):
    _take(sec, "sweep", {"target_scalings", "weights", "mixed"})
    sweep = SweepSpec(
        target_scalings=_float_list(sec, "target_scalings", "sweep", DEFAULT_SCALINGS),
        weights=_float_list(sec, "weights", "sweep", DEFAULT_WEIGHTS),
        reduction=control.reduction,
        target_mode=control.target_mode,
    )
    mx = sec.get("mixed", {})
    if not isinstance(mx, dict):
        raise CaseError("sweep.mixed must be a table")
    known = {f"{p}_{s}" for p in ("fan", "current") for s in ("start", "stop", "step", "grid")} | {"temp_max"}
    _take(mx, "sweep.mixed", known)
    mixed = MixedSpec(
        fan_grid=_grid(mx, "fan", "sweep.mixed", _arange(1500.0, 2500.0, 50.0, "sweep.mixed")),
        current_grid=_grid(mx, "current", "sweep.mixed", _arange(40.0, 56.0, 1.0, "sweep.mixed")),
        temp_max=_number(mx, "temp_max", "sweep.mixed", ambient + 10.0),
    )
    return sweep, mixed


def parse_case(text: str, base_dir: Path | None = None, source: str | None = None) -> Case:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise CaseError(f"{source or 'case'}: {exc}") from None
    unknown = sorted(set(doc) - {"network", "ess", "thermal", "control", "sweep"})
    if unknown:
        raise CaseError(f"unknown section(s): {', '.join(unknown)}")
    if "network" not in doc:
        raise CaseError("missing [network] section")
    for name, sec in doc.items():
        if not isinstance(sec, dict):
            raise CaseError(f"[{name}] must be a table")

    grid = _network(doc["network"], base_dir)
    ess = _ess(doc.get("ess", {}))
    if ess.bus not in set(grid.bus_ids):
        raise CaseError(f"ess.bus: bus {ess.bus} is not part of the network")
    geometry, params, fan, current = _thermal(doc.get("thermal", {}))
    if geometry.n_modules != ess.series_modules:
        raise CaseError(
            f"thermal.n_modules ({geometry.n_modules}) must match ess.series_modules ({ess.series_modules})"
        )
    control = _control(doc.get("control", {}))
    sweep, mixed = _sweep(doc.get("sweep", {}), control, params.ambient)
    return Case(grid, ess, geometry, params, fan, current, control, sweep, mixed, source)


def load_case(path) -> Case:
    """Load a case file; ``case33`` names the bundled 33-bus case."""
    if str(path) in ("case33", "case33.toml") and not Path(path).exists():
        text = resources.files("thermopf").joinpath("data/case33.toml").read_text()
        return parse_case(text, None, "case33")
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise CaseError(f"cannot read case file {path}: {exc}") from None
    return parse_case(text, path.parent, str(path))
