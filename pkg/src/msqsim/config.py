"""Experiment configuration: bespoke line-oriented format, parser, serialiser.

Grammar (bit-exact):

* ``[section]`` headers, ``key = value`` pairs, ``#`` starts a comment
  (whole line or trailing), keys are case-sensitive.
* Unknown sections or keys are hard errors with line numbers; so are
  duplicate keys, malformed numbers and range violations.
* Missing keys take the documented defaults, which are echoed into output
  metadata by the scan drivers.
* ``parse(serialize(config))`` round-trips to an identical config.

Units are the suffix in the key name (``_mm``, ``_nm``, ``_rad_per_mm``,
``_db``, ``_rad``).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields as dc_fields
from typing import List, Optional

import numpy as np

_TWO_PI = 2.0 * np.pi


class ConfigError(ValueError):
    """Parse or validation failure; ``errors`` holds line-numbered messages."""

    def __init__(self, errors: List[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


# ---------------------------------------------------------------------------
# section records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridConfig:
    nx: int = 32
    ny: int = 32
    pitch_mm: float = 0.15


@dataclass(frozen=True)
class MediumConfig:
    length_mm: float = 12.5
    wavelength_nm: float = 795.0
    refractive_index: float = 1.0
    slices: int = 16
    gain: float = 4.0
    pump_waist_mm: float = 1.0
    # 1/e^2 radius of the squeezed-emission region (super-Gaussian envelope);
    # 0 disables the envelope and the state is transversely uniform
    region_waist_mm: float = 0.0
    region_order: int = 8

    @property
    def wavelength_mm(self) -> float:
        return self.wavelength_nm * 1e-6


@dataclass(frozen=True)
class GainProfileConfig:
    # None: s_max derived from the medium gain via G = cosh(s)^2
    s_max: Optional[float] = None
    # None: peak at the overlap offset (annulus centred on the recentred band)
    q_peak_rad_per_mm: Optional[float] = None
    # None: half the peak frequency; uniform profile when the peak is 0
    q_sigma_rad_per_mm: Optional[float] = None
    q_gap_floor: float = 0.05
    pump_phase_rad: float = 0.0


@dataclass(frozen=True)
class OverlapConfig:
    enabled: bool = True
    # None: quarter of the full frequency span, the offset at which the
    # recentred band closes exactly on the discrete grid
    offset_rad_per_mm: Optional[float] = None
    direction: str = "x"


@dataclass(frozen=True)
class LoConfig:
    mask: str = "gaussian"
    width_mm: float = 0.45
    height_mm: float = 0.61
    center_x_mm: float = 0.0
    center_y_mm: float = 0.0
    gain: float = 4.0
    filter_auto: bool = True
    filter_rad_per_mm: Optional[float] = None
    ideal_balanced: bool = False


@dataclass(frozen=True)
class DetectorConfig:
    efficiency: float = 0.85
    electronic_floor_db: float = -13.0


@dataclass(frozen=True)
class ScanConfig:
    type: str = "phase"
    start: float = 0.0
    stop: float = _TWO_PI
    steps: int = 64
    direction: str = "x=y"


@dataclass(frozen=True)
class EngineConfig:
    engine: str = "implicit"
    mode_cap: int = 4096
    tol_structural: float = 1e-9
    tol_exact: float = 1e-12


@dataclass(frozen=True)
class ExperimentConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    medium: MediumConfig = field(default_factory=MediumConfig)
    gain_profile: GainProfileConfig = field(default_factory=GainProfileConfig)
    overlap: OverlapConfig = field(default_factory=OverlapConfig)
    lo: LoConfig = field(default_factory=LoConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    scan: ScanConfig = field(default_factory=ScanConfig)
    engine: EngineConfig = field(default_factory=EngineConfig)

    def serialize(self) -> str:
        return serialize_config(self)

    def sha256(self) -> str:
        return hashlib.sha256(self.serialize().encode()).hexdigest()


# ---------------------------------------------------------------------------
# schema
# ---------------------------------------------------------------------------

def _positive(name):
    return lambda v: None if v > 0 else f"{name} must be positive"


def _nonnegative(name):
    return lambda v: None if v >= 0 else f"{name} must be >= 0"


def _at_least(name, bound):
    return lambda v: None if v >= bound else f"{name} must be >= {bound}"


def _in_range(name, low, high):
    return lambda v: None if low <= v <= high else f"{name} must lie in [{low}, {high}]"


def _choice(name, options):
    opts = tuple(options)
    return lambda v: None if v in opts else f"{name} must be one of {', '.join(opts)}"


def _even(name):
    return lambda v: None if (v >= 2 and v % 2 == 0) else f"{name} must be an even integer >= 2"


# (type, validator or None); type 'float?' means optional float (None default)
_SCHEMA = {
    "grid": {
        "nx": ("int", _even("nx")),
        "ny": ("int", _even("ny")),
        "pitch_mm": ("float", _positive("pitch_mm")),
    },
    "medium": {
        "length_mm": ("float", _nonnegative("length_mm")),
        "wavelength_nm": ("float", _positive("wavelength_nm")),
        "refractive_index": ("float", _positive("refractive_index")),
        "slices": ("int", _at_least("slices", 1)),
        "gain": ("float", _at_least("gain", 1)),
        "pump_waist_mm": ("float", _positive("pump_waist_mm")),
        "region_waist_mm": ("float", _nonnegative("region_waist_mm")),
        "region_order": ("int", _at_least("region_order", 1)),
    },
    "gain_profile": {
        "s_max": ("float?", _nonnegative("s_max")),
        "q_peak_rad_per_mm": ("float?", _nonnegative("q_peak_rad_per_mm")),
        "q_sigma_rad_per_mm": ("float?", _positive("q_sigma_rad_per_mm")),
        "q_gap_floor": ("float", _in_range("q_gap_floor", 0.0, 1.0)),
        "pump_phase_rad": ("float", None),
    },
    "overlap": {
        "enabled": ("bool", None),
        "offset_rad_per_mm": ("float?", _positive("offset_rad_per_mm")),
        "direction": ("str", _choice("direction", ("x", "y"))),
    },
    "lo": {
        "mask": ("str", _choice("mask", ("gaussian", "slit", "uniform"))),
        "width_mm": ("float", _positive("width_mm")),
        "height_mm": ("float", _positive("height_mm")),
        "center_x_mm": ("float", None),
        "center_y_mm": ("float", None),
        "gain": ("float", _at_least("gain", 1)),
        "filter_auto": ("bool", None),
        "filter_rad_per_mm": ("float?", _positive("filter_rad_per_mm")),
        "ideal_balanced": ("bool", None),
    },
    "detector": {
        "efficiency": ("float", _in_range("efficiency", 0.0, 1.0)),
        "electronic_floor_db": ("float", lambda v: None if v < 0 else
                                "electronic_floor_db must be negative"),
    },
    "scan": {
        "type": ("str", _choice("type", ("phase", "position", "width"))),
        "start": ("float", None),
        "stop": ("float", None),
        "steps": ("int", _at_least("steps", 2)),
        "direction": ("str", _choice("direction", ("x=y", "x=-y", "x", "y"))),
    },
    "engine": {
        "engine": ("str", _choice("engine", ("dense", "implicit"))),
        "mode_cap": ("int", _at_least("mode_cap", 2)),
        "tol_structural": ("float", _positive("tol_structural")),
        "tol_exact": ("float", _positive("tol_exact")),
    },
}

_SECTION_TYPES = {
    "grid": GridConfig,
    "medium": MediumConfig,
    "gain_profile": GainProfileConfig,
    "overlap": OverlapConfig,
    "lo": LoConfig,
    "detector": DetectorConfig,
    "scan": ScanConfig,
    "engine": EngineConfig,
}

# config key -> dataclass field name (identical except unit suffixes dropped
# nowhere: the dataclasses carry the suffixed names already, minus the unit
# when the dataclass says so)
_FIELD_NAMES = {
    "gain_profile": {
        "s_max": "s_max",
        "q_peak_rad_per_mm": "q_peak_rad_per_mm",
        "q_sigma_rad_per_mm": "q_sigma_rad_per_mm",
        "q_gap_floor": "q_gap_floor",
        "pump_phase_rad": "pump_phase_rad",
    },
}


def _field_name(section: str, key: str) -> str:
    return _FIELD_NAMES.get(section, {}).get(key, key)


def _parse_value(kind: str, raw: str):
    if kind == "bool":
        if raw == "true":
            return True
        if raw == "false":
            return False
        raise ValueError("expected true or false")
    if kind == "int":
        try:
            return int(raw)
        except ValueError:
            raise ValueError("expected an integer") from None
    if kind in ("float", "float?"):
        try:
            value = float(raw)
        except ValueError:
            raise ValueError("expected a number") from None
        if not np.isfinite(value):
            raise ValueError("expected a finite number")
        return value
    return raw  # str


def parse_config(text: str) -> ExperimentConfig:
    """Parse and fully validate a configuration; raises :class:`ConfigError`."""
    errors: List[str] = []
    values: dict[str, dict[str, object]] = {s: {} for s in _SCHEMA}
    key_lines: dict[tuple[str, str], int] = {}
    section: Optional[str] = None
    section_known = False

    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                errors.append(f"line {lineno}: malformed section header {line!r}")
                section, section_known = None, False
                continue
            name = line[1:-1].strip()
            if name not in _SCHEMA:
                errors.append(f"line {lineno}: unknown section [{name}]")
                section, section_known = name, False
            else:
                section, section_known = name, True
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value', got {line!r}")
            continue
        if section is None:
            errors.append(f"line {lineno}: key outside any [section]")
            continue
        if not section_known:
            continue  # already reported the unknown section once
        key, _, raw_value = line.partition("=")
        key = key.strip()
        raw_value = raw_value.strip()
        schema = _SCHEMA[section]
        if key not in schema:
            errors.append(f"line {lineno}: unknown key {key!r} in [{section}]")
            continue
        if key in values[section]:
            first = key_lines[(section, key)]
            errors.append(
                f"line {lineno}: duplicate key {key!r} in [{section}] "
                f"(first set on line {first})"
            )
            continue
        kind, validator = schema[key]
        try:
            value = _parse_value(kind, raw_value)
        except ValueError as exc:
            errors.append(f"line {lineno}: {key} = {raw_value!r}: {exc}")
            continue
        if validator is not None:
            msg = validator(value)
            if msg is not None:
                errors.append(f"line {lineno}: {msg}")
                continue
        values[section][key] = value
        key_lines[(section, key)] = lineno

    # cross-field checks (attached to the offending key's line where known)
    lo_vals = values["lo"]
    if lo_vals.get("filter_auto", True) and lo_vals.get("filter_rad_per_mm") is not None:
        line = key_lines.get(("lo", "filter_rad_per_mm"), 0)
        errors.append(
            f"line {line}: filter_rad_per_mm conflicts with filter_auto = true"
        )
    scan_vals = values["scan"]
    scan_type = scan_vals.get("type", "phase")
    if scan_type in ("position", "width"):
        start = scan_vals.get("start", ScanConfig.start)
        stop = scan_vals.get("stop", ScanConfig.stop)
        if not stop > start:
            line = key_lines.get(("scan", "stop"), key_lines.get(("scan", "start"), 0))
            errors.append(f"line {line}: {scan_type} scan needs stop > start")
    if scan_type == "width":
        start = scan_vals.get("start", ScanConfig.start)
        if not start > 0:
            line = key_lines.get(("scan", "start"), 0)
            errors.append(f"line {line}: width scan needs start > 0")

    if errors:
        raise ConfigError(errors)

    sections = {}
    for name, cls in _SECTION_TYPES.items():
        kwargs = {_field_name(name, k): v for k, v in values[name].items()}
        sections[name] = cls(**kwargs)
    return ExperimentConfig(**sections)


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def serialize_config(config: ExperimentConfig) -> str:
    """Canonical text form; optional keys left at None are omitted."""
    lines: List[str] = []
    for section, cls in _SECTION_TYPES.items():
        record = getattr(config, section)
        lines.append(f"[{section}]")
        for f in dc_fields(cls):
            value = getattr(record, f.name)
            if value is None:
                continue
            lines.append(f"{f.name} = {_format_value(value)}")
        lines.append("")
    return "\n".join(lines)


def config_defaults_echo(config: ExperimentConfig) -> dict:
    """Flat key -> value mapping of the fully resolved configuration."""
    echo = {}
    for section, cls in _SECTION_TYPES.items():
        record = getattr(config, section)
        for f in dc_fields(cls):
            echo[f"{section}.{f.name}"] = getattr(record, f.name)
    return echo
