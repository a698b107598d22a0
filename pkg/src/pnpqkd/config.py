"""Run configuration: YAML files, strict key checking, dotted overrides.

The schema is the dataclass tree rooted at :class:`AppConfig`. Loading is
strict: unknown keys fail with a suggestion for the closest valid name
instead of being silently ignored, and values must match the field's type
(ints are accepted where floats are expected). ``--set``-style overrides use
dotted paths into the same tree and the same coercion rules, so a typo in an
override is caught the same way as a typo in the file.
"""

import dataclasses
import difflib
import typing
from dataclasses import dataclass, field

import yaml

from .errors import ConfigurationError


@dataclass
class TopologySection:
    """Geometry and imperfections of the round-trip interferometer."""

    t1: float = 0.95
    t2: float = 0.9
    t3: float = 0.95
    tap_t: typing.Optional[float] = None
    include_d1: bool = True
    delay_line_ns: float = 250.0
    short_arm_ns: float = 5.0
    line_delay_ns: float = 112745.0
    line_length_km: float = 23.0
    line_loss_db_per_km: float = 0.35
    pm_delta_rad: float = 0.2
    pm_gamma: float = 0.98
    fr_angle_error_rad: float = 0.0
    random_birefringence: bool = False


@dataclass
class DetectorSection:
    efficiency: float = 0.2
    dark_count_prob: float = 1e-4
    gate_ns: float = 2.0
    dead_time_ns: float = 0.0


@dataclass
class MonitorSection:
    alarm_ratio: float = 2.0


@dataclass
class SourceSection:
    mean_photon_number: float = 0.1
    launch_photons: float = 1e6


@dataclass
class ProtocolSection:
    name: str = "two_state"
    n_slots: int = 100_000
    slot_period_ns: float = 1e6


@dataclass
class EveSection:
    """Eavesdropper selection; ``model`` is none, beam_split, intercept_resend,
    suppress_inconclusive, strong_probe, or block_slots."""

    model: str = "none"
    fraction: float = 0.1
    efficiency: float = 1.0
    probe_ratio: float = 5.0


@dataclass
class MzSection:
    """Geometry of the one-way Mach-Zehnder baseline."""

    short_arm_ns: float = 2.0
    arm_imbalance_ns: float = 50.0
    line_delay_ns: float = 100.0
    path_mismatch_nm: float = 0.0
    wavelength_nm: float = 1300.0


@dataclass
class ScanSection:
    points: int = 256
    port: str = "D0"
    phi_b_rad: float = 0.0


@dataclass
class SweepSection:
    """One swept parameter, one reported metric, one row per step.

    ``parameter`` picks what varies (rotator angle error in degrees,
    modulator polarization contrast, the middle coupler transmission, or
    the one-way baseline's arm length mismatch in nm); ``metric`` picks
    what each step reports. Session metrics (qber, sift_rate, alarm_rate)
    run a full keyed session per step with a step-derived seed; the fiber
    state stays pinned to the master seed so the curve shows the swept
    parameter alone.
    """

    parameter: str = "fr_error_deg"
    start: float = 0.0
    stop: float = 2.0
    steps: int = 21
    metric: str = "visibility"
    scan_points: int = 256


@dataclass
class AppConfig:
    seed: int = 12345
    workers: int = 1
    topology: TopologySection = field(default_factory=TopologySection)
    detector: DetectorSection = field(default_factory=DetectorSection)
    monitor: MonitorSection = field(default_factory=MonitorSection)
    source: SourceSection = field(default_factory=SourceSection)
    protocol: ProtocolSection = field(default_factory=ProtocolSection)
    eve: EveSection = field(default_factory=EveSection)
    mz: MzSection = field(default_factory=MzSection)
    scan: ScanSection = field(default_factory=ScanSection)
    sweep: SweepSection = field(default_factory=SweepSection)


def _type_matches(annotation, value):
    origin = typing.get_origin(annotation)
    if origin is typing.Union:
        return any(_type_matches(a, value) for a in typing.get_args(annotation))
    if annotation is type(None):
        return value is None
    if annotation is bool:
        return isinstance(value, bool)
    if annotation is int:
        return isinstance(value, int) and not isinstance(value, bool)
    if annotation is float:
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if annotation is str:
        return isinstance(value, str)
    return False


def _coerce(path: str, annotation, value):
    if not _type_matches(annotation, value):
        raise ConfigurationError(
            f"config value {path} = {value!r} does not fit its type {annotation}"
        )
    origin = typing.get_origin(annotation)
    if origin is typing.Union:
        if value is None:
            return None
        non_none = [a for a in typing.get_args(annotation) if a is not type(None)]
        return _coerce(path, non_none[0], value)
    if annotation is float:
        return float(value)
    return value


def _fill(instance, mapping, path: str):
    if not isinstance(mapping, dict):
        raise ConfigurationError(f"config section {path or 'top level'} must be a mapping")
    hints = typing.get_type_hints(type(instance))
    names = [f.name for f in dataclasses.fields(instance)]
    for key, value in mapping.items():
        where = f"{path}.{key}" if path else str(key)
        if key not in names:
            guess = difflib.get_close_matches(str(key), names, n=1)
            hint = f"; did you mean {guess[0]!r}?" if guess else ""
            raise ConfigurationError(f"unknown config key {where!r}{hint}")
        current = getattr(instance, key)
        if dataclasses.is_dataclass(current):
            _fill(current, value, where)
        else:
            setattr(instance, key, _coerce(where, hints[key], value))
    return instance


def config_from_mapping(mapping: dict) -> AppConfig:
    """Build a config from a parsed YAML mapping, strictly."""
    return _fill(AppConfig(), mapping or {}, "")


def load_config(path: str) -> AppConfig:
    """Read and validate a YAML config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except FileNotFoundError as exc:
        raise ConfigurationError(f"config file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"config file {path} is not valid YAML: {exc}") from exc
    return config_from_mapping(data)


def apply_overrides(cfg: AppConfig, overrides) -> AppConfig:
    """Apply ``section.key=value`` strings; values parse as YAML scalars."""
    for item in overrides or ():
        if "=" not in item:
            raise ConfigurationError(
                f"override {item!r} must look like section.key=value"
            )
        dotted, raw = item.split("=", 1)
        parts = [p for p in dotted.strip().split(".") if p]
        if not parts:
            raise ConfigurationError(f"override {item!r} has an empty key path")
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"override value {raw!r} is not a YAML scalar") from exc
        node = {parts[-1]: value}
        for part in reversed(parts[:-1]):
            node = {part: node}
        _fill(cfg, node, "")
    return cfg


def dump_config(cfg: AppConfig) -> str:
    """Canonical YAML text of a config; stable across runs."""
    return yaml.safe_dump(dataclasses.asdict(cfg), sort_keys=True)


def config_reference() -> str:
    """YAML of every setting at its default value."""
    return dump_config(AppConfig())
