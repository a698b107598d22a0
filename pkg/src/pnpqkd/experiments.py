"""High-level runs wired from an :class:`~pnpqkd.config.AppConfig`.

Each function here is one CLI subcommand's worth of work: build the
interferometer the config describes, run the measurement or session, and
return plain results the output layer can serialize. Randomized fiber
states are drawn from dedicated seed streams so a run is reproducible from
its config file alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import jones, rng
from .builders import FIBER_SPEED_M_PER_NS, build_double_mz, build_plug_and_play
from .config import AppConfig, EveSection
from .detection import DetectorSpec, MonitorSpec
from .errors import ConfigurationError
from .network import DEFAULT_ENVELOPE_SIGMA_NS, InterferometerSpec
from .protocol import (
    BeamSplit,
    BlockSlots,
    EveModel,
    InterceptResend,
    SessionConfig,
    SessionPlan,
    SessionStats,
    SlotRecords,
    StrongProbe,
    SuppressInconclusive,
    prepare_session,
    run_session,
    session_stats,
)
from .visibility import FringeScan, visibility_scan

EVE_MODELS = (
    "none",
    "beam_split",
    "intercept_resend",
    "suppress_inconclusive",
    "strong_probe",
    "block_slots",
)


def eve_from_config(section: EveSection) -> EveModel | None:
    if section.model == "none":
        return None
    if section.model == "beam_split":
        return BeamSplit(section.fraction, section.efficiency)
    if section.model == "intercept_resend":
        return InterceptResend(section.efficiency)
    if section.model == "suppress_inconclusive":
        return SuppressInconclusive(section.efficiency)
    if section.model == "strong_probe":
        return StrongProbe(section.probe_ratio)
    if section.model == "block_slots":
        return BlockSlots(section.fraction)
    raise ConfigurationError(
        f"unknown eve model {section.model!r}; expected one of {EVE_MODELS}"
    )


def birefringence_draws(cfg: AppConfig) -> tuple[np.ndarray | None, np.ndarray | None]:
    """Line and delay-arm fiber states for this config, or (None, None)."""
    if not cfg.topology.random_birefringence:
        return None, None
    line = jones.haar_random_unitary(
        rng.spawn_generator(cfg.seed, rng.PURPOSE_BIREFRINGENCE, 0)
    )
    delay = jones.haar_random_unitary(
        rng.spawn_generator(cfg.seed, rng.PURPOSE_BIREFRINGENCE, 1)
    )
    return line, delay


def plug_and_play_from_config(
    cfg: AppConfig,
    *,
    phi_a_rad: float = 0.0,
    phi_b_rad: float = 0.0,
    fr_angle_error_rad: float | None = None,
    pm_delta_rad: float | None = None,
) -> InterferometerSpec:
    topo = cfg.topology
    line_b, delay_b = birefringence_draws(cfg)
    return build_plug_and_play(
        t1=topo.t1,
        t2=topo.t2,
        t3=topo.t3,
        tap_t=topo.tap_t,
        include_d1=topo.include_d1,
        delay_line_ns=topo.delay_line_ns,
        short_arm_ns=topo.short_arm_ns,
        line_delay_ns=topo.line_delay_ns,
        line_length_km=topo.line_length_km,
        line_loss_db_per_km=topo.line_loss_db_per_km,
        pm_delta_rad=topo.pm_delta_rad if pm_delta_rad is None else pm_delta_rad,
        pm_gamma=topo.pm_gamma,
        fr_angle_error_rad=(
            topo.fr_angle_error_rad if fr_angle_error_rad is None else fr_angle_error_rad
        ),
        line_birefringence=line_b,
        delay_birefringence=delay_b,
        phi_a_rad=phi_a_rad,
        phi_b_rad=phi_b_rad,
    )


def session_config_from(cfg: AppConfig, workers: int | None = None) -> SessionConfig:
    det = cfg.detector
    return SessionConfig(
        protocol=cfg.protocol.name,
        n_slots=cfg.protocol.n_slots,
        mean_photon_number=cfg.source.mean_photon_number,
        launch_photons=cfg.source.launch_photons,
        seed=cfg.seed,
        detector=DetectorSpec(
            det.efficiency, det.dark_count_prob, det.gate_ns, det.dead_time_ns
        ),
        monitor=MonitorSpec(cfg.monitor.alarm_ratio),
        slot_period_ns=cfg.protocol.slot_period_ns,
        eve=eve_from_config(cfg.eve),
        workers=cfg.workers if workers is None else workers,
    )


def run_visibility(cfg: AppConfig) -> FringeScan:
    """Fringe scan of the configured round-trip interferometer."""
    spec = plug_and_play_from_config(cfg)
    return visibility_scan(
        spec,
        port=cfg.scan.port,
        phi_b_rad=cfg.scan.phi_b_rad,
        points=cfg.scan.points,
        validate=True,
    )


@dataclass(frozen=True, eq=False)
class KeygenResult:
    plan: SessionPlan
    records: SlotRecords
    stats: SessionStats


def run_keygen(cfg: AppConfig, workers: int | None = None) -> KeygenResult:
    """Full key-exchange session as configured (eavesdropper included if set)."""
    spec = plug_and_play_from_config(cfg)
    plan = prepare_session(spec, session_config_from(cfg, workers))
    records = run_session(plan)
    return KeygenResult(plan, records, session_stats(records, plan))


def run_attack(cfg: AppConfig, workers: int | None = None) -> KeygenResult:
    """Like ``run_keygen`` but insists an eavesdropper model is selected."""
    if cfg.eve.model == "none":
        raise ConfigurationError(
            "attack runs need eve.model set; use keygen for the clean session"
        )
    return run_keygen(cfg, workers)


@dataclass(frozen=True, eq=False)
class BaselineMzResult:
    scan: FringeScan
    visibility: float
    arrival_offset_ns: float
    envelope_overlap: float
    mismatch_phase_rad: float


def run_baseline_mz(cfg: AppConfig) -> BaselineMzResult:
    """Fringe of the one-way Mach-Zehnder baseline at the configured mismatch.

    Reports alongside the scanned visibility the arrival-time offset the
    long-arm mismatch causes and the Gaussian envelope overlap it implies,
    which is the ceiling the visibility is expected to hit.
    """
    mz = cfg.mz
    spec = build_double_mz(
        short_arm_ns=mz.short_arm_ns,
        arm_imbalance_ns=mz.arm_imbalance_ns,
        line_delay_ns=mz.line_delay_ns,
        path_mismatch_nm=mz.path_mismatch_nm,
        wavelength_nm=mz.wavelength_nm,
    )
    scan = visibility_scan(
        spec,
        port=cfg.scan.port,
        phi_b_rad=cfg.scan.phi_b_rad,
        points=cfg.scan.points,
        validate=True,
    )
    dt = mz.path_mismatch_nm * 1e-9 / FIBER_SPEED_M_PER_NS
    x = dt / DEFAULT_ENVELOPE_SIGMA_NS
    return BaselineMzResult(
        scan=scan,
        visibility=scan.visibility,
        arrival_offset_ns=dt,
        envelope_overlap=math.exp(-0.125 * x * x),
        mismatch_phase_rad=2.0 * math.pi * mz.path_mismatch_nm / mz.wavelength_nm,
    )


@dataclass(frozen=True)
class SweepRow:
    fr_error_deg: float
    pm_delta_rad: float
    visibility: float


def run_visibility_grid(
    cfg: AppConfig,
    *,
    fr_error_max_deg: float = 2.0,
    fr_error_steps: int = 21,
    pm_delta_max_rad: float = 0.3,
    pm_delta_steps: int = 16,
    scan_points: int = 256,
) -> list[SweepRow]:
    """Visibility over a grid of rotator error and modulator contrast.

    The fiber state is drawn once from the seed and held fixed across the
    grid, so the map shows the effect of the component imperfections alone.
    A perfectly aligned fiber would hide the rotator error entirely; enable
    ``topology.random_birefringence`` for a representative map.
    """
    if fr_error_steps < 1 or pm_delta_steps < 1:
        raise ConfigurationError("grid step counts must be >= 1")
    fr_values = np.linspace(0.0, fr_error_max_deg, fr_error_steps)
    delta_values = np.linspace(0.0, pm_delta_max_rad, pm_delta_steps)
    rows: list[SweepRow] = []
    for fr_deg in fr_values:
        for delta in delta_values:
            spec = plug_and_play_from_config(
                cfg,
                fr_angle_error_rad=math.radians(fr_deg),
                pm_delta_rad=float(delta),
            )
            scan = visibility_scan(
                spec,
                port=cfg.scan.port,
                phi_b_rad=cfg.scan.phi_b_rad,
                points=scan_points,
            )
            rows.append(SweepRow(float(fr_deg), float(delta), scan.visibility))
    return rows


SWEEP_PARAMETERS = ("fr_error_deg", "pm_delta_rad", "t2", "path_mismatch_nm")
SWEEP_METRICS = ("visibility", "qber", "sift_rate", "alarm_rate")


@dataclass(frozen=True)
class SweepPoint:
    parameter: str
    value: float
    metric: str
    result: float


def _reject_unknown(kind: str, got: str, allowed: tuple[str, ...]) -> None:
    import difflib

    guess = difflib.get_close_matches(got, allowed, n=1)
    hint = f"; did you mean {guess[0]!r}?" if guess else ""
    raise ConfigurationError(
        f"unknown sweep {kind} {got!r}; expected one of {allowed}{hint}"
    )


def _cfg_with_parameter(cfg: AppConfig, parameter: str, value: float) -> AppConfig:
    if parameter == "fr_error_deg":
        topo = replace(cfg.topology, fr_angle_error_rad=math.radians(value))
        return replace(cfg, topology=topo)
    if parameter == "pm_delta_rad":
        return replace(cfg, topology=replace(cfg.topology, pm_delta_rad=value))
    if parameter == "t2":
        return replace(cfg, topology=replace(cfg.topology, t2=value))
    if parameter == "path_mismatch_nm":
        return replace(cfg, mz=replace(cfg.mz, path_mismatch_nm=value))
    raise ConfigurationError(f"unhandled sweep parameter {parameter!r}")


def run_sweep(cfg: AppConfig) -> list[SweepPoint]:
    """One row per step of the configured parameter sweep.

    Visibility rows rescan the fringe at each step. Session metrics run a
    full session per step; each step's slot randomness comes from a seed
    derived by counter from the master seed, while the fiber draw stays
    pinned to the master seed so steps differ only in the swept parameter.
    """
    sweep = cfg.sweep
    if sweep.parameter not in SWEEP_PARAMETERS:
        _reject_unknown("parameter", sweep.parameter, SWEEP_PARAMETERS)
    if sweep.metric not in SWEEP_METRICS:
        _reject_unknown("metric", sweep.metric, SWEEP_METRICS)
    if sweep.steps < 1:
        raise ConfigurationError("sweep.steps must be >= 1")
    one_way = sweep.parameter == "path_mismatch_nm"
    if one_way and sweep.metric != "visibility":
        raise ConfigurationError(
            "metric/experiment mismatch: the one-way baseline has no key "
            f"session, so {sweep.metric!r} is not available for "
            "path_mismatch_nm sweeps"
        )
    values = np.linspace(sweep.start, sweep.stop, sweep.steps)
    points: list[SweepPoint] = []
    for i, value in enumerate(float(v) for v in values):
        stepped = _cfg_with_parameter(cfg, sweep.parameter, value)
        if sweep.metric == "visibility":
            if one_way:
                result = run_baseline_mz(stepped).visibility
            else:
                scan = visibility_scan(
                    plug_and_play_from_config(stepped),
                    port=cfg.scan.port,
                    phi_b_rad=cfg.scan.phi_b_rad,
                    points=sweep.scan_points,
                )
                result = scan.visibility
        else:
            step_seed = int(
                rng.spawn_generator(cfg.seed, rng.PURPOSE_SWEEP, i).integers(2**63)
            )
            spec = plug_and_play_from_config(stepped)
            session = replace(session_config_from(stepped), seed=step_seed)
            plan = prepare_session(spec, session)
            stats = session_stats(run_session(plan), plan)
            result = getattr(stats, sweep.metric)
        points.append(SweepPoint(sweep.parameter, value, sweep.metric, float(result)))
    return points
