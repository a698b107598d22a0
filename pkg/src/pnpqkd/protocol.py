"""Key-exchange sessions over the round-trip interferometer.

``prepare_session`` calibrates the sender attenuator against a bright trace,
re-traces with the attenuator set, and turns the result into phase-indexed
intensity tables. ``run_session`` then simulates millions of slots by pure
array arithmetic: per-slot phase choices, eavesdropper action, detector
sampling, reference and monitor checks. The tables are exact, not a fit; a
holdout re-trace validates them before any slot is simulated.

Protocols:

* ``two_state``: phases {0, pi} on both sides, bits from the receiver's own
  phase on slots where the signal detector fired. Orthogonal states, so it
  is honest-loss-limited rather than measurement-disturbance-limited.
* ``bb84``: four sender phases, two receiver bases, sifting on basis match
  and exactly one of the two detectors firing.

Eavesdropper models act on the emitted pulse pair between the stations:
``BeamSplit`` taps a fraction, ``InterceptResend`` measures and re-emits,
``SuppressInconclusive`` re-emits only conclusive slots and strips the weak
pulse otherwise, ``StrongProbe`` drives the sender's monitor with bright
probe light, ``BlockSlots`` removes whole slots.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import rng
from .components import Attenuator
from .detection import (
    DetectorSpec,
    MonitorSpec,
    apply_dead_time,
    click_probability,
    required_attenuation,
)
from .errors import (
    ConfigurationError,
    DegenerateConfigurationError,
    EmptyKeyError,
    ProtocolMismatchError,
)
from .network import InterferometerSpec
from .visibility import (
    BinDecomposition,
    TraceDecomposition,
    decompose_spec,
    trace_config_for,
    validate_decomposition,
)

TWO_STATE = "two_state"
BB84 = "bb84"
PROTOCOLS = (TWO_STATE, BB84)

REFERENCE_FRACTION = 0.5


@dataclass(frozen=True)
class BeamSplit:
    """Passive tap of a fixed fraction of every pulse."""

    fraction: float
    efficiency: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.fraction < 1.0:
            raise ConfigurationError(f"tap fraction {self.fraction!r} outside [0, 1)")


@dataclass(frozen=True)
class InterceptResend:
    """Measure each slot in a random basis and resend the outcome.

    Inconclusive slots (no click, or both analyzer outputs clicking) cannot
    be resent faithfully, so the whole slot is swallowed and shows up at the
    receiver as a missing timing reference.
    """

    efficiency: float = 1.0


@dataclass(frozen=True)
class SuppressInconclusive:
    """Intercept-resend variant that hides its inconclusive slots.

    Instead of swallowing the slot, the eavesdropper lets the strong timing
    pulse through untouched and removes only the weak signal pulse. The
    receiver then sees a normal-looking slot whose interference contrast is
    gone, which converts the attack's losses into errors.
    """

    efficiency: float = 1.0


@dataclass(frozen=True)
class StrongProbe:
    """Bright probing of the sender's modulator, visible to the monitor."""

    intensity_ratio: float = 5.0

    def __post_init__(self) -> None:
        if self.intensity_ratio <= 0.0:
            raise ConfigurationError("probe intensity ratio must be positive")


@dataclass(frozen=True)
class BlockSlots:
    """Denial-style removal of a random fraction of whole slots."""

    fraction: float = 0.1

    def __post_init__(self) -> None:
        if not 0.0 <= self.fraction <= 1.0:
            raise ConfigurationError(f"block fraction {self.fraction!r} outside [0, 1]")


EveModel = Union[BeamSplit, InterceptResend, SuppressInconclusive, StrongProbe, BlockSlots]


@dataclass(frozen=True)
class SessionConfig:
    """Everything a key-exchange run needs besides the interferometer itself."""

    protocol: str = TWO_STATE
    n_slots: int = 100_000
    mean_photon_number: float = 0.1
    launch_photons: float = 1e6
    seed: int = 1
    detector: DetectorSpec = field(default_factory=DetectorSpec)
    monitor: MonitorSpec = field(default_factory=MonitorSpec)
    slot_period_ns: float = 1e6
    eve: EveModel | None = None
    workers: int = 1
    validate_tables: bool = True

    def __post_init__(self) -> None:
        if self.protocol not in PROTOCOLS:
            raise ConfigurationError(
                f"unknown protocol {self.protocol!r}; expected one of {PROTOCOLS}"
            )
        if self.n_slots <= 0:
            raise ConfigurationError("n_slots must be positive")
        if self.mean_photon_number <= 0.0:
            raise ConfigurationError("mean photon number must be positive")
        if self.launch_photons <= 0.0:
            raise ConfigurationError("launch photon number must be positive")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")


@dataclass(frozen=True, eq=False)
class SessionPlan:
    """Calibrated session: spec with attenuator set, plus intensity tables."""

    spec: InterferometerSpec
    config: SessionConfig
    tables: TraceDecomposition
    attenuation_roundtrip: float
    mu_emitted: float
    d0_middle: BinDecomposition
    d1_middle: BinDecomposition | None
    reference_expected: float
    monitor_expected_p1: float
    monitor_expected_p2: float
    lone_reference_d0: float
    lone_reference_d1: float


def prepare_session(spec: InterferometerSpec, config: SessionConfig) -> SessionPlan:
    """Calibrate the attenuator and build the per-phase intensity tables.

    Calibration mirrors what the stations actually do: trace once with the
    attenuator open, infer the unattenuated photon number of the modulated
    pulse as it leaves the sender, and set the round-trip attenuation that
    brings it to the configured mean photon number. A second trace with the
    attenuator in place yields the session tables, cross-checked against a
    holdout re-trace unless disabled.
    """
    meta = spec.meta
    required_meta = (
        "bins", "pm_a", "pm_b", "pm_passes", "attenuator", "monitor",
        "coupler_ratios", "line_amplitude",
    )
    for key in required_meta:
        if key not in meta:
            raise ConfigurationError(
                f"spec meta lacks {key!r}; sessions need the round-trip topology"
            )
    if config.protocol == BB84 and "D1" not in spec.detectors:
        raise ConfigurationError("bb84 needs the second receiver detector D1")
    if isinstance(config.eve, SuppressInconclusive) and config.protocol != TWO_STATE:
        raise ConfigurationError(
            "the suppress-inconclusive model assumes the two-state alphabet"
        )

    bins = meta["bins"]
    passes = meta["pm_passes"]
    ratios = meta["coupler_ratios"]
    line_amp = meta["line_amplitude"]
    exit_intensity = (
        line_amp * line_amp
        * ratios["t2"] * ratios["t2"]
        * (1.0 - ratios["t1"] * ratios["t1"])
    )

    open_spec = spec.with_node(meta["attenuator"], Attenuator(1.0))
    cal_cfg = trace_config_for(
        spec, amplitude_cutoff=1e-7, bin_width_ns=config.detector.gate_ns
    )
    cal = decompose_spec(open_spec, cal_cfg)
    signal = cal.require("D0", bins["D0"]["middle"]).group_intensity(passes, 0)
    if signal <= 0.0:
        raise DegenerateConfigurationError(
            "no modulated signal path reaches D0; cannot calibrate"
        )
    mu_open = signal * config.launch_photons / exit_intensity
    factor = required_attenuation(config.mean_photon_number, mu_open)
    session_spec = open_spec.with_node(
        meta["attenuator"], Attenuator(factor**0.25)
    )

    cutoff = max(
        1e-12, 1e-4 * math.sqrt(config.mean_photon_number / config.launch_photons)
    )
    cfg = trace_config_for(
        spec, amplitude_cutoff=cutoff, bin_width_ns=config.detector.gate_ns
    )
    tables = decompose_spec(session_spec, cfg)
    if config.validate_tables:
        validate_decomposition(session_spec, cfg, tables)

    launch = config.launch_photons
    d0_mid = tables.require("D0", bins["D0"]["middle"])
    ref = tables.require("D0", bins["D0"]["reference"])
    mon1 = tables.require("D_A", bins["D_A"]["p1"])
    mon2 = tables.require("D_A", bins["D_A"]["p2"])
    d1_mid = None
    lone_d1 = 0.0
    if "D1" in spec.detectors:
        d1_mid = tables.require("D1", bins["D1"]["middle"])
        lone_d1 = d1_mid.group_intensity(0, passes) * launch

    return SessionPlan(
        spec=session_spec,
        config=config,
        tables=tables,
        attenuation_roundtrip=factor,
        mu_emitted=mu_open * factor,
        d0_middle=d0_mid,
        d1_middle=d1_mid,
        reference_expected=float(ref.evaluate(0.0, 0.0)) * launch,
        monitor_expected_p1=float(mon1.evaluate(0.0, 0.0)) * launch,
        monitor_expected_p2=float(mon2.evaluate(0.0, 0.0)) * launch,
        lone_reference_d0=d0_mid.group_intensity(0, passes) * launch,
        lone_reference_d1=lone_d1,
    )


@dataclass(frozen=True, eq=False)
class SlotRecords:
    """Columnar per-slot outcomes of a simulated session.

    ``eve_conclusive`` means, per model: the tap detector clicked
    (``BeamSplit``), the measurement was conclusive (``InterceptResend``,
    ``SuppressInconclusive``), the slot was blocked (``BlockSlots``); it is
    all-False otherwise.
    """

    protocol: str
    alice_symbol: np.ndarray
    bob_symbol: np.ndarray
    click_d0: np.ndarray
    click_d1: np.ndarray
    reference_seen: np.ndarray
    monitor_alarm: np.ndarray
    eve_conclusive: np.ndarray

    @property
    def n_slots(self) -> int:
        return int(self.alice_symbol.shape[0])


def _symbols(protocol: str, u: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Per-slot symbols and total modulation phases for both stations."""
    if protocol == TWO_STATE:
        a_sym = np.minimum((u[:, rng.COL_PHI_A] * 2).astype(np.uint8), 1)
        b_sym = np.minimum((u[:, rng.COL_PHI_B] * 2).astype(np.uint8), 1)
        return a_sym, b_sym, a_sym * np.pi, b_sym * np.pi
    a_sym = np.minimum((u[:, rng.COL_PHI_A] * 4).astype(np.uint8), 3)
    b_sym = np.minimum((u[:, rng.COL_PHI_B] * 2).astype(np.uint8), 1)
    return a_sym, b_sym, a_sym * (np.pi / 2.0), b_sym * (np.pi / 2.0)


@dataclass
class _EveEffect:
    phi_a: np.ndarray
    middle_scale: np.ndarray
    reference_factor: np.ndarray
    monitor_factor: np.ndarray
    lone_reference: np.ndarray
    conclusive: np.ndarray


def _apply_eve(
    model: EveModel | None, plan: SessionPlan, u: np.ndarray, phi_a: np.ndarray
) -> _EveEffect:
    m = phi_a.shape[0]
    ones = np.ones(m)
    effect = _EveEffect(
        phi_a=phi_a,
        middle_scale=ones,
        reference_factor=ones,
        monitor_factor=ones,
        lone_reference=np.zeros(m, dtype=bool),
        conclusive=np.zeros(m, dtype=bool),
    )
    if model is None:
        return effect
    if isinstance(model, BeamSplit):
        passed = 1.0 - model.fraction
        effect.middle_scale = ones * passed
        effect.reference_factor = ones * passed
        effect.monitor_factor = ones * passed
        p_click = 1.0 - math.exp(-model.fraction * plan.mu_emitted * model.efficiency)
        effect.conclusive = u[:, rng.COL_EVE_MINUS] < p_click
        return effect
    if isinstance(model, StrongProbe):
        effect.monitor_factor = ones * model.intensity_ratio
        return effect
    if isinstance(model, BlockSlots):
        blocked = u[:, rng.COL_EVE_BLOCK] < model.fraction
        keep = (~blocked).astype(float)
        effect.middle_scale = keep
        effect.reference_factor = keep
        effect.conclusive = blocked
        return effect

    # The two measuring attacks share the analyzer front end.
    if plan.config.protocol == BB84:
        basis = np.where(u[:, rng.COL_EVE_BASIS] < 0.5, 0.0, np.pi / 2.0)
    else:
        basis = np.zeros(m)
    mu_pair = 2.0 * plan.mu_emitted * model.efficiency
    delta = phi_a - basis
    mu_plus = mu_pair * np.cos(delta / 2.0) ** 2
    mu_minus = mu_pair * np.sin(delta / 2.0) ** 2
    click_plus = u[:, rng.COL_EVE_PLUS] < 1.0 - np.exp(-mu_plus)
    click_minus = u[:, rng.COL_EVE_MINUS] < 1.0 - np.exp(-mu_minus)
    conclusive = click_plus ^ click_minus
    resent = np.where(click_minus, basis + np.pi, basis)
    effect.phi_a = np.where(conclusive, resent, phi_a)
    effect.conclusive = conclusive
    if isinstance(model, InterceptResend):
        swallowed = (~conclusive).astype(float)
        effect.middle_scale = 1.0 - swallowed
        effect.reference_factor = 1.0 - swallowed
    else:  # SuppressInconclusive keeps the reference, strips the signal
        effect.lone_reference = ~conclusive
    return effect


def _simulate_chunk(plan: SessionPlan, chunk_index: int) -> tuple:
    cfgn = plan.config
    lo = chunk_index * rng.CHUNK
    hi = min(cfgn.n_slots, lo + rng.CHUNK)
    u = rng.chunk_uniforms(cfgn.seed, rng.PURPOSE_SESSION, chunk_index)[: hi - lo]
    a_sym, b_sym, phi_a, phi_b = _symbols(cfgn.protocol, u)

    eve = _apply_eve(cfgn.eve, plan, u, phi_a)
    launch = cfgn.launch_photons

    mu_d0 = plan.d0_middle.evaluate(eve.phi_a, phi_b) * launch * eve.middle_scale
    mu_d0 = np.where(eve.lone_reference, plan.lone_reference_d0, mu_d0)
    click_d0 = u[:, rng.COL_CLICK_D0] < click_probability(mu_d0, cfgn.detector)

    if plan.d1_middle is not None:
        mu_d1 = plan.d1_middle.evaluate(eve.phi_a, phi_b) * launch * eve.middle_scale
        mu_d1 = np.where(eve.lone_reference, plan.lone_reference_d1, mu_d1)
        click_d1 = u[:, rng.COL_CLICK_D1] < click_probability(mu_d1, cfgn.detector)
    else:
        click_d1 = np.zeros(hi - lo, dtype=bool)

    reference = (
        plan.reference_expected * eve.reference_factor
        > REFERENCE_FRACTION * plan.reference_expected
    )
    alarm = (
        plan.monitor_expected_p2 * eve.monitor_factor
        > cfgn.monitor.alarm_ratio * plan.monitor_expected_p2
    )
    return a_sym, b_sym, click_d0, click_d1, reference, alarm, eve.conclusive


_POOL_PLAN: SessionPlan | None = None


def _pool_init(plan: SessionPlan) -> None:
    global _POOL_PLAN
    _POOL_PLAN = plan


def _pool_chunk(chunk_index: int) -> tuple:
    assert _POOL_PLAN is not None
    return _simulate_chunk(_POOL_PLAN, chunk_index)


def run_session(plan: SessionPlan) -> SlotRecords:
    """Simulate every slot of the configured session.

    Work is split over fixed-size slot chunks whose randomness depends only
    on the chunk index, so the result is byte-identical for any worker
    count.
    """
    cfgn = plan.config
    n_chunks = -(-cfgn.n_slots // rng.CHUNK)
    if cfgn.workers > 1 and n_chunks > 1:
        with ProcessPoolExecutor(
            max_workers=min(cfgn.workers, n_chunks),
            initializer=_pool_init,
            initargs=(plan,),
        ) as pool:
            parts = list(pool.map(_pool_chunk, range(n_chunks)))
    else:
        parts = [_simulate_chunk(plan, c) for c in range(n_chunks)]

    cols = [np.concatenate([p[i] for p in parts]) for i in range(7)]
    click_d0 = apply_dead_time(
        cols[2], cfgn.detector.dead_time_ns, cfgn.slot_period_ns
    )
    click_d1 = apply_dead_time(
        cols[3], cfgn.detector.dead_time_ns, cfgn.slot_period_ns
    )
    return SlotRecords(
        protocol=cfgn.protocol,
        alice_symbol=cols[0],
        bob_symbol=cols[1],
        click_d0=click_d0,
        click_d1=click_d1,
        reference_seen=cols[4],
        monitor_alarm=cols[5],
        eve_conclusive=cols[6],
    )


@dataclass(frozen=True)
class SiftedKey:
    """Bit pairs surviving the sift, with their slot indices."""

    alice_bits: np.ndarray
    bob_bits: np.ndarray
    slots: np.ndarray

    @property
    def length(self) -> int:
        return int(self.alice_bits.shape[0])

    @property
    def errors(self) -> int:
        return int(np.count_nonzero(self.alice_bits != self.bob_bits))


def sift(records: SlotRecords, protocol: str | None = None) -> SiftedKey:
    """Keep the slots both stations agree to use and extract the bit pairs.

    Raises:
        ProtocolMismatchError: when ``protocol`` names a different protocol
            than the one the records were produced with.
        EmptyKeyError: when nothing survives the sift.
    """
    if protocol is not None and protocol != records.protocol:
        raise ProtocolMismatchError(
            f"records carry {records.protocol!r}, sift asked for {protocol!r}"
        )
    usable = records.reference_seen & ~records.monitor_alarm
    if records.protocol == TWO_STATE:
        kept = usable & records.click_d0
        alice = records.alice_symbol[kept].astype(np.uint8)
        bob = records.bob_symbol[kept].astype(np.uint8)
    else:
        basis_match = (records.alice_symbol % 2) == records.bob_symbol
        one_click = records.click_d0 ^ records.click_d1
        kept = usable & basis_match & one_click
        alice = (records.alice_symbol[kept] >= 2).astype(np.uint8)
        bob = records.click_d1[kept].astype(np.uint8)
    slots = np.flatnonzero(kept)
    if slots.size == 0:
        raise EmptyKeyError(
            "no slots survived the sift; the session is too short or too lossy"
        )
    return SiftedKey(alice, bob, slots)


def wilson_interval(errors: int, total: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """95 percent score interval for a binomial proportion."""
    if total <= 0:
        return (0.0, 1.0)
    p = errors / total
    zz = z * z / total
    center = (p + zz / 2.0) / (1.0 + zz)
    half = (z / (1.0 + zz)) * math.sqrt(p * (1.0 - p) / total + zz / (4.0 * total))
    return (max(0.0, center - half), min(1.0, center + half))


@dataclass(frozen=True)
class SessionStats:
    """Aggregate outcomes of one session."""

    protocol: str
    n_slots: int
    n_sifted: int
    n_errors: int
    qber: float
    qber_low: float
    qber_high: float
    sift_rate: float
    alarm_rate: float
    missing_reference_rate: float
    double_click_rate: float
    eve_conclusive_rate: float
    mean_photon_number: float
    attenuation_roundtrip: float


def session_stats(records: SlotRecords, plan: SessionPlan) -> SessionStats:
    """Summary rates; an empty sift yields NaN error rates instead of raising."""
    n = records.n_slots
    try:
        key = sift(records)
        sifted, errors = key.length, key.errors
        qber = errors / sifted
        low, high = wilson_interval(errors, sifted)
    except EmptyKeyError:
        sifted = errors = 0
        qber = low = high = float("nan")
    return SessionStats(
        protocol=records.protocol,
        n_slots=n,
        n_sifted=sifted,
        n_errors=errors,
        qber=qber,
        qber_low=low,
        qber_high=high,
        sift_rate=sifted / n,
        alarm_rate=float(np.count_nonzero(records.monitor_alarm)) / n,
        missing_reference_rate=float(np.count_nonzero(~records.reference_seen)) / n,
        double_click_rate=float(np.count_nonzero(records.click_d0 & records.click_d1)) / n,
        eve_conclusive_rate=float(np.count_nonzero(records.eve_conclusive)) / n,
        mean_photon_number=plan.mu_emitted,
        attenuation_roundtrip=plan.attenuation_roundtrip,
    )


def reference_slot(plan: SessionPlan, slot_index: int) -> dict:
    """Scalar re-simulation of one slot, for checking the array pipeline.

    Deliberately written with plain Python arithmetic and per-branch logic
    rather than array operations.
    """
    cfgn = plan.config
    u = rng.slot_uniforms(cfgn.seed, rng.PURPOSE_SESSION, slot_index, 1)[0]
    if cfgn.protocol == TWO_STATE:
        a_sym = 1 if u[rng.COL_PHI_A] >= 0.5 else 0
        b_sym = 1 if u[rng.COL_PHI_B] >= 0.5 else 0
        phi_a, phi_b = a_sym * math.pi, b_sym * math.pi
    else:
        a_sym = min(int(u[rng.COL_PHI_A] * 4), 3)
        b_sym = min(int(u[rng.COL_PHI_B] * 2), 1)
        phi_a, phi_b = a_sym * math.pi / 2.0, b_sym * math.pi / 2.0

    middle_scale = 1.0
    reference_factor = 1.0
    monitor_factor = 1.0
    lone = False
    conclusive = False
    model = cfgn.eve
    if isinstance(model, BeamSplit):
        middle_scale = reference_factor = monitor_factor = 1.0 - model.fraction
        p_click = 1.0 - math.exp(-model.fraction * plan.mu_emitted * model.efficiency)
        conclusive = u[rng.COL_EVE_MINUS] < p_click
    elif isinstance(model, StrongProbe):
        monitor_factor = model.intensity_ratio
    elif isinstance(model, BlockSlots):
        if u[rng.COL_EVE_BLOCK] < model.fraction:
            middle_scale = reference_factor = 0.0
            conclusive = True
    elif isinstance(model, (InterceptResend, SuppressInconclusive)):
        if cfgn.protocol == BB84 and u[rng.COL_EVE_BASIS] >= 0.5:
            basis = math.pi / 2.0
        else:
            basis = 0.0
        mu_pair = 2.0 * plan.mu_emitted * model.efficiency
        mu_plus = mu_pair * math.cos((phi_a - basis) / 2.0) ** 2
        mu_minus = mu_pair * math.sin((phi_a - basis) / 2.0) ** 2
        cp = u[rng.COL_EVE_PLUS] < 1.0 - math.exp(-mu_plus)
        cm = u[rng.COL_EVE_MINUS] < 1.0 - math.exp(-mu_minus)
        conclusive = cp != cm
        if conclusive:
            phi_a = basis + math.pi if cm else basis
        elif isinstance(model, InterceptResend):
            middle_scale = reference_factor = 0.0
        else:
            lone = True

    launch = cfgn.launch_photons
    if lone:
        mu_d0 = plan.lone_reference_d0
        mu_d1 = plan.lone_reference_d1
    else:
        mu_d0 = float(plan.d0_middle.evaluate(phi_a, phi_b)) * launch * middle_scale
        mu_d1 = (
            float(plan.d1_middle.evaluate(phi_a, phi_b)) * launch * middle_scale
            if plan.d1_middle is not None
            else 0.0
        )
    det = cfgn.detector
    click_d0 = u[rng.COL_CLICK_D0] < click_probability(mu_d0, det)
    click_d1 = (
        plan.d1_middle is not None
        and u[rng.COL_CLICK_D1] < click_probability(mu_d1, det)
    )
    return {
        "alice_symbol": a_sym,
        "bob_symbol": b_sym,
        "click_d0": bool(click_d0),
        "click_d1": bool(click_d1),
        "reference_seen": reference_factor > REFERENCE_FRACTION,
        "monitor_alarm": monitor_factor > cfgn.monitor.alarm_ratio,
        "eve_conclusive": bool(conclusive),
    }
