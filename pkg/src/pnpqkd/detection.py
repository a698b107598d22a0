"""Photon statistics at the detectors and the sender-side intensity monitor.

Weak coherent pulses click with probability 1 - (1 - p_dark) exp(-eta mu).
The timing reference is a strong pulse read by a classical threshold
detector, so its presence test is deterministic in the incident intensity.
The monitor compares a measured intensity against its calibrated expectation
and alarms only on the high side; low readings look like ordinary line loss
and are handled by the loss accounting instead.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError


@dataclass(frozen=True)
class DetectorSpec:
    """Gated single-photon detector."""

    efficiency: float = 0.2
    dark_count_prob: float = 1e-4
    gate_ns: float = 2.0
    dead_time_ns: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.efficiency <= 1.0:
            raise DomainError(f"detector efficiency {self.efficiency!r} outside [0, 1]")
        if not 0.0 <= self.dark_count_prob < 1.0:
            raise DomainError(
                f"dark count probability {self.dark_count_prob!r} outside [0, 1)"
            )
        if self.gate_ns <= 0.0:
            raise ConfigurationError("detector gate must be positive")
        if self.dead_time_ns < 0.0:
            raise ConfigurationError("dead time must be >= 0")


@dataclass(frozen=True)
class MonitorSpec:
    """Threshold rule for the sender's pulse-energy monitor."""

    alarm_ratio: float = 2.0

    def __post_init__(self) -> None:
        if self.alarm_ratio <= 1.0:
            raise ConfigurationError(
                f"alarm ratio {self.alarm_ratio!r} must exceed 1; the expected "
                "intensity itself must not alarm"
            )


def click_probability(mean_photons, det: DetectorSpec):
    """Probability that a gate containing ``mean_photons`` produces a click."""
    mu = np.asarray(mean_photons, dtype=float)
    p = 1.0 - (1.0 - det.dark_count_prob) * np.exp(-det.efficiency * mu)
    return p if p.shape else float(p)


def sample_clicks(mean_photons, det: DetectorSpec, uniforms) -> np.ndarray:
    """Vector of click booleans given one uniform per gate."""
    return np.asarray(uniforms) < click_probability(mean_photons, det)


def reference_seen(intensity, expected: float, fraction: float = 0.5):
    """Threshold test for the strong timing pulse (classical detector)."""
    if expected <= 0.0:
        raise ConfigurationError("expected reference intensity must be positive")
    result = np.asarray(intensity, dtype=float) > fraction * expected
    return result if result.shape else bool(result)


def monitor_alarm(measured, expected: float, spec: MonitorSpec):
    """High-side comparison of monitor readings against the calibration."""
    if expected <= 0.0:
        raise ConfigurationError("expected monitor intensity must be positive")
    result = np.asarray(measured, dtype=float) > spec.alarm_ratio * expected
    return result if result.shape else bool(result)


def required_attenuation(target_mu: float, unattenuated_mu: float) -> float:
    """Round-trip intensity factor that brings the emitted pulse to ``target_mu``.

    ``unattenuated_mu`` is the mean photon number the pulse would have with
    the attenuator wide open. The factor is clamped at 1 (attenuators cannot
    amplify) with a warning, since running brighter than intended weakens the
    protocol's security assumptions rather than its function.
    """
    if target_mu <= 0.0 or unattenuated_mu <= 0.0:
        raise DomainError("photon numbers must be positive")
    a = target_mu / unattenuated_mu
    if a > 1.0:
        warnings.warn(
            f"requested mean photon number {target_mu:g} exceeds the "
            f"unattenuated {unattenuated_mu:g}; attenuator left open",
            stacklevel=2,
        )
        return 1.0
    return a


def apply_dead_time(
    clicks: np.ndarray, dead_time_ns: float, slot_period_ns: float
) -> np.ndarray:
    """Suppress clicks falling inside a previous click's dead window."""
    if dead_time_ns <= 0.0:
        return clicks
    if slot_period_ns <= 0.0:
        raise ConfigurationError("slot period must be positive")
    blocked_slots = int(np.floor(dead_time_ns / slot_period_ns))
    if blocked_slots == 0:
        return clicks
    out = clicks.copy()
    idx = np.flatnonzero(out)
    last_kept = -(blocked_slots + 1)
    for i in idx:
        if i - last_kept <= blocked_slots:
            out[i] = False
        else:
            last_kept = i
    return out
