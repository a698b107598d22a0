"""Optical component specifications and their port-level scattering rules.

Every component is a small frozen dataclass. ``component_ports`` names the
ports a component exposes and ``scatter`` maps an input port to the list of
``(output port, scalar amplitude, jones matrix or None, added delay ns)``
contributions. ``None`` stands for the identity so the trace engine can skip
the matrix product.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import jones
from .errors import ConfigurationError, DomainError

BIREFRINGENCE_UNITARITY_TOL = 1e-12


@dataclass(frozen=True)
class Coupler:
    """Lossless 2x2 coupler, ports l0/l1 on one side and r0/r1 on the other."""

    t: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.t <= 1.0:
            raise DomainError(f"coupler transmission t={self.t!r} outside [0, 1]")

    @property
    def r(self) -> float:
        return float(np.sqrt(1.0 - self.t * self.t))


@dataclass(frozen=True)
class Mirror:
    """Plain mirror, single port ``a``; identity Jones matrix by convention."""


@dataclass(frozen=True)
class FaradayMirror:
    """45-degree Faraday rotator and mirror as one composite, single port ``a``."""


@dataclass(frozen=True)
class FaradayRotator:
    """Non-reciprocal rotator: the same rotation applies in both directions."""

    theta_rad: float


@dataclass(frozen=True)
class PmWindow:
    """Half-open activation window [start_ns, end_ns) with a single-pass phase."""

    start_ns: float
    end_ns: float
    phase_rad: float

    def __post_init__(self) -> None:
        if not self.end_ns > self.start_ns:
            raise ConfigurationError(
                f"modulator window end {self.end_ns!r} must exceed start {self.start_ns!r}"
            )


@dataclass(frozen=True)
class PhaseModulator:
    """Time-gated phase modulator with polarization dependence.

    Inside an active window the matrix is diag(e^{i phi}, gamma e^{i(phi+delta)});
    outside every window it is the identity (static birefringence of the device
    belongs to the surrounding fiber segments). Windows must not overlap.
    """

    windows: tuple[PmWindow, ...] = ()
    delta_rad: float = 0.2
    gamma: float = 0.98

    def __post_init__(self) -> None:
        if not 0.0 <= self.gamma <= 1.0:
            raise DomainError(f"modulator gamma={self.gamma!r} outside [0, 1]")
        spans = sorted((w.start_ns, w.end_ns) for w in self.windows)
        for (_, prev_end), (start, _) in zip(spans, spans[1:]):
            if start < prev_end:
                raise ConfigurationError("modulator windows overlap")

    def window_at(self, t_ns: float) -> PmWindow | None:
        for w in self.windows:
            if w.start_ns <= t_ns < w.end_ns:
                return w
        return None


@dataclass(frozen=True, eq=False)
class FiberSegment:
    """Fiber span with propagation delay, attenuation, and fixed birefringence.

    ``birefringence`` is the forward-direction Jones matrix (identity when
    None) and must be unitary; loss is carried separately via the length and
    per-km attenuation so the matrix stays a pure rotation of the state.
    """

    delay_ns: float
    length_km: float = 0.0
    loss_db_per_km: float = 0.0
    birefringence: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.delay_ns < 0.0:
            raise DomainError(f"fiber delay {self.delay_ns!r} must be >= 0")
        if self.length_km < 0.0 or self.loss_db_per_km < 0.0:
            raise DomainError("fiber length and attenuation must be >= 0")
        if self.birefringence is not None:
            b = np.asarray(self.birefringence, dtype=complex)
            if b.shape != (2, 2):
                raise ConfigurationError("fiber birefringence must be a 2x2 matrix")
            if not jones.is_unitary(b, BIREFRINGENCE_UNITARITY_TOL):
                raise ConfigurationError(
                    "fiber birefringence must be unitary within "
                    f"{BIREFRINGENCE_UNITARITY_TOL:g}"
                )
            object.__setattr__(self, "birefringence", b)

    @property
    def amplitude_transmission(self) -> float:
        return float(10.0 ** (-self.length_km * self.loss_db_per_km / 20.0))


@dataclass(frozen=True)
class Attenuator:
    """Variable attenuator applying a scalar amplitude factor per pass."""

    factor: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.factor <= 1.0:
            raise DomainError(f"attenuator factor {self.factor!r} outside [0, 1]")


Component = (
    Coupler
    | Mirror
    | FaradayMirror
    | FaradayRotator
    | PhaseModulator
    | FiberSegment
    | Attenuator
)

_TWO_PORT = ("a", "b")


def component_ports(c: Component) -> tuple[str, ...]:
    if isinstance(c, Coupler):
        return ("l0", "l1", "r0", "r1")
    if isinstance(c, (Mirror, FaradayMirror)):
        return ("a",)
    return _TWO_PORT


def pm_matrix(pm: PhaseModulator, t_ns: float) -> np.ndarray:
    """Jones matrix of a modulator at arrival time ``t_ns`` (identity off-window)."""
    w = pm.window_at(t_ns)
    if w is None:
        return np.eye(2, dtype=complex)
    return jones.modulator_matrix(w.phase_rad, pm.delta_rad, pm.gamma)


def scatter(
    c: Component, in_port: str, t_ns: float
) -> list[tuple[str, complex, np.ndarray | None, float]]:
    """Output contributions for a unit-amplitude arrival at ``in_port``.

    Returns ``(out_port, amplitude factor, jones or None, added delay ns)``
    tuples. Reciprocal two-port elements transpose their matrix on the b->a
    direction; the Faraday rotator deliberately does not.
    """
    if isinstance(c, Coupler):
        tt, rr = complex(c.t), 1j * c.r
        table = {
            "l0": (("r0", tt), ("r1", rr)),
            "l1": (("r0", rr), ("r1", tt)),
            "r0": (("l0", tt), ("l1", rr)),
            "r1": (("l0", rr), ("l1", tt)),
        }
        return [(p, a, None, 0.0) for p, a in table[in_port] if a != 0.0]
    if isinstance(c, Mirror):
        return [("a", 1.0 + 0.0j, None, 0.0)]
    if isinstance(c, FaradayMirror):
        return [("a", 1.0 + 0.0j, jones.faraday_mirror_matrix(), 0.0)]
    if isinstance(c, FaradayRotator):
        out = "b" if in_port == "a" else "a"
        return [(out, 1.0 + 0.0j, jones.faraday_rotator_matrix(c.theta_rad), 0.0)]
    if isinstance(c, PhaseModulator):
        out = "b" if in_port == "a" else "a"
        w = c.window_at(t_ns)
        m = None if w is None else jones.modulator_matrix(w.phase_rad, c.delta_rad, c.gamma)
        # Diagonal, so forward and transposed backward action coincide.
        return [(out, 1.0 + 0.0j, m, 0.0)]
    if isinstance(c, FiberSegment):
        out = "b" if in_port == "a" else "a"
        b = c.birefringence
        if b is not None and in_port == "b":
            b = b.T
        return [(out, complex(c.amplitude_transmission), b, c.delay_ns)]
    if isinstance(c, Attenuator):
        out = "b" if in_port == "a" else "a"
        return [(out, complex(c.factor), None, 0.0)]
    raise ConfigurationError(f"unknown component type {type(c).__name__}")
