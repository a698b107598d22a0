"""Port-graph interferometer model and the discrete-event pulse tracer.

An interferometer is a set of named component nodes whose ports are wired by
edges. Light is injected by sources, split at couplers, delayed in fibers,
and absorbed at detector ports. ``trace`` expands the launched pulse
breadth-first into :class:`PulseSegment` records at the detector ports;
``bin_and_interfere`` then reduces segments to per-port time-bin intensities,
summing coherently inside a bin (with a Gaussian envelope-overlap factor for
imperfectly aligned arrivals) and incoherently across bins.

Segment expansion terminates because every closed loop in a physical network
passes couplers or attenuators with amplitude factor < 1, and because both an
amplitude cutoff and a time horizon prune the tree. A hard event budget turns
runaway configurations into a diagnosable error instead of a hang.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

import numpy as np

from .components import Component, Coupler, PhaseModulator, component_ports, scatter
from .errors import ConfigurationError, ResourceLimitError

Port = tuple[str, str]

#: Gaussian rms width (ns) of the default pulse envelope; 300 ps full width at
#: half maximum.
DEFAULT_ENVELOPE_SIGMA_NS = 0.3 / (2.0 * np.sqrt(2.0 * np.log(2.0)))


@dataclass(frozen=True)
class Edge:
    """Bidirectional fiber link between two ports with delay and amplitude loss."""

    a: Port
    b: Port
    delay_ns: float = 0.0
    loss: float = 1.0

    def __post_init__(self) -> None:
        if self.delay_ns < 0.0:
            raise ConfigurationError(f"edge delay {self.delay_ns!r} must be >= 0")
        if not 0.0 < self.loss <= 1.0:
            raise ConfigurationError(f"edge loss factor {self.loss!r} outside (0, 1]")


@dataclass(frozen=True, eq=False)
class SourceSpec:
    """Pulse launched into ``port`` at ``time_ns`` with a scalar amplitude and polarization."""

    port: Port
    time_ns: float = 0.0
    amplitude: complex = 1.0 + 0.0j
    polarization: np.ndarray = field(
        default_factory=lambda: np.array([1.0, 0.0], dtype=complex)
    )

    def __post_init__(self) -> None:
        pol = np.asarray(self.polarization, dtype=complex)
        if pol.shape != (2,):
            raise ConfigurationError("source polarization must be a length-2 vector")
        object.__setattr__(self, "polarization", pol)


@dataclass(frozen=True, eq=False)
class InterferometerSpec:
    """Complete network description.

    ``detectors`` maps a detector name to the component port whose outgoing
    light it absorbs; detector ports must not carry an edge. ``meta`` holds
    builder-provided bookkeeping (expected bin times, modulator node names,
    calibration hints) that the analysis layer uses but the tracer ignores.
    """

    nodes: Mapping[str, Component]
    edges: tuple[Edge, ...]
    sources: tuple[SourceSpec, ...]
    detectors: Mapping[str, Port]
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        seen: dict[Port, str] = {}
        for name, comp in self.nodes.items():
            for p in component_ports(comp):
                seen[(name, p)] = name
        edged: set[Port] = set()
        for e in self.edges:
            for end in (e.a, e.b):
                if end not in seen:
                    raise ConfigurationError(f"edge endpoint {end!r} is not a known port")
                if end in edged:
                    raise ConfigurationError(f"port {end!r} carries more than one edge")
                edged.add(end)
        for s in self.sources:
            if s.port not in seen:
                raise ConfigurationError(f"source port {s.port!r} is not a known port")
        if not self.detectors:
            raise ConfigurationError("spec needs at least one detector")
        for det, port in self.detectors.items():
            if port not in seen:
                raise ConfigurationError(f"detector {det!r} port {port!r} is not a known port")
            if port in edged:
                raise ConfigurationError(
                    f"detector {det!r} port {port!r} must not carry an outgoing edge"
                )

    def with_node(self, name: str, comp: Component) -> "InterferometerSpec":
        """Copy of the spec with one node replaced (used for attenuator calibration)."""
        if name not in self.nodes:
            raise ConfigurationError(f"unknown node {name!r}")
        nodes = dict(self.nodes)
        nodes[name] = comp
        return replace(self, nodes=nodes)


@dataclass(frozen=True, eq=False)
class PulseSegment:
    """One coherent pulse copy absorbed at a detector port.

    ``path`` lists every node traversed from the source; ``generation``
    counts coupler traversals. ``modulations`` records, for each pass through
    an actively gated modulator, the node name and the single-pass phase that
    was applied; the phase-decomposition machinery keys on these tags.
    """

    port: str
    time_ns: float
    amplitude: complex
    polarization: np.ndarray
    path: tuple[str, ...]
    generation: int
    modulations: tuple[tuple[str, float], ...] = ()

    @property
    def intensity(self) -> float:
        f = self.amplitude * self.polarization
        return float(np.real(np.vdot(f, f)))


@dataclass(frozen=True)
class TraceConfig:
    """Expansion limits and binning parameters for one trace.

    The amplitude cutoff is relative to the strongest source and must stay
    below the weakest path of interest; the default keeps paths down to
    intensity 1e-14 of the launch, which covers strongly asymmetric couplers
    at bright-trace level. Sessions with real attenuation set their own.
    """

    time_horizon_ns: float
    amplitude_cutoff: float = 1e-7
    max_events: int = 1_000_000
    bin_width_ns: float = 2.0
    envelope_sigma_ns: float = DEFAULT_ENVELOPE_SIGMA_NS

    def __post_init__(self) -> None:
        if self.time_horizon_ns <= 0.0:
            raise ConfigurationError("time horizon must be positive")
        if not 0.0 < self.amplitude_cutoff < 1.0:
            raise ConfigurationError("amplitude cutoff must lie in (0, 1)")
        if self.bin_width_ns <= 0.0 or self.envelope_sigma_ns <= 0.0:
            raise ConfigurationError("bin width and envelope sigma must be positive")


def trace(spec: InterferometerSpec, cfg: TraceConfig) -> list[PulseSegment]:
    """Expand all sources through the network and collect detector segments.

    Args:
        spec: validated network description.
        cfg: expansion limits. ``cfg.time_horizon_ns`` must exceed the longest
            path delay of interest; segments beyond it are pruned, as are
            segments whose amplitude falls below ``amplitude_cutoff`` relative
            to the strongest source.

    Returns:
        Deterministically ordered segments absorbed at detector ports. The
        same spec and config always produce the identical list.

    Raises:
        ResourceLimitError: when the expansion exceeds ``cfg.max_events``.
    """
    adjacency: dict[Port, Edge] = {}
    for e in spec.edges:
        adjacency[e.a] = e
        adjacency[e.b] = e
    detector_by_port = {port: name for name, port in spec.detectors.items()}

    launch = max(
        (abs(s.amplitude) * float(np.linalg.norm(s.polarization)) for s in spec.sources),
        default=0.0,
    )
    if launch == 0.0:
        return []
    floor = cfg.amplitude_cutoff * launch

    out: list[PulseSegment] = []
    # Work item: node, in_port, t, amplitude, polarization, path, generation, mods
    queue: deque = deque()
    for s in spec.sources:
        node, port = s.port
        if s.time_ns <= cfg.time_horizon_ns:
            queue.append(
                (node, port, s.time_ns, complex(s.amplitude), s.polarization, (node,), 0, ())
            )

    events = 0
    while queue:
        node, in_port, t, amp, pol, path, gen, mods = queue.popleft()
        events += 1
        if events > cfg.max_events:
            raise ResourceLimitError(
                f"trace exceeded max_events={cfg.max_events}; raise "
                f"amplitude_cutoff (currently {cfg.amplitude_cutoff:g}) or lower "
                f"time_horizon_ns (currently {cfg.time_horizon_ns:g})"
            )
        comp = spec.nodes[node]
        is_coupler = isinstance(comp, Coupler)
        for out_name, factor, matrix, comp_delay in scatter(comp, in_port, t):
            amp2 = amp * factor
            pol2 = pol if matrix is None else matrix @ pol
            if abs(amp2) * float(np.linalg.norm(pol2)) < floor:
                continue
            t2 = t + comp_delay
            if t2 > cfg.time_horizon_ns:
                continue
            mods2 = mods
            if isinstance(comp, PhaseModulator) and matrix is not None:
                w = comp.window_at(t)
                mods2 = mods + ((node, w.phase_rad),)
            gen2 = gen + 1 if is_coupler else gen
            out_port = (node, out_name)
            det = detector_by_port.get(out_port)
            if det is not None:
                out.append(
                    PulseSegment(det, t2, amp2, pol2, path, gen2, mods2)
                )
                continue
            edge = adjacency.get(out_port)
            if edge is None:
                continue  # open port: light leaves the instrument
            far = edge.b if out_port == edge.a else edge.a
            t3 = t2 + edge.delay_ns
            if t3 > cfg.time_horizon_ns:
                continue
            amp3 = amp2 * edge.loss
            if abs(amp3) * float(np.linalg.norm(pol2)) < floor:
                continue
            queue.append(
                (far[0], far[1], t3, amp3, pol2, path + (far[0],), gen2, mods2)
            )
    return out


def envelope_overlap(dt_ns: float, sigma_ns: float) -> float:
    """Amplitude overlap exp(-dt^2 / (8 sigma^2)) of two Gaussian envelopes offset by dt."""
    x = dt_ns / sigma_ns
    return float(np.exp(-0.125 * x * x))


@dataclass(frozen=True)
class BinnedIntensity:
    """Total intensity of one detector time bin."""

    port: str
    bin_ns: float
    intensity: float
    n_segments: int


def bin_and_interfere(
    segments: Iterable[PulseSegment],
    bin_width_ns: float = 2.0,
    envelope_sigma_ns: float = DEFAULT_ENVELOPE_SIGMA_NS,
) -> dict[str, list[BinnedIntensity]]:
    """Reduce segments to per-port binned intensities.

    Segments in the same bin add coherently; the interference cross term is
    weighted by the Gaussian envelope overlap of their arrival times, so
    exactly aligned paths interfere fully and partially overlapping ones
    proportionally less. Segments in different bins never interfere.
    """
    grouped: dict[tuple[str, int], list[PulseSegment]] = {}
    for s in segments:
        key = (s.port, int(np.floor(s.time_ns / bin_width_ns)))
        grouped.setdefault(key, []).append(s)

    result: dict[str, list[BinnedIntensity]] = {}
    for (port, idx), segs in sorted(grouped.items()):
        fields = [s.amplitude * s.polarization for s in segs]
        times = [s.time_ns for s in segs]
        total = 0.0
        for i, fi in enumerate(fields):
            total += float(np.real(np.vdot(fi, fi)))
            for j in range(i + 1, len(fields)):
                g = envelope_overlap(times[i] - times[j], envelope_sigma_ns)
                total += 2.0 * g * float(np.real(np.vdot(fi, fields[j])))
        result.setdefault(port, []).append(
            BinnedIntensity(port, idx * bin_width_ns, total, len(segs))
        )
    return result


def bin_lookup(
    bins: dict[str, list[BinnedIntensity]], port: str, time_ns: float, bin_width_ns: float
) -> BinnedIntensity | None:
    """Bin of ``port`` containing ``time_ns``, or None when it is empty."""
    target = np.floor(time_ns / bin_width_ns) * bin_width_ns
    for b in bins.get(port, ()):
        if abs(b.bin_ns - target) < 0.5 * bin_width_ns:
            return b
    return None
