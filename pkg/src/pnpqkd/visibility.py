"""Phase decomposition of traced pulses and fringe-visibility scans.

A traced detector bin is a coherent sum of path segments. Each segment's
dependence on the two programmed modulator phases is fully captured by how
many times it passed each active modulator window, so segments can be grouped
by those pass counts (and by arrival time): the group field is a fixed complex
vector and the programmed phases only rotate it. One trace therefore yields
the exact bin intensity for every phase pair, which is what makes sessions of
millions of slots affordable.

``validate_decomposition`` guards the shortcut: it re-traces the network at
holdout phases and compares against the decomposition's prediction.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .components import PhaseModulator
from .errors import ConfigurationError, DegenerateConfigurationError
from .network import (
    InterferometerSpec,
    PulseSegment,
    TraceConfig,
    bin_and_interfere,
    envelope_overlap,
    trace,
)

_TIME_DECIMALS = 9


@dataclass(frozen=True)
class PhaseGroup:
    """Segments of one bin sharing modulator pass counts and arrival time."""

    k_a: int
    k_b: int
    time_ns: float
    base_phase: float
    field: np.ndarray

    @property
    def intensity(self) -> float:
        return float(np.real(np.vdot(self.field, self.field)))


@dataclass(frozen=True)
class BinDecomposition:
    """Exact phase-to-intensity map for one detector bin.

    ``evaluate`` computes, for arrays of total modulation phases, the bin
    intensity relative to the launched pulse. ``pm_passes`` is how many
    window passes make up one total phase; each pass applies the total
    divided by that count.
    """

    port: str
    bin_ns: float
    pm_passes: int
    groups: tuple[PhaseGroup, ...]
    envelope_sigma_ns: float

    @property
    def constant(self) -> float:
        return float(sum(g.intensity for g in self.groups))

    def group_intensity(self, k_a: int, k_b: int) -> float:
        return float(
            sum(g.intensity for g in self.groups if g.k_a == k_a and g.k_b == k_b)
        )

    def evaluate(self, phi_a, phi_b):
        """Bin intensity at total phases ``phi_a``, ``phi_b`` (scalars or arrays)."""
        phi_a = np.asarray(phi_a, dtype=float)
        phi_b = np.asarray(phi_b, dtype=float)
        p = float(self.pm_passes)
        out = np.full(np.broadcast_shapes(phi_a.shape, phi_b.shape), self.constant)
        gs = self.groups
        for i in range(len(gs)):
            for j in range(i + 1, len(gs)):
                g, h = gs[i], gs[j]
                c = np.vdot(g.field, h.field) * envelope_overlap(
                    h.time_ns - g.time_ns, self.envelope_sigma_ns
                )
                if c == 0.0:
                    continue
                dk_a = (h.k_a - g.k_a) / p
                dk_b = (h.k_b - g.k_b) / p
                dbase = h.base_phase - g.base_phase
                out = out + 2.0 * np.real(
                    c * np.exp(1j * (dk_a * phi_a + dk_b * phi_b - dbase))
                )
        return out if out.shape else float(out)


@dataclass(frozen=True)
class TraceDecomposition:
    """All decomposed bins of one trace, keyed by detector port and bin index."""

    bins: dict[tuple[str, int], BinDecomposition]
    bin_width_ns: float

    def at(self, port: str, time_ns: float) -> BinDecomposition | None:
        return self.bins.get((port, int(np.floor(time_ns / self.bin_width_ns))))

    def require(self, port: str, time_ns: float) -> BinDecomposition:
        b = self.at(port, time_ns)
        if b is None:
            raise DegenerateConfigurationError(
                f"no light reaches detector {port!r} near t={time_ns:g} ns; "
                "check the topology or loosen the trace cutoff"
            )
        return b


def decompose(
    segments: list[PulseSegment],
    pm_a: str,
    pm_b: str,
    pm_passes: int,
    bin_width_ns: float,
    envelope_sigma_ns: float,
) -> TraceDecomposition:
    """Group traced segments by bin, modulator pass counts, and arrival time."""
    if pm_passes < 1:
        raise ConfigurationError("pm_passes must be at least 1")
    acc: dict[tuple[str, int], dict[tuple[int, int, float], list]] = {}
    for s in segments:
        k_a = k_b = 0
        base = 0.0
        for node, phase in s.modulations:
            if node == pm_a:
                k_a += 1
            elif node == pm_b:
                k_b += 1
            else:
                continue
            base += phase
        t = float(np.round(s.time_ns, _TIME_DECIMALS))
        bin_key = (s.port, int(np.floor(s.time_ns / bin_width_ns)))
        group_key = (k_a, k_b, t)
        groups = acc.setdefault(bin_key, {})
        entry = groups.get(group_key)
        if entry is None:
            groups[group_key] = [base, s.amplitude * s.polarization]
        else:
            # Same pass counts through the same windows means the same base.
            if abs(entry[0] - base) > 1e-12:
                raise ConfigurationError(
                    f"segments in bin {bin_key!r} share pass counts "
                    f"({k_a}, {k_b}) but differ in applied phase"
                )
            entry[1] = entry[1] + s.amplitude * s.polarization

    bins: dict[tuple[str, int], BinDecomposition] = {}
    for (port, idx), groups in acc.items():
        gs = tuple(
            PhaseGroup(k_a, k_b, t, base, field)
            for (k_a, k_b, t), (base, field) in sorted(groups.items())
        )
        bins[(port, idx)] = BinDecomposition(
            port, idx * bin_width_ns, pm_passes, gs, envelope_sigma_ns
        )
    return TraceDecomposition(bins, bin_width_ns)


def decompose_spec(spec: InterferometerSpec, cfg: TraceConfig) -> TraceDecomposition:
    """Trace ``spec`` and decompose it using its meta modulator bookkeeping."""
    meta = spec.meta
    return decompose(
        trace(spec, cfg),
        meta["pm_a"],
        meta["pm_b"],
        meta["pm_passes"],
        cfg.bin_width_ns,
        cfg.envelope_sigma_ns,
    )


def with_phases(
    spec: InterferometerSpec, phi_a_rad: float, phi_b_rad: float
) -> InterferometerSpec:
    """Copy of ``spec`` with both modulators programmed to new total phases.

    Window timing is preserved; only the phase each window applies changes,
    split evenly over the ``pm_passes`` passes recorded in the meta.
    """
    passes = spec.meta["pm_passes"]
    out = spec
    for key, phi in (("pm_a", phi_a_rad), ("pm_b", phi_b_rad)):
        name = spec.meta[key]
        pm = spec.nodes[name]
        if not isinstance(pm, PhaseModulator):
            raise ConfigurationError(f"meta {key}={name!r} is not a phase modulator")
        windows = tuple(replace(w, phase_rad=phi / passes) for w in pm.windows)
        out = out.with_node(name, replace(pm, windows=windows))
    return out


def trace_config_for(spec: InterferometerSpec, **overrides) -> TraceConfig:
    """Trace limits taken from the builder meta, with keyword overrides."""
    kwargs = {
        "time_horizon_ns": spec.meta["time_horizon_ns"],
        "bin_width_ns": spec.meta.get("bin_width_ns", 2.0),
    }
    kwargs.update(overrides)
    return TraceConfig(**kwargs)


def validate_decomposition(
    spec: InterferometerSpec,
    cfg: TraceConfig,
    decomp: TraceDecomposition,
    holdout_phases: tuple[float, float] = (0.83, 2.31),
    rel_tol: float = 1e-9,
) -> None:
    """Re-trace at holdout phases and compare against the decomposition.

    The decomposition claims to predict every bin intensity for every phase
    pair from a single trace; this check catches any path whose phase
    dependence the grouping failed to capture.

    Raises:
        DegenerateConfigurationError: when prediction and re-trace disagree.
    """
    phi_a, phi_b = holdout_phases
    probe = with_phases(spec, phi_a, phi_b)
    binned = bin_and_interfere(trace(probe, cfg), cfg.bin_width_ns, cfg.envelope_sigma_ns)
    scale = max(
        (b.intensity for bs in binned.values() for b in bs), default=0.0
    )
    for port, bs in binned.items():
        for b in bs:
            d = decomp.at(port, b.bin_ns)
            predicted = 0.0 if d is None else d.evaluate(phi_a, phi_b)
            if abs(predicted - b.intensity) > rel_tol * max(scale, 1e-300):
                raise DegenerateConfigurationError(
                    f"phase decomposition mismatch at {port} t={b.bin_ns:g} ns: "
                    f"predicted {predicted!r}, traced {b.intensity!r}"
                )


@dataclass(frozen=True)
class FringeScan:
    """Sampled interference fringe of one detector bin."""

    port: str
    bin_ns: float
    phi_a_rad: np.ndarray
    intensity: np.ndarray

    @property
    def visibility(self) -> float:
        hi = float(np.max(self.intensity))
        lo = float(np.min(self.intensity))
        if hi + lo <= 0.0:
            raise DegenerateConfigurationError(
                f"no light in the scanned bin at {self.port} t={self.bin_ns:g} ns"
            )
        return (hi - lo) / (hi + lo)


def visibility_scan(
    spec: InterferometerSpec,
    cfg: TraceConfig | None = None,
    *,
    port: str = "D0",
    bin_name: str = "middle",
    phi_b_rad: float = 0.0,
    points: int = 256,
    validate: bool = False,
) -> FringeScan:
    """Scan the sender phase over a full turn and sample the fringe.

    One trace plus the phase decomposition covers all ``points`` samples.
    With ``validate`` set, a second trace at holdout phases cross-checks the
    decomposition before it is trusted.
    """
    if points < 4:
        raise ConfigurationError("a fringe scan needs at least 4 points")
    if cfg is None:
        cfg = trace_config_for(spec)
    decomp = decompose_spec(spec, cfg)
    if validate:
        validate_decomposition(spec, cfg, decomp)
    bin_time = spec.meta["bins"][port][bin_name]
    d = decomp.require(port, bin_time)
    phis = np.arange(points) * (2.0 * np.pi / points)
    intensity = d.evaluate(phis, np.full(points, phi_b_rad))
    return FringeScan(port, d.bin_ns, phis, np.asarray(intensity))
