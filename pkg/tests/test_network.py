"""Trace engine behavior on small hand-built port graphs."""

import numpy as np
import pytest

from pnpqkd import components as comp
from pnpqkd.errors import ConfigurationError, ResourceLimitError
from pnpqkd.network import (
    DEFAULT_ENVELOPE_SIGMA_NS,
    Edge,
    InterferometerSpec,
    PulseSegment,
    SourceSpec,
    TraceConfig,
    bin_and_interfere,
    bin_lookup,
    envelope_overlap,
    trace,
)

ROOT2 = np.sqrt(0.5)


def mz_spec(delay_short=3.0, delay_long=3.0, pm_windows=(), loss_db=0.0):
    nodes = {
        "C1": comp.Coupler(ROOT2),
        "C2": comp.Coupler(ROOT2),
        "FS": comp.FiberSegment(delay_short),
        "FL": comp.FiberSegment(delay_long, length_km=1.0, loss_db_per_km=loss_db),
    }
    edges = [
        Edge(("C1", "r0"), ("FS", "a")),
        Edge(("FS", "b"), ("C2", "l0")),
    ]
    if pm_windows:
        nodes["PM"] = comp.PhaseModulator(pm_windows, delta_rad=0.0, gamma=1.0)
        edges += [
            Edge(("C1", "r1"), ("PM", "a")),
            Edge(("PM", "b"), ("FL", "a")),
            Edge(("FL", "b"), ("C2", "l1")),
        ]
    else:
        edges += [
            Edge(("C1", "r1"), ("FL", "a")),
            Edge(("FL", "b"), ("C2", "l1")),
        ]
    return InterferometerSpec(
        nodes,
        tuple(edges),
        (SourceSpec(("C1", "l0")),),
        {"D0": ("C2", "r0"), "D1": ("C2", "r1")},
    )


def total_intensity(bins):
    return sum(b.intensity for per_port in bins.values() for b in per_port)


class TestTrace:
    def test_balanced_output_ports(self):
        segs = trace(mz_spec(), TraceConfig(time_horizon_ns=20.0))
        bins = bin_and_interfere(segs)
        d0 = bins["D0"][0].intensity
        d1 = bins["D1"][0].intensity
        assert d0 == pytest.approx(0.0, abs=1e-15)
        assert d1 == pytest.approx(1.0, abs=1e-12)

    def test_energy_conserved_when_lossless(self):
        # Arms separated by more than a bin: no interference, four paths,
        # intensities must still sum to the launched unit.
        segs = trace(mz_spec(3.0, 9.0), TraceConfig(time_horizon_ns=20.0))
        bins = bin_and_interfere(segs)
        assert total_intensity(bins) == pytest.approx(1.0, abs=1e-12)
        assert len(bins["D0"]) == 2 and len(bins["D1"]) == 2
        for per_port in bins.values():
            for b in per_port:
                assert b.intensity == pytest.approx(0.25, abs=1e-12)

    def test_fiber_loss_applied_once_per_pass(self):
        segs = trace(mz_spec(3.0, 9.0, loss_db=3.0), TraceConfig(time_horizon_ns=20.0))
        bins = bin_and_interfere(segs)
        late_d0 = bin_lookup(bins, "D0", 9.0, 2.0)
        early_d0 = bin_lookup(bins, "D0", 3.0, 2.0)
        assert late_d0.intensity == pytest.approx(0.25 * 10 ** (-0.3), rel=1e-12)
        assert early_d0.intensity == pytest.approx(0.25, rel=1e-12)

    def test_deterministic(self):
        a = trace(mz_spec(1.0, 7.0), TraceConfig(time_horizon_ns=30.0))
        b = trace(mz_spec(1.0, 7.0), TraceConfig(time_horizon_ns=30.0))
        assert len(a) == len(b)
        for x, y in zip(a, b):
            assert x.port == y.port
            assert x.time_ns == y.time_ns
            assert x.amplitude == y.amplitude
            assert x.path == y.path

    def test_generation_counts_couplers(self):
        segs = trace(mz_spec(), TraceConfig(time_horizon_ns=20.0))
        assert {s.generation for s in segs} == {2}

    def test_modulation_tagged_only_inside_window(self):
        active = trace(
            mz_spec(pm_windows=(comp.PmWindow(-1.0, 1.0, 0.9),)),
            TraceConfig(time_horizon_ns=20.0),
        )
        tagged = [s for s in segs_via(active, "FL")]
        assert tagged and all(s.modulations == (("PM", 0.9),) for s in tagged)
        idle = trace(
            mz_spec(pm_windows=(comp.PmWindow(100.0, 101.0, 0.9),)),
            TraceConfig(time_horizon_ns=20.0),
        )
        assert all(s.modulations == () for s in idle)

    def test_horizon_prunes_quietly(self):
        spec = bouncing_cavity()
        segs = trace(spec, TraceConfig(time_horizon_ns=10.0, max_events=10_000))
        assert segs == [] or all(s.time_ns <= 10.0 for s in segs)

    def test_event_budget_enforced(self):
        spec = bouncing_cavity()
        with pytest.raises(ResourceLimitError) as err:
            trace(spec, TraceConfig(time_horizon_ns=1e9, max_events=500))
        assert "max_events" in str(err.value)

    def test_open_port_drops_light(self):
        # No detector on D1's port and no edge either: half the light
        # leaves the accounting, the rest still shows up at D0.
        spec = mz_spec(3.0, 9.0)
        spec = InterferometerSpec(
            spec.nodes, spec.edges, spec.sources, {"D0": ("C2", "r0")}
        )
        bins = bin_and_interfere(trace(spec, TraceConfig(time_horizon_ns=20.0)))
        assert set(bins) == {"D0"}
        assert total_intensity(bins) == pytest.approx(0.5, abs=1e-12)


def segs_via(segments, node):
    return [s for s in segments if node in s.path]


def bouncing_cavity():
    # Two mirrors facing each other through a lossless fiber; light never
    # leaves, which must trip the event budget rather than hang.
    nodes = {
        "M1": comp.Mirror(),
        "F": comp.FiberSegment(1.0),
        "M2": comp.Mirror(),
        "TAP": comp.Coupler(0.999),
    }
    edges = (
        Edge(("M1", "a"), ("F", "a")),
        Edge(("F", "b"), ("TAP", "l0")),
        Edge(("TAP", "r0"), ("M2", "a")),
    )
    return InterferometerSpec(
        nodes,
        edges,
        (SourceSpec(("F", "a")),),
        {"D": ("TAP", "r1")},
    )


class TestValidation:
    def test_duplicate_edge_rejected(self):
        spec = mz_spec()
        extra = spec.edges + (Edge(("C1", "r0"), ("C2", "l1")),)
        with pytest.raises(ConfigurationError):
            InterferometerSpec(spec.nodes, extra, spec.sources, spec.detectors)

    def test_detector_port_must_be_free(self):
        spec = mz_spec()
        with pytest.raises(ConfigurationError):
            InterferometerSpec(
                spec.nodes, spec.edges, spec.sources, {"D0": ("C2", "l0")}
            )

    def test_needs_a_detector(self):
        spec = mz_spec()
        with pytest.raises(ConfigurationError):
            InterferometerSpec(spec.nodes, spec.edges, spec.sources, {})

    def test_edge_to_unknown_node(self):
        spec = mz_spec()
        with pytest.raises(ConfigurationError):
            InterferometerSpec(
                spec.nodes,
                spec.edges + (Edge(("GHOST", "a"), ("C2", "l1")),),
                spec.sources,
                spec.detectors,
            )

    def test_trace_config_bounds(self):
        with pytest.raises(ConfigurationError):
            TraceConfig(time_horizon_ns=-1.0)
        with pytest.raises(ConfigurationError):
            TraceConfig(time_horizon_ns=10.0, amplitude_cutoff=0.0)
        with pytest.raises(ConfigurationError):
            TraceConfig(time_horizon_ns=10.0, bin_width_ns=0.0)


class TestBinning:
    def seg(self, t, amp, pol=(1.0, 0.0)):
        return PulseSegment(
            port="D",
            time_ns=t,
            amplitude=complex(amp),
            polarization=np.array(pol, dtype=complex),
            path=(),
            generation=0,
        )

    def test_coherent_sum_same_instant(self):
        bins = bin_and_interfere([self.seg(1.0, 0.5), self.seg(1.0, 0.5)])
        assert bins["D"][0].intensity == pytest.approx(1.0, abs=1e-15)

    def test_opposite_phase_cancels(self):
        bins = bin_and_interfere([self.seg(1.0, 0.5), self.seg(1.0, -0.5)])
        assert bins["D"][0].intensity == pytest.approx(0.0, abs=1e-15)

    def test_orthogonal_polarizations_add_incoherently(self):
        bins = bin_and_interfere(
            [self.seg(1.0, 0.5), self.seg(1.0, 0.5, pol=(0.0, 1.0))]
        )
        assert bins["D"][0].intensity == pytest.approx(0.5, abs=1e-15)

    def test_partial_envelope_overlap(self):
        dt = 0.1
        sigma = DEFAULT_ENVELOPE_SIGMA_NS
        bins = bin_and_interfere([self.seg(1.0, 0.5), self.seg(1.0 + dt, 0.5)])
        gamma = envelope_overlap(dt, sigma)
        assert bins["D"][0].intensity == pytest.approx(0.5 + 0.5 * gamma, rel=1e-12)

    def test_bin_lookup_miss(self):
        bins = bin_and_interfere([self.seg(1.0, 1.0)])
        assert bin_lookup(bins, "D", 1.0, 2.0) is not None
        assert bin_lookup(bins, "D", 7.0, 2.0) is None
        assert bin_lookup(bins, "E", 1.0, 2.0) is None


def test_envelope_overlap_formula():
    sigma = 0.2
    for dt in (0.0, 0.05, 0.3, -0.3):
        assert envelope_overlap(dt, sigma) == pytest.approx(
            np.exp(-(dt**2) / (8 * sigma**2)), rel=1e-15
        )
    assert envelope_overlap(0.0, sigma) == 1.0


def test_segment_intensity():
    s = PulseSegment(
        port="D",
        time_ns=0.0,
        amplitude=0.5j,
        polarization=np.array([0.6, 0.8j], dtype=complex),
        path=(),
        generation=0,
    )
    assert s.intensity == pytest.approx(0.25, rel=1e-12)
