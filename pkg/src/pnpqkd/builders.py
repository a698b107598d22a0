"""Ready-made interferometer topologies.

``build_plug_and_play`` wires the auto-compensating reflective interferometer:
a short-arm/long-arm pair behind one coupler at the receiver, a transmission
line, and a Faraday-mirror reflector with a gated phase modulator and variable
attenuator at the far end. Every pulse travels each fiber once in each
direction, so static birefringence cancels on the round trip and the
interferometer needs no alignment.

``build_double_mz`` wires the conventional one-way alternative it is judged
against: matched unbalanced Mach-Zehnder pairs at sender and receiver, where
any path-length mismatch between the two long arms shows up directly as a
fringe shift and a loss of envelope overlap.

Builders return an :class:`~pnpqkd.network.InterferometerSpec` whose ``meta``
dict carries the layer of bookkeeping the analysis code needs: expected
detector bin times, modulator node names, how many times a pulse passes its
modulator window, and which node is the calibration attenuator.
"""

from __future__ import annotations

import numpy as np

from .components import (
    Attenuator,
    Coupler,
    FaradayMirror,
    FaradayRotator,
    FiberSegment,
    Mirror,
    PhaseModulator,
    PmWindow,
)
from .errors import ConfigurationError
from .network import Edge, InterferometerSpec, SourceSpec

#: Signal velocity used to convert a geometric path-length mismatch to delay.
FIBER_SPEED_M_PER_NS = 0.204

HORIZONTAL = (1.0 + 0.0j, 0.0 + 0.0j)


def balanced_tap_transmission(t_main: float) -> float:
    """Tap transmission that equalizes the two receiver detectors.

    The tap sits inside the short arm, so interfering light crosses it three
    times before reaching its detector but only twice before reaching the
    coupler-side detector. Matching the two count rates requires
    t^2 (1 - t^2) = 1 - t_main^2, which has a real solution only for
    t_main >= sqrt(3)/2.
    """
    r_sq = 1.0 - t_main * t_main
    disc = 1.0 - 4.0 * r_sq
    if disc < 0.0:
        raise ConfigurationError(
            f"no tap ratio can balance the detectors for t={t_main!r}; "
            "need t >= sqrt(3)/2, or pass an explicit tap transmission"
        )
    return float(np.sqrt(0.5 * (1.0 + np.sqrt(disc))))


def _reflector(
    nodes: dict, edges: list, name: str, angle_error_rad: float
) -> tuple[str, str]:
    """Add a Faraday-mirror end reflector, returning its free (node, port)."""
    if angle_error_rad == 0.0:
        nodes[name] = FaradayMirror()
        return (name, "a")
    nodes[name + "_rot"] = FaradayRotator(np.pi / 4.0 + angle_error_rad)
    nodes[name] = Mirror()
    edges.append(Edge((name + "_rot", "b"), (name, "a")))
    return (name + "_rot", "a")


def build_plug_and_play(
    *,
    t1: float = 0.95,
    t2: float = 0.9,
    t3: float = 0.95,
    tap_t: float | None = None,
    include_d1: bool = True,
    delay_line_ns: float = 250.0,
    short_arm_ns: float = 5.0,
    line_delay_ns: float = 112745.0,
    line_length_km: float = 23.0,
    line_loss_db_per_km: float = 0.35,
    sender_stub_a_ns: float = 1.0,
    sender_stub_b_ns: float = 1.0,
    pm_delta_rad: float = 0.2,
    pm_gamma: float = 0.98,
    fr_angle_error_rad: float = 0.0,
    line_birefringence: np.ndarray | None = None,
    delay_birefringence: np.ndarray | None = None,
    attenuation_factor: float = 1.0,
    phi_a_rad: float = 0.0,
    phi_b_rad: float = 0.0,
) -> InterferometerSpec:
    """Wire the auto-compensating round-trip interferometer.

    Layout, left (receiver) to right (sender)::

        laser -> C1 -> C2 -> line fiber -> C3 -> ATT -> PM_A -> FM_A
                 |     |  \\
                 D0    |   long arm: PM_B -> delay fiber -> FM_B
                       |
                       short arm: [tap -> D1] -> stub -> FM_C

    ``D_A`` taps the sender-side coupler ``C3`` and doubles as the intensity
    monitor. The strong pulse reaching the sender first is the timing
    reference; the weaker one delayed by ``delay_line_ns`` is the one the
    sender modulates (its phase window covers only that arrival) and the
    receiver modulates the reference's delayed return instead, so the two
    paths through the loop are modulated independently although they
    interfere in the same output bin.

    Args:
        t1: receiver input coupler transmission (its reflected port feeds D0).
        t2: splitting ratio of the arm coupler; the delayed outgoing pulse is
            weaker than the reference by (1 - t2^2)^2 while the received
            visibility stays independent of t2.
        t3: sender coupler transmission toward the monitor detector.
        tap_t: short-arm tap transmission for D1; None picks the ratio that
            balances D0 and D1 when it exists.
        delay_line_ns: full round-trip delay difference between long and
            short arm, i.e. the pulse-pair separation.
        short_arm_ns: one-way short-arm stub delay.
        phi_a_rad / phi_b_rad: total sender / receiver modulation phases; each
            is applied as two in-window passes of half the phase.
        fr_angle_error_rad: rotator misalignment of every Faraday mirror.
        attenuation_factor: per-pass amplitude factor of the sender's
            attenuator; the signal crosses it twice, so the round-trip
            intensity scales as its fourth power.

    Returns:
        Spec with meta keys ``bins``, ``pm_a``, ``pm_b``, ``pm_passes``,
        ``attenuator``, ``monitor``, ``time_horizon_ns``, ``bin_width_ns``.
    """
    if delay_line_ns <= 2.0 * short_arm_ns:
        raise ConfigurationError(
            "delay_line_ns must exceed the short-arm round trip 2*short_arm_ns"
        )
    tau1 = 0.5 * delay_line_ns - short_arm_ns  # one-way long-arm delay
    tau2 = short_arm_ns
    tau_a = sender_stub_a_ns
    tau_b = sender_stub_b_ns
    tau_line = line_delay_ns
    # Round trip of the direct (reference) path, laser to D0.
    t_ref = 2.0 * tau_line + 2.0 * tau_a + 2.0 * tau_b
    t_mid = t_ref + delay_line_ns

    nodes: dict = {
        "C1": Coupler(t1),
        "C2": Coupler(t2),
        "C3": Coupler(t3),
    }
    edges: list[Edge] = [Edge(("C1", "r0"), ("C2", "l0"))]

    # Long arm: receiver modulator, delay fiber, Faraday mirror.
    pm_b_window = PmWindow(
        t_ref + 2.0 * tau2 - 4.0,
        t_ref + 2.0 * tau2 + 2.0 * tau1 + 4.0,
        0.5 * phi_b_rad,
    )
    nodes["PMB"] = PhaseModulator((pm_b_window,), pm_delta_rad, pm_gamma)
    nodes["DLINE"] = FiberSegment(tau1, birefringence=delay_birefringence)
    edges.append(Edge(("C2", "r1"), ("PMB", "a")))
    edges.append(Edge(("PMB", "b"), ("DLINE", "a")))
    fm_b = _reflector(nodes, edges, "FMB", fr_angle_error_rad)
    edges.append(Edge(("DLINE", "b"), fm_b))

    # Short arm, optionally with the tap toward D1.
    nodes["STUB"] = FiberSegment(tau2)
    if include_d1:
        tap = balanced_tap_transmission(t1) if tap_t is None else tap_t
        nodes["TAP"] = Coupler(tap)
        edges.append(Edge(("C2", "l1"), ("TAP", "l0")))
        edges.append(Edge(("TAP", "r0"), ("STUB", "a")))
    else:
        edges.append(Edge(("C2", "l1"), ("STUB", "a")))
    fm_c = _reflector(nodes, edges, "FMC", fr_angle_error_rad)
    edges.append(Edge(("STUB", "b"), fm_c))

    # Transmission line and the sender station.
    nodes["LINE"] = FiberSegment(
        tau_line, line_length_km, line_loss_db_per_km, line_birefringence
    )
    edges.append(Edge(("C2", "r0"), ("LINE", "a")))
    edges.append(Edge(("LINE", "b"), ("C3", "l0")))

    pm_a_center = tau_line + delay_line_ns + tau_a
    pm_a_window = PmWindow(
        pm_a_center - 10.0,
        pm_a_center + 2.0 * tau_b + 10.0,
        0.5 * phi_a_rad,
    )
    nodes["ATT"] = Attenuator(attenuation_factor)
    nodes["ASTUB"] = FiberSegment(tau_a)
    nodes["PMA"] = PhaseModulator((pm_a_window,), pm_delta_rad, pm_gamma)
    nodes["BSTUB"] = FiberSegment(tau_b)
    edges.append(Edge(("C3", "r1"), ("ATT", "a")))
    edges.append(Edge(("ATT", "b"), ("ASTUB", "a")))
    edges.append(Edge(("ASTUB", "b"), ("PMA", "a")))
    edges.append(Edge(("PMA", "b"), ("BSTUB", "a")))
    fm_a = _reflector(nodes, edges, "FMA", fr_angle_error_rad)
    edges.append(Edge(("BSTUB", "b"), fm_a))

    detectors = {"D0": ("C1", "l1"), "D_A": ("C3", "r0")}
    if include_d1:
        detectors["D1"] = ("TAP", "l1")

    bins: dict[str, dict[str, float]] = {
        "D0": {
            "reference": t_ref,
            "middle": t_mid,
            "late": t_ref + 2.0 * delay_line_ns,
        },
        "D_A": {"p1": tau_line, "p2": tau_line + delay_line_ns},
    }
    if include_d1:
        bins["D1"] = {
            "early": t_ref + 2.0 * tau2,
            "middle": t_mid + 2.0 * tau2,
        }

    meta = {
        "topology": "plug_and_play",
        "bins": bins,
        "pm_a": "PMA",
        "pm_b": "PMB",
        "pm_passes": 2,
        "attenuator": "ATT",
        "monitor": "D_A",
        "signal_detectors": ("D0", "D1") if include_d1 else ("D0",),
        "delay_line_ns": delay_line_ns,
        "time_horizon_ns": t_ref + 4.0 * delay_line_ns,
        "bin_width_ns": 2.0,
        "line_amplitude": 10.0 ** (-line_length_km * line_loss_db_per_km / 20.0),
        "coupler_ratios": {"t1": t1, "t2": t2, "t3": t3},
    }

    return InterferometerSpec(
        nodes=nodes,
        edges=tuple(edges),
        sources=(SourceSpec(("C1", "l0"), 0.0, 1.0 + 0.0j, np.array(HORIZONTAL)),),
        detectors=detectors,
        meta=meta,
    )


def build_double_mz(
    *,
    coupler_t: float = np.sqrt(0.5),
    short_arm_ns: float = 2.0,
    arm_imbalance_ns: float = 50.0,
    line_delay_ns: float = 100.0,
    line_length_km: float = 0.0,
    line_loss_db_per_km: float = 0.0,
    path_mismatch_nm: float = 0.0,
    wavelength_nm: float = 1300.0,
    pm_delta_rad: float = 0.0,
    pm_gamma: float = 1.0,
    phi_a_rad: float = 0.0,
    phi_b_rad: float = 0.0,
) -> InterferometerSpec:
    """Wire two matched unbalanced Mach-Zehnder interferometers in series.

    The sender modulates their long arm, the receiver theirs. Only the
    short-long and long-short paths land in the middle output bin, where
    their relative phase is (phi_b - phi_a) plus whatever phase the long-arm
    length mismatch ``path_mismatch_nm`` adds. The mismatch also offsets the
    two arrivals in time, which degrades the envelope overlap and with it
    the fringe visibility; that is the alignment burden the round-trip
    topology gets rid of.

    The mismatch is modeled where it physically lives, on the receiver long
    arm: an extra propagation delay of ``path_mismatch_nm / c_fiber`` and a
    global phase of ``2 pi mismatch / wavelength`` on the carrier. Carrier
    phase is tracked only relative to the matched lengths, so matched arms
    contribute none.
    """
    extra_delay_ns = path_mismatch_nm * 1e-9 / FIBER_SPEED_M_PER_NS
    mismatch_phase = 2.0 * np.pi * path_mismatch_nm / wavelength_nm
    mismatch_jones = np.exp(1j * mismatch_phase) * np.eye(2, dtype=complex)

    horizon = 2.0 * (short_arm_ns + arm_imbalance_ns) + line_delay_ns + 10.0

    always = (0.0, horizon + 1.0)
    nodes: dict = {
        "A1": Coupler(coupler_t),
        "A2": Coupler(coupler_t),
        "B1": Coupler(coupler_t),
        "B2": Coupler(coupler_t),
        "ASHORT": FiberSegment(short_arm_ns),
        "PMA": PhaseModulator((PmWindow(*always, phi_a_rad),), pm_delta_rad, pm_gamma),
        "ALONG": FiberSegment(short_arm_ns + arm_imbalance_ns),
        "LINE": FiberSegment(line_delay_ns, line_length_km, line_loss_db_per_km),
        "BSHORT": FiberSegment(short_arm_ns),
        "PMB": PhaseModulator((PmWindow(*always, phi_b_rad),), pm_delta_rad, pm_gamma),
        "BLONG": FiberSegment(
            short_arm_ns + arm_imbalance_ns + extra_delay_ns,
            birefringence=mismatch_jones if path_mismatch_nm != 0.0 else None,
        ),
    }
    edges = (
        Edge(("A1", "r0"), ("ASHORT", "a")),
        Edge(("ASHORT", "b"), ("A2", "l0")),
        Edge(("A1", "r1"), ("PMA", "a")),
        Edge(("PMA", "b"), ("ALONG", "a")),
        Edge(("ALONG", "b"), ("A2", "l1")),
        Edge(("A2", "r0"), ("LINE", "a")),
        Edge(("LINE", "b"), ("B1", "l0")),
        Edge(("B1", "r0"), ("BSHORT", "a")),
        Edge(("BSHORT", "b"), ("B2", "l0")),
        Edge(("B1", "r1"), ("PMB", "a")),
        Edge(("PMB", "b"), ("BLONG", "a")),
        Edge(("BLONG", "b"), ("B2", "l1")),
    )

    t_mid = 2.0 * short_arm_ns + arm_imbalance_ns + line_delay_ns
    meta = {
        "topology": "double_mz",
        "bins": {
            "D0": {
                "early": t_mid - arm_imbalance_ns,
                "middle": t_mid,
                "late": t_mid + arm_imbalance_ns,
            },
            "D1": {
                "early": t_mid - arm_imbalance_ns,
                "middle": t_mid,
                "late": t_mid + arm_imbalance_ns,
            },
        },
        "pm_a": "PMA",
        "pm_b": "PMB",
        "pm_passes": 1,
        "signal_detectors": ("D0", "D1"),
        "time_horizon_ns": horizon,
        "bin_width_ns": 2.0,
        "path_mismatch_nm": path_mismatch_nm,
        "wavelength_nm": wavelength_nm,
    }

    return InterferometerSpec(
        nodes=nodes,
        edges=edges,
        sources=(SourceSpec(("A1", "l0"), 0.0, 1.0 + 0.0j, np.array(HORIZONTAL)),),
        detectors={"D0": ("B2", "r0"), "D1": ("B2", "r1")},
        meta=meta,
    )
