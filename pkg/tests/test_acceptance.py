"""Acceptance gate: one test per numbered claim, run with ``pytest -v``.

Each test states its tolerance inline and computes its expected value
independently of the code under test (closed forms from the coupler
algebra, binomial error bars from the configured rates, or quadrature
where a closed form would just mirror the implementation).
"""

import dataclasses
import math
import time

import numpy as np
import pytest

from pnpqkd import protocol as pr
from pnpqkd.builders import FIBER_SPEED_M_PER_NS, build_double_mz, build_plug_and_play
from pnpqkd.config import AppConfig
from pnpqkd.experiments import (
    plug_and_play_from_config,
    run_visibility_grid,
    session_config_from,
)
from pnpqkd.jones import faraday_mirror_matrix
from pnpqkd.network import DEFAULT_ENVELOPE_SIGMA_NS
from pnpqkd.visibility import decompose_spec, trace_config_for, visibility_scan


def middle_bin(spec):
    dec = decompose_spec(spec, trace_config_for(spec))
    return dec.require("D0", spec.meta["bins"]["D0"]["middle"])


def random_drawn_spec(seed: int, **topology):
    cfg = AppConfig(seed=seed)
    cfg.topology.random_birefringence = True
    for key, value in topology.items():
        setattr(cfg.topology, key, value)
    return plug_and_play_from_config(cfg)


def test_criterion_01_compensation_identity():
    """B^T M_FM B = det(B) M_FM for 10^4 random complex matrices, 1e-12, <1s."""
    gen = np.random.default_rng(20260821)
    mirror = faraday_mirror_matrix()
    start = time.perf_counter()
    b = gen.standard_normal((10000, 2, 2)) + 1j * gen.standard_normal((10000, 2, 2))
    lhs = np.einsum("nji,jk,nkl->nil", b, mirror, b)
    det = b[:, 0, 0] * b[:, 1, 1] - b[:, 0, 1] * b[:, 1, 0]
    residual = np.abs(lhs - det[:, None, None] * mirror).max()
    elapsed = time.perf_counter() - start
    print(f"criterion 1: residual {residual:.3e} in {elapsed:.3f}s")
    assert residual < 1e-12
    assert elapsed < 1.0


def test_criterion_02_destructive_interference():
    """Opposite phases empty the middle bin for 100 random fiber draws, <10s."""
    start = time.perf_counter()
    worst = 0.0
    for seed in range(100):
        bd = middle_bin(random_drawn_spec(seed))
        constructive = float(bd.evaluate(0.0, 0.0))
        destructive = float(bd.evaluate(np.pi, 0.0))
        worst = max(worst, destructive / constructive)
        assert destructive < 1e-12 * constructive, f"draw {seed}"
    elapsed = time.perf_counter() - start
    print(f"criterion 2: worst relative leak {worst:.3e} in {elapsed:.2f}s")
    assert elapsed < 10.0


def test_criterion_03_visibility_immunity():
    """V = 1 within 1e-9 across fiber draws and across t2 choices."""
    worst = 0.0
    for seed in range(6):
        v = visibility_scan(random_drawn_spec(seed)).visibility
        worst = max(worst, abs(v - 1.0))
        assert abs(v - 1.0) < 1e-9, f"draw {seed}"
    for t2 in (0.5, 0.7, 0.9, 0.99):
        v = visibility_scan(random_drawn_spec(3, t2=t2)).visibility
        worst = max(worst, abs(v - 1.0))
        assert abs(v - 1.0) < 1e-9, f"t2 {t2}"
    print(f"criterion 3: worst |V-1| {worst:.3e}")


def test_criterion_04_imperfection_sweep_reaches_reported_visibility():
    """Angle-error x contrast sweep contains V = 0.9984 +/- 5e-4, <120s."""
    cfg = AppConfig(seed=10)
    cfg.topology.random_birefringence = True
    start = time.perf_counter()
    rows = run_visibility_grid(cfg)
    elapsed = time.perf_counter() - start
    hits = [r for r in rows if abs(r.visibility - 0.9984) <= 5e-4]
    best = min(rows, key=lambda r: abs(r.visibility - 0.9984))
    print(
        f"criterion 4: {len(hits)}/{len(rows)} grid cells in band, closest "
        f"V={best.visibility:.6f} at eps={best.fr_error_deg:.2f}deg "
        f"delta={best.pm_delta_rad:.3f}, {elapsed:.1f}s"
    )
    assert hits
    assert elapsed < 120.0


def test_criterion_05_monitor_ratio_is_r2_fourth():
    """The twice-reflected monitor pulse trails by r2^4 within 1e-12."""
    worst = 0.0
    for r2 in (0.1, 0.3, 0.5):
        spec = build_plug_and_play(t2=math.sqrt(1.0 - r2 * r2), include_d1=False)
        dec = decompose_spec(spec, trace_config_for(spec))
        bins = spec.meta["bins"]["D_A"]
        p1 = float(dec.require("D_A", bins["p1"]).evaluate(0.0, 0.0))
        p2 = float(dec.require("D_A", bins["p2"]).evaluate(0.0, 0.0))
        err = abs(p2 / p1 - r2**4)
        worst = max(worst, err)
        assert err < 1e-12, f"r2 {r2}"
    print(f"criterion 5: worst |P2/P1 - r2^4| {worst:.3e}")


def test_criterion_06_two_state_statistics():
    """10^5 dark-free slots: zero errors, sift rate on the Poisson law, <60s."""
    cfg = AppConfig()
    cfg.detector.dark_count_prob = 0.0
    start = time.perf_counter()
    spec = plug_and_play_from_config(cfg)
    plan = pr.prepare_session(spec, session_config_from(cfg))
    stats = pr.session_stats(pr.run_session(plan), plan)
    elapsed = time.perf_counter() - start
    t = cfg.topology
    line = 10.0 ** (-(t.line_loss_db_per_km * t.line_length_km) / 10.0)
    mu_eff = 4.0 * cfg.source.mean_photon_number * line * t.t2**2 * (1.0 - t.t1**2)
    p = 0.5 * (1.0 - math.exp(-cfg.detector.efficiency * mu_eff))
    sigma = math.sqrt(p * (1.0 - p) / cfg.protocol.n_slots)
    print(
        f"criterion 6: {stats.n_errors} errors, sift rate {stats.sift_rate:.3e} "
        f"vs {p:.3e} +/- {3 * sigma:.3e}, {elapsed:.1f}s"
    )
    assert stats.n_slots == 100_000
    assert stats.n_errors == 0
    assert stats.qber == 0.0
    assert abs(stats.sift_rate - p) < 3.0 * sigma
    assert elapsed < 60.0


def test_criterion_07_intercept_resend_quarter_qber():
    """Random-basis intercept-resend shows QBER 0.25 over >= 10^4 sifted bits.

    Weak pulses keep the adversary's conclusive rate symmetric between her
    matched and crossed bases; bright pulses would bias the rate low. The
    middle coupler must be balanced: only at t2 = sqrt(1/2) does the
    complementary output reach full contrast, and a leaky complementary
    output would convert directly into extra errors.
    """
    cfg = AppConfig(seed=11)
    cfg.topology.line_length_km = 0.0
    cfg.topology.t1 = 0.4
    cfg.topology.tap_t = 0.95
    cfg.topology.t2 = math.sqrt(0.5)
    cfg.detector.efficiency = 1.0
    cfg.detector.dark_count_prob = 0.0
    cfg.source.mean_photon_number = 0.02
    cfg.protocol.name = pr.BB84
    cfg.protocol.n_slots = 33_000_000
    spec = plug_and_play_from_config(cfg)
    plan = pr.prepare_session(spec, session_config_from(cfg))
    plan = dataclasses.replace(
        plan, config=dataclasses.replace(plan.config, eve=pr.InterceptResend())
    )
    stats = pr.session_stats(pr.run_session(plan), plan)
    sigma = math.sqrt(0.25 * 0.75 / stats.n_sifted)
    print(
        f"criterion 7: QBER {stats.qber:.4f} over {stats.n_sifted} sifted bits, "
        f"band 0.25 +/- {3 * sigma:.4f}"
    )
    assert stats.n_sifted >= 10_000
    assert abs(stats.qber - 0.25) < 3.0 * sigma


def test_criterion_08_defense_triggers():
    """Bright probes alarm every slot; blockers show as missing references;
    suppression shows as errors."""
    # bright probe: five times the expected monitor energy, threshold two
    cfg = AppConfig()
    cfg.detector.dark_count_prob = 0.0
    cfg.protocol.n_slots = 10_000
    spec = plug_and_play_from_config(cfg)
    plan = pr.prepare_session(spec, session_config_from(cfg))
    probed = pr.run_session(
        dataclasses.replace(
            plan, config=dataclasses.replace(plan.config, eve=pr.StrongProbe(5.0))
        )
    )
    alarms = int(np.count_nonzero(probed.monitor_alarm))
    assert alarms == 10_000

    # whole-slot blocking at q=0.1 over 10^5 slots
    cfg_b = AppConfig()
    cfg_b.protocol.n_slots = 100_000
    spec_b = plug_and_play_from_config(cfg_b)
    plan_b = pr.prepare_session(spec_b, session_config_from(cfg_b))
    blocked = pr.run_session(
        dataclasses.replace(
            plan_b, config=dataclasses.replace(plan_b.config, eve=pr.BlockSlots(0.1))
        )
    )
    missing = int(np.count_nonzero(~blocked.reference_seen))
    spread = 3.0 * math.sqrt(100_000 * 0.1 * 0.9)
    assert abs(missing - 10_000) < spread

    # suppression: references intact, error rate above the zero baseline
    cfg_s = AppConfig(seed=99)
    cfg_s.detector.efficiency = 0.5
    cfg_s.detector.dark_count_prob = 0.0
    cfg_s.source.mean_photon_number = 0.2
    cfg_s.protocol.n_slots = 500_000
    spec_s = plug_and_play_from_config(cfg_s)
    plan_s = pr.prepare_session(spec_s, session_config_from(cfg_s))
    baseline = pr.session_stats(pr.run_session(plan_s), plan_s)
    attacked = pr.session_stats(
        pr.run_session(
            dataclasses.replace(
                plan_s,
                config=dataclasses.replace(
                    plan_s.config, eve=pr.SuppressInconclusive()
                ),
            )
        ),
        plan_s,
    )
    assert baseline.qber == 0.0
    assert attacked.missing_reference_rate == 0.0
    sigma = math.sqrt(attacked.qber * (1.0 - attacked.qber) / attacked.n_sifted)
    print(
        f"criterion 8: {alarms}/10000 alarms, {missing} blocked references "
        f"(want 10000 +/- {spread:.0f}), suppression QBER {attacked.qber:.4f} "
        f"= {attacked.qber / sigma:.1f} sigma over a zero baseline"
    )
    assert attacked.qber - baseline.qber > 5.0 * sigma


def test_criterion_09_baseline_flip_and_envelope():
    """A half-wavelength arm error swaps the bright and dark ports; a large
    arm error caps visibility at the pulse-overlap integral, within 1e-6."""
    base = visibility_scan(build_double_mz(), points=64)
    flipped = visibility_scan(build_double_mz(path_mismatch_nm=650.0), points=64)
    scale = base.intensity.max()
    # the fringe shifts by half a period: every maximum lands on a minimum
    assert np.abs(flipped.intensity - np.roll(base.intensity, 32)).max() < 1e-6 * scale
    d0 = visibility_scan(build_double_mz(), port="D0", points=4).intensity[0]
    d1 = visibility_scan(build_double_mz(), port="D1", points=4).intensity[0]
    d0_f = visibility_scan(
        build_double_mz(path_mismatch_nm=650.0), port="D0", points=4
    ).intensity[0]
    d1_f = visibility_scan(
        build_double_mz(path_mismatch_nm=650.0), port="D1", points=4
    ).intensity[0]
    assert d0_f == pytest.approx(d1, abs=1e-6 * (d0 + d1))
    assert d1_f == pytest.approx(d0, abs=1e-6 * (d0 + d1))

    mismatch_nm = 5.0e7
    dt = mismatch_nm * 1e-9 / FIBER_SPEED_M_PER_NS
    scan = visibility_scan(build_double_mz(path_mismatch_nm=mismatch_nm), points=65536)
    sigma = DEFAULT_ENVELOPE_SIGMA_NS
    grid = np.linspace(-12.0 * sigma, 12.0 * sigma + dt, 200_001)
    g = np.exp(-(grid**2) / (4.0 * sigma**2))
    g_late = np.exp(-((grid - dt) ** 2) / (4.0 * sigma**2))
    overlap = np.trapezoid(g * g_late, grid) / np.trapezoid(g * g, grid)
    print(
        f"criterion 9: flip max deviation under 1e-6, envelope visibility "
        f"{scan.visibility:.7f} vs overlap quadrature {overlap:.7f}"
    )
    assert scan.visibility == pytest.approx(float(overlap), abs=1e-6)
