import math
import warnings

import numpy as np
import pytest
from scipy.stats import kstest

from emeflow.ensemble import (
    bin_endpoints,
    centered_bins,
    chi_square,
    density_reference,
    order_suppression,
    photon_stream,
    rayleigh_distance,
    reference_bin_probabilities,
    sample_launches,
    simulate,
    tv_distance,
)
from emeflow.flowline import IntegratorConfig, endpoints
from emeflow.poynting import Polarization
from emeflow.spectrum import DomainError, GratingSpec
from emeflow.wavefield import QuadratureConfig, plane_wave_modes

from conftest import CONVERGENCE_SEEDS, LAMBDA, ronchi


def test_single_slit_launch_bounds():
    g = GratingSpec(1, 1e-5, 5e-6, LAMBDA)
    x = sample_launches(g, 10_000, 3)
    assert np.all(x >= -g.slit_width / 2) and np.all(x <= g.slit_width / 2)


def test_two_slit_balance():
    n = 100_000
    x = sample_launches(ronchi(2), n, 11)
    right = np.sum(x > 0)
    assert abs(right - n / 2) < 3 * math.sqrt(n) / 2


def test_uniform_within_slits():
    g = ronchi(3)
    x = sample_launches(g, 10_000, 5)
    assert np.all(g.inside(x))
    rel = np.concatenate([
        (x[(x >= a) & (x <= b)] - a) / g.slit_width for a, b in g.slit_edges()
    ])
    assert kstest(rel, "uniform").pvalue > 0.01


def test_stream_determinism_and_prefix():
    g = ronchi(2)
    a = sample_launches(g, 1000, 42)
    b = sample_launches(g, 1000, 42)
    c = sample_launches(g, 250, 42)
    assert np.array_equal(a, b)
    assert np.array_equal(a[:250], c)
    assert not np.array_equal(a, sample_launches(g, 1000, 43))
    # documented stream: Philox-4x64 keyed by the seed, one double per photon
    u = np.random.Generator(np.random.Philox(key=42)).random(3)
    assert np.array_equal(photon_stream(42).random(3), u)


def test_seed_range():
    with pytest.raises(DomainError):
        photon_stream(-1)
    with pytest.raises(DomainError):
        photon_stream(2**64)
    photon_stream(2**64 - 1)


def test_centered_bins():
    d = 1e-5
    edges = centered_bins(0.9 * d, 10 * d)
    w = np.diff(edges)
    assert np.max(np.abs(w / w[0] - 1)) < 1e-12
    centers = 0.5 * (edges[:-1] + edges[1:])
    assert np.min(np.abs(centers)) < 1e-12 * d
    assert edges[0] >= -10 * d and edges[-1] <= 10 * d
    assert len(centers) == 21


def test_mass_balance_and_binning():
    d = 1.0
    end_x = np.array([0.0, 0.44, 0.46, -0.46, 9.4, 9.5, -20.0, 1.0])
    status = np.array([1, 1, 1, 1, 1, 1, 1, 2])
    h = bin_endpoints(end_x, status, 0.9 * d, 10 * d, 4.3)
    assert h.counts.sum() + h.terminated_elsewhere == h.total_photons == 8
    assert h.terminated_elsewhere == 3
    mid = len(h.counts) // 2
    assert h.counts[mid] == 2 and h.counts[mid + 1] == 1 and h.counts[mid - 1] == 1
    assert h.status_counts["stagnation"] == 1


def test_tv_and_chi_square():
    assert tv_distance([1, 1, 2], [2, 2, 4]) == 0.0
    assert tv_distance([1, 0], [0, 1]) == 1.0
    assert chi_square([10, 10], [0.5, 0.5]) == 0.0


def test_density_reference_plane_wave_is_constant():
    modes = plane_wave_modes(2 * math.pi / LAMBDA)
    g = ronchi(2)
    x = np.linspace(-1e-5, 1e-5, 101)
    r = density_reference(modes, None, 1e-4, x)
    assert np.allclose(r, 1 / 2e-5, rtol=1e-12)


@pytest.fixture(scope="module")
def fig3_reference(fig3_config):
    g = fig3_config.grating
    return g, fig3_config.quadrature, 4.3 * g.talbot_distance


def test_density_reference_integrates_to_one(fig3_reference):
    g, quad, y = fig3_reference
    d = g.period
    gx, gw = np.polynomial.legendre.leggauss(64)
    panels = np.linspace(-10 * d, 10 * d, 81)
    half = 0.5 * np.diff(panels)
    xs = (0.5 * (panels[:-1] + panels[1:])[:, None] + half[:, None] * gx[None, :]).ravel()
    r = density_reference(g, quad, y, xs, window=(-10 * d, 10 * d))
    total = np.sum(r.reshape(80, -1) * gw[None, :] * half[:, None])
    assert total == pytest.approx(1.0, abs=1e-8)


def test_density_reference_order_structure(fig3_reference):
    g, quad, y = fig3_reference
    d = g.period
    x = np.linspace(-15 * d, 15 * d, 30001)
    r = density_reference(g, quad, y, x)
    peak = (r[1:-1] > r[:-2]) & (r[1:-1] > r[2:]) & (r[1:-1] > 0.02 * r.max())
    peaks = x[1:-1][peak] / d
    spacing = LAMBDA * y / d / d
    assert spacing == pytest.approx(4.3)
    for m in (0, 1, -1, 3, -3):
        assert np.min(np.abs(peaks - m * spacing)) < 0.5
    assert not np.any((np.abs(peaks) > 8.15) & (np.abs(peaks) < 9.05))
    assert len(peaks) == 5


def test_reference_bin_probabilities_sum_to_one(fig3_reference):
    g, quad, y = fig3_reference
    p = reference_bin_probabilities(g, quad, y, centered_bins(0.9 * g.period, 10 * g.period))
    assert p.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(p >= 0)


def test_rayleigh_distance_formula():
    g = ronchi(2)
    assert rayleigh_distance(g) == pytest.approx((2 * g.slit_width + g.period / 2) ** 2 / (4 * math.pi * LAMBDA))
    thin = GratingSpec(2, 1e-5, 1e-15, LAMBDA)
    assert rayleigh_distance(thin) == pytest.approx((1e-5 / 2) ** 2 / (4 * math.pi * LAMBDA), rel=1e-9)
    big = GratingSpec(2, 2e-5, 1e-5, 2 * LAMBDA)
    assert rayleigh_distance(big) == pytest.approx(2 * rayleigh_distance(g), rel=1e-14)


def test_warning_inside_rayleigh_distance():
    g = ronchi(2)
    cfg = IntegratorConfig(y_target=0.05, rel_tol=1e-6)
    with pytest.warns(UserWarning, match="Rayleigh"):
        simulate(g, None, Polarization(), cfg, 4, 1)


SHORT = IntegratorConfig(y_target=0.5, rel_tol=1e-6, max_step=0.5)


def test_run_determinism_and_thread_independence():
    g = ronchi(2)
    a = simulate(g, None, Polarization(), SHORT, 64, 9)
    b = simulate(g, None, Polarization(), SHORT, 64, 9, threads=4)
    assert np.array_equal(a.end_x, b.end_x)
    assert np.array_equal(a.status, b.status)
    ha = a.histogram(0.9 * g.period, 10 * g.period)
    hb = b.histogram(0.9 * g.period, 10 * g.period)
    assert np.array_equal(ha.counts, hb.counts)
    c = simulate(g, None, Polarization(), SHORT, 16, 9)
    assert np.array_equal(a.end_x[:16], c.end_x)


def test_mirror_statistics():
    g = ronchi(2)
    launches = sample_launches(g, 64, 21)
    ex, _, st, _ = endpoints(g, None, Polarization(), SHORT, launches)
    mx, _, ms, _ = endpoints(g, None, Polarization(), SHORT, -launches)
    assert np.array_equal(mx, -ex)
    ha = bin_endpoints(ex, st, 0.9 * g.period, 10 * g.period, 0.5)
    hb = bin_endpoints(mx, ms, 0.9 * g.period, 10 * g.period, 0.5)
    assert np.array_equal(ha.counts, hb.counts[::-1])


def test_order_suppression_counts():
    d = 1.0
    g = GratingSpec(2, 1e-5, 5e-6, LAMBDA)
    spacing = LAMBDA * 0.1 / 1e-5
    x = np.array([spacing, -spacing, spacing + 1e-7, 2 * spacing])
    assert order_suppression(x, np.ones(4, int), g, 0.1) == pytest.approx(1 / 3)


@pytest.mark.slow
def test_convergence_rate(fig3_config, fig3_runs):
    # TV(n) / TV(4n) ~ 2 for sampling noise; n = 100 vs 400 keeps the
    # quadrature/binning floor negligible
    cfg = fig3_config
    g = cfg.grating
    hb = cfg.histogram
    d = g.period
    y = hb.y_observation_lt * g.talbot_distance
    edges = centered_bins(hb.bin_width_d * d, hb.window_half_width_d * d)
    probs = reference_bin_probabilities(g, cfg.quadrature, y, edges)
    ratios = []
    for seed in CONVERGENCE_SEEDS:
        run = fig3_runs[seed]
        t1 = tv_distance(run.histogram(hb.bin_width_d * d, hb.window_half_width_d * d, 100).counts, probs)
        t4 = tv_distance(run.histogram(hb.bin_width_d * d, hb.window_half_width_d * d, 400).counts, probs)
        ratios.append((t1, t4))
    t1, t4 = np.mean(ratios, axis=0)
    assert 1.5 <= t1 / t4 <= 2.7
