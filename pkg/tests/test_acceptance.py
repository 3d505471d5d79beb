"""Acceptance criteria, one test per criterion.

Every test records a PASS/FAIL line (collected in the terminal summary) and
then asserts the criterion at its stated tolerance.  Criteria that cannot
hold for this model are marked ``xfail(strict=True)`` with the reason; they
still run, print their measured values, and would turn the suite red if
they ever started to pass.
"""
import json
import math
import time

import numpy as np
import pytest

from emeflow import cli
from emeflow.ensemble import (
    centered_bins,
    order_suppression,
    rayleigh_distance,
    reference_bin_probabilities,
    tv_distance,
)
from emeflow.flowline import IntegratorConfig, endpoints
from emeflow.poynting import Polarization, energy_density_values, poynting_components
from emeflow.wavefield import (
    QuadratureConfig,
    discrete_order_modes,
    evaluate_batch,
    fresnel_oracle,
    grating_modes,
    paraxial_residual,
)

from conftest import CONVERGENCE_PHOTONS, CONVERGENCE_SEEDS, LAMBDA, ROOT, ronchi

pytestmark = pytest.mark.slow

STAIRCASE = (100, 1000, 2000, 5000)


def _fig3_probs(cfg):
    g, hb = cfg.grating, cfg.histogram
    edges = centered_bins(hb.bin_width_d * g.period, hb.window_half_width_d * g.period)
    y = hb.y_observation_lt * g.talbot_distance
    return edges, reference_bin_probabilities(g, cfg.quadrature, y, edges)


def test_criterion_1_fig3_histogram(tmp_path, fig3_config, fig3_runs, report):
    cfg = fig3_config
    t0 = time.perf_counter()
    status = cli.main(["histogram", "--config", str(ROOT / "configs" / "fig3.yaml"), "--out", str(tmp_path)])
    wall = time.perf_counter() - t0
    assert status == 0
    doc = json.loads((tmp_path / "histogram_n5000.json").read_text())
    tv = doc["tv_distance"]
    ratio = doc["suppressed_order_ratio"]

    # the same run through the library API gives the same numbers
    run = fig3_runs[cfg.seed]
    edges, probs = _fig3_probs(cfg)
    g, hb = cfg.grating, cfg.histogram
    hist = run.histogram(hb.bin_width_d * g.period, hb.window_half_width_d * g.period)
    assert tv == pytest.approx(tv_distance(hist.counts, probs), rel=1e-12)
    y = hb.y_observation_lt * g.talbot_distance
    assert ratio == order_suppression(run.end_x, run.status, g, y)

    ok = tv < 0.05 and ratio < 0.2
    report("1 double-slit histogram at 4.3 L_T", ok,
           f"TV(n=5000) = {tv:.4f} (< 0.05), order-2 counts / order-1 counts = {ratio:.4f} (< 0.2), "
           f"CLI wall time {wall:.1f} s on this machine")
    assert tv < 0.05
    assert ratio < 0.2


def test_criterion_2_convergence_staircase(fig3_config, fig3_runs, report):
    cfg = fig3_config
    g, hb = cfg.grating, cfg.histogram
    _, probs = _fig3_probs(cfg)
    tvs = np.zeros((len(CONVERGENCE_SEEDS), len(STAIRCASE)))
    for i, seed in enumerate(CONVERGENCE_SEEDS):
        run = fig3_runs[seed]
        assert run.launches.size == CONVERGENCE_PHOTONS
        for j, n in enumerate(STAIRCASE):
            h = run.histogram(hb.bin_width_d * g.period, hb.window_half_width_d * g.period, n)
            tvs[i, j] = tv_distance(h.counts, probs)
    mean = tvs.mean(axis=0)
    decreasing = bool(np.all(np.diff(mean) < 0))
    ratio = mean[-1] / mean[0]
    report("2 convergence staircase", decreasing and ratio < 0.35,
           "mean TV over 10 seeds " + ", ".join(f"n={n}: {t:.4f}" for n, t in zip(STAIRCASE, mean))
           + f"; TV(5000)/TV(100) = {ratio:.3f} (< 0.35)")
    assert decreasing
    assert ratio < 0.35


def test_criterion_3_oracle_equivalence(report):
    worst = {}
    for n in (1, 2, 5):
        g = ronchi(n)
        x = np.linspace(-3, 3, 10) * g.period
        y = np.linspace(0.05, 4.3, 10) * g.talbot_distance
        X, Y = np.meshgrid(x, y)
        quad = QuadratureConfig(tail=True)
        got = evaluate_batch(g, quad, X, Y).psi
        ref = fresnel_oracle(g, X, Y)
        worst[n] = float(np.max(np.abs(got - ref) / np.abs(ref)))
    ok = max(worst.values()) < 1e-5
    report("3 oracle equivalence", ok,
           "max pointwise relative error " + ", ".join(f"N={n}: {e:.2e}" for n, e in worst.items()) + " (< 1e-5)")
    assert ok


def test_criterion_4a_talbot_revival(report):
    errs = []
    for n in (2, 5):
        g = ronchi(n)
        modes = discrete_order_modes(g)
        LT = g.talbot_distance
        x = np.linspace(-1, 1, 101) * g.period
        for y0 in np.linspace(0.05, 0.95, 7) * LT:
            y = np.full_like(x, y0)
            base = np.abs(evaluate_batch(modes, None, x, y).psi)
            full = np.abs(evaluate_batch(modes, None, x, y + 2 * LT).psi)
            half = np.abs(evaluate_batch(modes, None, x, y + LT).psi)
            shift = np.abs(evaluate_batch(modes, None, x + g.period / 2, y).psi)
            scale = np.max(base)
            errs.append(max(np.max(np.abs(full - base)), np.max(np.abs(half - shift))) / scale)
    worst = max(errs)
    report("4a Talbot revival (discrete orders)", worst < 1e-10,
           f"max |difference| / max|psi| = {worst:.2e} (< 1e-10)")
    assert worst < 1e-10


def test_criterion_4b_five_slit_density(report):
    g = ronchi(5)
    d = g.period
    quad = QuadratureConfig()
    cfg = IntegratorConfig(rel_tol=1e-7, max_step=0.1, y_target=1.0)
    m = 400
    frac = (np.arange(m) + 0.5) / m
    x0 = np.concatenate([a + frac * g.slit_width for a, _ in g.slit_edges()])
    ex, _, status, _ = endpoints(g, quad, Polarization(), cfg, x0)
    edges = np.linspace(-3.5 * d, 3.5 * d, 51)
    counts, _ = np.histogram(ex[status == 1], edges)
    # exact energy density at y = L_T averaged over every bin
    modes = grating_modes(g, quad)
    gx, gw = np.polynomial.legendre.leggauss(16)
    half = 0.5 * np.diff(edges)
    xs = (0.5 * (edges[:-1] + edges[1:])[:, None] + half[:, None] * gx[None, :]).ravel()
    f = evaluate_batch(modes, None, xs, np.full_like(xs, g.talbot_distance))
    u = energy_density_values(f, Polarization(), g.wavenumber).reshape(50, -1) @ gw
    r = float(np.corrcoef(counts, u)[0, 1])
    report("4b five-slit trajectory density vs U at L_T", r > 0.9,
           f"Pearson r = {r:.4f} over 50 bins (> 0.9), {int(np.sum(status == 1))}/{x0.size} lines reached L_T")
    assert r > 0.9


def test_criterion_5_flow_line_properties(fig3_config, report):
    cfg3 = fig3_config
    g = cfg3.grating
    d = g.period
    cfg = IntegratorConfig(y_target=cfg3.histogram.y_observation_lt)
    frac = (np.arange(100) + 0.5) / 100
    x0 = np.concatenate([a + frac * g.slit_width for a, _ in g.slit_edges()])
    ex, _, status, _ = endpoints(g, cfg3.quadrature, Polarization(), cfg, x0)
    reached = status == 1
    tol = 10 * cfg.rel_tol * d
    violations = int(np.sum(np.diff(ex[reached]) < -tol))
    # the launch set is mirror symmetric: x0[i] = -x0[199 - i]
    mirror = float(np.max(np.abs(ex + ex[::-1])))
    half_tol = IntegratorConfig(y_target=cfg.y_target, rel_tol=cfg.rel_tol / 2)
    ex2, _, status2, _ = endpoints(g, cfg3.quadrature, Polarization(), half_tol, x0)
    both = reached & (status2 == 1)
    shift = float(np.max(np.abs(ex2[both] - ex[both])))
    ok = violations == 0 and mirror < tol and shift < 1e-6 * d and both.sum() == x0.size
    report("5 flow-line properties", ok,
           f"{int(reached.sum())}/200 reached, order violations = {violations}, "
           f"mirror deviation = {mirror / d:.1e} d (< {tol / d:.0e} d), "
           f"endpoint shift on halving rel_tol = {shift / d:.1e} d (< 1e-6 d)")
    assert both.sum() == x0.size
    assert violations == 0
    assert mirror < tol
    assert shift < 1e-6 * d


def _window(g, n=40, seed=7):
    r = np.random.default_rng(seed)
    return r.uniform(-2, 2, n) * g.period, r.uniform(0.2, 1.0, n) * g.talbot_distance


def test_criterion_6a_paraxial_residual_order(report):
    g = ronchi(2)
    modes = grating_modes(g, QuadratureConfig())
    x, y = _window(g)
    res = [paraxial_residual(modes, None, x, y, LAMBDA / 20 / 2**i) for i in range(3)]
    ratios = [res[i] / res[i + 1] for i in range(2)]
    ok = all(3.0 <= q <= 5.0 for q in ratios)
    report("6a paraxial residual O(h^2)", ok,
           "residuals " + ", ".join(f"{r:.2e}" for r in res) + " at h = lambda/20, /40, /80; ratios "
           + ", ".join(f"{q:.2f}" for q in ratios) + " (in [3, 5])")
    assert ok


@pytest.mark.xfail(strict=True, reason=(
    "the spectral field obeys the paraxial equation, not Helmholtz, so S computed with the exact "
    "longitudinal derivative has a true divergence I/(2k) Im(A* A_yy) of order 1e-2 U c/d; the "
    "difference quotient converges to that floor, so the residual stops shrinking"))
def test_criterion_6b_poynting_divergence_order(report):
    from emeflow.poynting import divergence_check

    g = ronchi(2)
    modes = grating_modes(g, QuadratureConfig())
    x, y = _window(g)
    res = [divergence_check(modes, None, Polarization(), x, y, LAMBDA / 20 / 2**i) for i in range(3)]
    ratios = [res[i] / res[i + 1] for i in range(2)]
    ok = all(3.0 <= q <= 5.0 for q in ratios)
    report("6b Poynting divergence O(h^2)", ok,
           "normalized residuals " + ", ".join(f"{r:.3e}" for r in res) + " at h = lambda/20, /40, /80; ratios "
           + ", ".join(f"{q:.3f}" for q in ratios) + " (in [3, 5]); the residual sits on the analytic "
           "paraxial divergence")
    assert ok


def test_criterion_6c_sz_and_direction(report):
    g = ronchi(2)
    modes = grating_modes(g, QuadratureConfig())
    r = np.random.default_rng(3)
    x = r.uniform(-4, 4, 2000) * g.period
    y = r.uniform(0.01, 4.3, 2000) * g.talbot_distance
    f = evaluate_batch(modes, None, x, y)
    k = g.wavenumber
    sz_worst = 0.0
    for phase in (0.0, math.pi):
        sx, sy, sz = poynting_components(f, Polarization(1.0, 1.0, phase), k)
        sz_worst = max(sz_worst, float(np.max(np.abs(sz)) / np.max(np.hypot(sx, sy))))
    dirs = []
    for a, b in ((1, 0), (0, 1), (3, 4)):
        sx, sy, _ = poynting_components(f, Polarization(a, b, 0.0), k)
        dirs.append(np.arctan2(sx, sy))
    dir_worst = max(float(np.max(np.abs(dd - dirs[0]))) for dd in dirs[1:])
    ok = sz_worst <= 1e-12 and dir_worst <= 1e-12
    report("6c S_z and direction invariance", ok,
           f"max |S_z| / max |S| = {sz_worst:.1e} for phase 0, pi (<= 1e-12); "
           f"max direction difference = {dir_worst:.1e} rad (<= 1e-12)")
    assert ok


@pytest.mark.xfail(strict=True, reason=(
    "(2 delta + d/2)^2 / (4 pi lambda) = 2.25 d^2 / (4 pi lambda) = 0.179 L_T for delta = d/2; "
    "the quoted 0.2 L_T is a rounded estimate 10.5% above the formula"))
def test_criterion_7_rayleigh_distance(fig3_config, report):
    g = fig3_config.grating
    yr = rayleigh_distance(g) / g.talbot_distance
    dev = abs(yr - 0.2) / 0.2
    report("7 Rayleigh distance", dev <= 0.1,
           f"y_R = {yr:.4f} L_T, {100 * dev:.1f}% from 0.2 L_T (<= 10%); y_R << y_ob = 4.3 L_T holds")
    assert yr < 4.3 / 10
    assert dev <= 0.1
