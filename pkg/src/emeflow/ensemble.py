"""Single-photon Monte Carlo: random launches, arrival histograms, convergence metrics.

Random numbers come from the Philox-4x64 counter-based generator keyed by the
run seed.  Photon ``i`` consumes the ``i``-th double of the stream, so the
first ``n`` photons of a longer run are exactly the photons of an ``n``-photon
run with the same seed.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .flowline import IntegratorConfig, Termination, endpoints, _STATUS
from .poynting import Polarization
from .spectrum import DomainError, GratingSpec
from .wavefield import QuadratureConfig, evaluate_batch, grating_modes, SpectralModes

_GL_PER_BIN = 16


def photon_stream(seed: int) -> np.random.Generator:
    """Generator for a run seed (unsigned 64-bit)."""
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise DomainError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return np.random.Generator(np.random.Philox(key=seed))


def sample_launches(spec: GratingSpec, n: int, seed: int) -> np.ndarray:
    """``n`` launch positions uniform over the union of the slit apertures (meters)."""
    if n < 1:
        raise DomainError("n must be at least 1")
    u = photon_stream(seed).random(n)
    width = spec.slit_width
    s = u * (spec.num_slits * width)
    slit = np.minimum((s / width).astype(np.int64), spec.num_slits - 1)
    left = spec.slit_edges()[:, 0]
    return left[slit] + (s - slit * width)


@dataclass
class ArrivalHistogram:
    """Binned arrival positions at ``y_observation`` (SI units)."""

    bin_edges: np.ndarray
    counts: np.ndarray
    y_observation: float
    total_photons: int
    terminated_elsewhere: int
    status_counts: dict = field(default_factory=dict)

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])

    @property
    def bin_width(self) -> float:
        return float(self.bin_edges[1] - self.bin_edges[0])

    def normalized(self) -> np.ndarray:
        total = self.counts.sum()
        return self.counts / total if total else np.zeros(self.counts.shape)


def centered_bins(bin_width: float, half_window: float) -> np.ndarray:
    """Edges of equal bins, one centered on x = 0, all inside [-half_window, half_window]."""
    m = int(math.floor((half_window - 0.5 * bin_width) / bin_width + 1e-9))
    return (np.arange(-m, m + 2) - 0.5) * bin_width


def bin_endpoints(end_x, status, bin_width: float, half_window: float, y_ob: float) -> ArrivalHistogram:
    """Bin final x of photons that reached ``y_ob``; everything else counts as elsewhere.

    Bin indices are computed from |x| so mirrored endpoints land in mirrored bins.
    """
    end_x = np.asarray(end_x, dtype=float)
    status = np.asarray(status)
    edges = centered_bins(bin_width, half_window)
    m = (len(edges) - 2) // 2
    reached = status == 1
    counts = np.zeros(len(edges) - 1, dtype=np.int64)
    xs = end_x[reached]
    j = np.floor(np.abs(xs) / bin_width + 0.5).astype(np.int64)
    j = np.where(xs < 0, -j, j)
    inside = np.abs(j) <= m
    np.add.at(counts, j[inside] + m, 1)
    elsewhere = int(end_x.size - counts.sum())
    status_counts = {t.value: int(np.sum(status == code)) for code, t in _STATUS.items()}
    return ArrivalHistogram(edges, counts, float(y_ob), int(end_x.size), elsewhere, status_counts)


def rayleigh_distance(spec: GratingSpec) -> float:
    """Far-field distance (2 delta + d/2)^2 / (4 pi lambda)."""
    return (2.0 * spec.slit_width + 0.5 * spec.period) ** 2 / (4.0 * math.pi * spec.wavelength)


def _modes(spec, quad):
    return spec if isinstance(spec, SpectralModes) else grating_modes(spec, quad or QuadratureConfig())


def density_reference(spec, quad: Optional[QuadratureConfig], y_ob: float, x_grid,
                      window: Optional[tuple] = None) -> np.ndarray:
    """|psi(x, y_ob)|^2 on ``x_grid`` normalized to unit integral over ``window``.

    ``window`` defaults to the span of ``x_grid``.
    """
    x_grid = np.asarray(x_grid, dtype=float)
    modes = _modes(spec, quad)
    vals = np.abs(evaluate_batch(modes, None, x_grid, np.full_like(x_grid, y_ob)).psi) ** 2
    lo, hi = (float(np.min(x_grid)), float(np.max(x_grid))) if window is None else map(float, window)
    if hi <= lo:
        raise DomainError("the normalization window must span a nonzero interval")
    period = modes.grating.period if modes.grating is not None else 2.0 * math.pi / modes.k
    total = _integrate_density(modes, y_ob, lo, hi, max(1, int(math.ceil((hi - lo) / (0.25 * period)))))
    return vals / total


def _integrate_density(modes, y_ob, lo, hi, panels):
    gx, gw = np.polynomial.legendre.leggauss(_GL_PER_BIN)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mids = 0.5 * (edges[:-1] + edges[1:])
    xs = (mids[:, None] + half[:, None] * gx[None, :]).ravel()
    vals = np.abs(evaluate_batch(modes, None, xs, np.full_like(xs, y_ob)).psi) ** 2
    return float(np.sum(vals.reshape(panels, -1) * gw[None, :] * half[:, None]))


def reference_bin_probabilities(spec: GratingSpec, quad: Optional[QuadratureConfig], y_ob: float,
                                bin_edges) -> np.ndarray:
    """|psi|^2 integrated over every bin (Gauss-Legendre, 4 panels per bin), normalized."""
    modes = _modes(spec, quad)
    gx, gw = np.polynomial.legendre.leggauss(_GL_PER_BIN)
    sub = 4
    edges = np.asarray(bin_edges, dtype=float)
    fine = np.concatenate(
        [np.linspace(edges[i], edges[i + 1], sub + 1)[:-1] for i in range(len(edges) - 1)] + [edges[-1:]]
    )
    half = 0.5 * np.diff(fine)
    mids = 0.5 * (fine[:-1] + fine[1:])
    xs = (mids[:, None] + half[:, None] * gx[None, :]).ravel()
    vals = np.abs(evaluate_batch(modes, None, xs, np.full_like(xs, y_ob)).psi) ** 2
    per = np.sum(vals.reshape(len(mids), -1) * gw[None, :] * half[:, None], axis=1)
    per = per.reshape(len(edges) - 1, sub).sum(axis=1)
    return per / per.sum()


def tv_distance(p, q) -> float:
    """Half the L1 distance between two vectors, each normalized to unit sum."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return 0.5 * float(np.sum(np.abs(p / p.sum() - q / q.sum())))


def chi_square(counts, probs) -> float:
    counts = np.asarray(counts, dtype=float)
    probs = np.asarray(probs, dtype=float)
    n = counts.sum()
    expected = n * probs / probs.sum()
    mask = expected > 0
    return float(np.sum((counts[mask] - expected[mask]) ** 2 / expected[mask]))


@dataclass
class EnsembleRun:
    """Launches and endpoints of one seeded run; histograms for any prefix length."""

    spec: GratingSpec
    launches: np.ndarray
    end_x: np.ndarray
    status: np.ndarray
    steps: np.ndarray
    y_observation: float

    def histogram(self, bin_width: float, half_window: float, n: Optional[int] = None) -> ArrivalHistogram:
        n = self.launches.size if n is None else int(n)
        return bin_endpoints(self.end_x[:n], self.status[:n], bin_width, half_window, self.y_observation)


def simulate(spec: GratingSpec, quad: Optional[QuadratureConfig], pol: Polarization,
             cfg: IntegratorConfig, n: int, seed: int, threads: int = 1) -> EnsembleRun:
    """Trace ``n`` seeded photons to ``cfg.y_target``."""
    launches = sample_launches(spec, n, seed)
    y_ob = cfg.y_target * spec.talbot_distance
    if y_ob < rayleigh_distance(spec):
        warnings.warn(
            f"observation height {y_ob:g} m is inside the Rayleigh distance "
            f"{rayleigh_distance(spec):g} m; the far-field pattern is not yet formed",
            stacklevel=2,
        )
    end_x, _, status, steps = endpoints(spec, quad, pol, cfg, launches, threads=threads)
    return EnsembleRun(spec, launches, end_x, status, steps, y_ob)


def accumulate(spec: GratingSpec, quad: Optional[QuadratureConfig], pol: Polarization,
               cfg: IntegratorConfig, n: int, seed: int, y_ob: float, bin_width: float,
               half_window: Optional[float] = None, threads: int = 1) -> ArrivalHistogram:
    """Histogram of ``n`` seeded photon arrivals at height ``y_ob`` (meters).

    ``half_window`` defaults to 10 periods.
    """
    if y_ob <= cfg.y_launch * spec.talbot_distance:
        raise DomainError("y_ob must lie above the launch plane")
    cfg = _with_target(cfg, y_ob / spec.talbot_distance)
    run = simulate(spec, quad, pol, cfg, n, seed, threads)
    hw = 10.0 * spec.period if half_window is None else half_window
    return run.histogram(bin_width, hw)


def _with_target(cfg: IntegratorConfig, y_target: float) -> IntegratorConfig:
    from dataclasses import replace

    return replace(cfg, y_target=y_target)


def order_suppression(end_x, status, spec: GratingSpec, y_ob: float, order: int = 2,
                      half_width: Optional[float] = None) -> float:
    """Counts near diffraction order ``order`` relative to counts near order ``order - 1``.

    Order m sits at |x| = m * lambda * y_ob / d; each window has the half
    width ``half_width`` (default 0.45 d) and both signs of x are pooled.
    """
    hw = 0.45 * spec.period if half_width is None else half_width
    xs = np.abs(np.asarray(end_x)[np.asarray(status) == 1])
    spacing = spec.wavelength * y_ob / spec.period

    def count(m):
        c = m * spacing
        return int(np.sum((xs >= c - hw) & (xs <= c + hw)))

    ref = count(order - 1)
    return count(order) / ref if ref else math.inf
