"""Oracle and property checks bundled for the ``validate`` command."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .poynting import Polarization, divergence_check, energy_density_values
from .spectrum import GratingSpec, verify_transform_pair
from .wavefield import (
    QuadratureConfig,
    SpectralModes,
    evaluate_batch,
    fresnel_field,
    grating_modes,
    paraxial_residual,
)


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: str
    detail: dict

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "value": float(self.value),
            "threshold": self.threshold,
            "detail": self.detail,
        }


def check_transform_pair(spec: GratingSpec, quad: QuadratureConfig) -> CheckResult:
    K = quad.resolved_kx_max(spec)
    grid = np.linspace(-K, K, 161)
    err = verify_transform_pair(spec, grid)
    return CheckResult("transform_pair", err < 1e-6, err, "< 1e-6", {"kx_points": 161})


def check_fresnel(spec: GratingSpec, quad: QuadratureConfig) -> CheckResult:
    """Mode integral with exact spectral tails versus the closed-form Fresnel field."""
    d, LT = spec.period, spec.talbot_distance
    xs = np.linspace(-(0.5 * spec.num_slits + 1) * d, (0.5 * spec.num_slits + 1) * d, 6)
    ys = np.linspace(0.05, 2.0, 6) * LT
    X, Y = np.meshgrid(xs, ys)
    full = replace(quad, tail=True)
    a = evaluate_batch(spec, full, X, Y).psi
    b = fresnel_field(spec, X, Y).psi
    rel = float(np.max(np.max(np.abs(a - b), axis=1) / np.max(np.abs(b), axis=1)))
    return CheckResult("fresnel_cross_check", rel < 1e-5, rel, "< 1e-5", {"grid": "6x6"})


def _probe_points(spec, y_lo, y_hi, n=40, seed=12345):
    rng = np.random.default_rng(seed)
    d, LT = spec.period, spec.talbot_distance
    half = max(3.0, 0.5 * spec.num_slits + 0.5) * d
    return rng.uniform(-half, half, n), rng.uniform(y_lo, y_hi, n) * LT


def check_paraxial(spec: GratingSpec, quad: QuadratureConfig) -> CheckResult:
    xs, ys = _probe_points(spec, 0.1, 1.0)
    h = spec.wavelength / 20.0
    r1 = paraxial_residual(spec, replace(quad, tail=False), xs, ys, h)
    r2 = paraxial_residual(spec, replace(quad, tail=False), xs, ys, h / 2)
    ratio = r1 / r2 if r2 > 0 else math.inf
    ok = r1 < 1e-3 and 3.0 <= ratio <= 5.0
    return CheckResult(
        "paraxial_residual", ok, r1, "< 1e-3 at h = lambda/20, h-halving ratio in [3, 5]",
        {"h_over_lambda": 0.05, "residual_half_h": r2, "ratio": ratio},
    )


def divergence_source(modes: SpectralModes, pol: Polarization, x, y) -> np.ndarray:
    """Analytic div S / (c U / d) of the mode sum.

    The sum obeys the paraxial equation, not the Helmholtz equation, so
    div S = I / (2k) Im(A* A_yy) with A_yy = -sum amp q^4 e cos / (4 k^2).
    """
    k = modes.k
    q = np.arange(modes.amp.size) * modes.dq if modes.uniform else modes.q
    x = np.ascontiguousarray(np.ravel(x))
    y = np.ascontiguousarray(np.ravel(y))
    A, _, _ = _kernels.node_sums(q, modes.amp, k, x, y)
    _, _, B4 = _kernels.node_sums(q, modes.amp * q * q, k, x, y)
    ayy = -B4 / (4.0 * k * k)
    div = pol.intensity / (2.0 * k) * np.imag(np.conj(A) * ayy)
    f = evaluate_batch(modes, None, x, y)
    u = energy_density_values(f, pol, k)
    d = modes.grating.period if modes.grating is not None else 2 * math.pi / k
    return div / (u / d)


def check_divergence(spec: GratingSpec, quad: QuadratureConfig, pol: Polarization) -> CheckResult:
    """Finite-difference div S against its analytic value; the mismatch must fall as h^2."""
    pol = pol if pol.is_linear() else Polarization(1.0, 0.0, 0.0)
    modes = grating_modes(spec, replace(quad, tail=False))
    xs, ys = _probe_points(spec, 0.2, 1.0)
    lam = spec.wavelength
    src = divergence_source(modes, pol, xs, ys)
    mism = []
    raw = []
    for h in (lam / 5, lam / 10):
        vals = _pointwise_divergence(modes, pol, xs, ys, h)
        mism.append(float(np.max(np.abs(vals - src))))
        raw.append(float(np.max(np.abs(vals))))
    ratio = mism[0] / mism[1] if mism[1] > 0 else math.inf
    ok = 3.0 <= ratio <= 5.0
    return CheckResult(
        "divergence_balance", ok, mism[0],
        "|FD div - analytic div| halving ratio in [3, 5]",
        {
            "raw_residual_h": raw[0],
            "raw_residual_half_h": raw[1],
            "paraxial_source_max": float(np.max(np.abs(src))),
            "ratio": ratio,
        },
    )


def _pointwise_divergence(modes, pol, xs, ys, h):
    from .poynting import poynting_components

    k = modes.k

    def flux(xx, yy):
        return poynting_components(evaluate_batch(modes, None, xx, yy), pol, k)

    div = (flux(xs + h, ys)[0] - flux(xs - h, ys)[0]) / (2 * h) + (
        flux(xs, ys + h)[1] - flux(xs, ys - h)[1]
    ) / (2 * h)
    u = energy_density_values(evaluate_batch(modes, None, xs, ys), pol, k)
    return div / (u / modes.grating.period)


def run_validation(spec: GratingSpec, quad: QuadratureConfig, pol: Polarization) -> list[CheckResult]:
    return [
        check_transform_pair(spec, quad),
        check_fresnel(spec, quad),
        check_paraxial(spec, quad),
        check_divergence(spec, quad, pol),
    ]


# the raw divergence is exposed for completeness
__all__ = ["CheckResult", "run_validation", "divergence_check", "divergence_source"]
