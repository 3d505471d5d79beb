"""Grating geometry and the spectral amplitude of its aperture field."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

# below this |sin(v)| the Dirichlet ratio switches to its analytic limit
_DIRICHLET_EPS = 1e-8


class DomainError(ValueError):
    """Raised when an evaluation point or parameter lies outside the model's domain."""


@dataclass(frozen=True)
class GratingSpec:
    """N identical slits of width ``slit_width`` repeated with ``period``.

    Lengths are in meters.  Slit centers sit at ``(j - (N + 1) / 2) * d`` for
    ``j = 1..N`` so the aperture is symmetric about ``x = 0``.
    """

    num_slits: int
    period: float
    slit_width: float
    wavelength: float

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise DomainError("; ".join(problems))
        if self.period < 5.0 * self.wavelength:
            warnings.warn(
                f"period {self.period:g} m is less than 5 wavelengths; "
                "the paraxial field model is a poor approximation here",
                stacklevel=3,
            )

    def problems(self) -> list[str]:
        out = []
        if not isinstance(self.num_slits, (int, np.integer)) or self.num_slits < 1:
            out.append(f"num_slits must be a positive integer, got {self.num_slits!r}")
        for name in ("period", "slit_width", "wavelength"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                out.append(f"{name} must be a positive finite number, got {v!r}")
        if not out and self.slit_width > self.period:
            out.append(
                f"slit_width ({self.slit_width:g}) must not exceed period ({self.period:g})"
            )
        return out

    @property
    def wavenumber(self) -> float:
        return 2.0 * math.pi / self.wavelength

    @property
    def talbot_distance(self) -> float:
        return self.period**2 / self.wavelength

    @property
    def paraxial_ok(self) -> bool:
        return self.period >= 5.0 * self.wavelength

    def slit_centers(self) -> np.ndarray:
        j = np.arange(1, self.num_slits + 1)
        return (j - (self.num_slits + 1) / 2.0) * self.period

    def slit_edges(self) -> np.ndarray:
        """Array of shape (N, 2) holding the left and right edge of every slit."""
        c = self.slit_centers()
        h = 0.5 * self.slit_width
        return np.stack([c - h, c + h], axis=1)

    def inside(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        edges = self.slit_edges()
        hit = np.zeros(x.shape, dtype=bool)
        for a, b in edges:
            hit |= (x >= a) & (x <= b)
        return hit

    def to_dict(self) -> dict:
        return {
            "num_slits": int(self.num_slits),
            "period_m": float(self.period),
            "slit_width_m": float(self.slit_width),
            "wavelength_m": float(self.wavelength),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GratingSpec":
        return cls(
            num_slits=data["num_slits"],
            period=data["period_m"],
            slit_width=data["slit_width_m"],
            wavelength=data["wavelength_m"],
        )


def default_kx_max(spec: GratingSpec) -> float:
    return min(0.2 * spec.wavenumber, 40.0 * math.pi / spec.period)


@dataclass(frozen=True)
class SpectralAmplitude:
    """The aperture spectrum restricted to ``|kx| <= kx_max``."""

    grating: GratingSpec
    kx_max: float

    def __post_init__(self):
        if not (self.kx_max > 0 and self.kx_max < self.grating.wavenumber):
            raise DomainError(
                f"kx_max must lie in (0, k={self.grating.wavenumber:g}), got {self.kx_max:g}"
            )

    def __call__(self, kx):
        return spectral_amplitude(self.grating, kx)

    def energy(self, num: int = 200_001) -> float:
        """Integral of |c|^2 over the window (Simpson rule)."""
        from scipy.integrate import simpson

        kx = np.linspace(-self.kx_max, self.kx_max, num)
        return float(simpson(spectral_amplitude(self.grating, kx) ** 2, x=kx))


def _sinc(u: np.ndarray) -> np.ndarray:
    small = np.abs(u) < 1e-8
    safe = np.where(small, 1.0, u)
    return np.where(small, 1.0 - u * u / 6.0, np.sin(safe) / safe)


def dirichlet_ratio(n: int, v) -> np.ndarray:
    """sin(n v) / sin(v) with the removable singularities at v = m*pi filled in."""
    v = np.asarray(v, dtype=float)
    s = np.sin(v)
    regular = np.abs(s) > _DIRICHLET_EPS
    direct = np.sin(n * v) / np.where(regular, s, 1.0)
    limit = n * np.cos(n * v) / np.cos(v)
    return np.where(regular, direct, limit)


def spectral_amplitude(spec: GratingSpec, kx):
    """Spectral amplitude c(kx) of the unit-normalized N-slit aperture.

    c(kx) = sqrt(delta / N) / sqrt(2 pi) * sinc(kx delta / 2) * D_N(kx d / 2)

    Real and even in ``kx``; finite everywhere.
    """
    kx = np.abs(np.asarray(kx, dtype=float))
    pref = math.sqrt(spec.slit_width / spec.num_slits) / math.sqrt(2.0 * math.pi)
    out = pref * _sinc(0.5 * kx * spec.slit_width) * dirichlet_ratio(
        spec.num_slits, 0.5 * kx * spec.period
    )
    return out if out.ndim else float(out)


def spectral_amplitude_derivative(spec: GratingSpec, kx):
    """d c / d kx, used by the end-point corrected trapezoid rule."""
    kx = np.asarray(kx, dtype=float)
    sgn = np.where(kx < 0, -1.0, 1.0)
    q = np.abs(kx)
    n = spec.num_slits
    hd = 0.5 * spec.slit_width
    hp = 0.5 * spec.period
    pref = math.sqrt(spec.slit_width / n) / math.sqrt(2.0 * math.pi)
    u = q * hd
    v = q * hp
    small_u = np.abs(u) < 1e-4
    us = np.where(small_u, 1.0, u)
    dsinc = np.where(small_u, -u / 3.0, (np.cos(us) * us - np.sin(us)) / (us * us))
    s = np.sin(v)
    regular = np.abs(s) > 1e-4
    ss = np.where(regular, s, 1.0)
    dd_direct = (n * np.cos(n * v) * ss - np.sin(n * v) * np.cos(v)) / (ss * ss)
    # near v = m*pi expand the ratio to first order in (v - m*pi)
    m = np.round(v / math.pi)
    sign_m = np.where(np.mod(m * (n - 1), 2) == 0, 1.0, -1.0)
    w = v - m * math.pi
    dd_limit = sign_m * (-(n**3 - n) / 3.0) * w
    dd = np.where(regular, dd_direct, dd_limit)
    val = pref * (hd * dsinc * dirichlet_ratio(n, v) + _sinc(u) * hp * dd)
    return sgn * val


def aperture_field(spec: GratingSpec, x):
    """Boundary field at y = 0: 1/sqrt(N delta) inside a slit, zero outside."""
    val = 1.0 / math.sqrt(spec.num_slits * spec.slit_width)
    out = np.where(spec.inside(x), val, 0.0)
    return out if out.ndim else float(out)


def fourier_transform_aperture(spec: GratingSpec, kx, points_per_slit: int = 20_000):
    """Midpoint-rule transform (1/sqrt(2 pi)) * int psi(x, 0) exp(-i kx x) dx."""
    kx = np.atleast_1d(np.asarray(kx, dtype=float))
    val = 1.0 / math.sqrt(spec.num_slits * spec.slit_width)
    h = spec.slit_width / points_per_slit
    local = (np.arange(points_per_slit) + 0.5) * h
    total = np.zeros(kx.shape, dtype=complex)
    for a, _ in spec.slit_edges():
        xs = a + local
        # chunk over kx to bound memory
        for lo in range(0, kx.size, 256):
            sl = slice(lo, lo + 256)
            total[sl] += np.exp(-1j * np.outer(kx[sl], xs)).sum(axis=1) * h
    return total * val / math.sqrt(2.0 * math.pi)


def verify_transform_pair(spec: GratingSpec, kx_grid, points_per_slit: int = 20_000) -> float:
    """Largest |numerical transform - c(kx)| over ``kx_grid``.

    The symmetric slit placement makes the transform real, so no phase
    convention needs to be removed before comparing.  A coarse x grid shows up
    as a larger returned error rather than an exception.
    """
    kx_grid = np.asarray(kx_grid, dtype=float)
    numeric = fourier_transform_aperture(spec, kx_grid, points_per_slit)
    return float(np.max(np.abs(numeric - spectral_amplitude(spec, kx_grid))))
