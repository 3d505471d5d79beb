"""Diffracted scalar field behind the grating and its first derivatives.

The field is a superposition of transverse modes with paraxial longitudinal
phase::

    psi(x, y) = exp(i k y) / sqrt(2 pi) * int c(q) exp(i q x - i q^2 y / (2k)) dq

Writing ``psi = exp(i k y) A`` and pairing the nodes at ``+q`` and ``-q``
(``c`` is even), the envelope is a cosine sum, which makes the computed field
exactly mirror-symmetric in ``x``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .fresnel import fresnel_e
from .spectrum import (
    DomainError,
    GratingSpec,
    default_kx_max,
    spectral_amplitude,
    spectral_amplitude_derivative,
)

SCHEMES = ("uniform-trapezoid", "gauss-legendre")
_GL_PANEL = 16


@dataclass(frozen=True)
class FieldSample:
    """psi and its first derivatives at one point (SI units)."""

    psi: complex
    dpsi_dx: complex
    dpsi_dy: complex
    position: tuple


@dataclass(frozen=True)
class FieldBatch:
    """Vectorized counterpart of :class:`FieldSample`."""

    psi: np.ndarray
    dpsi_dx: np.ndarray
    dpsi_dy: np.ndarray
    x: np.ndarray
    y: np.ndarray

    def __len__(self):
        return self.psi.size

    def sample(self, i: int) -> FieldSample:
        return FieldSample(
            complex(self.psi[i]),
            complex(self.dpsi_dx[i]),
            complex(self.dpsi_dy[i]),
            (float(self.x[i]), float(self.y[i])),
        )


@dataclass(frozen=True)
class QuadratureConfig:
    """How the mode integral is discretized.

    Parameters
    ----------
    num_nodes : int
        Number of k_x samples over [-kx_max, kx_max].  The uniform rule uses
        ``2 * (num_nodes // 2) + 1`` nodes so that the grid is symmetric.
    kx_max : float or None
        Truncation bound in 1/m; ``None`` selects ``min(0.2 k, 40 pi / d)``.
    scheme : str
        ``"uniform-trapezoid"`` or ``"gauss-legendre"`` (composite, 16-point panels).
    tail : bool
        Add the exact contribution of |k_x| > kx_max (and an end-point
        correction for the trapezoid rule), turning the truncated sum into
        the full paraxial field of the sharp-edged aperture.
    """

    num_nodes: int = 4096
    kx_max: Optional[float] = None
    scheme: str = "uniform-trapezoid"
    tail: bool = False

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise DomainError("; ".join(problems))

    def problems(self, spec: Optional[GratingSpec] = None) -> list[str]:
        out = []
        if not isinstance(self.num_nodes, (int, np.integer)) or self.num_nodes < 64:
            out.append(f"num_nodes must be an integer >= 64, got {self.num_nodes!r}")
        if self.scheme not in SCHEMES:
            out.append(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.kx_max is not None and not (
            isinstance(self.kx_max, (int, float)) and self.kx_max > 0
        ):
            out.append(f"kx_max must be positive, got {self.kx_max!r}")
        if spec is not None and self.kx_max is not None and self.kx_max >= spec.wavenumber:
            out.append(f"kx_max ({self.kx_max:g}) must be below k ({spec.wavenumber:g})")
        return out

    def resolved_kx_max(self, spec: GratingSpec) -> float:
        K = default_kx_max(spec) if self.kx_max is None else float(self.kx_max)
        if not K < spec.wavenumber:
            raise DomainError(f"kx_max ({K:g}) must be below k ({spec.wavenumber:g})")
        return K


def min_nodes_for(spec: GratingSpec, kx_max: float, y_max: float) -> int:
    """Node count giving four samples per period of the chirp at the window edge."""
    return int(math.ceil(4.0 * kx_max**2 * y_max / (math.pi * spec.wavenumber)))


@dataclass(frozen=True)
class SpectralModes:
    """A discretized mode set ready for evaluation.

    ``uniform`` sets hold nodes ``n * dq``; otherwise ``q`` lists the nodes.
    ``amp`` already contains quadrature weights, the 1/sqrt(2 pi) of the
    propagation integral and the factor two from pairing ``+q`` with ``-q``.
    """

    k: float
    amp: np.ndarray
    dq: float = 0.0
    q: Optional[np.ndarray] = None
    grating: Optional[GratingSpec] = None
    kx_max: float = 0.0
    tail: bool = False
    label: str = ""

    @property
    def uniform(self) -> bool:
        return self.q is None

    @property
    def spatial_period(self) -> float:
        """Period in x of a uniform sum (its alias-free extent); inf otherwise."""
        if self.uniform and self.dq > 0:
            return 2.0 * math.pi / self.dq
        return math.inf

    def envelope(self, x, y):
        """Return (A, A_x, B) where psi = exp(iky) A and A_y = -i B / (2k)."""
        x = np.ascontiguousarray(np.asarray(x, dtype=float).ravel())
        y = np.ascontiguousarray(np.asarray(y, dtype=float).ravel())
        if self.uniform:
            A, X, B = _kernels.uniform_sums(self.dq, self.amp, self.k, x, y)
        else:
            A, X, B = _kernels.node_sums(self.q, self.amp, self.k, x, y)
        if self.tail:
            a2, x2, b2 = self._tail(x, y)
            A = A + a2
            X = X + x2
            B = B + b2
        return A, X, B

    def _tail(self, x, y):
        spec = self.grating
        K = self.kx_max
        edges = spec.slit_edges()
        pos = np.concatenate([edges[:, 0], edges[:, 1]])
        sgn = np.concatenate([np.ones(spec.num_slits), -np.ones(spec.num_slits)])
        norm = 1.0 / (2.0 * math.pi * math.sqrt(spec.num_slits * spec.slit_width))
        gx, gw = np.polynomial.legendre.leggauss(_GL_PANEL)
        A, X, B = _kernels.tail_sums(K, pos, sgn, norm, self.k, x, y, gx, gw)
        if self.uniform:
            # Euler-Maclaurin end correction: -dq^2/12 [f'(K) - f'(-K)]
            beta = y / (2.0 * self.k)
            c = spectral_amplitude(spec, K)
            dc = float(spectral_amplitude_derivative(spec, K))
            s2 = 1.0 / math.sqrt(2.0 * math.pi)
            corr = {}
            for sign in (1.0, -1.0):
                q = sign * K
                ph = np.exp(1j * (q * x - beta * q * q))
                f = s2 * c * ph
                fp = s2 * (sign * dc + 1j * c * (x - 2.0 * beta * q)) * ph
                corr[sign] = (fp, 1j * f + 1j * q * fp, 2.0 * q * f + q * q * fp)
            w = -(self.dq**2) / 12.0
            A = A + w * (corr[1.0][0] - corr[-1.0][0])
            X = X + w * (corr[1.0][1] - corr[-1.0][1])
            B = B + w * (corr[1.0][2] - corr[-1.0][2])
        return A, X, B


def grating_modes(spec: GratingSpec, quad: QuadratureConfig) -> SpectralModes:
    """Discretize the grating spectrum according to ``quad``."""
    K = quad.resolved_kx_max(spec)
    s2 = 1.0 / math.sqrt(2.0 * math.pi)
    if quad.scheme == "uniform-trapezoid":
        half = quad.num_nodes // 2
        dq = K / half
        q = np.arange(half + 1) * dq
        w = np.full(half + 1, 2.0 * dq)
        w[0] = dq
        w[-1] = dq
        amp = w * spectral_amplitude(spec, q) * s2
        return SpectralModes(
            k=spec.wavenumber,
            amp=np.ascontiguousarray(amp),
            dq=dq,
            grating=spec,
            kx_max=K,
            tail=quad.tail,
            label="uniform-trapezoid",
        )
    # composite Gauss-Legendre on [0, K]; pairing doubles every weight
    panels = max(1, quad.num_nodes // (2 * _GL_PANEL))
    gx, gw = np.polynomial.legendre.leggauss(_GL_PANEL)
    hw = 0.5 * K / panels
    mids = (2 * np.arange(panels) + 1) * hw
    q = (mids[:, None] + hw * gx[None, :]).ravel()
    w = np.tile(gw * hw, panels) * 2.0
    amp = w * spectral_amplitude(spec, q) * s2
    return SpectralModes(
        k=spec.wavenumber,
        amp=np.ascontiguousarray(amp),
        q=np.ascontiguousarray(q),
        grating=spec,
        kx_max=K,
        tail=quad.tail,
        label="gauss-legendre",
    )


def plane_wave_modes(wavenumber: float) -> SpectralModes:
    """c(k_x) = delta(k_x): psi = exp(i k y) exactly."""
    return SpectralModes(k=wavenumber, amp=np.array([1.0]), dq=1.0, label="plane-wave")


def discrete_order_modes(spec: GratingSpec, n_max: int = 40) -> SpectralModes:
    """Fourier series of the infinitely repeated grating, orders |n| <= n_max."""
    dq = 2.0 * math.pi / spec.period
    q = np.arange(n_max + 1) * dq
    w = np.full(n_max + 1, 2.0 * dq)
    w[0] = dq
    amp = w * spectral_amplitude(spec, q) / math.sqrt(2.0 * math.pi)
    return SpectralModes(
        k=spec.wavenumber, amp=np.ascontiguousarray(amp), dq=dq, grating=spec, label="orders"
    )


def _as_modes(spec_or_modes, quad):
    if isinstance(spec_or_modes, SpectralModes):
        return spec_or_modes
    return grating_modes(spec_or_modes, quad or QuadratureConfig())


def evaluate_batch(spec_or_modes, quad: Optional[QuadratureConfig], x, y) -> FieldBatch:
    """Evaluate psi, d psi/dx, d psi/dy at paired arrays of points.

    ``spec_or_modes`` is a :class:`GratingSpec` (discretized with ``quad``) or a
    prepared :class:`SpectralModes`.
    """
    modes = _as_modes(spec_or_modes, quad)
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    shape = x.shape
    if np.any(y < 0) or not np.all(np.isfinite(y)) or not np.all(np.isfinite(x)):
        raise DomainError("field evaluation requires finite x and y >= 0")
    A, X, B = modes.envelope(x, y)
    k = modes.k
    ph = np.exp(1j * k * y.ravel())
    psi = ph * A
    dx = ph * X
    dy = ph * (1j * k * A - 1j * B / (2.0 * k))
    return FieldBatch(
        psi.reshape(shape), dx.reshape(shape), dy.reshape(shape), x.copy(), y.copy()
    )


def evaluate_field(spec_or_modes, quad: Optional[QuadratureConfig], x: float, y: float) -> FieldSample:
    """Field sample at a single point; see :func:`evaluate_batch`."""
    return evaluate_batch(spec_or_modes, quad, np.array([x]), np.array([y])).sample(0)


# --------------------------------------------------------------------------
# closed-form Fresnel propagation of the sharp-edged aperture


def fresnel_field(spec: GratingSpec, x, y) -> FieldBatch:
    """psi and both derivatives from Fresnel integrals, one pair per slit."""
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    if np.any(y <= 0):
        raise DomainError("the Fresnel solution needs y > 0")
    k = spec.wavenumber
    s = np.sqrt(k / (math.pi * y))
    pref = np.exp(-0.25j * math.pi) / math.sqrt(2.0) / math.sqrt(spec.num_slits * spec.slit_width)
    total = np.zeros(x.shape, dtype=complex)
    gx = np.zeros(x.shape, dtype=complex)
    gy = np.zeros(x.shape, dtype=complex)
    for a, b in spec.slit_edges():
        for edge, sign in ((b, 1.0), (a, -1.0)):
            t = (edge - x) * s
            chirp = np.exp(0.5j * math.pi * t * t)
            total += sign * fresnel_e(t)
            gx += sign * chirp * (-s)
            gy += sign * chirp * (-t / (2.0 * y))
    ph = np.exp(1j * k * y)
    psi = ph * pref * total
    dpsi_dx = ph * pref * gx
    dpsi_dy = 1j * k * psi + ph * pref * gy
    return FieldBatch(psi, dpsi_dx, dpsi_dy, x.copy(), y.copy())


def fresnel_oracle(spec: GratingSpec, x, y):
    """psi(x, y) from closed-form Fresnel integrals (independent of any k_x quadrature)."""
    out = fresnel_field(spec, x, y).psi
    return out if out.ndim else complex(out)


# --------------------------------------------------------------------------
# diagnostics


def paraxial_residual(spec_or_modes, quad: Optional[QuadratureConfig], x_points, y_points, h: float) -> float:
    """Largest |2ik A_y + A_xx| / (k^2 |A|) over the probe points.

    Both derivatives are central differences with step ``h`` built from
    values of ``A = psi exp(-iky)``.  The mode sum satisfies the paraxial
    equation exactly, so the result is pure finite-difference error and
    falls as h^2.
    """
    modes = _as_modes(spec_or_modes, quad)
    x, y = np.broadcast_arrays(np.asarray(x_points, dtype=float), np.asarray(y_points, dtype=float))
    x = x.ravel()
    y = y.ravel()
    k = modes.k

    def env(xx, yy):
        return modes.envelope(xx, yy)[0]

    a0 = env(x, y)
    axx = (env(x + h, y) - 2.0 * a0 + env(x - h, y)) / (h * h)
    ay = (env(x, y + h) - env(x, y - h)) / (2.0 * h)
    res = np.abs(2j * k * ay + axx) / (k * k * np.abs(a0))
    return float(np.max(res))


@dataclass
class RegionGrid:
    """Rectangular probe grid (meters) used by the diagnostics."""

    x: np.ndarray
    y: np.ndarray
    meta: dict = field(default_factory=dict)

    def mesh(self):
        return np.meshgrid(self.x, self.y, indexing="xy")
