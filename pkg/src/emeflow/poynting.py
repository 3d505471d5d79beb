"""Polarization-resolved fields, time-averaged Poynting vector and energy density.

Internally eps0 = mu0 = c = 1 and omega = k, so the flux of a unit plane wave
is 1/2 and its energy density is 1/2.  :class:`PhysicalConstants` rescales to
SI at output time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .spectrum import DomainError, GratingSpec
from .wavefield import FieldBatch, FieldSample, QuadratureConfig, _as_modes, evaluate_batch

_LINEAR_TOL = 1e-12


@dataclass(frozen=True)
class Polarization:
    """H-polarized amplitude ``amp_h`` (A), E-polarized ``amp_e`` (B), relative phase."""

    amp_h: float = 1.0
    amp_e: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise DomainError("; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        for name in ("amp_h", "amp_e", "phase"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                out.append(f"{name} must be a finite number, got {v!r}")
        if out:
            return out
        if self.amp_h < 0 or self.amp_e < 0:
            out.append("amp_h and amp_e must be nonnegative")
        if self.amp_h**2 + self.amp_e**2 <= 0:
            out.append("amp_h and amp_e must not both be zero")
        if not -math.pi <= self.phase <= math.pi:
            out.append(f"phase must lie in [-pi, pi], got {self.phase!r}")
        return out

    @property
    def intensity(self) -> float:
        return self.amp_h**2 + self.amp_e**2

    def is_linear(self) -> bool:
        if self.amp_h * self.amp_e == 0:
            return True
        return abs(math.sin(self.phase)) <= _LINEAR_TOL


@dataclass(frozen=True)
class PhysicalConstants:
    """Vacuum constants used to express results in SI units."""

    eps0: float = 8.8541878128e-12
    mu0: float = 1.25663706212e-6

    @property
    def c(self) -> float:
        return 1.0 / math.sqrt(self.eps0 * self.mu0)

    def flux_scale(self) -> float:
        """Factor turning natural-unit flux into W/m^2 (per unit |psi|^2)."""
        return math.sqrt(self.mu0 / self.eps0)

    def energy_scale(self) -> float:
        """Factor turning natural-unit energy density into J/m^3."""
        return self.mu0


@dataclass(frozen=True)
class PoyntingSample:
    s: tuple
    u: float
    position: tuple
    u_paraxial: float = float("nan")


def electromagnetic_fields(field, pol: Polarization, k: float):
    """Complex E and H (each a tuple of x, y, z components) for psi and its gradient.

    With ``eps0 = 1`` and ``omega = k``::

        H = -(i/k) B e^{i phi} psi_y e_x + (i/k) B e^{i phi} psi_x e_y + A psi e_z
        E = (i A / k) psi_y e_x - (i A / k) psi_x e_y + B e^{i phi} psi e_z
    """
    A = pol.amp_h
    Bp = pol.amp_e * np.exp(1j * pol.phase)
    psi, px, py = field.psi, field.dpsi_dx, field.dpsi_dy
    H = (-1j / k * Bp * py, 1j / k * Bp * px, A * psi)
    E = (1j * A / k * py, -1j * A / k * px, Bp * psi)
    return E, H


def _brackets(psi, px, py):
    # i (psi d psi* - psi* d psi) = 2 Im(psi* d psi)
    bx = 2.0 * np.imag(np.conj(psi) * px)
    by = 2.0 * np.imag(np.conj(psi) * py)
    # i (psi_x psi_y* - psi_x* psi_y) = -2 Im(psi_x psi_y*)
    bz = -2.0 * np.imag(px * np.conj(py))
    return bx, by, bz


def poynting_components(field, pol: Polarization, k: float, constants: Optional[PhysicalConstants] = None):
    """(S_x, S_y, S_z) as real arrays.

    S_x = (A^2 + B^2)/(4 eps0 omega) * i (psi psi_x* - psi* psi_x), S_y likewise,
    S_z = A B sin(phi)/(2 eps0 omega k) * i (psi_x psi_y* - psi_x* psi_y).
    """
    psi = np.asarray(field.psi)
    bx, by, bz = _brackets(psi, np.asarray(field.dpsi_dx), np.asarray(field.dpsi_dy))
    w = k  # omega with c = 1
    I = pol.intensity
    sx = I / (4.0 * w) * bx
    sy = I / (4.0 * w) * by
    sz = pol.amp_h * pol.amp_e * math.sin(pol.phase) / (2.0 * w * k) * bz
    if constants is not None:
        f = constants.flux_scale()
        sx, sy, sz = sx * f, sy * f, sz * f
    return sx, sy, sz


def energy_density_values(field, pol: Polarization, k: float, mode: str = "exact",
                          constants: Optional[PhysicalConstants] = None):
    """Time-averaged energy density U for ``mode`` in {"exact", "paraxial"}."""
    psi = np.asarray(field.psi)
    if mode == "exact":
        E, H = electromagnetic_fields(field, pol, k)
        u = 0.25 * sum(np.abs(c) ** 2 for c in E) + 0.25 * sum(np.abs(c) ** 2 for c in H)
    elif mode == "paraxial":
        u = 0.5 * pol.intensity * np.abs(psi) ** 2
    else:
        raise ValueError(f"mode must be 'exact' or 'paraxial', got {mode!r}")
    if constants is not None:
        u = u * constants.energy_scale()
    return u


def poynting_vector(field: FieldSample, pol: Polarization, k: float,
                    constants: Optional[PhysicalConstants] = None) -> PoyntingSample:
    """Time-averaged Poynting vector and exact energy density at one sample."""
    sx, sy, sz = poynting_components(field, pol, k, constants)
    u = energy_density_values(field, pol, k, "exact", constants)
    up = energy_density_values(field, pol, k, "paraxial", constants)
    return PoyntingSample(
        (float(sx), float(sy), float(sz)), float(u), tuple(field.position), float(up)
    )


def energy_density(field: FieldSample, pol: Polarization, k: float, mode: str = "exact",
                   constants: Optional[PhysicalConstants] = None) -> float:
    return float(energy_density_values(field, pol, k, mode, constants))


def divergence_check(spec_or_modes, quad: Optional[QuadratureConfig], pol: Polarization,
                     x_points, y_points, h: float) -> float:
    """Largest |dS_x/dx + dS_y/dy| / (c U / d) over the probe points.

    Derivatives of S are central differences with step ``h``; S itself uses
    the analytic field gradient.  Returns the finite-difference level
    divergence normalized by the local energy transport scale.
    """
    if not pol.is_linear():
        raise DomainError("the planar divergence check needs linear polarization")
    modes = _as_modes(spec_or_modes, quad)
    k = modes.k
    x, y = np.broadcast_arrays(np.asarray(x_points, dtype=float), np.asarray(y_points, dtype=float))
    x = x.ravel()
    y = y.ravel()

    def flux(xx, yy):
        f = evaluate_batch(modes, None, xx, yy)
        sx, sy, _ = poynting_components(f, pol, k)
        return sx, sy, f

    sxp, _, _ = flux(x + h, y)
    sxm, _, _ = flux(x - h, y)
    _, syp, _ = flux(x, y + h)
    _, sym, _ = flux(x, y - h)
    _, _, f0 = flux(x, y)
    div = (sxp - sxm) / (2 * h) + (syp - sym) / (2 * h)
    u = energy_density_values(f0, pol, k, "exact")
    scale = period_of(modes, spec_or_modes)
    return float(np.max(np.abs(div) / (u / scale)))


def period_of(modes, spec_or_modes) -> float:
    if isinstance(spec_or_modes, GratingSpec):
        return spec_or_modes.period
    if modes.grating is not None:
        return modes.grating.period
    return 2.0 * math.pi / modes.k


def field_map(spec_or_modes, quad, pol: Polarization, x, y):
    """Sx, Sy, Sz, U_exact, U_paraxial on paired point arrays (natural units)."""
    modes = _as_modes(spec_or_modes, quad)
    f = evaluate_batch(modes, None, x, y)
    sx, sy, sz = poynting_components(f, pol, modes.k)
    ue = energy_density_values(f, pol, modes.k, "exact")
    up = energy_density_values(f, pol, modes.k, "paraxial")
    return sx, sy, sz, ue, up


__all__ = [
    "Polarization",
    "PhysicalConstants",
    "PoyntingSample",
    "electromagnetic_fields",
    "poynting_components",
    "poynting_vector",
    "energy_density",
    "energy_density_values",
    "divergence_check",
    "field_map",
    "FieldBatch",
]
