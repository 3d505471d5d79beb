"""Energy flow lines: integral curves of the planar Poynting direction field.

Lines are advanced by arc length on the unit vector S/|S| with an embedded
Dormand-Prince 5(4) pair.  Several lines share each field evaluation pass,
but every line's arithmetic is independent of its neighbours, so results do
not depend on batch composition or thread count.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .poynting import Polarization, PoyntingSample
from .spectrum import DomainError, GratingSpec
from .wavefield import QuadratureConfig, SpectralModes, grating_modes


class Termination(str, enum.Enum):
    REACHED_TARGET_Y = "reached_target_y"
    STAGNATION = "stagnation"
    LEFT_WINDOW = "left_window"
    STEP_LIMIT = "step_limit"


_STATUS = {
    _kernels.STATUS_REACHED: Termination.REACHED_TARGET_Y,
    _kernels.STATUS_STAGNATION: Termination.STAGNATION,
    _kernels.STATUS_LEFT_WINDOW: Termination.LEFT_WINDOW,
    _kernels.STATUS_STEP_LIMIT: Termination.STEP_LIMIT,
}


@dataclass(frozen=True)
class IntegratorConfig:
    """Step control and stopping rules.

    Parameters
    ----------
    rel_tol : float
        Relative tolerance on the local error, scaled by the distance from the origin.
    abs_tol : float
        Absolute tolerance in units of the grating period d.
    max_step : float
        Largest arc-length step in units of d.
    stagnation_u_floor : float
        Energy density floor as a fraction of the largest density on the launch line.
    y_target : float
        Final height in units of the Talbot distance.
    y_launch : float
        Launch height in units of the Talbot distance.
    x_window : float or None
        Half-width of the allowed region in units of d; ``None`` uses a quarter
        of the spatial period of the mode sum.
    max_steps : int
        Accepted steps before giving up with ``step_limit``.
    """

    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    max_step: float = 1.0 / 50.0
    stagnation_u_floor: float = 1e-12
    y_target: float = 1.0
    y_launch: float = 1e-3
    x_window: Optional[float] = None
    max_steps: int = 200_000

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise DomainError("; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        for name in ("rel_tol", "abs_tol", "max_step", "stagnation_u_floor", "y_target", "y_launch"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not (v > 0 and math.isfinite(v)):
                out.append(f"{name} must be a positive finite number, got {v!r}")
        if self.x_window is not None and not (
            isinstance(self.x_window, (int, float)) and self.x_window > 0
        ):
            out.append(f"x_window must be positive or null, got {self.x_window!r}")
        if not isinstance(self.max_steps, (int, np.integer)) or self.max_steps < 1:
            out.append(f"max_steps must be a positive integer, got {self.max_steps!r}")
        if not out and self.y_launch >= self.y_target:
            out.append("y_launch must lie below y_target")
        return out


@dataclass
class Trajectory:
    """One flow line in SI units.

    ``tangents`` holds the unit direction at every point and lets
    :meth:`x_at` interpolate with cubic Hermite segments.
    """

    points: np.ndarray
    termination: Termination
    start: tuple
    tangents: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def end(self) -> tuple:
        return tuple(self.points[-1])

    def x_at(self, y_values) -> np.ndarray:
        """x(y) along the line; NaN outside the covered y range."""
        y_values = np.atleast_1d(np.asarray(y_values, dtype=float))
        px, py = self.points[:, 0], self.points[:, 1]
        out = np.full(y_values.shape, np.nan)
        if len(py) < 2:
            return out
        if self.tangents is None:
            ok = (y_values >= py[0]) & (y_values <= py[-1])
            out[ok] = np.interp(y_values[ok], py, px)
            return out
        tx, ty = self.tangents[:, 0], self.tangents[:, 1]
        slope = tx / ty
        seg = np.searchsorted(py, y_values, side="right") - 1
        seg = np.clip(seg, 0, len(py) - 2)
        ok = (y_values >= py[0]) & (y_values <= py[-1])
        i = seg[ok]
        h = py[i + 1] - py[i]
        s = (y_values[ok] - py[i]) / h
        s2, s3 = s * s, s * s * s
        out[ok] = (
            (2 * s3 - 3 * s2 + 1) * px[i]
            + (s3 - 2 * s2 + s) * h * slope[i]
            + (-2 * s3 + 3 * s2) * px[i + 1]
            + (s3 - s2) * h * slope[i + 1]
        )
        return out


def flow_direction(sample: PoyntingSample, u_floor: float = 0.0):
    """Unit vector along (S_x, S_y), or ``None`` when the direction is undefined.

    ``None`` signals stagnation: U at or below ``u_floor``, or vanishing flux.
    """
    sx, sy = sample.s[0], sample.s[1]
    norm = math.hypot(sx, sy)
    if sample.u <= u_floor or norm <= u_floor or norm == 0.0:
        return None
    return (sx / norm, sy / norm)


@dataclass(frozen=True)
class _Prepared:
    modes: SpectralModes
    y0: float
    y_target: float
    rtol: float
    atol: float
    hmax: float
    u_floor: float
    x_window: float
    max_steps: int
    period: float


def _check_uniform(modes: SpectralModes):
    if not modes.uniform or modes.tail:
        raise DomainError(
            "flow lines need a truncated uniform-trapezoid mode set "
            "(scheme='uniform-trapezoid', tail=False)"
        )


def launch_line_u_max(modes: SpectralModes, spec: Optional[GratingSpec], y0: float, period: float) -> float:
    """Largest natural-unit energy density on the launch line (over the slits)."""
    if spec is None:
        xs = np.linspace(-period, period, 401)
    else:
        edges = spec.slit_edges()
        xs = np.concatenate([np.linspace(a, b, 201) for a, b in edges])
    ys = np.full_like(xs, y0)
    A, X, B = modes.envelope(xs, ys)
    k = modes.k
    py = 1j * k * A - 1j * B / (2 * k)
    u = 0.25 * (np.abs(A) ** 2 + (np.abs(X) ** 2 + np.abs(py) ** 2) / k**2)
    return float(np.max(u))


def prepare(spec_or_modes, quad: Optional[QuadratureConfig], cfg: IntegratorConfig,
            spec: Optional[GratingSpec] = None) -> _Prepared:
    if isinstance(spec_or_modes, SpectralModes):
        modes = spec_or_modes
        spec = spec or modes.grating
    else:
        spec = spec_or_modes
        modes = grating_modes(spec, quad or QuadratureConfig())
    _check_uniform(modes)
    if spec is not None:
        d = spec.period
        LT = spec.talbot_distance
    else:
        # plane wave: use the wavelength as length scale
        d = 2.0 * math.pi / modes.k
        LT = d
    y0 = cfg.y_launch * LT
    y_target = cfg.y_target * LT
    if cfg.x_window is None:
        xw = 0.25 * modes.spatial_period
        if not math.isfinite(xw):
            xw = 1e3 * d
    else:
        xw = cfg.x_window * d
    u_floor = cfg.stagnation_u_floor * launch_line_u_max(modes, spec, y0, d)
    return _Prepared(
        modes, y0, y_target, cfg.rel_tol, cfg.abs_tol * d, cfg.max_step * d, u_floor, xw,
        int(cfg.max_steps), d,
    )


def _run(prep: _Prepared, x0s: np.ndarray, record: bool, threads: int):
    """Integrate in ``threads`` contiguous chunks; returns merged kernel outputs."""
    n = x0s.size
    threads = max(1, min(int(threads), n if n else 1))
    bounds = np.linspace(0, n, threads + 1).astype(int)
    m = prep.modes

    def work(lo, hi):
        return _kernels.integrate_lanes(
            np.ascontiguousarray(x0s[lo:hi]), prep.y0, prep.y_target, m.dq, m.amp, m.k,
            prep.rtol, prep.atol, prep.hmax, prep.u_floor, prep.x_window, prep.max_steps, record,
        )

    if threads == 1:
        parts = [work(0, n)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            futs = [ex.submit(work, bounds[i], bounds[i + 1]) for i in range(threads)]
            parts = [f.result() for f in futs]
    end_x = np.concatenate([p[0] for p in parts]) if parts else np.empty(0)
    end_y = np.concatenate([p[1] for p in parts]) if parts else np.empty(0)
    status = np.concatenate([p[2] for p in parts]) if parts else np.empty(0, int)
    steps = np.concatenate([p[3] for p in parts]) if parts else np.empty(0, int)
    paths = []
    if record:
        for i, p in enumerate(parts):
            path = p[4].copy()
            path[:, 0] += bounds[i]
            paths.append(path)
    return end_x, end_y, status, steps, paths


def endpoints(spec_or_modes, quad, pol: Polarization, cfg: IntegratorConfig, x0s,
              threads: int = 1, spec: Optional[GratingSpec] = None, check_launch: bool = True):
    """Final (x, y), termination code and step count for each launch, without paths."""
    _require_linear(pol)
    prep = prepare(spec_or_modes, quad, cfg, spec)
    x0s = np.ascontiguousarray(np.asarray(x0s, dtype=float).ravel())
    if check_launch:
        _check_launches(spec_or_modes, spec, x0s)
    end_x, end_y, status, steps, _ = _run(prep, x0s, False, threads)
    return end_x, end_y, status, steps


def _require_linear(pol: Polarization):
    if not pol.is_linear():
        raise DomainError(
            "flow lines are planar only for linear polarization "
            "(phase 0 or pi, or a single polarization component)"
        )


def _check_launches(spec_or_modes, spec, x0s):
    g = spec_or_modes if isinstance(spec_or_modes, GratingSpec) else (spec or spec_or_modes.grating)
    if g is None:
        return
    bad = ~g.inside(x0s)
    if np.any(bad):
        raise DomainError(
            f"launch point x0 = {x0s[np.argmax(bad)]:g} m lies outside every slit aperture"
        )


def trajectory_bundle(spec_or_modes, quad, pol: Polarization, cfg: IntegratorConfig,
                      launch_points: Sequence[float], threads: int = 1,
                      spec: Optional[GratingSpec] = None) -> list[Trajectory]:
    """Integrate a flow line from every launch x (meters); order follows the input."""
    _require_linear(pol)
    x0s = np.ascontiguousarray(np.asarray(launch_points, dtype=float).ravel())
    if x0s.size == 0:
        return []
    _check_launches(spec_or_modes, spec, x0s)
    prep = prepare(spec_or_modes, quad, cfg, spec)
    end_x, end_y, status, steps, paths = _run(prep, x0s, True, threads)
    path = np.concatenate(paths) if paths else np.empty((0, 5))
    ids = path[:, 0].astype(np.int64)
    order = np.argsort(ids, kind="stable")
    path = path[order]
    ids = ids[order]
    splits = np.searchsorted(ids, np.arange(x0s.size + 1))
    out = []
    for i in range(x0s.size):
        rows = path[splits[i]:splits[i + 1]]
        if rows.shape[0] == 0:
            rows = np.array([[i, x0s[i], prep.y0, 0.0, 1.0]])
        out.append(
            Trajectory(
                points=rows[:, 1:3].copy(),
                termination=_STATUS[int(status[i])],
                start=(float(x0s[i]), prep.y0),
                tangents=rows[:, 3:5].copy(),
            )
        )
    return out


def integrate_trajectory(spec_or_modes, quad, pol: Polarization, cfg: IntegratorConfig, x0: float,
                         spec: Optional[GratingSpec] = None) -> Trajectory:
    """Single flow line launched at (x0, y_launch)."""
    return trajectory_bundle(spec_or_modes, quad, pol, cfg, [x0], spec=spec)[0]
