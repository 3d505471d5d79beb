"""Compiled inner loops: modal sums, spectral tail integrals and the flow-line integrator.

Every routine treats the evaluation points independently and in a fixed
operation order, so a point's result does not depend on which other points
share the batch.  ``fastmath`` is deliberately off for the same reason.
"""
from __future__ import annotations

import math

import numba
import numpy as np

# photons (or probe points) processed together by the uniform-grid kernel;
# 64 keeps the per-lane state inside L1
LANE_BLOCK = 64
# node count between exact reseeds of the trigonometric recurrences
RESEED = 64


@numba.njit(cache=True, nogil=True)
def _uniform_block(dq, amp, k, xs, ys, lo, hi, Ar, Ai, Xr, Xi, Br, Bi):
    m = hi - lo
    # block-local state and accumulators: fresh arrays cannot alias, so the
    # lane loop vectorizes
    st = np.empty((17, m))
    c = st[0]
    s = st[1]
    er = st[2]
    ei = st[3]
    rr = st[4]
    ri = st[5]
    c1 = st[6]
    s1 = st[7]
    gr = st[8]
    gi = st[9]
    a = st[10]
    ar = st[11]
    ai = st[12]
    xr = st[13]
    xi = st[14]
    br = st[15]
    bi = st[16]
    for j in range(m):
        x = xs[lo + j]
        c1[j] = math.cos(dq * x)
        s1[j] = math.sin(dq * x)
        a[j] = ys[lo + j] / (2.0 * k) * dq * dq
        gr[j] = math.cos(2.0 * a[j])
        gi[j] = -math.sin(2.0 * a[j])
        ar[j] = 0.0
        ai[j] = 0.0
        xr[j] = 0.0
        xi[j] = 0.0
        br[j] = 0.0
        bi[j] = 0.0
    nn = amp.size
    for n0 in range(0, nn, RESEED):
        for j in range(m):
            x = xs[lo + j]
            q = n0 * dq
            c[j] = math.cos(q * x)
            s[j] = math.sin(q * x)
            ph = a[j] * n0 * n0
            er[j] = math.cos(ph)
            ei[j] = -math.sin(ph)
            ph = a[j] * (2 * n0 + 1)
            rr[j] = math.cos(ph)
            ri[j] = -math.sin(ph)
        for n in range(n0, min(n0 + RESEED, nn)):
            q = n * dq
            an = amp[n]
            q2 = q * q
            for j in range(m):
                tr = an * er[j]
                ti = an * ei[j]
                cc = c[j]
                ss = s[j]
                ar[j] += tr * cc
                ai[j] += ti * cc
                xr[j] -= q * tr * ss
                xi[j] -= q * ti * ss
                br[j] += q2 * tr * cc
                bi[j] += q2 * ti * cc
                c[j] = cc * c1[j] - ss * s1[j]
                s[j] = ss * c1[j] + cc * s1[j]
                e0 = er[j]
                er[j] = e0 * rr[j] - ei[j] * ri[j]
                ei[j] = e0 * ri[j] + ei[j] * rr[j]
                r0 = rr[j]
                rr[j] = r0 * gr[j] - ri[j] * gi[j]
                ri[j] = r0 * gi[j] + ri[j] * gr[j]
    for j in range(m):
        Ar[lo + j] = ar[j]
        Ai[lo + j] = ai[j]
        Xr[lo + j] = xr[j]
        Xi[lo + j] = xi[j]
        Br[lo + j] = br[j]
        Bi[lo + j] = bi[j]


@numba.njit(cache=True, nogil=True)
def uniform_sums(dq, amp, k, xs, ys):
    """Envelope sums for symmetric nodes q_n = n*dq, n = 0..len(amp)-1.

    Returns (A, A_x, B) with
    A = sum amp_n exp(-i y q^2/2k) cos(q x), A_x = d A/dx and
    B = sum amp_n q^2 exp(-i y q^2/2k) cos(q x).
    """
    m = xs.size
    Ar = np.empty(m)
    Ai = np.empty(m)
    Xr = np.empty(m)
    Xi = np.empty(m)
    Br = np.empty(m)
    Bi = np.empty(m)
    for lo in range(0, m, LANE_BLOCK):
        hi = min(lo + LANE_BLOCK, m)
        _uniform_block(dq, amp, k, xs, ys, lo, hi, Ar, Ai, Xr, Xi, Br, Bi)
    A = Ar + 1j * Ai
    X = Xr + 1j * Xi
    B = Br + 1j * Bi
    return A, X, B


@numba.njit(cache=True, nogil=True)
def node_sums(q, amp, k, xs, ys):
    """Same sums as :func:`uniform_sums` for arbitrary nonnegative nodes ``q``."""
    m = xs.size
    A = np.zeros(m, dtype=np.complex128)
    X = np.zeros(m, dtype=np.complex128)
    B = np.zeros(m, dtype=np.complex128)
    for j in range(m):
        x = xs[j]
        beta = ys[j] / (2.0 * k)
        ar = 0.0
        ai = 0.0
        xr = 0.0
        xi = 0.0
        br = 0.0
        bi = 0.0
        for n in range(q.size):
            qn = q[n]
            ph = beta * qn * qn
            tr = amp[n] * math.cos(ph)
            ti = -amp[n] * math.sin(ph)
            cc = math.cos(qn * x)
            ss = math.sin(qn * x)
            ar += tr * cc
            ai += ti * cc
            xr -= qn * tr * ss
            xi -= qn * ti * ss
            br += qn * qn * tr * cc
            bi += qn * qn * ti * cc
        A[j] = complex(ar, ai)
        X[j] = complex(xr, xi)
        B[j] = complex(br, bi)
    return A, X, B


# --------------------------------------------------------------------------
# spectral tails: integrals over |q| > K done exactly along deformed contours

_TAIL_DECAY = 40.0  # stop rays once the integrand is below exp(-40)
_RAY_PANELS = 12


@numba.njit(cache=True)
def _half_tail(K, v, beta, gx, gw):
    """I_m = int_K^inf p^m exp(i(p v - beta p^2)) dp for m = -1, 0, 1."""
    i_m1 = 0j
    i_0 = 0j
    i_p1 = 0j
    ng = gx.size
    if beta > 0.0:
        pstar = v / (2.0 * beta)
        kp = K
        if pstar > K:
            kp = pstar
            # real segment [K, pstar]; the phase changes by at most |v - 2 beta K| (pstar - K)
            span = pstar - K
            phase = abs(v - 2.0 * beta * K) * span
            npan = int(phase / 2.0) + 1
            hw = 0.5 * span / npan
            for p_ in range(npan):
                mid = K + (2 * p_ + 1) * hw
                for g in range(ng):
                    p = mid + hw * gx[g]
                    ph = p * v - beta * p * p
                    e = complex(math.cos(ph), math.sin(ph)) * (gw[g] * hw)
                    i_m1 += e / p
                    i_0 += e
                    i_p1 += e * p
        # ray kp + t exp(-i pi/4): the exponent is -alpha t - beta t^2 plus a phase
        alpha = (2.0 * beta * kp - v) / math.sqrt(2.0)
        if alpha < 0.0:
            alpha = 0.0
        tmax = (-alpha + math.sqrt(alpha * alpha + 4.0 * beta * _TAIL_DECAY)) / (2.0 * beta)
        d = complex(math.sqrt(0.5), -math.sqrt(0.5))
        hw = 0.5 * tmax / _RAY_PANELS
        for p_ in range(_RAY_PANELS):
            mid = (2 * p_ + 1) * hw
            for g in range(ng):
                t = mid + hw * gx[g]
                p = kp + t * d
                e = np.exp(1j * (p * v - beta * p * p)) * (d * gw[g] * hw)
                i_m1 += e / p
                i_0 += e
                i_p1 += e * p
    else:
        if v == 0.0:
            return complex(np.nan, np.nan), complex(np.nan, np.nan), complex(np.nan, np.nan)
        # beta == 0: rotate onto the imaginary direction of decay (Abel limit)
        sgn = 1.0 if v > 0.0 else -1.0
        d = complex(0.0, sgn)
        tmax = _TAIL_DECAY / abs(v)
        hw = 0.5 * tmax / _RAY_PANELS
        for p_ in range(_RAY_PANELS):
            mid = (2 * p_ + 1) * hw
            for g in range(ng):
                t = mid + hw * gx[g]
                p = K + t * d
                e = np.exp(1j * p * v) * (d * gw[g] * hw)
                i_m1 += e / p
                i_0 += e
                i_p1 += e * p
    return i_m1, i_0, i_p1


@numba.njit(cache=True)
def tail_sums(K, edges, signs, norm, k, xs, ys, gx, gw):
    """Contribution of |q| > K to (A, A_x, B) for a piecewise-constant aperture.

    The aperture spectrum is written as ``norm * sum_e sign_e exp(-i q e) / (i q)``
    where ``e`` runs over slit edges; ``norm`` already contains 1/sqrt(2 pi)
    of both the transform and the propagation integral.
    """
    m = xs.size
    A = np.zeros(m, dtype=np.complex128)
    X = np.zeros(m, dtype=np.complex128)
    B = np.zeros(m, dtype=np.complex128)
    for j in range(m):
        beta = ys[j] / (2.0 * k)
        for e in range(edges.size):
            u = xs[j] - edges[e]
            pm1, p0, pp1 = _half_tail(K, u, beta, gx, gw)
            nm1, n0, np1 = _half_tail(K, -u, beta, gx, gw)
            w = signs[e] * norm
            A[j] += w * (pm1 - nm1) / 1j
            X[j] += w * (p0 + n0)
            B[j] += w * (-1j) * (pp1 - np1)
    return A, X, B


# --------------------------------------------------------------------------
# flow-line integrator: Dormand-Prince 5(4), arc length, many lanes at once

STATUS_RUNNING = 0
STATUS_REACHED = 1
STATUS_STAGNATION = 2
STATUS_LEFT_WINDOW = 3
STATUS_STEP_LIMIT = 4

_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = (
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
)
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71.0 / 57600.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
)


@numba.njit(cache=True, nogil=True)
def _directions(dq, amp, k, px, py, n, u_floor, tx, ty, ok, uu, Ar, Ai, Xr, Xi, Br, Bi):
    """Unit Poynting direction at n points; ok[j] is False near nodes or for S_y <= 0.

    Scaled so that a unit plane wave has S = (0, 1/2) and U = 1/2.
    """
    for lo in range(0, n, LANE_BLOCK):
        hi = min(lo + LANE_BLOCK, n)
        _uniform_block(dq, amp, k, px, py, lo, hi, Ar, Ai, Xr, Xi, Br, Bi)
    for j in range(n):
        a_r = Ar[j]
        a_i = Ai[j]
        # psi_y / exp(iky) = i k A - i B / (2k)
        yr = -k * a_i + Bi[j] / (2.0 * k)
        yi = k * a_r - Br[j] / (2.0 * k)
        sx = (a_r * Xi[j] - a_i * Xr[j]) / (2.0 * k)
        sy = (a_r * yi - a_i * yr) / (2.0 * k)
        dens = a_r * a_r + a_i * a_i
        grad = Xr[j] * Xr[j] + Xi[j] * Xi[j] + yr * yr + yi * yi
        u = 0.25 * (dens + grad / (k * k))
        uu[j] = u
        sn = math.sqrt(sx * sx + sy * sy)
        if u < u_floor or sn < u_floor or sy <= 0.0:
            ok[j] = False
            tx[j] = 0.0
            ty[j] = 0.0
        else:
            ok[j] = True
            tx[j] = sx / sn
            ty[j] = sy / sn


@numba.njit(cache=True, nogil=True)
def _hermite(r0, t0, r1, t1, h, s):
    s2 = s * s
    s3 = s2 * s
    h00 = 2 * s3 - 3 * s2 + 1
    h10 = s3 - 2 * s2 + s
    h01 = -2 * s3 + 3 * s2
    h11 = s3 - s2
    return h00 * r0 + h10 * h * t0 + h01 * r1 + h11 * h * t1


@numba.njit(cache=True, nogil=True)
def _append(buf, count, row):
    if count == buf.shape[0]:
        nb = np.empty((2 * buf.shape[0], buf.shape[1]))
        nb[:count] = buf[:count]
        buf = nb
    for c in range(buf.shape[1]):
        buf[count, c] = row[c]
    return buf, count + 1


@numba.njit(cache=True, nogil=True)
def integrate_lanes(
    x0s, y0, y_target, dq, amp, k, rtol, atol, hmax, u_floor, x_window, max_steps, record
):
    """Integrate one flow line per entry of ``x0s`` from height ``y0`` to ``y_target``.

    Returns (end_x, end_y, status, steps, path) where ``path`` rows are
    (traj, x, y, tx, ty) for every accepted point when ``record`` is set.
    """
    ntraj = x0s.size
    end_x = np.full(ntraj, np.nan)
    end_y = np.full(ntraj, np.nan)
    status = np.zeros(ntraj, dtype=np.int64)
    steps = np.zeros(ntraj, dtype=np.int64)
    path = np.empty((1024 if record else 1, 5))
    npath = 0
    row = np.empty(5)
    if ntraj == 0:
        return end_x, end_y, status, steps, path[:0]

    L = min(LANE_BLOCK, ntraj)
    traj = np.full(L, -1, dtype=np.int64)
    x = np.zeros(L)
    y = np.zeros(L)
    h = np.zeros(L)
    kx = np.zeros((7, L))
    ky = np.zeros((7, L))
    good = np.ones(L, dtype=np.bool_)
    # gather buffers
    idx = np.empty(L, dtype=np.int64)
    px = np.empty(L)
    py = np.empty(L)
    tx = np.empty(L)
    ty = np.empty(L)
    okb = np.empty(L, dtype=np.bool_)
    uu = np.empty(L)
    Ar = np.empty(L)
    Ai = np.empty(L)
    Xr = np.empty(L)
    Xi = np.empty(L)
    Br = np.empty(L)
    Bi = np.empty(L)
    hmin = 1e-9 * hmax

    nxt = 0
    active = 0
    while True:
        # refill idle lanes and evaluate their launch directions
        n = 0
        for l in range(L):
            if traj[l] < 0 and nxt < ntraj:
                traj[l] = nxt
                nxt += 1
                x[l] = x0s[traj[l]]
                y[l] = y0
                h[l] = 0.1 * hmax
                idx[n] = l
                px[n] = x[l]
                py[n] = y[l]
                n += 1
        if n > 0:
            _directions(dq, amp, k, px, py, n, u_floor, tx, ty, okb, uu, Ar, Ai, Xr, Xi, Br, Bi)
            for j in range(n):
                l = idx[j]
                t = traj[l]
                if not okb[j]:
                    status[t] = STATUS_STAGNATION
                    end_x[t] = x[l]
                    end_y[t] = y[l]
                    traj[l] = -1
                    continue
                kx[0, l] = tx[j]
                ky[0, l] = ty[j]
                if record:
                    row[0] = t
                    row[1] = x[l]
                    row[2] = y[l]
                    row[3] = tx[j]
                    row[4] = ty[j]
                    path, npath = _append(path, npath, row)
        active = 0
        for l in range(L):
            if traj[l] >= 0:
                idx[active] = l
                active += 1
        if active == 0:
            if nxt >= ntraj:
                break
            continue
        for l in range(L):
            good[l] = True
        # six further stages; stage 7 is evaluated at the proposed point
        for st in range(1, 7):
            for j in range(active):
                l = idx[j]
                hh = h[l]
                if st == 1:
                    dx = _A21 * kx[0, l]
                    dy = _A21 * ky[0, l]
                elif st == 2:
                    dx = _A31 * kx[0, l] + _A32 * kx[1, l]
                    dy = _A31 * ky[0, l] + _A32 * ky[1, l]
                elif st == 3:
                    dx = _A41 * kx[0, l] + _A42 * kx[1, l] + _A43 * kx[2, l]
                    dy = _A41 * ky[0, l] + _A42 * ky[1, l] + _A43 * ky[2, l]
                elif st == 4:
                    dx = _A51 * kx[0, l] + _A52 * kx[1, l] + _A53 * kx[2, l] + _A54 * kx[3, l]
                    dy = _A51 * ky[0, l] + _A52 * ky[1, l] + _A53 * ky[2, l] + _A54 * ky[3, l]
                elif st == 5:
                    dx = (
                        _A61 * kx[0, l]
                        + _A62 * kx[1, l]
                        + _A63 * kx[2, l]
                        + _A64 * kx[3, l]
                        + _A65 * kx[4, l]
                    )
                    dy = (
                        _A61 * ky[0, l]
                        + _A62 * ky[1, l]
                        + _A63 * ky[2, l]
                        + _A64 * ky[3, l]
                        + _A65 * ky[4, l]
                    )
                else:
                    dx = (
                        _B1 * kx[0, l]
                        + _B3 * kx[2, l]
                        + _B4 * kx[3, l]
                        + _B5 * kx[4, l]
                        + _B6 * kx[5, l]
                    )
                    dy = (
                        _B1 * ky[0, l]
                        + _B3 * ky[2, l]
                        + _B4 * ky[3, l]
                        + _B5 * ky[4, l]
                        + _B6 * ky[5, l]
                    )
                px[j] = x[l] + hh * dx
                py[j] = y[l] + hh * dy
            _directions(
                dq, amp, k, px, py, active, u_floor, tx, ty, okb, uu, Ar, Ai, Xr, Xi, Br, Bi
            )
            for j in range(active):
                l = idx[j]
                kx[st, l] = tx[j]
                ky[st, l] = ty[j]
                if not okb[j]:
                    good[l] = False
        # px, py now hold the proposed points
        for j in range(active):
            l = idx[j]
            t = traj[l]
            hh = h[l]
            xn = px[j]
            yn = py[j]
            err = np.inf
            if good[l]:
                ex = hh * (
                    _E1 * kx[0, l]
                    + _E3 * kx[2, l]
                    + _E4 * kx[3, l]
                    + _E5 * kx[4, l]
                    + _E6 * kx[5, l]
                    + _E7 * kx[6, l]
                )
                ey = hh * (
                    _E1 * ky[0, l]
                    + _E3 * ky[2, l]
                    + _E4 * ky[3, l]
                    + _E5 * ky[4, l]
                    + _E6 * ky[5, l]
                    + _E7 * ky[6, l]
                )
                rmag = max(math.hypot(x[l], y[l]), math.hypot(xn, yn))
                err = math.hypot(ex, ey) / (atol + rtol * rmag)
            if err <= 1.0:
                steps[t] += 1
                done = False
                if yn >= y_target:
                    # locate the crossing on the cubic Hermite arc of this step
                    lo_s = 0.0
                    hi_s = 1.0
                    for _ in range(60):
                        mid = 0.5 * (lo_s + hi_s)
                        ym = _hermite(y[l], ky[0, l], yn, ky[6, l], hh, mid)
                        if ym < y_target:
                            lo_s = mid
                        else:
                            hi_s = mid
                    sfin = 0.5 * (lo_s + hi_s)
                    xn = _hermite(x[l], kx[0, l], xn, kx[6, l], hh, sfin)
                    yn = y_target
                    status[t] = STATUS_REACHED
                    done = True
                elif abs(xn) > x_window:
                    status[t] = STATUS_LEFT_WINDOW
                    done = True
                elif steps[t] >= max_steps:
                    status[t] = STATUS_STEP_LIMIT
                    done = True
                x[l] = xn
                y[l] = yn
                kx[0, l] = kx[6, l]
                ky[0, l] = ky[6, l]
                if record:
                    row[0] = t
                    row[1] = xn
                    row[2] = yn
                    row[3] = kx[6, l]
                    row[4] = ky[6, l]
                    path, npath = _append(path, npath, row)
                if done:
                    end_x[t] = xn
                    end_y[t] = yn
                    traj[l] = -1
                    continue
                fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
                h[l] = min(hmax, hh * fac)
            else:
                if np.isfinite(err):
                    fac = max(0.2, 0.9 * err ** -0.2)
                else:
                    fac = 0.25
                h[l] = hh * fac
                if h[l] < hmin:
                    status[t] = STATUS_STAGNATION
                    end_x[t] = x[l]
                    end_y[t] = y[l]
                    traj[l] = -1
    return end_x, end_y, status, steps, path[:npath]
