"""Fresnel integrals C(x) + i S(x) with the pi/2 normalization.

Power series for |x| <= 1.5 and a continued fraction for the complementary
error function beyond that (modified Lentz evaluation), giving about 1e-15
absolute accuracy over the real line.
"""
from __future__ import annotations

import math

import numba
import numpy as np

_SERIES_LIMIT = 1.5
_EPS = 1e-16
_TINY = 1e-300


@numba.njit(cache=True)
def _fresnel_scalar(x):
    ax = abs(x)
    if ax <= _SERIES_LIMIT:
        # C = sum (-1)^n (pi/2)^(2n) x^(4n+1) / ((2n)! (4n+1)), S similarly with odd powers
        t = 0.5 * math.pi * ax * ax
        term = ax
        c_sum = 0.0
        s_sum = 0.0
        n = 0
        # term_n = t^n x / n! ; even n feed C, odd n feed S with alternating signs
        while True:
            contrib = term / (2 * n + 1)
            if n % 4 == 0:
                c_sum += contrib
            elif n % 4 == 1:
                s_sum += contrib
            elif n % 4 == 2:
                c_sum -= contrib
            else:
                s_sum -= contrib
            n += 1
            term *= t / n
            if term / (2 * n + 1) < _EPS * max(abs(c_sum), abs(s_sum), 1e-300):
                break
        val = complex(c_sum, s_sum)
    else:
        pix2 = math.pi * ax * ax
        b = complex(1.0, -pix2)
        cc = 1.0 / _TINY + 0j
        d = 1.0 / b
        h = d
        n = -1
        for _ in range(2, 1000):
            n += 2
            a = -n * (n + 1.0)
            b += 4.0
            d = 1.0 / (a * d + b)
            cc = b + a / cc
            dl = cc * d
            h *= dl
            if abs(dl.real - 1.0) + abs(dl.imag) < _EPS:
                break
        h *= complex(ax, -ax)
        ph = 0.5 * pix2
        val = complex(0.5, 0.5) * (1.0 - complex(math.cos(ph), math.sin(ph)) * h)
    if x < 0:
        return -val
    return val


@numba.njit(cache=True)
def _fresnel_array(xs):
    out = np.empty(xs.size, dtype=np.complex128)
    for i in range(xs.size):
        out[i] = _fresnel_scalar(xs[i])
    return out


def fresnel_e(x):
    """E(x) = C(x) + i S(x) with C(x) = int_0^x cos(pi t^2 / 2) dt."""
    arr = np.asarray(x, dtype=float)
    out = _fresnel_array(np.ascontiguousarray(arr.ravel())).reshape(arr.shape)
    return out if out.ndim else complex(out)


def fresnel_cs(x):
    """Return the pair (C(x), S(x))."""
    e = fresnel_e(x)
    return np.real(e), np.imag(e)
