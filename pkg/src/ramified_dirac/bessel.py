"""Bessel functions of half-integer order from their elementary closed forms.

Orders are n + 1/2 in absolute value.  Positive-order J uses upward recurrence
from the trigonometric seeds where x > n and Miller's downward recurrence
otherwise; Y and K are computed by their (stable) upward recurrence / finite
sum; I uses downward recurrence normalised by sinh.  Negative orders follow
from the reflection formulas for half-integer order.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError

_HUGE = 1e150


def _order_index(order):
    n2 = 2.0 * float(order)
    if abs(n2 - round(n2)) > 1e-12 or int(round(n2)) % 2 == 0:
        raise DomainError(f"order {order} is not a half-integer")
    n = int(round(abs(float(order)) - 0.5))
    return n, order < 0


def _sph_j(n, x):
    """Spherical j_0 .. j_n at x (array); returns array (n+1, len(x))."""
    out = np.empty((n + 1, x.size))
    up = x > n + 1.0
    if np.any(up):
        xu = x[up]
        j0 = np.sin(xu) / xu
        out[0, up] = j0
        if n >= 1:
            j1 = np.sin(xu) / xu**2 - np.cos(xu) / xu
            out[1, up] = j1
            a, b = j0, j1
            for k in range(1, n):
                a, b = b, (2 * k + 1) / xu * b - a
                out[k + 1, up] = b
    down = ~up
    if np.any(down):
        xd = x[down]
        start = int(max(n, np.max(xd))) + 40
        vals = np.zeros((n + 1, xd.size))
        nxt = np.zeros_like(xd)
        cur = np.ones_like(xd)
        norm = np.zeros_like(xd)
        for k in range(start, -1, -1):
            if k <= n:
                vals[k] = cur
            norm += (2 * k + 1) * cur * cur
            if k == 0:
                break
            prev = (2 * k + 1) / xd * cur - nxt
            nxt, cur = cur, prev
            big = np.abs(cur) > 1e100
            if np.any(big):
                s = np.where(big, 1e-100, 1.0)
                cur, nxt, vals, norm = cur * s, nxt * s, vals * s, norm * s * s
        # sum_k (2k+1) j_k^2 = 1 fixes the scale; the sign follows j_0 or j_1
        vals /= np.sqrt(norm)
        j0 = np.sin(xd) / xd
        j1 = np.sin(xd) / xd**2 - np.cos(xd) / xd
        use0 = np.abs(j0) >= np.abs(j1)
        ref = np.where(use0, j0, j1)
        got = np.where(use0, vals[0], vals[1] if n >= 1 else vals[0])
        if n == 0:
            ref, got = j0, vals[0]
        sign = np.sign(ref * got)
        sign[sign == 0] = 1.0
        vals *= sign
        out[:, down] = vals
    return out


def _sph_y(n, x):
    out = np.empty((n + 1, x.size))
    y0 = -np.cos(x) / x
    out[0] = y0
    if n >= 1:
        y1 = -np.cos(x) / x**2 - np.sin(x) / x
        out[1] = y1
        a, b = y0, y1
        for k in range(1, n):
            a, b = b, (2 * k + 1) / x * b - a
            out[k + 1] = b
    return out


def _k_scaled(n, x):
    """e^x K_{n+1/2}(x) by the terminating series."""
    total = np.zeros_like(x)
    for k in range(n + 1):
        c = math.factorial(n + k) / (math.factorial(k) * math.factorial(n - k))
        total = total + c / (2.0 * x) ** k
    return np.sqrt(np.pi / (2.0 * x)) * total


def _i_scaled(n, x):
    """e^{-x} I_{n+1/2}(x)."""
    res = np.empty_like(x)
    large = x > 40.0 + 2.0 * n * n
    if np.any(large):
        # I_{n+1/2}(x) = (2 pi x)^{-1/2} [e^x S_n(-x) - (-1)^n e^{-x} S_n(x)]
        xl = x[large]
        s_minus = np.zeros_like(xl)
        s_plus = np.zeros_like(xl)
        for k in range(n + 1):
            c = math.factorial(n + k) / (math.factorial(k) * math.factorial(n - k))
            s_minus += c / (-2.0 * xl) ** k
            s_plus += c / (2.0 * xl) ** k
        res[large] = (s_minus - (-1) ** n * np.exp(-2.0 * xl) * s_plus) / np.sqrt(2.0 * np.pi * xl)
    small = ~large
    if np.any(small):
        xs = x[small]
        start = int(max(n, np.max(xs))) + 40
        want = np.zeros_like(xs)
        nxt = np.zeros_like(xs)
        cur = np.full_like(xs, 1e-300)
        zeroth = None
        for k in range(start, -1, -1):
            if k == n:
                want = cur.copy()
            if k == 0:
                zeroth = cur
                break
            prev = (2 * k + 1) / xs * cur + nxt
            nxt, cur = cur, prev
            big = np.abs(cur) > _HUGE
            if np.any(big):
                s = np.where(big, 1.0 / _HUGE, 1.0)
                cur, nxt, want = cur * s, nxt * s, want * s
        # modified spherical i_0(x) e^{-x} = (1 - e^{-2x}) / (2x)
        i0 = -np.expm1(-2.0 * xs) / (2.0 * xs)
        res[small] = want / zeroth * i0 * np.sqrt(2.0 * xs / np.pi)
    return res


def spherical_bessel(kind, order, x, scaled=False):
    """Bessel function J, Y, I or K of half-integer order at x > 0.

    With ``scaled`` the I value is multiplied by e^{-x} and the K value by e^{x};
    the unscaled I overflows for x beyond about 709.
    """
    kind = kind.upper()
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    xa = np.atleast_1d(arr).ravel()
    if np.any(~(xa > 0)):
        raise DomainError("Bessel argument must be positive")
    n, neg = _order_index(order)
    pref = np.sqrt(2.0 * xa / np.pi)
    if kind == "J":
        if neg:
            val = (-1) ** (n + 1) * pref * _sph_y(n, xa)[n]
        else:
            val = pref * _sph_j(n, xa)[n]
    elif kind == "Y":
        if neg:
            val = (-1) ** n * pref * _sph_j(n, xa)[n]
        else:
            val = pref * _sph_y(n, xa)[n]
    elif kind == "K":
        val = _k_scaled(n, xa)
        if not scaled:
            val = val * np.exp(-xa)
    elif kind == "I":
        val = _i_scaled(n, xa)
        if neg:
            # I_{-nu} = I_nu + (2/pi) sin(nu pi) K_nu, sin((n+1/2) pi) = (-1)^n
            val = val + (-1) ** n * (2.0 / np.pi) * _k_scaled(n, xa) * np.exp(-2.0 * xa)
        if not scaled:
            val = val * np.exp(xa)
    else:
        raise DomainError(f"unknown Bessel kind {kind!r}")
    val = val.reshape(np.shape(arr)) if not scalar else val[0]
    return float(val) if scalar else val
