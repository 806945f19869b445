"""Bessel functions J_nu and Macdonald functions K_nu of real order.

Orders are integers (2D angular index) or half-integers (3D).  Algorithms:

* J_n, integer n: trapezoidal rule on Bessel's integral
  ``J_n(x) = (1/pi) int_0^pi cos(n t - x sin t) dt``; the integrand is
  periodic and entire, so the rule converges geometrically once the node
  count exceeds ``x + n``.
* J_{l+1/2}: spherical Bessel functions by Miller's downward recurrence,
  normalized against ``j_0 = sin x / x`` or ``j_1``.
* K_nu, any real nu: trapezoidal rule on ``int_0^inf exp(-x cosh t) cosh(nu t) dt``,
  scaled by ``exp(x)`` to avoid underflow.
* I_nu: power series (positive terms, no cancellation).

All routines accept scalars or arrays for ``x`` and scalar orders.
"""

from __future__ import annotations

import math

import numpy as np


def _is_half_integer(nu):
    return abs(nu - round(nu)) > 0.25 and abs(2 * nu - round(2 * nu)) < 1e-12


def _check_order(nu):
    if not (abs(nu - round(nu)) < 1e-12 or _is_half_integer(nu)):
        raise ValueError(f"order {nu} must be an integer or a half-integer")


# --- J ------------------------------------------------------------------------

def _jn_integer(n, x):
    n = abs(int(round(n)))
    x = np.asarray(x, float)
    xmax = float(np.max(np.abs(x))) if x.size else 0.0
    m = int(2 * math.ceil(xmax + n) + 40)
    t = (np.arange(m) + 0.5) * (np.pi / m)  # midpoint rule on [0, pi]
    vals = np.cos(n * t[None, :] - x.reshape(-1, 1) * np.sin(t)[None, :]).mean(axis=1)
    return vals.reshape(x.shape)


def _spherical_jl(l, x):
    """Spherical Bessel j_l(x) for x > 0 by Miller's algorithm."""
    x = np.atleast_1d(np.asarray(x, float))
    out = np.empty_like(x)
    for i, xi in enumerate(x):
        if xi == 0.0:
            out[i] = 1.0 if l == 0 else 0.0
            continue
        if xi < 1e-3 * (l + 1):
            # leading series terms: x^l / (2l+1)!! * (1 - x^2 / (2(2l+3)))
            dfact = float(np.prod(np.arange(1, 2 * l + 2, 2)))
            out[i] = xi**l / dfact * (1 - xi * xi / (2 * (2 * l + 3)) + xi**4 / (8 * (2 * l + 3) * (2 * l + 5)))
            continue
        start = int(max(l, xi) + 40 + 2 * math.sqrt(40 * max(xi, 1.0)))
        f_next, f = 0.0, 1e-300
        vals = {}
        for k in range(start, -1, -1):
            if k <= l:
                vals[k] = f
            f_prev = (2 * k + 1) / xi * f - f_next
            f_next, f = f, f_prev
            if abs(f) > 1e250:
                f_next *= 1e-250
                f *= 1e-250
                vals = {kk: vv * 1e-250 for kk, vv in vals.items()}
        # after the loop f holds j_{-1} (unnormalized), f_next holds j_0
        j0_u = f_next
        j1_u = vals.get(1, None)
        s, c = math.sin(xi), math.cos(xi)
        j0 = s / xi
        j1 = s / (xi * xi) - c / xi
        if j1_u is None:  # l == 0
            out[i] = j0
            continue
        if abs(j0) >= abs(j1):
            scale = j0 / j0_u
        else:
            scale = j1 / j1_u
        out[i] = vals[l] * scale
    return out


def jv(nu, x):
    """Bessel function of the first kind J_nu(x), x >= 0."""
    _check_order(nu)
    x = np.asarray(x, float)
    if np.any(x < 0):
        raise ValueError("x must be non-negative")
    if not _is_half_integer(nu):
        return _jn_integer(nu, x)
    if nu < 0:
        if nu == -0.5:
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.sqrt(2 / (np.pi * x)) * np.cos(x)
        raise ValueError("negative half-integer orders other than -1/2 unsupported")
    l = int(round(nu - 0.5))
    flat = x.ravel()
    res = np.zeros_like(flat)
    pos = flat > 0
    res[pos] = np.sqrt(2 * flat[pos] / np.pi) * _spherical_jl(l, flat[pos])
    return res.reshape(x.shape)


def jvp(nu, x):
    """Derivative dJ_nu/dx = (nu/x) J_nu - J_{nu+1}."""
    x = np.asarray(x, float)
    if nu == 0:
        return -jv(1, x)
    with np.errstate(divide="ignore", invalid="ignore"):
        return nu / x * jv(nu, x) - jv(nu + 1, x)


# --- K ------------------------------------------------------------------------

def kve(nu, x):
    """Exponentially scaled Macdonald function exp(x) K_nu(x), x > 0."""
    x = np.asarray(x, float)
    if np.any(x <= 0):
        raise ValueError("x must be positive")
    nu = abs(float(nu))
    flat = x.ravel()
    if flat.size == 0:
        return np.zeros(x.shape)
    xmin = float(flat.min())
    step = 0.1
    # exp(-x (cosh t - 1)) cosh(nu t) < 1e-18 relative beyond t_max
    tmax = math.acosh(1.0 + (42.0 + nu * 10) / xmin) + 2.0
    t = np.arange(1, int(math.ceil(tmax / step)) + 1) * step
    ex = -flat[:, None] * (np.cosh(t)[None, :] - 1.0) + nu * t[None, :]
    terms = 0.5 * (np.exp(ex) + np.exp(-flat[:, None] * (np.cosh(t)[None, :] - 1.0) - nu * t[None, :]))
    vals = step * (0.5 + terms.sum(axis=1))
    return vals.reshape(x.shape)


def kv(nu, x):
    """Macdonald function K_nu(x) (decaying modified Bessel function)."""
    x = np.asarray(x, float)
    return kve(nu, x) * np.exp(-x)


def kvp(nu, x):
    """Derivative dK_nu/dx = (nu/x) K_nu - K_{nu+1}."""
    x = np.asarray(x, float)
    return nu / x * kv(nu, x) - kv(nu + 1, x)


def kvp_over_kv(nu, x):
    """Logarithmic derivative K_nu'(x)/K_nu(x), free of under/overflow."""
    x = np.asarray(x, float)
    return nu / x - kve(nu + 1, x) / kve(nu, x)


# --- I ------------------------------------------------------------------------

def iv(nu, x):
    """Modified Bessel function I_nu(x), x >= 0, by its power series."""
    x = np.asarray(x, float)
    flat = x.ravel()
    out = np.empty_like(flat)
    for i, xi in enumerate(flat):
        if xi == 0.0:
            out[i] = 1.0 if nu == 0 else 0.0
            continue
        q = 0.25 * xi * xi
        term = math.exp(nu * math.log(0.5 * xi) - math.lgamma(nu + 1))
        total = term
        k = 0
        while True:
            k += 1
            term *= q / (k * (nu + k))
            total += term
            if term < 1e-17 * total and k > q:
                break
        out[i] = total
    return out.reshape(x.shape)


# --- zeros --------------------------------------------------------------------

def jv_zeros(nu, count, tol=1e-15):
    """First ``count`` positive zeros of J_nu by bracketing + bisection."""
    zeros = []
    step = 0.1
    a = 1e-6 if nu == 0 else max(1e-6, 0.5 * nu)
    fa = float(jv(nu, a))
    while len(zeros) < count:
        b = a + step
        fb = float(jv(nu, b))
        if fa == 0.0:
            zeros.append(a)
        elif fa * fb < 0:
            lo, hi, flo = a, b, fa
            while hi - lo > tol * max(1.0, hi):
                mid = 0.5 * (lo + hi)
                fm = float(jv(nu, mid))
                if fm == 0.0:
                    lo = hi = mid
                    break
                if (fm < 0) == (flo < 0):
                    lo, flo = mid, fm
                else:
                    hi = mid
            zeros.append(0.5 * (lo + hi))
        a, fa = b, fb
    return np.array(zeros[:count])
