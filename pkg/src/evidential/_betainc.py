"""Regularized incomplete beta function by continued fraction.

Both tails are returned so callers never form ``1 - I`` from a value close
to one.  Everything is vectorized over broadcast ``a``, ``b``, ``x``.
"""

import numpy as np
from scipy.special import gammaln

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 100_000


def _lentz(a, b, x):
    """Continued fraction part of I_x(a, b) (modified Lentz, flat arrays)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = np.ones_like(x)
    d = 1.0 - qab * x / qap
    d = np.where(np.abs(d) < _TINY, _TINY, d)
    d = 1.0 / d
    h = d.copy()
    active = np.ones(x.shape, dtype=bool)
    for m in range(1, _MAX_ITER + 1):
        if not active.any():
            return h
        idx = np.nonzero(active)[0]
        aa_, bb_, xx_ = a[idx], b[idx], x[idx]
        cc, dd = c[idx], d[idx]
        m2 = 2.0 * m
        num = m * (bb_ - m) * xx_ / ((qam[idx] + m2) * (aa_ + m2))
        dd = 1.0 + num * dd
        dd = np.where(np.abs(dd) < _TINY, _TINY, dd)
        cc = 1.0 + num / cc
        cc = np.where(np.abs(cc) < _TINY, _TINY, cc)
        dd = 1.0 / dd
        step = dd * cc
        num = -(aa_ + m) * (qab[idx] + m) * xx_ / ((aa_ + m2) * (qap[idx] + m2))
        dd = 1.0 + num * dd
        dd = np.where(np.abs(dd) < _TINY, _TINY, dd)
        cc = 1.0 + num / cc
        cc = np.where(np.abs(cc) < _TINY, _TINY, cc)
        dd = 1.0 / dd
        delta = dd * cc
        h[idx] *= step * delta
        c[idx], d[idx] = cc, dd
        done = np.abs(delta - 1.0) <= _EPS * 4
        active[idx[done]] = False
    raise ArithmeticError("incomplete beta continued fraction did not converge")


_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


def _stirling_remainder(z):
    """lgamma(z) minus its Stirling approximation, accurate for z > 0."""
    z = np.asarray(z, float)
    out = np.empty_like(z)
    big = z >= 10.0
    zb = z[big]
    r = 1.0 / (zb * zb)
    out[big] = (1.0 / 12.0 + r * (-1.0 / 360.0 + r * (1.0 / 1260.0 + r * (-1.0 / 1680.0 + r / 1188.0)))) / zb
    zs = z[~big]
    out[~big] = gammaln(zs) - ((zs - 0.5) * np.log(zs) - zs + _HALF_LOG_2PI)
    return out


def _log_prefactor(a, b, x, y):
    """log of x**a * y**b / B(a, b) without the large cancelling terms."""
    s = a + b
    peak = (
        0.5 * (np.log(a) + np.log(b) - np.log(s))
        - _HALF_LOG_2PI
        - (_stirling_remainder(a) + _stirling_remainder(b) - _stirling_remainder(s))
    )
    # log(x / x_peak) and log(y / y_peak); log1p only near the peak
    dev = x * b - y * a
    t1, t2 = dev / a, -dev / b
    with np.errstate(divide="ignore", invalid="ignore"):
        lx = np.where(np.abs(t1) < 0.5, np.log1p(t1), np.log(x) + np.log(s / a))
        ly = np.where(np.abs(t2) < 0.5, np.log1p(t2), np.log(y) + np.log(s / b))
    return peak + a * lx + b * ly


def beta_tails(a, b, x, y=None):
    """Return ``(I_x(a, b), 1 - I_x(a, b))``, each to near full relative precision.

    Parameters
    ----------
    a, b : array_like
        Positive shape parameters.
    x : array_like
        Evaluation points in [0, 1].
    y : array_like, optional
        ``1 - x`` supplied by the caller when it is available without
        cancellation (e.g. ``nu2 / (nu2 + nu1 * u)`` for the F distribution).
    """
    a, b, x = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float), np.asarray(x, float))
    y = 1.0 - x if y is None else np.broadcast_to(np.asarray(y, float), x.shape)
    shape = x.shape
    a, b, x, y = (np.ravel(v).astype(float) for v in (a, b, x, y))

    lower = np.empty_like(x)
    upper = np.empty_like(x)
    at0 = x <= 0.0
    at1 = y <= 0.0
    lower[at0], upper[at0] = 0.0, 1.0
    lower[at1], upper[at1] = 1.0, 0.0
    inner = ~(at0 | at1)

    if inner.any():
        ai, bi, xi, yi = a[inner], b[inner], x[inner], y[inner]
        log_front = _log_prefactor(ai, bi, xi, yi)
        direct = xi < (ai + 1.0) / (ai + bi + 2.0)
        lo = np.empty_like(xi)
        up = np.empty_like(xi)
        if direct.any():
            cf = _lentz(ai[direct], bi[direct], xi[direct])
            lo[direct] = np.exp(log_front[direct]) * cf / ai[direct]
            up[direct] = 1.0 - lo[direct]
        swap = ~direct
        if swap.any():
            cf = _lentz(bi[swap], ai[swap], yi[swap])
            up[swap] = np.exp(log_front[swap]) * cf / bi[swap]
            lo[swap] = 1.0 - up[swap]
        lower[inner] = np.clip(lo, 0.0, 1.0)
        upper[inner] = np.clip(up, 0.0, 1.0)

    return lower.reshape(shape), upper.reshape(shape)


def betainc(a, b, x):
    """Regularized incomplete beta function I_x(a, b)."""
    return beta_tails(a, b, x)[0]
