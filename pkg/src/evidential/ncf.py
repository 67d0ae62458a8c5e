"""Noncentral F distribution: density, distribution function, quantile, mean, sampling.

The noncentrality ``lam`` follows the convention in which the Poisson mixing
mean is ``lam / 2``, so that

    E[F] = nu2 * (nu1 + lam) / (nu1 * (nu2 - 2)).

Some libraries use ``lam / 2`` as their noncentrality argument; with this
module ``ncf_mean(NcfParams(1, 3, 2.0)) == 9``, not 15.

The distribution function is evaluated as a Poisson mixture of central F
distribution functions, each a regularized incomplete beta value.  Only the
two ends of the truncated Poisson window need a continued fraction; the
remaining terms follow from the exact one-step recurrence

    I_x(a + 1, b) = I_x(a, b) - x**a (1 - x)**b / (a B(a, b)),

accumulated in whichever direction only adds positive terms.
"""

import math
from dataclasses import dataclass
from numbers import Integral, Real

import numpy as np
from scipy.special import gammaln

from ._betainc import _log_prefactor, beta_tails
from .errors import DomainError, MeanUndefinedError

#: Upper bound on the Poisson mass discarded on each side of the window.
TAIL_MASS = 1e-15
_LOG_TAIL = -math.log(TAIL_MASS)

QUANTILE_PROB_TOL = 1e-12
QUANTILE_MAX_ITER = 200


@dataclass(frozen=True)
class NcfParams:
    """Parameters of F(nu1, nu2, lam)."""

    nu1: int
    nu2: int
    lam: float = 0.0

    def __post_init__(self):
        for name in ("nu1", "nu2"):
            v = getattr(self, name)
            if isinstance(v, bool):
                raise DomainError(f"{name} must be a positive integer, got {v!r}")
            if not isinstance(v, Integral):
                if isinstance(v, Real) and float(v).is_integer():
                    object.__setattr__(self, name, int(v))
                else:
                    raise DomainError(f"{name} must be a positive integer, got {v!r}")
            if getattr(self, name) < 1:
                raise DomainError(f"{name} must be >= 1, got {v!r}")
        lam = float(self.lam)
        if not math.isfinite(lam) or lam < 0:
            raise DomainError(f"noncentrality must be finite and >= 0, got {self.lam!r}")
        object.__setattr__(self, "lam", lam)

    @property
    def is_central(self):
        return self.lam == 0.0


def poisson_window(lam):
    """Indices and weights of the Poisson(lam/2) terms kept in the mixture.

    The window ``[lo, hi]`` is chosen from Chernoff bounds so that the mass
    left out on either side is below :data:`TAIL_MASS`; the kept weights are
    renormalized to sum to one.
    """
    m = lam / 2.0
    if m == 0.0:
        return np.zeros(1, dtype=np.int64), np.ones(1)
    # P(J >= m + t) <= exp(-t^2 / (2(m + t))),  P(J <= m - t) <= exp(-t^2 / (2m))
    t_hi = 0.5 * (2 * _LOG_TAIL + math.sqrt(4 * _LOG_TAIL**2 + 8 * _LOG_TAIL * m))
    t_lo = math.sqrt(2 * _LOG_TAIL * m)
    lo = max(0, math.floor(m - t_lo))
    hi = math.ceil(m + t_hi) + 1
    j = np.arange(lo, hi + 1, dtype=np.int64)
    mode = min(max(math.floor(m), lo), hi)
    log_w_mode = -m + mode * math.log(m) - math.lgamma(mode + 1)
    # ratios from the mode keep the weights free of large cancelling logs
    up = np.cumprod(m / np.arange(mode + 1, hi + 1, dtype=float)) if hi > mode else np.empty(0)
    down = np.cumprod(np.arange(mode, lo, -1, dtype=float) / m) if mode > lo else np.empty(0)
    w = np.concatenate([down[::-1], [1.0], up]) * math.exp(log_w_mode)
    if not np.isfinite(w).all() or w.sum() == 0.0:
        w = np.exp(-m + j * math.log(m) - gammaln(j + 1.0))
    return j, w / math.fsum(w)


def _check_points(u, allow_zero):
    u = np.asarray(u, dtype=float)
    if np.isnan(u).any() or np.isneginf(u).any():
        raise DomainError("evaluation points must not be NaN or -inf")
    if allow_zero:
        if (u < 0).any():
            raise DomainError("evaluation points must be >= 0")
    elif (u <= 0).any() or np.isinf(u).any():
        raise DomainError("density points must be finite and > 0")
    return u


def _mixture_tails(p, u):
    """Lower and upper tail probabilities at flat array ``u`` (all finite, > 0)."""
    j, w = poisson_window(p.lam)
    a0 = p.nu1 / 2.0
    b = p.nu2 / 2.0
    denom = p.nu2 + p.nu1 * u
    x = p.nu1 * u / denom
    y = p.nu2 / denom
    a = a0 + j  # shapes across the window

    lower_hi, _ = beta_tails(a[-1], b, x, y)  # smallest lower tail
    _, upper_lo = beta_tails(a[0], b, x, y)  # smallest upper tail
    if len(j) == 1:
        return lower_hi, upper_lo

    # x^a y^b / (a B(a, b)) for a = a[0..-2]
    ak = a[:-1][None, :]
    t = np.exp(_log_prefactor(ak, b, x[:, None], y[:, None]) - np.log(ak))
    # I(a_k) = I(a_last) + sum_{i >= k} t_i ;  S(a_k) = S(a_0) + sum_{i < k} t_i
    lower = np.empty((len(u), len(j)))
    lower[:, -1] = lower_hi
    lower[:, :-1] = lower_hi[:, None] + np.cumsum(t[:, ::-1], axis=1)[:, ::-1]
    upper = np.empty_like(lower)
    upper[:, 0] = upper_lo
    upper[:, 1:] = upper_lo[:, None] + np.cumsum(t, axis=1)
    lo = np.clip(lower @ w, 0.0, 1.0)
    up = np.clip(upper @ w, 0.0, 1.0)
    # the smaller tail carries full relative precision; complement the other
    return np.where(lo <= up, lo, 1.0 - up), np.where(lo <= up, 1.0 - lo, up)


def _tails(p, u):
    u = _check_points(u, allow_zero=True)
    shape = u.shape
    flat = u.ravel()
    lower = np.zeros(flat.shape)
    upper = np.ones(flat.shape)
    inf = np.isposinf(flat)
    lower[inf], upper[inf] = 1.0, 0.0
    inner = (flat > 0) & ~inf
    if inner.any():
        lower[inner], upper[inner] = _mixture_tails(p, flat[inner])
    if shape == ():
        return float(lower[0]), float(upper[0])
    return lower.reshape(shape), upper.reshape(shape)


def ncf_cdf(p, u):
    """P(F <= u) for F ~ F(nu1, nu2, lam).  ``u`` may be a scalar or an array."""
    return _tails(p, u)[0]


def ncf_sf(p, u):
    """P(F > u), computed without subtracting from one."""
    return _tails(p, u)[1]


def ncf_pdf(p, u):
    """Density of F(nu1, nu2, lam) at ``u > 0``.

    The j-th mixture term is the central F(nu1 + 2j, nu2) density rescaled by
    nu1 / (nu1 + 2j), weighted by the Poisson(lam/2) probability of j.
    """
    u = _check_points(u, allow_zero=False)
    shape = u.shape
    flat = u.ravel()
    j, w = poisson_window(p.lam)
    n1, n2 = float(p.nu1), float(p.nu2)
    h = n1 / 2.0 + j
    log_terms = (
        (gammaln(h + n2 / 2.0) - gammaln(h) - gammaln(n2 / 2.0) + h * math.log(n1 / n2))[None, :]
        + np.outer(np.log(n2 / (n2 + n1 * flat)), h + n2 / 2.0)
        + np.outer(np.log(flat), h - 1.0)
    )
    dens = np.exp(log_terms) @ w
    return float(dens[0]) if shape == () else dens.reshape(shape)


def ncf_mean(p):
    """Mean nu2 (nu1 + lam) / (nu1 (nu2 - 2)); exists only for nu2 > 2."""
    if p.nu2 <= 2:
        raise MeanUndefinedError(f"mean does not exist for nu2 = {p.nu2} (needs nu2 > 2)")
    return p.nu2 * (p.nu1 + p.lam) / (p.nu1 * (p.nu2 - 2.0))


def ncf_quantile(p, prob):
    """Inverse of :func:`ncf_cdf` by bracketing and bisection.

    The upper bracket grows geometrically from max(1, mean); bisection then
    runs until the distribution function is within ``QUANTILE_PROB_TOL`` of
    ``prob`` or the bracket collapses to adjacent doubles.
    """
    prob = float(prob)
    if not 0.0 < prob < 1.0:
        raise DomainError(f"probability must lie in (0, 1), got {prob!r}")
    start = ncf_mean(p) if p.nu2 > 2 else 1.0
    lo, hi = 0.0, max(1.0, start)
    # for prob near one the upper tail is the better-conditioned side
    use_upper = prob > 0.5
    target = 1.0 - prob if use_upper else prob

    def excess(v):
        lower, upper = _tails(p, v)
        return (target - upper) if use_upper else (lower - target)

    while excess(hi) < 0.0:
        lo, hi = hi, hi * 4.0
        if hi > 1e300:
            raise DomainError("quantile bracket overflow")
    for _ in range(QUANTILE_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        e = excess(mid)
        if abs(e) <= QUANTILE_PROB_TOL:
            return mid
        if e < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def ncf_sample(p, rng, count):
    """Draw ``count`` variates using chi2(nu1 + 2J) with J ~ Poisson(lam/2).

    ``rng`` is a :class:`numpy.random.Generator`; it is the only state touched.
    """
    if isinstance(count, bool) or not isinstance(count, Integral) or count < 1:
        raise DomainError(f"count must be a positive integer, got {count!r}")
    if p.lam > 0:
        extra = rng.poisson(p.lam / 2.0, size=count)
    else:
        extra = np.zeros(count, dtype=np.int64)
    num = rng.chisquare(p.nu1 + 2.0 * extra)
    den = rng.chisquare(p.nu2, size=count)
    return (num / p.nu1) / (den / p.nu2)
