"""Evidence thresholds, misleading-evidence probabilities and post-data summaries
for the delta-SIC evidence function of a nested normal linear comparison.

Everything runs through the monotone map between the F statistic and
delta-SIC,

    dsic = n log(1 + q F / (n - r)) - q log n,
    F    = ((n - r) / q) (n**(q/n) exp(dsic / n) - 1),

so probabilities about delta-SIC are noncentral F probabilities with
lam = n delta**2 (the boundary between the two models unless overridden).
"""

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InsufficientDataError, NoSolutionError, SearchExhaustedError, SpecError
from .linear_model import delta_sic_from_f
from .ncf import NcfParams, _tails, ncf_quantile

DEFAULT_GAMMA = 0.05
DEFAULT_N_MAX = 10**6
DEFAULT_DELTA_MAX = 10.0


def f_from_delta_sic(delta_sic, n, q, r):
    """F-scale image ((n - r)/q) (n**(q/n) e**(dsic/n) - 1) of a delta-SIC value."""
    return (n - r) / q * np.expm1((q * math.log(n) + np.asarray(delta_sic, float)) / n)


@dataclass(frozen=True)
class EffectSpec:
    """Per-observation effect size delta (in units of sigma) and the test's q, r."""

    delta: float
    q: int
    r: int

    def __post_init__(self):
        if not (math.isfinite(self.delta) and self.delta >= 0):
            raise SpecError(f"delta must be finite and >= 0, got {self.delta!r}")
        if self.q < 1 or self.r < self.q + 1:
            raise SpecError(f"need q >= 1 and r >= q + 1 (q={self.q}, r={self.r})")

    def lam(self, n):
        return n * self.delta**2

    def params(self, n, lam=None):
        return NcfParams(self.q, n - self.r, self.lam(n) if lam is None else lam)


class Verdict(enum.Enum):
    STRONG_MODEL1 = "StrongModel1"
    INCONCLUSIVE = "Inconclusive"
    STRONG_MODEL2 = "StrongModel2"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class EvidenceDesign:
    n: int
    effect: EffectSpec
    gamma1: float
    gamma2: float
    lam: float
    psi1: float
    psi2: float
    k1: float
    k2: float


@dataclass(frozen=True)
class ErrorTable:
    """Misleading (m), weak (w) and veridical (v) probabilities under each model.

    Index 1 means model 1 generated the data, index 2 model 2.
    """

    m1: float
    m2: float
    w1: float
    w2: float
    v1: float
    v2: float


def _check_n(n, r):
    if n <= r:
        raise InsufficientDataError(f"need n > r (n={n}, r={r})")


def _check_gamma(name, g):
    if not 0.0 < g < 1.0:
        raise DomainError(f"{name} must lie in (0, 1), got {g!r}")


def classify(delta_sic, design):
    """Trichotomy: strong for model 1 below k1, strong for model 2 above k2.

    Values exactly on a threshold are inconclusive.
    """
    if delta_sic < design.k1:
        return Verdict.STRONG_MODEL1
    if delta_sic > design.k2:
        return Verdict.STRONG_MODEL2
    return Verdict.INCONCLUSIVE


def design_thresholds(n, effect, gamma1=DEFAULT_GAMMA, gamma2=DEFAULT_GAMMA):
    """Thresholds k1, k2 holding M2 <= gamma2 and M1 <= gamma1 at lam = n delta^2.

    psi1 is the gamma2 quantile and psi2 the (1 - gamma1) quantile of
    F(q, n - r, n delta^2); each k is the delta-SIC image of its psi.
    """
    _check_n(n, effect.r)
    _check_gamma("gamma1", gamma1)
    _check_gamma("gamma2", gamma2)
    p = effect.params(n)
    psi1 = ncf_quantile(p, gamma2)
    psi2 = ncf_quantile(p, 1.0 - gamma1)
    q, r = effect.q, effect.r
    return EvidenceDesign(
        n=n,
        effect=effect,
        gamma1=gamma1,
        gamma2=gamma2,
        lam=p.lam,
        psi1=psi1,
        psi2=psi2,
        k1=float(delta_sic_from_f(psi1, n, q, r)),
        k2=float(delta_sic_from_f(psi2, n, q, r)),
    )


def _region_probs(k1, k2, n, q, r, lam):
    """(P(dsic < k1), P(k1 <= dsic <= k2), P(dsic > k2)) under F(q, n - r, lam)."""
    p = NcfParams(q, n - r, lam)
    f1 = float(f_from_delta_sic(k1, n, q, r))
    f2 = float(f_from_delta_sic(k2, n, q, r))
    below = _tails(p, f1)[0] if f1 > 0 else 0.0
    above = _tails(p, f2)[1] if f2 > 0 else 1.0
    return below, max(0.0, 1.0 - below - above), above


def misleading_probs(design, lambda_true=None, *, lambda1=None, lambda2=None):
    """Misleading, weak and veridical probabilities of a design.

    ``lambda1`` is the noncentrality when model 1 generates the data and
    ``lambda2`` when model 2 does.  Both default to ``lambda_true``, which
    defaults to the design boundary n delta^2 (the worst case for both).
    """
    base = design.lam if lambda_true is None else float(lambda_true)
    lam1 = base if lambda1 is None else float(lambda1)
    lam2 = base if lambda2 is None else float(lambda2)
    n, q, r = design.n, design.effect.q, design.effect.r
    low1, mid1, high1 = _region_probs(design.k1, design.k2, n, q, r, lam1)
    low2, mid2, high2 = _region_probs(design.k1, design.k2, n, q, r, lam2)
    m1, m2 = high1, low2
    return ErrorTable(m1=m1, m2=m2, w1=mid1, w2=mid2, v1=1.0 - (mid1 + m1), v2=1.0 - (mid2 + m2))


def threshold_tail(k, which, n, effect):
    """Misleading-evidence probability at fixed threshold ``k`` and sample size ``n``.

    For ``which="k1"`` the left tail P(F < psi1(n)) (M2); for ``"k2"`` the
    right tail P(F > psi2(n)) (M1); both at lam = n delta^2.
    """
    _check_n(n, effect.r)
    psi = float(f_from_delta_sic(k, n, effect.q, effect.r))
    p = effect.params(n)
    if which == "k1":
        return _tails(p, psi)[0] if psi > 0 else 0.0
    if which == "k2":
        return _tails(p, psi)[1] if psi > 0 else 1.0
    raise SpecError(f"which must be 'k1' or 'k2', got {which!r}")


def sample_size(k_fixed, which, effect, gamma=DEFAULT_GAMMA, *, n_min=None, n_max=DEFAULT_N_MAX):
    """Sample size at which the fixed threshold ``k_fixed`` carries tail probability ``gamma``.

    The misleading-evidence tail at a fixed k is not monotone in n (for k1 it
    rises from zero, peaks and then decays; for k2 it falls and later rises),
    so the search returns the first integer n >= ``n_min`` (default r + 1) at
    which ``threshold_tail - gamma`` has changed sign relative to ``n_min``:
    the smallest n for which ``k_fixed`` is the gamma-level threshold that
    :func:`design_thresholds` would produce.  The bracket grows geometrically
    and is refined by integer bisection; n - 1 is checked to lie on the other
    side.

    Raises
    ------
    SearchExhaustedError
        If no crossing occurs up to ``n_max``.
    """
    _check_gamma("gamma", gamma)
    if not effect.delta > 0:
        raise SpecError("sample size search needs delta > 0")
    start = effect.r + 1 if n_min is None else max(int(n_min), effect.r + 1)
    if n_max < start:
        raise SearchExhaustedError(f"n_max={n_max} is below the smallest usable n={start}")

    def side(n):
        return threshold_tail(k_fixed, which, n, effect) <= gamma

    s0 = side(start)
    lo, hi, step = start, start, 1
    while side(hi) == s0:
        lo = hi
        if hi >= n_max:
            raise SearchExhaustedError(
                f"tail probability at {which}={k_fixed} never crosses {gamma} for n <= {n_max}"
            )
        hi = min(n_max, hi + step)
        step = max(1, step + step // 4 + (1 if step < 4 else 0))
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if side(mid) == s0:
            lo = mid
        else:
            hi = mid
    assert side(hi) != s0 and side(hi - 1) == s0
    return hi


def post_data_p(delta_sic_obs, n, effect, favored=1):
    """Largest probability, under the disfavored model, of evidence as misleading as observed.

    With model 1 favored returns P2 = Psi(F_obs; q, n - r, n delta^2), with
    model 2 favored returns P1 = 1 - P2, where F_obs is the F-scale image of
    the observed delta-SIC.
    """
    _check_n(n, effect.r)
    f_obs = float(f_from_delta_sic(delta_sic_obs, n, effect.q, effect.r))
    if f_obs < 0:
        raise DomainError(
            f"delta-SIC {delta_sic_obs} is below the minimum {-effect.q * math.log(n):.6g} attainable at F = 0"
        )
    lower, upper = _tails(effect.params(n), f_obs)
    if favored == 1:
        return lower
    if favored == 2:
        return upper
    raise SpecError(f"favored must be 1 or 2, got {favored!r}")


def critical_delta(delta_sic_obs, n, q, r, gamma=DEFAULT_GAMMA, favored=1, delta_max=DEFAULT_DELTA_MAX):
    """Effect size at which the post-data probability equals ``gamma``.

    With model 1 favored this is the smallest delta for which P2 <= gamma,
    i.e. the per-observation effect the data rule out.  P2 decreases in delta,
    so bisection on [0, delta_max] finds it uniquely.
    """
    _check_gamma("gamma", gamma)

    def excess(delta):
        return post_data_p(delta_sic_obs, n, EffectSpec(delta, q, r), favored) - gamma

    e_lo, e_hi = excess(0.0), excess(delta_max)
    if e_lo == 0.0:
        return 0.0
    if (e_lo > 0) == (e_hi > 0):
        raise NoSolutionError(
            f"post-data probability does not cross {gamma} for delta in [0, {delta_max}]"
        )
    lo, hi = 0.0, float(delta_max)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        e = excess(mid)
        if abs(e) <= 1e-10 or hi - lo <= 1e-12:
            return mid
        if (e > 0) == (e_lo > 0):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def delta_k_hat(delta_sic, n):
    """Per-observation estimate delta-SIC / n of the divergence difference."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    return delta_sic / n
