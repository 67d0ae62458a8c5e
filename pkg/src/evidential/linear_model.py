"""Normal linear fixed-effects models and nested comparisons.

Model 2 (full) is y ~ N(X beta, sigma^2 I).  Model 1 (restricted) is either

* formulation ``"A"``: a block of coefficients set to zero (columns dropped), or
* formulation ``"B"``: linear restrictions ``L beta = h``.

Least squares goes through a QR decomposition of X; ``(X'X)^{-1}`` is never
formed explicitly except where the quadratic forms of a test need it, and then
as ``R^{-1} R^{-T}``.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import qr, solve_triangular

from .errors import (
    DegenerateVarianceError,
    InsufficientDataError,
    NumericError,
    RankError,
    SpecError,
)
from .ncf import NcfParams, ncf_sf

# residual norm below this fraction of ||y|| is an exact fit
DEGENERATE_RTOL = 1e-10


def _rank_tol(matrix, singular_values):
    if singular_values.size == 0:
        return 0.0
    return max(matrix.shape) * np.finfo(float).eps * singular_values[0]


def _dependent_columns(entries):
    """Column indices a pivoted QR pushes past the numerical rank."""
    _, r_fac, piv = qr(entries, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r_fac))
    tol = max(entries.shape) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
    rank = int(np.sum(diag > tol))
    return sorted(int(i) for i in piv[rank:])


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """Full-column-rank n x r design matrix with column labels."""

    entries: np.ndarray
    column_labels: tuple = ()

    def __post_init__(self):
        x = np.array(self.entries, dtype=float)
        if x.ndim != 2:
            raise SpecError("design matrix must be two-dimensional")
        if not np.isfinite(x).all():
            raise SpecError("design matrix has non-finite entries")
        labels = tuple(self.column_labels) or tuple(f"x{i}" for i in range(x.shape[1]))
        if len(labels) != x.shape[1]:
            raise SpecError(f"{len(labels)} labels for {x.shape[1]} columns")
        if len(set(labels)) != len(labels):
            raise SpecError("column labels must be unique")
        if x.shape[1] > x.shape[0]:
            raise RankError(
                f"{x.shape[1]} columns exceed {x.shape[0]} rows", columns=labels[x.shape[0]:]
            )
        if x.shape[1]:
            sv = np.linalg.svd(x, compute_uv=False)
            if np.sum(sv > _rank_tol(x, sv)) < x.shape[1]:
                bad = [labels[i] for i in _dependent_columns(x)]
                raise RankError(
                    "design matrix is rank deficient; dependent columns: " + ", ".join(bad),
                    columns=bad,
                )
        x.setflags(write=False)
        object.__setattr__(self, "entries", x)
        object.__setattr__(self, "column_labels", labels)

    @property
    def n(self):
        return self.entries.shape[0]

    @property
    def r(self):
        return self.entries.shape[1]

    def index(self, label):
        try:
            return self.column_labels.index(label)
        except ValueError:
            raise SpecError(f"no design column labelled {label!r}") from None

    def columns(self, indices):
        idx = list(indices)
        return DesignMatrix(self.entries[:, idx], tuple(self.column_labels[i] for i in idx))


def _as_response(y, n=None):
    v = np.array(getattr(y, "values", y), dtype=float).reshape(-1)
    if not np.isfinite(v).all():
        raise SpecError("response has non-finite values")
    if n is not None and v.shape[0] != n:
        raise SpecError(f"response has {v.shape[0]} values, design has {n} rows")
    return v


@dataclass(frozen=True, eq=False)
class ResponseVector:
    values: np.ndarray

    def __post_init__(self):
        v = _as_response(self.values)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class FitResult:
    """Maximum likelihood fit of one normal linear model.

    ``degenerate`` is set when the fit is exact (residuals vanish to working
    precision); the variance estimates are then reported as zero and the
    log-likelihood as +inf.
    """

    beta_hat: np.ndarray
    sigma2_ml: float
    sigma2_unbiased: float
    log_likelihood: float
    residuals: np.ndarray
    n: int
    r: int
    rss: float
    fitted: np.ndarray
    degenerate: bool = False


def _log_lik(n, sigma2_ml):
    if sigma2_ml <= 0:
        return math.inf
    return -0.5 * n * (math.log(2.0 * math.pi * sigma2_ml) + 1.0)


def _finish_fit(y, beta, resid, n, r):
    rss = float(resid @ resid)
    ynorm = float(np.linalg.norm(y))
    degenerate = math.sqrt(rss) <= DEGENERATE_RTOL * ynorm or ynorm == 0.0
    if degenerate:
        s2, s2u = 0.0, 0.0
    else:
        s2 = rss / n
        s2u = rss / (n - r) if n > r else math.nan
    return FitResult(
        beta_hat=beta,
        sigma2_ml=s2,
        sigma2_unbiased=s2u,
        log_likelihood=_log_lik(n, s2),
        residuals=resid,
        n=n,
        r=r,
        rss=rss,
        fitted=y - resid,
        degenerate=degenerate,
    )


def _ls(entries, y):
    if entries.shape[1] == 0:
        return np.zeros(0), y.copy()
    q_fac, r_fac = np.linalg.qr(entries)
    beta = solve_triangular(r_fac, q_fac.T @ y)
    return beta, y - entries @ beta


def fit(X, y):
    """Least squares / ML fit of ``y ~ N(X beta, sigma^2 I)``.

    Raises
    ------
    InsufficientDataError
        If n <= r, leaving no degrees of freedom for sigma^2.
    """
    y = _as_response(y, X.n)
    if X.n <= X.r:
        raise InsufficientDataError(f"need n > r to estimate sigma^2 (n={X.n}, r={X.r})")
    beta, resid = _ls(X.entries, y)
    return _finish_fit(y, beta, resid, X.n, X.r)


@dataclass(frozen=True, eq=False)
class ComparisonSpec:
    """Which nested restriction of the full model is model 1.

    Build with :meth:`drop` (formulation A) or :meth:`contrast` (formulation B).
    """

    formulation: str
    dropped: tuple = ()
    L: np.ndarray = None
    h: np.ndarray = None

    @classmethod
    def drop(cls, columns):
        cols = tuple(sorted({int(c) for c in columns}))
        if not cols:
            raise SpecError("formulation A needs at least one dropped column")
        return cls("A", dropped=cols)

    @classmethod
    def contrast(cls, L, h=None):
        L = np.atleast_2d(np.array(L, dtype=float))
        h = np.zeros(L.shape[0]) if h is None else np.array(h, dtype=float).reshape(-1)
        if h.shape[0] != L.shape[0]:
            raise SpecError(f"h has {h.shape[0]} entries for {L.shape[0]} contrasts")
        if not (np.isfinite(L).all() and np.isfinite(h).all()):
            raise SpecError("contrast matrix has non-finite entries")
        if np.linalg.matrix_rank(L) < L.shape[0]:
            raise SpecError("contrast matrix L must have full row rank")
        L.setflags(write=False)
        h.setflags(write=False)
        return cls("B", L=L, h=h)

    @property
    def q(self):
        return len(self.dropped) if self.formulation == "A" else self.L.shape[0]

    def check(self, X):
        if self.formulation == "A":
            if self.dropped[-1] >= X.r or self.dropped[0] < 0:
                raise SpecError(f"dropped columns {self.dropped} out of range for r={X.r}")
        elif self.formulation == "B":
            if self.L.shape[1] != X.r:
                raise SpecError(f"L has {self.L.shape[1]} columns, design has {X.r}")
        else:
            raise SpecError(f"unknown formulation {self.formulation!r}")
        return self

    def kept(self, r):
        gone = set(self.dropped)
        return [i for i in range(r) if i not in gone]


@dataclass(frozen=True, eq=False)
class ComparisonResult:
    f_stat: float
    q: int
    n: int
    r: int
    g_squared: float
    delta_sic: float
    p_value: float
    fit_full: FitResult
    fit_restricted: FitResult
    spec: ComparisonSpec = None


def _xtx_inv(X):
    _, r_fac = np.linalg.qr(X.entries)
    r_inv = solve_triangular(r_fac, np.eye(X.r))
    return r_inv @ r_inv.T


def _contrast_form(X, spec, beta):
    """(L b - h)' (L (X'X)^{-1} L')^{-1} (L b - h)."""
    m = spec.L @ _xtx_inv(X) @ spec.L.T
    d = spec.L @ beta - spec.h
    try:
        return float(d @ np.linalg.solve(m, d))
    except np.linalg.LinAlgError as exc:
        raise NumericError("L (X'X)^-1 L' is singular") from exc


def restricted_fit(X, y, spec):
    """Fit model 1: drop columns (A) or constrained least squares (B)."""
    spec.check(X)
    y = _as_response(y, X.n)
    r1 = X.r - spec.q
    if spec.formulation == "A":
        beta, resid = _ls(X.entries[:, spec.kept(X.r)], y)
        return _finish_fit(y, beta, resid, X.n, r1)
    beta_full, _ = _ls(X.entries, y)
    xtx_inv = _xtx_inv(X)
    m = spec.L @ xtx_inv @ spec.L.T
    adj = xtx_inv @ spec.L.T @ np.linalg.solve(m, spec.L @ beta_full - spec.h)
    beta = beta_full - adj
    return _finish_fit(y, beta, y - X.entries @ beta, X.n, r1)


def f_partitioned(X, y, spec):
    """F from the partitioned sums of squares (formulation A)."""
    y = _as_response(y, X.n)
    x1 = X.entries[:, spec.kept(X.r)]
    beta, resid = _ls(X.entries, y)
    beta1, _ = _ls(x1, y)
    # b'X'y - b1'X1'y equals ||X b - X1 b1||^2 because X1 b1 projects X b;
    # the difference of fitted vectors avoids cancelling large sums
    gap = X.entries @ beta - (x1 @ beta1 if x1.shape[1] else 0.0)
    num = (gap @ gap) / spec.q
    den = (resid @ resid) / (X.n - X.r)
    return float(num / den)


def f_contrast(X, y, spec):
    """F from the contrast quadratic form (formulation B)."""
    y = _as_response(y, X.n)
    beta, resid = _ls(X.entries, y)
    den = (resid @ resid) / (X.n - X.r)
    return _contrast_form(X, spec, beta) / spec.q / den


def f_variance_reduction(full, restricted, q):
    """F = ((n - r) / q) (sigma1^2 - sigma^2) / sigma^2 from two ML fits."""
    return (full.n - full.r) / q * (restricted.rss - full.rss) / full.rss


def delta_sic_from_f(f_stat, n, q, r):
    """n log(1 + q F / (n - r)) - q log n."""
    return n * np.log1p(q * np.asarray(f_stat, float) / (n - r)) - q * math.log(n)


def compare(X, y, spec):
    """Fit both nested models and compute F, G^2, delta-SIC and the p-value.

    Raises
    ------
    InsufficientDataError
        If n <= r.
    DegenerateVarianceError
        If the full model reproduces y exactly, so F is undefined.
    """
    spec.check(X)
    full = fit(X, y)
    if full.degenerate:
        raise DegenerateVarianceError("full model fits the data exactly; F is undefined")
    restricted = restricted_fit(X, y, spec)
    q, n, r = spec.q, X.n, X.r
    if spec.formulation == "A":
        f_stat = f_partitioned(X, y, spec)
    else:
        f_stat = f_contrast(X, y, spec)
    f_stat = max(f_stat, 0.0)
    g2 = n * math.log1p(q * f_stat / (n - r))
    return ComparisonResult(
        f_stat=f_stat,
        q=q,
        n=n,
        r=r,
        g_squared=g2,
        delta_sic=g2 - q * math.log(n),
        p_value=ncf_sf(NcfParams(q, n - r, 0.0), f_stat),
        fit_full=full,
        fit_restricted=restricted,
        spec=spec,
    )


class NestedProjector:
    """Residual sums of squares of both models for many responses at once.

    Used by the bootstraps, where the design is fixed and only y changes.
    """

    def __init__(self, X, spec):
        spec.check(X)
        self.n, self.r, self.q = X.n, X.r, spec.q
        if X.n <= X.r:
            raise InsufficientDataError(f"need n > r (n={X.n}, r={X.r})")
        self._q_full, self._r_full = np.linalg.qr(X.entries)
        self._spec = spec
        if spec.formulation == "A":
            x1 = X.entries[:, spec.kept(X.r)]
            self._q_restricted = np.linalg.qr(x1)[0] if x1.shape[1] else None
        else:
            xtx_inv = _xtx_inv(X)
            self._m_chol = np.linalg.cholesky(spec.L @ xtx_inv @ spec.L.T)

    @staticmethod
    def _rss(q_fac, Y):
        if q_fac is None:
            return np.einsum("ij,ij->j", Y, Y)
        resid = Y - q_fac @ (q_fac.T @ Y)
        return np.einsum("ij,ij->j", resid, resid)

    def rss_pair(self, Y):
        """Return ``(rss_full, rss_restricted)`` for the columns of ``Y``."""
        Y = np.asarray(Y, float)
        if Y.ndim == 1:
            Y = Y[:, None]
        rss_full = self._rss(self._q_full, Y)
        if self._spec.formulation == "A":
            rss_restricted = self._rss(self._q_restricted, Y)
        else:
            beta = solve_triangular(self._r_full, self._q_full.T @ Y)
            d = self._spec.L @ beta - self._spec.h[:, None]
            z = solve_triangular(self._m_chol, d, lower=True)
            rss_restricted = rss_full + np.einsum("ij,ij->j", z, z)
        return rss_full, rss_restricted

    def delta_sic(self, Y):
        """delta-SIC per column of ``Y`` and a mask of non-degenerate columns."""
        Y = np.asarray(Y, float)
        if Y.ndim == 1:
            Y = Y[:, None]
        rss_full, rss_restricted = self.rss_pair(Y)
        norms = np.linalg.norm(Y, axis=0)
        ok = (np.sqrt(rss_full) > DEGENERATE_RTOL * norms) & (norms > 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(ok, rss_restricted / np.where(ok, rss_full, 1.0), np.nan)
        dsic = self.n * np.log(np.maximum(ratio, 1.0)) - self.q * math.log(self.n)
        return np.where(ok, dsic, np.nan), ok


def noncentrality(X, spec, beta, sigma2):
    """Noncentrality lam of the F statistic when the true parameters are (beta, sigma2).

    Formulation A uses beta_2' (X2'X2 - X2'X1 (X1'X1)^{-1} X1'X2) beta_2 / sigma^2,
    formulation B uses (L beta - h)' (L (X'X)^{-1} L')^{-1} (L beta - h) / sigma^2.
    """
    spec.check(X)
    if not sigma2 > 0:
        raise SpecError(f"sigma2 must be > 0, got {sigma2!r}")
    beta = np.asarray(beta, float).reshape(-1)
    if beta.shape[0] != X.r:
        raise SpecError(f"beta has {beta.shape[0]} entries, design has {X.r} columns")
    if spec.formulation == "B":
        return max(_contrast_form(X, spec, beta) / sigma2, 0.0)
    beta2 = beta[list(spec.dropped)]
    x1 = X.entries[:, spec.kept(X.r)]
    x2 = X.entries[:, list(spec.dropped)]
    a = x2.T @ x2
    if x1.shape[1]:
        try:
            a = a - x2.T @ x1 @ np.linalg.solve(x1.T @ x1, x1.T @ x2)
        except np.linalg.LinAlgError as exc:
            raise NumericError("X1'X1 is singular") from exc
    return max(float(beta2 @ a @ beta2) / sigma2, 0.0)


@dataclass(frozen=True, eq=False)
class MvnModel:
    """Multivariate normal N(mean, covariance)."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mu = np.array(self.mean, dtype=float).reshape(-1)
        cov = np.atleast_2d(np.array(self.covariance, dtype=float))
        if cov.shape != (mu.size, mu.size):
            raise SpecError(f"covariance shape {cov.shape} does not match mean length {mu.size}")
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-10):
            raise SpecError("covariance is not symmetric")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise SpecError("covariance is not positive definite") from None
        object.__setattr__(self, "mean", mu)
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "_chol", chol)

    @property
    def dim(self):
        return self.mean.size

    def logpdf(self, y):
        y = np.atleast_2d(y)
        z = solve_triangular(self._chol, (y - self.mean).T, lower=True)
        logdet = 2.0 * np.sum(np.log(np.diag(self._chol)))
        return -0.5 * (self.dim * math.log(2 * math.pi) + logdet + np.sum(z * z, axis=0))


def kl_mvn(f1, f2):
    """Kullback-Leibler divergence E_1[log(f1(Y) / f2(Y))] between two normals."""
    if f1.dim != f2.dim:
        raise SpecError(f"dimension mismatch: {f1.dim} vs {f2.dim}")
    l2 = f2._chol
    a = solve_triangular(l2, f1._chol, lower=True)  # L2^{-1} L1
    trace = float(np.sum(a * a))
    z = solve_triangular(l2, f2.mean - f1.mean, lower=True)
    logdet1 = 2.0 * np.sum(np.log(np.diag(f1._chol)))
    logdet2 = 2.0 * np.sum(np.log(np.diag(l2)))
    kl = 0.5 * (trace - f1.dim + float(z @ z) + logdet2 - logdet1)
    return max(kl, 0.0)


def _require_drop(spec, X):
    spec.check(X)
    if spec.formulation != "A":
        raise SpecError("this quantity is defined for formulation A (dropped columns)")


def kl_nested(X, spec, beta2, sigma2):
    """beta_2' X2'X2 beta_2 / (2 sigma^2): divergence between the two nested normals.

    Symmetric here because both models share sigma^2 I.
    """
    _require_drop(spec, X)
    if not sigma2 > 0:
        raise SpecError(f"sigma2 must be > 0, got {sigma2!r}")
    beta2 = np.asarray(beta2, float).reshape(-1)
    if beta2.shape[0] != spec.q:
        raise SpecError(f"beta2 has {beta2.shape[0]} entries, q={spec.q}")
    shift = X.entries[:, list(spec.dropped)] @ beta2
    return float(shift @ shift) / (2.0 * sigma2)


def design_load(X, spec, beta2, sigma2):
    """beta_2' X2'X1 (X1'X1)^{-1} X1'X2 beta_2 / sigma^2, the amount by which
    the design pulls lam below 2 K(f1, f2)."""
    _require_drop(spec, X)
    beta2 = np.asarray(beta2, float).reshape(-1)
    x1 = X.entries[:, spec.kept(X.r)]
    if not x1.shape[1]:
        return 0.0
    shift = X.entries[:, list(spec.dropped)] @ beta2
    proj = x1 @ np.linalg.solve(x1.T @ x1, x1.T @ shift)
    return float(shift @ proj) / sigma2


def build_two_way_design(levels1, levels2, cell_counts, names=("A", "B")):
    """Two-factor design with interactions, last level of each factor as reference.

    Rows run over cells in row-major order (factor 1 slowest), ``cell_counts[i][j]``
    rows per cell.  Columns: intercept, l1-1 factor-1 indicators, l2-1 factor-2
    indicators, (l1-1)(l2-1) interaction products.  The returned spec drops the
    interaction block.
    """
    if levels1 < 2 or levels2 < 2:
        raise SpecError("each factor needs at least two levels")
    counts = np.asarray(cell_counts)
    if counts.ndim == 0:
        counts = np.full((levels1, levels2), int(counts))
    if counts.shape != (levels1, levels2):
        raise SpecError(f"cell_counts shape {counts.shape} != ({levels1}, {levels2})")
    if (counts < 1).any() or not np.all(counts == np.round(counts)):
        raise SpecError("every cell count must be a positive integer")
    n1, n2 = names
    rows = []
    for i in range(levels1):
        for j in range(levels2):
            a = [float(i == k) for k in range(levels1 - 1)]
            b = [float(j == k) for k in range(levels2 - 1)]
            row = [1.0] + a + b + [ai * bj for ai in a for bj in b]
            rows.extend([row] * int(counts[i, j]))
    labels = (
        ["(Intercept)"]
        + [f"{n1}[{k + 1}]" for k in range(levels1 - 1)]
        + [f"{n2}[{k + 1}]" for k in range(levels2 - 1)]
        + [f"{n1}[{a + 1}]:{n2}[{b + 1}]" for a in range(levels1 - 1) for b in range(levels2 - 1)]
    )
    X = DesignMatrix(np.array(rows), tuple(labels))
    first = levels1 + levels2 - 1
    return X, ComparisonSpec.drop(range(first, X.r))
