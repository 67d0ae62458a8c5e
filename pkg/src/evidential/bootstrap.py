"""Bootstrap distributions of delta-SIC and of the per-observation estimate
delta-SIC / n, plus the sample-size simulation built on them.

Every replicate draws from its own stream, derived from ``(seed, index)``
through :class:`numpy.random.SeedSequence`, so a replicate's value does not
depend on how many others were computed or in which order.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateVarianceError, ResourceCapError, SpecError, StratificationError
from .linear_model import DesignMatrix, NestedProjector, _as_response, fit

log = logging.getLogger(__name__)

DEFAULT_N_BOOT = 1024
DEFAULT_N_SIM = 1024
DEFAULT_MAX_REFITS = 20_000_000
METHODS = ("parametric", "residual", "stratified")


def replicate_rng(seed, index, *extra):
    """Generator for replicate ``index`` of the run seeded with ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(*extra, int(index)))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True, eq=False)
class CellLayout:
    """Assignment of observations to cells (treatment combinations).

    ``cells[i]`` is the 0-based cell index of observation i.
    """

    cells: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        c = np.asarray(self.cells, dtype=np.int64).reshape(-1)
        if c.size and (c.min() < 0):
            raise SpecError("cell indices must be >= 0")
        n_cells = int(c.max()) + 1 if c.size else 0
        if np.bincount(c, minlength=n_cells).min(initial=1) < 1:
            raise SpecError("cell indices must be contiguous from 0")
        labels = tuple(self.labels) or tuple(str(i + 1) for i in range(n_cells))
        if len(labels) != n_cells:
            raise SpecError(f"{len(labels)} labels for {n_cells} cells")
        c.setflags(write=False)
        object.__setattr__(self, "cells", c)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_keys(cls, keys):
        """Cells numbered by first appearance of each key."""
        order = {}
        idx = [order.setdefault(k, len(order)) for k in keys]
        return cls(np.array(idx), tuple(str(k) for k in order))

    @classmethod
    def from_counts(cls, counts):
        """Consecutive blocks, ``counts[c]`` observations in cell c (row-major for 2-D)."""
        flat = np.asarray(counts, dtype=np.int64).reshape(-1)
        return cls(np.repeat(np.arange(flat.size), flat))

    @property
    def n(self):
        return self.cells.size

    @property
    def counts(self):
        return np.bincount(self.cells, minlength=len(self.labels))

    @property
    def n_cells(self):
        return len(self.labels)


@dataclass(frozen=True, eq=False)
class BootstrapResult:
    """Bootstrap replicates of delta-SIC for one method.

    Replicates whose refit was exact (zero residual variance) are excluded and
    counted in ``failures``.
    """

    replicates: np.ndarray
    n: int
    seed: int
    method: str
    requested: int
    failures: int = 0

    @property
    def delta_k(self):
        return self.replicates / self.n


@dataclass(frozen=True, eq=False)
class BootstrapSummary:
    mean: float
    median: float
    a_r: float
    ci_level: float
    ci_delta_k: tuple
    n: int
    n_b: int
    failures: int = 0
    _sorted: np.ndarray = field(default=None, repr=False)

    def quantile(self, p):
        """EDF quantile of delta-SIC by linear interpolation between order statistics."""
        return float(np.quantile(self._sorted, p))

    def edf(self, x):
        """Right-continuous EDF of delta-SIC: fraction of replicates <= x."""
        return np.searchsorted(self._sorted, np.asarray(x, float), side="right") / self._sorted.size

    @property
    def sorted_replicates(self):
        return self._sorted


def _finish(dsic, ok, n, seed, method, n_b):
    failures = int(n_b - ok.sum())
    if failures == n_b:
        raise DegenerateVarianceError(f"every {method} bootstrap refit was exact")
    if failures:
        log.warning("%d of %d %s bootstrap refits were exact and were dropped", failures, n_b, method)
    return BootstrapResult(
        replicates=dsic[ok], n=n, seed=int(seed), method=method, requested=n_b, failures=failures
    )


def _check_boot(fit_full, X, n_b):
    if n_b < 1:
        raise SpecError(f"n_B must be >= 1, got {n_b}")
    if fit_full.n != X.n or fit_full.r != X.r:
        raise SpecError("fit does not belong to the full design")
    if fit_full.degenerate or not fit_full.sigma2_unbiased > 0:
        raise DegenerateVarianceError("fitted model has zero residual variance")


def parametric_bootstrap(fit_full, X, spec, n_b=DEFAULT_N_BOOT, seed=0):
    """Replicates y* ~ N(X beta_hat, sigma_tilde^2 I) from the fitted full model.

    sigma_tilde^2 is the unbiased variance estimate RSS / (n - r).
    """
    _check_boot(fit_full, X, n_b)
    proj = NestedProjector(X, spec)
    sd = math.sqrt(fit_full.sigma2_unbiased)
    Y = np.empty((X.n, n_b))
    for i in range(n_b):
        Y[:, i] = fit_full.fitted + sd * replicate_rng(seed, i).standard_normal(X.n)
    dsic, ok = proj.delta_sic(Y)
    return _finish(dsic, ok, X.n, seed, "parametric", n_b)


def residual_bootstrap(fit_full, X, spec, n_b=DEFAULT_N_BOOT, seed=0):
    """Replicates X beta_hat + e*, with e* resampled with replacement from the
    full-model residuals.

    The residuals are centred and scaled by sqrt(n / (n - r)) first, so the
    pool's variance is sigma_tilde^2 rather than the shrunken RSS / n.
    """
    _check_boot(fit_full, X, n_b)
    proj = NestedProjector(X, spec)
    pool = fit_full.residuals - fit_full.residuals.mean()
    pool = pool * math.sqrt(X.n / (X.n - X.r))
    Y = np.empty((X.n, n_b))
    for i in range(n_b):
        idx = replicate_rng(seed, i).integers(0, X.n, X.n)
        Y[:, i] = fit_full.fitted + pool[idx]
    dsic, ok = proj.delta_sic(Y)
    return _finish(dsic, ok, X.n, seed, "residual", n_b)


def cell_medians(y, layout):
    """Median of each cell; an even count takes the mean of the two middle values."""
    y = _as_response(y, layout.n)
    return np.array([np.median(y[layout.cells == c]) for c in range(layout.n_cells)])


def inflated_residuals(y, layout):
    """Median-centred residuals of each observation, scaled by sqrt(n_c / (n_c - 1)).

    Raises
    ------
    StratificationError
        If a cell has fewer than two observations.
    """
    counts = layout.counts
    small = np.nonzero(counts < 2)[0]
    if small.size:
        c = int(small[0])
        raise StratificationError(
            f"cell {layout.labels[c]!r} has {counts[c]} observation(s); within-cell resampling needs >= 2"
        )
    y = _as_response(y, layout.n)
    med = cell_medians(y, layout)
    scale = np.sqrt(counts / (counts - 1.0))
    return (y - med[layout.cells]) * scale[layout.cells], med


class _CellSampler:
    """Within-cell resampling of a residual pool, one draw per observation."""

    def __init__(self, layout, pool):
        order = np.argsort(layout.cells, kind="stable")
        self._pool = pool[order]
        counts = layout.counts
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        self._start = starts[layout.cells].astype(float)
        self._size = counts[layout.cells].astype(float)

    def draw(self, rng):
        pick = (self._start + np.floor(rng.random(self._size.size) * self._size)).astype(np.int64)
        return self._pool[pick]


def stratified_bootstrap(y, layout, X, spec, n_b=DEFAULT_N_BOOT, seed=0):
    """Nonparametric bootstrap resampling variance-inflated, median-centred
    residuals within cells and adding them back to the cell medians."""
    if n_b < 1:
        raise SpecError(f"n_B must be >= 1, got {n_b}")
    if layout.n != X.n:
        raise SpecError(f"layout has {layout.n} observations, design has {X.n}")
    pool, med = inflated_residuals(y, layout)
    proj = NestedProjector(X, spec)
    sampler = _CellSampler(layout, pool)
    center = med[layout.cells]
    Y = np.empty((X.n, n_b))
    for i in range(n_b):
        Y[:, i] = center + sampler.draw(replicate_rng(seed, i))
    dsic, ok = proj.delta_sic(Y)
    return _finish(dsic, ok, X.n, seed, "stratified", n_b)


def summarize(result, ci_level=0.90):
    """Mean, median, aR = P*(dsic > 0) and an equal-tailed percentile CI for delta-K."""
    if not 0.0 < ci_level < 1.0:
        raise SpecError(f"ci_level must lie in (0, 1), got {ci_level!r}")
    reps = np.sort(np.asarray(result.replicates, float))
    if reps.size < 1:
        raise SpecError("no replicates to summarize")
    tail = (1.0 - ci_level) / 2.0
    dk = reps / result.n
    return BootstrapSummary(
        mean=float(reps.mean()),
        median=float(np.median(reps)),
        a_r=float(np.mean(reps > 0)),
        ci_level=ci_level,
        ci_delta_k=(float(np.quantile(dk, tail)), float(np.quantile(dk, 1.0 - tail))),
        n=result.n,
        n_b=reps.size,
        failures=result.failures,
        _sorted=reps,
    )


@dataclass(frozen=True)
class CurvePoint:
    """Averaged delta-K confidence points for one cell size and method."""

    cell_size: int
    n: int
    method: str
    ci05: float
    ci50: float
    ci95: float
    pseudo_true: float


def _cell_rows(X, layout):
    """One representative design row per cell; rows must be constant within cells."""
    rows = np.empty((layout.n_cells, X.r))
    for c in range(layout.n_cells):
        block = X.entries[layout.cells == c]
        if not np.allclose(block, block[0]):
            raise SpecError(f"design rows differ within cell {layout.labels[c]!r}")
        rows[c] = block[0]
    return rows


def pseudo_true_delta_k(fit_full, X, spec):
    """Limit of delta-SIC / n when data come from the fitted full model.

    With mean mu = X beta_hat and variance sigma_tilde^2 this is
    log(1 + ||(I - P1) mu||^2 / (n sigma_tilde^2)), P1 projecting on model 1.
    It depends on the layout only through cell proportions, so it is the
    same for every cell size of a balanced scale-up.
    """
    _, rss1 = NestedProjector(X, spec).rss_pair(fit_full.fitted)
    return math.log1p(float(rss1[0]) / (X.n * fit_full.sigma2_unbiased))


def sample_size_curve(
    fit_full,
    X,
    spec,
    base_layout,
    cell_sizes,
    n_sim=DEFAULT_N_SIM,
    n_b=DEFAULT_N_BOOT,
    seed=0,
    ci_level=0.90,
    max_refits=DEFAULT_MAX_REFITS,
):
    """Average bootstrap confidence points for delta-K as cells grow.

    For each cell size m, ``n_sim`` data sets with m observations per cell are
    drawn from the fitted full model (mean X beta_hat, variance sigma_tilde^2);
    each is bootstrapped parametrically and with the stratified scheme, and the
    (tail, 0.5, 1 - tail) points of delta-SIC*/n are averaged over data sets.

    Returns a list of :class:`CurvePoint`, parametric before stratified for
    each cell size.
    """
    sizes = [int(m) for m in cell_sizes]
    if not sizes or min(sizes) < 2:
        raise SpecError("cell sizes must all be >= 2")
    if n_sim < 1 or n_b < 1:
        raise SpecError("n_sim and n_B must be >= 1")
    total = n_sim * n_b * len(sizes) * 2
    if total > max_refits:
        raise ResourceCapError(
            f"{n_sim} simulations x {n_b} bootstraps x {len(sizes)} cell sizes x 2 methods "
            f"= {total} refits exceeds the cap of {max_refits}"
        )
    rows = _cell_rows(X, base_layout)
    beta = fit_full.beta_hat
    sd = math.sqrt(fit_full.sigma2_unbiased)
    truth = pseudo_true_delta_k(fit_full, X, spec)
    tail = (1.0 - ci_level) / 2.0
    probs = [tail, 0.5, 1.0 - tail]
    out = []
    for s_idx, m in enumerate(sizes):
        layout = CellLayout.from_counts(np.full(base_layout.n_cells, m))
        Xm = DesignMatrix(np.repeat(rows, m, axis=0), X.column_labels)
        mu = Xm.entries @ beta
        acc = {"parametric": np.zeros(3), "stratified": np.zeros(3)}
        for sim in range(n_sim):
            rng = replicate_rng(seed, sim, 0, s_idx)
            y = mu + sd * rng.standard_normal(Xm.n)
            boot_seed = int(rng.integers(0, 2**63 - 1))
            fitted = fit(Xm, y)
            runs = {
                "parametric": parametric_bootstrap(fitted, Xm, spec, n_b, boot_seed),
                "stratified": stratified_bootstrap(y, layout, Xm, spec, n_b, boot_seed),
            }
            for method, res in runs.items():
                acc[method] += np.quantile(res.delta_k, probs)
        for method in ("parametric", "stratified"):
            lo, mid, hi = acc[method] / n_sim
            out.append(CurvePoint(m, Xm.n, method, float(lo), float(mid), float(hi), truth))
    return out
