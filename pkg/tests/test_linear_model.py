import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from evidential.errors import DegenerateVarianceError, InsufficientDataError, RankError, SpecError
from evidential.linear_model import (
    ComparisonSpec,
    DesignMatrix,
    MvnModel,
    NestedProjector,
    build_two_way_design,
    compare,
    delta_sic_from_f,
    design_load,
    f_contrast,
    f_partitioned,
    f_variance_reduction,
    fit,
    kl_mvn,
    kl_nested,
    noncentrality,
    restricted_fit,
)

F_RTOL = 1e-8


def random_problem(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(8, 60))
    r = int(rng.integers(2, min(10, n - 2)))
    q = int(rng.integers(1, r))
    X = DesignMatrix(np.column_stack([np.ones(n), rng.normal(size=(n, r - 1))]))
    y = X.entries @ rng.normal(size=r) + rng.normal(scale=rng.uniform(0.2, 3), size=n)
    dropped = sorted(rng.choice(np.arange(1, r), size=q, replace=False))
    return X, y, dropped


def selector(dropped, r):
    L = np.zeros((len(dropped), r))
    L[np.arange(len(dropped)), dropped] = 1.0
    return L


class TestCitrus:
    def test_table_values(self, citrus):
        res = compare(citrus["X"], citrus["y"], citrus["spec"])
        assert (res.n, res.r, res.q) == (24, 12, 6)
        assert res.f_stat == pytest.approx(1.800657, abs=1e-6)
        assert res.p_value == pytest.approx(0.18168, abs=1e-5)
        assert res.delta_sic == pytest.approx(-3.65968, abs=1e-5)

    def test_g_squared_is_likelihood_ratio(self, citrus):
        res = compare(citrus["X"], citrus["y"], citrus["spec"])
        lr = -2 * (res.fit_restricted.log_likelihood - res.fit_full.log_likelihood)
        assert res.g_squared == pytest.approx(lr, rel=1e-12)

    def test_delta_sic_is_sic_difference(self, citrus):
        res = compare(citrus["X"], citrus["y"], citrus["spec"])
        n = res.n

        def sic(f, k):
            return -2 * f.log_likelihood + k * math.log(n)

        # the shared variance parameter cancels
        assert res.delta_sic == pytest.approx(sic(res.fit_restricted, 6) - sic(res.fit_full, 12), rel=1e-12)

    def test_labels(self, citrus):
        X = citrus["X"]
        assert X.column_labels[0] == "(Intercept)"
        assert X.column_labels[-1] == "variety[2]:pesticide[3]"
        assert X.index("variety[1]") == 1


class TestFFormulas:
    @pytest.mark.parametrize("seed", range(50))
    def test_three_forms_agree(self, seed):
        X, y, dropped = random_problem(seed)
        spec_a = ComparisonSpec.drop(dropped)
        spec_b = ComparisonSpec.contrast(selector(dropped, X.r))
        fa = f_partitioned(X, y, spec_a)
        fb = f_contrast(X, y, spec_b)
        fc = f_variance_reduction(fit(X, y), restricted_fit(X, y, spec_a), len(dropped))
        assert fb == pytest.approx(fa, rel=F_RTOL)
        assert fc == pytest.approx(fa, rel=F_RTOL)
        assert compare(X, y, spec_b).delta_sic == pytest.approx(compare(X, y, spec_a).delta_sic, rel=F_RTOL, abs=1e-9)

    def test_contrast_with_offset(self):
        rng = np.random.default_rng(3)
        X = DesignMatrix(np.column_stack([np.ones(30), rng.normal(size=(30, 2))]))
        y = X.entries @ [1.0, 2.0, -1.0] + rng.normal(size=30)
        L = np.array([[0.0, 1.0, 1.0]])
        res = compare(X, y, ComparisonSpec.contrast(L, [1.0]))
        r1 = restricted_fit(X, y, ComparisonSpec.contrast(L, [1.0]))
        assert (L @ r1.beta_hat)[0] == pytest.approx(1.0, abs=1e-12)
        assert res.f_stat == pytest.approx(f_variance_reduction(res.fit_full, r1, 1), rel=1e-10)

    @given(st.integers(0, 10_000), st.floats(1e-3, 1e3), st.floats(-50, 50))
    @settings(max_examples=60, deadline=None)
    def test_delta_sic_scale_and_shift_invariant(self, seed, scale, shift):
        X, y, dropped = random_problem(seed)
        spec = ComparisonSpec.drop(dropped)
        base = compare(X, y, spec).delta_sic
        # intercept in the kept columns absorbs a constant shift
        moved = compare(X, scale * y + shift, spec).delta_sic
        assert moved == pytest.approx(base, rel=1e-7, abs=1e-7)

    def test_projector_matches_compare(self, citrus):
        proj = NestedProjector(citrus["X"], citrus["spec"])
        d, ok = proj.delta_sic(citrus["y"])
        assert ok[0]
        assert d[0] == pytest.approx(compare(citrus["X"], citrus["y"], citrus["spec"]).delta_sic, rel=1e-12)

    def test_delta_sic_from_f_minimum(self):
        assert delta_sic_from_f(0.0, 24, 6, 12) == pytest.approx(-6 * math.log(24))


class TestNoncentrality:
    @pytest.mark.parametrize("seed", range(20))
    def test_lambda_kl_identity(self, seed):
        X, _, dropped = random_problem(seed)
        spec = ComparisonSpec.drop(dropped)
        rng = np.random.default_rng(seed + 100)
        beta = rng.normal(size=X.r)
        sigma2 = rng.uniform(0.5, 4)
        beta2 = beta[dropped]
        lam = noncentrality(X, spec, beta, sigma2)
        via_kl = 2 * kl_nested(X, spec, beta2, sigma2) - design_load(X, spec, beta2, sigma2)
        assert lam == pytest.approx(via_kl, rel=1e-8, abs=1e-10)
        lam_b = noncentrality(X, ComparisonSpec.contrast(selector(dropped, X.r)), beta, sigma2)
        assert lam_b == pytest.approx(lam, rel=1e-8)

    def test_orthogonal_design_has_no_load(self):
        x2 = np.tile([1.0, -1.0], 5)
        X = DesignMatrix(np.column_stack([np.ones(10), x2]))
        spec = ComparisonSpec.drop([1])
        assert design_load(X, spec, [0.7], 2.0) == pytest.approx(0.0, abs=1e-14)
        assert noncentrality(X, spec, [3.0, 0.7], 2.0) == pytest.approx(2 * kl_nested(X, spec, [0.7], 2.0))

    def test_load_bounded_by_twice_kl(self):
        X, spec = build_two_way_design(2, 2, 3)
        load = design_load(X, spec, [1.0], 1.0)
        assert 0.0 < load <= 2 * kl_nested(X, spec, [1.0], 1.0)

    def test_kl_matches_general_formula(self):
        X, spec = build_two_way_design(3, 4, 2)
        beta2 = np.linspace(-1, 1, 6)
        shift = X.entries[:, list(spec.dropped)] @ beta2
        f1 = MvnModel(np.zeros(X.n), 2.0 * np.eye(X.n))
        f2 = MvnModel(shift, 2.0 * np.eye(X.n))
        assert kl_nested(X, spec, beta2, 2.0) == pytest.approx(kl_mvn(f2, f1), rel=1e-12)

    def test_kl_monte_carlo(self):
        rng = np.random.default_rng(7)
        f1 = MvnModel([0.0, 1.0], [[2.0, 0.3], [0.3, 1.0]])
        f2 = MvnModel([0.5, -1.0], [[1.0, 0.0], [0.0, 3.0]])
        y = rng.multivariate_normal(f1.mean, f1.covariance, size=200_000)
        mc = np.mean(f1.logpdf(y) - f2.logpdf(y))
        assert kl_mvn(f1, f2) == pytest.approx(mc, abs=0.01)

    def test_simulated_f_follows_noncentral(self, citrus):
        X, spec = citrus["X"], citrus["spec"]
        rng = np.random.default_rng(99)
        beta = np.zeros(X.r)
        beta[list(spec.dropped)] = [3.0, -2.0, 1.0, 0.0, 4.0, -1.0]
        sigma2 = 16.0
        lam = noncentrality(X, spec, beta, sigma2)
        proj = NestedProjector(X, spec)
        Y = (X.entries @ beta)[:, None] + math.sqrt(sigma2) * rng.standard_normal((X.n, 3000))
        rss2, rss1 = proj.rss_pair(Y)
        f = (rss1 - rss2) / 6 / (rss2 / 12)
        assert stats.kstest(f, stats.ncf(6, 12, lam).cdf).pvalue > 0.01


class TestErrors:
    def test_rank_deficient_names_columns(self):
        x = np.column_stack([np.ones(6), np.arange(6.0), 2 * np.arange(6.0)])
        with pytest.raises(RankError) as info:
            DesignMatrix(x, ("c", "a", "b"))
        assert set(info.value.columns) & {"a", "b"}

    def test_empty_cell_is_rank_error(self):
        X, _ = build_two_way_design(2, 2, 1)
        with pytest.raises(RankError):
            DesignMatrix(np.delete(X.entries, 3, axis=0), X.column_labels)

    def test_too_few_rows(self):
        with pytest.raises(InsufficientDataError):
            fit(DesignMatrix(np.eye(3)), [1.0, 2.0, 3.0])

    def test_exact_fit_degenerate(self):
        X = DesignMatrix(np.column_stack([np.ones(5), np.arange(5.0)]))
        y = 2 + 3 * np.arange(5.0)
        assert fit(X, y).degenerate
        with pytest.raises(DegenerateVarianceError):
            compare(X, y, ComparisonSpec.drop([1]))

    def test_spec_validation(self):
        with pytest.raises(SpecError):
            ComparisonSpec.drop([])
        with pytest.raises(SpecError):
            ComparisonSpec.contrast([[1.0, 0.0], [2.0, 0.0]])
        X = DesignMatrix(np.column_stack([np.ones(5), np.arange(5.0)]))
        with pytest.raises(SpecError):
            compare(X, np.arange(5.0) ** 2, ComparisonSpec.drop([4]))
