import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from evidential.errors import DomainError, InsufficientDataError, NoSolutionError, SearchExhaustedError, SpecError
from evidential.evidence import (
    EffectSpec,
    Verdict,
    classify,
    critical_delta,
    delta_k_hat,
    design_thresholds,
    f_from_delta_sic,
    misleading_probs,
    post_data_p,
    sample_size,
    threshold_tail,
)
from evidential.linear_model import delta_sic_from_f

CITRUS_DSIC = -3.6596817706280227
HALF = EffectSpec(0.5, 6, 12)
ONE = EffectSpec(1.0, 6, 12)


class TestTransform:
    @given(st.floats(0, 1e4), st.integers(14, 5000), st.integers(1, 6))
    @settings(max_examples=200, deadline=None)
    def test_round_trip(self, f, n, q):
        r = 12
        back = float(f_from_delta_sic(delta_sic_from_f(f, n, q, r), n, q, r))
        assert back == pytest.approx(f, rel=1e-9, abs=1e-10)

    def test_zero_f_boundary(self):
        assert f_from_delta_sic(-6 * math.log(24), 24, 6, 12) == pytest.approx(0.0, abs=1e-14)


class TestEffectSpec:
    def test_lambda(self):
        assert HALF.lam(24) == 6.0 and ONE.lam(24) == 24.0

    @pytest.mark.parametrize("args", [(-0.1, 6, 12), (math.nan, 6, 12), (0.5, 0, 12), (0.5, 6, 6)])
    def test_invalid(self, args):
        with pytest.raises(SpecError):
            EffectSpec(*args)


class TestDesign:
    @pytest.mark.parametrize(
        "effect,psi1,psi2,k1,k2",
        [(HALF, 0.584197, 5.697776, -12.91790, 13.27850), (ONE, 2.046554, 12.93674, -2.155081, 29.18792)],
    )
    def test_table_values(self, effect, psi1, psi2, k1, k2):
        d = design_thresholds(24, effect)
        assert (d.psi1, d.psi2, d.k1, d.k2) == pytest.approx((psi1, psi2, k1, k2), rel=1e-5)

    def test_quantiles_agree_with_scipy(self):
        d = design_thresholds(40, EffectSpec(0.7, 3, 8), gamma1=0.1, gamma2=0.02)
        lam = 40 * 0.49
        assert d.psi1 == pytest.approx(stats.ncf.ppf(0.02, 3, 32, lam), rel=1e-8)
        assert d.psi2 == pytest.approx(stats.ncf.ppf(0.9, 3, 32, lam), rel=1e-8)

    def test_zero_effect_gives_central_cutoffs(self):
        d = design_thresholds(24, EffectSpec(0.0, 6, 12))
        assert d.lam == 0.0
        assert d.psi2 == pytest.approx(stats.f.ppf(0.95, 6, 12), rel=1e-9)

    def test_needs_n_above_r(self):
        with pytest.raises(InsufficientDataError):
            design_thresholds(12, HALF)

    @pytest.mark.parametrize("g", [0.0, 1.0, -0.2])
    def test_bad_gamma(self, g):
        with pytest.raises(DomainError):
            design_thresholds(24, HALF, gamma1=g)


class TestErrorTable:
    @given(st.integers(14, 400), st.floats(0.05, 2.0), st.floats(0.005, 0.3), st.floats(0.005, 0.3))
    @settings(max_examples=60, deadline=None)
    def test_budget_met_at_boundary(self, n, delta, g1, g2):
        t = misleading_probs(design_thresholds(n, EffectSpec(delta, 6, 12), g1, g2))
        assert t.m1 == pytest.approx(g1, abs=1e-9)
        assert t.m2 == pytest.approx(g2, abs=1e-9)

    @given(st.integers(14, 400), st.floats(0.05, 2.0), st.floats(0, 200), st.floats(0, 200))
    @settings(max_examples=60, deadline=None)
    def test_partition_identity(self, n, delta, lam1, lam2):
        d = design_thresholds(n, EffectSpec(delta, 6, 12))
        t = misleading_probs(d, lambda1=lam1, lambda2=lam2)
        # veridical computed independently from the distribution function
        p1 = stats.ncf(6, n - 12, lam1) if lam1 > 0 else stats.f(6, n - 12)
        p2 = stats.ncf(6, n - 12, lam2) if lam2 > 0 else stats.f(6, n - 12)
        v1 = p1.cdf(float(f_from_delta_sic(d.k1, n, 6, 12)))
        v2 = p2.sf(float(f_from_delta_sic(d.k2, n, 6, 12)))
        assert t.v1 == pytest.approx(1 - (t.w1 + t.m1), abs=1e-12)
        assert t.v2 == pytest.approx(1 - (t.w2 + t.m2), abs=1e-12)
        assert t.v1 == pytest.approx(v1, abs=1e-8)
        assert t.v2 == pytest.approx(v2, abs=1e-8)

    def test_point_models_shrink_errors(self):
        # model 1 at lam = 0, model 2 well beyond the boundary
        base = design_thresholds(24, HALF)
        m1, m2 = [], []
        for n in (24, 50, 100, 200, 400):
            d = dataclasses.replace(base, n=n, lam=HALF.lam(n))
            t = misleading_probs(d, lambda1=0.0, lambda2=4 * HALF.lam(n))
            m1.append(t.m1)
            m2.append(t.m2)
        assert all(np.diff(m1) < 0) and all(np.diff(m2) < 0)


class TestClassify:
    def test_verdicts(self):
        d = design_thresholds(24, HALF)
        assert classify(d.k1 - 1, d) is Verdict.STRONG_MODEL1
        assert classify(d.k2 + 1, d) is Verdict.STRONG_MODEL2
        assert classify(0.0, d) is Verdict.INCONCLUSIVE

    def test_ties_inconclusive(self):
        d = design_thresholds(24, HALF)
        assert classify(d.k1, d) is Verdict.INCONCLUSIVE
        assert classify(d.k2, d) is Verdict.INCONCLUSIVE

    def test_citrus(self):
        assert classify(CITRUS_DSIC, design_thresholds(24, HALF)) is Verdict.INCONCLUSIVE
        assert classify(CITRUS_DSIC, design_thresholds(24, ONE)) is Verdict.STRONG_MODEL1
        assert str(Verdict.STRONG_MODEL1) == "StrongModel1"


class TestSampleSize:
    @pytest.mark.parametrize("which,k", [("k1", -12.9), ("k2", 13.3)])
    def test_recovers_citrus_n(self, which, k):
        n = sample_size(k, which, HALF)
        assert n == 24
        assert (threshold_tail(k, which, n, HALF) <= 0.05) != (threshold_tail(k, which, n - 1, HALF) <= 0.05)

    def test_exact_threshold_round_trip(self):
        d = design_thresholds(60, HALF)
        assert sample_size(d.k2 - 1e-6, "k2", HALF, n_min=40) == 60

    def test_search_exhausted(self):
        with pytest.raises(SearchExhaustedError):
            sample_size(-12.9, "k1", ONE)

    def test_bad_which(self):
        with pytest.raises(SpecError):
            threshold_tail(1.0, "k3", 24, HALF)


class TestPostData:
    def test_citrus_values(self):
        assert post_data_p(CITRUS_DSIC, 24, HALF) == pytest.approx(0.45266, abs=1e-5)
        assert post_data_p(CITRUS_DSIC, 24, ONE) == pytest.approx(0.031139, abs=1e-6)

    @given(st.floats(-19, 60), st.floats(0, 2))
    @settings(max_examples=80, deadline=None)
    def test_p1_plus_p2(self, dsic, delta):
        e = EffectSpec(delta, 6, 12)
        assert post_data_p(dsic, 24, e, 1) + post_data_p(dsic, 24, e, 2) == pytest.approx(1.0, abs=1e-13)

    def test_below_attainable(self):
        with pytest.raises(DomainError):
            post_data_p(-30.0, 24, HALF)

    def test_critical_delta(self):
        d = critical_delta(CITRUS_DSIC, 24, 6, 12)
        assert d == pytest.approx(0.93975, abs=1e-4)
        assert post_data_p(CITRUS_DSIC, 24, EffectSpec(d, 6, 12)) == pytest.approx(0.05, abs=1e-8)

    def test_critical_delta_none(self):
        with pytest.raises(NoSolutionError):
            critical_delta(CITRUS_DSIC, 24, 6, 12, delta_max=0.5)

    def test_delta_k_hat(self):
        assert delta_k_hat(CITRUS_DSIC, 24) == CITRUS_DSIC / 24
