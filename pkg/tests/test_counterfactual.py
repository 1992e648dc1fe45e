"""Counterfactual placebo efficacy, additive difference, sentinel pooling."""

import math

import numpy as np
import pytest
from scipy import stats

from prevtrial.counterfactual import (
    ArmSummary,
    EfficacyParameter,
    SentinelCohort,
    ThetaCInterval,
    additive_difference,
    averted_infections_ratio,
    exact_poisson_ci,
    pe_vs_counterfactual,
    rate_ratio,
    sentinel_pooled_incidence,
    uncertainty_interval,
    uncertainty_interval_from_rate_ratio,
)
from prevtrial.errors import EmptyInput, NoControlEvents, ThetaCZero, ValidationError


class TestRateRatio:
    def test_basic(self):
        rr = rate_ratio(ArmSummary(30, 1000.0), ArmSummary(50, 1000.0))
        assert rr.rr == pytest.approx(0.6, rel=1e-12)
        assert not rr.one_sided

    def test_log_se(self):
        rr = rate_ratio(ArmSummary(50, 1000.0), ArmSummary(50, 1000.0))
        assert rr.rr == pytest.approx(1.0, rel=1e-12)
        assert rr.log_se == pytest.approx(0.2, rel=1e-12)

    def test_zero_experimental_events(self):
        rr = rate_ratio(ArmSummary(0, 1000.0), ArmSummary(50, 1000.0))
        assert rr.rr == 0.0
        assert rr.one_sided
        assert rr.ci_low == 0.0
        assert rr.ci_high > 0.0

    def test_no_control_events(self):
        with pytest.raises(NoControlEvents):
            rate_ratio(ArmSummary(3, 1000.0), ArmSummary(0, 1000.0))

    def test_ci_contains_point(self):
        rr = rate_ratio(ArmSummary(12, 4000.0), ArmSummary(40, 4000.0))
        assert rr.ci_low < rr.rr < rr.ci_high


class TestParameterAlgebra:
    def test_pe_examples(self):
        assert pe_vs_counterfactual(1.0, 0.0) == pytest.approx(0.0, abs=1e-12)
        assert pe_vs_counterfactual(0.6, 0.5) == pytest.approx(0.70, rel=1e-12)
        assert pe_vs_counterfactual(2.0, 0.5) == pytest.approx(0.0, abs=1e-12)

    def test_air_examples(self):
        assert averted_infections_ratio(1.0, 0.5) == pytest.approx(1.0, rel=1e-12)
        assert averted_infections_ratio(0.6, 0.5) == pytest.approx(1.4, rel=1e-12)
        assert averted_infections_ratio(2.0, 0.5) == pytest.approx(0.0, abs=1e-12)

    def test_air_undefined_at_zero(self):
        with pytest.raises(ThetaCZero):
            averted_infections_ratio(0.6, 0.0)

    def test_affine_in_rr(self):
        # three collinear points for each parameter at fixed theta_c
        for theta in (0.2, 0.5, 0.8):
            for fn in (pe_vs_counterfactual, averted_infections_ratio):
                y1, y2, y3 = (fn(rr, theta) for rr in (0.2, 0.5, 0.8))
                assert y2 == pytest.approx((y1 + y3) / 2.0, rel=1e-12)

    def test_air_is_pe_over_theta(self):
        for rr in np.linspace(0.1, 1.5, 8):
            for theta in np.linspace(0.1, 0.9, 9):
                pe = pe_vs_counterfactual(float(rr), float(theta))
                air = averted_infections_ratio(float(rr), float(theta))
                assert air == pytest.approx(pe / theta, rel=1e-12)

    def test_theta_zero_reduces_to_naive(self):
        for rr in (0.2, 0.6, 1.0):
            assert pe_vs_counterfactual(rr, 0.0) == pytest.approx(1.0 - rr, rel=1e-12)


class TestUncertaintyInterval:
    def test_zero_se_endpoints(self):
        est = uncertainty_interval_from_rate_ratio(
            rr=0.6, log_se=0.0, theta=ThetaCInterval(low=0.4, high=0.7),
            parameter=EfficacyParameter.PE,
        )
        assert est.ui_low == pytest.approx(0.64, rel=1e-12)
        assert est.ui_high == pytest.approx(0.82, rel=1e-12)
        assert est.point == pytest.approx(0.64, rel=1e-12)

    def test_degenerate_theta_equals_ci(self):
        exp, ctl = ArmSummary(12, 4000.0), ArmSummary(40, 4000.0)
        est = uncertainty_interval(exp, ctl, ThetaCInterval(low=0.5, high=0.5))
        assert est.ui_low == pytest.approx(est.ci_low, rel=1e-12)
        assert est.ui_high == pytest.approx(est.ci_high, rel=1e-12)

    def test_point_at_low_theta(self):
        exp, ctl = ArmSummary(12, 4000.0), ArmSummary(40, 4000.0)
        est = uncertainty_interval(exp, ctl, ThetaCInterval(low=0.4, high=0.7))
        assert est.point == pytest.approx(pe_vs_counterfactual(0.3, 0.4), rel=1e-12)

    def test_widening_never_narrows(self):
        exp, ctl = ArmSummary(12, 4000.0), ArmSummary(40, 4000.0)
        intervals = [(0.5, 0.5), (0.45, 0.6), (0.4, 0.7), (0.3, 0.8)]
        results = [
            uncertainty_interval(exp, ctl, ThetaCInterval(low=a, high=b))
            for a, b in intervals
        ]
        for tight, wide in zip(results, results[1:]):
            assert wide.ui_low <= tight.ui_low + 1e-12
            assert wide.ui_high >= tight.ui_high - 1e-12

    def test_contains_grid_cis(self):
        exp, ctl = ArmSummary(12, 4000.0), ArmSummary(40, 4000.0)
        rr = rate_ratio(exp, ctl)
        z = 1.959963984540054
        rr_lo = rr.rr * math.exp(-z * rr.log_se)
        rr_hi = rr.rr * math.exp(z * rr.log_se)
        for parameter in EfficacyParameter:
            theta = ThetaCInterval(low=0.4, high=0.7)
            est = uncertainty_interval(exp, ctl, theta, parameter=parameter)
            fn = (
                pe_vs_counterfactual
                if parameter is EfficacyParameter.PE
                else averted_infections_ratio
            )
            for t in np.linspace(0.4, 0.7, 101):
                lo = fn(rr_hi, float(t))
                hi = fn(rr_lo, float(t))
                assert est.ui_low <= lo + 1e-12
                assert est.ui_high >= hi - 1e-12

    def test_air_point(self):
        exp, ctl = ArmSummary(12, 4000.0), ArmSummary(40, 4000.0)
        est = uncertainty_interval(
            exp, ctl, ThetaCInterval(low=0.4, high=0.7), parameter=EfficacyParameter.AIR
        )
        assert est.point == pytest.approx(averted_infections_ratio(0.3, 0.4), rel=1e-12)

    def test_zero_events_needs_continuity(self):
        exp, ctl = ArmSummary(0, 1000.0), ArmSummary(50, 1000.0)
        with pytest.raises(ValidationError):
            uncertainty_interval(exp, ctl, ThetaCInterval(low=0.4, high=0.7))
        est = uncertainty_interval(
            exp, ctl, ThetaCInterval(low=0.4, high=0.7), continuity=True
        )
        assert est.ui_high <= 1.0

    def test_theta_validation(self):
        with pytest.raises(ValidationError):
            ThetaCInterval(low=0.7, high=0.4)
        with pytest.raises(ValidationError):
            ThetaCInterval(low=-0.1, high=0.5)
        with pytest.raises(ValidationError):
            ThetaCInterval(low=0.5, high=1.0)


class TestAdditiveDifference:
    def test_identical_arms(self):
        diff = additive_difference(ArmSummary(9, 2000.0), ArmSummary(9, 2000.0))
        assert diff.difference == 0.0

    def test_example(self):
        diff = additive_difference(ArmSummary(3, 2000.0), ArmSummary(9, 2000.0))
        assert diff.difference == pytest.approx(0.003, rel=1e-12)
        halfwidth = (diff.ci_high - diff.ci_low) / 2.0
        assert halfwidth == pytest.approx(0.0033948, abs=2e-6)

    def test_bootstrap_cross_check(self):
        # parametric bootstrap of the plug-in SE
        rng = np.random.default_rng(7)
        e1 = rng.poisson(3.0, size=200_000) / 2000.0
        e2 = rng.poisson(9.0, size=200_000) / 2000.0
        boot_se = float(np.std(e2 - e1))
        diff = additive_difference(ArmSummary(3, 2000.0), ArmSummary(9, 2000.0))
        assert diff.se == pytest.approx(boot_se, rel=0.02)

    def test_coverage(self):
        # Wald CI coverage at the reference configuration
        lam1, lam2, py = 0.003, 0.006, 2000.0
        rng = np.random.default_rng(123)
        n = 10_000
        x1 = rng.poisson(lam1 * py, size=n)
        x2 = rng.poisson(lam2 * py, size=n)
        covered = 0
        for k1, k2 in zip(x1, x2):
            d = additive_difference(ArmSummary(int(k1), py), ArmSummary(int(k2), py))
            if d.ci_low <= lam2 - lam1 <= d.ci_high:
                covered += 1
        assert covered / n >= 0.93


class TestExactPoissonCI:
    def test_reference_interval(self):
        lo, hi = exact_poisson_ci(40, 1000.0)
        assert lo == pytest.approx(0.0285766, abs=1e-6)
        assert hi == pytest.approx(0.0544686, abs=1e-6)

    def test_zero_events(self):
        lo, hi = exact_poisson_ci(0, 1000.0)
        assert lo == 0.0
        assert hi == pytest.approx(0.0036889, abs=1e-6)
        assert hi == pytest.approx(-math.log(0.025) / 1000.0, rel=1e-9)

    def test_tail_inversion_oracle(self):
        # independent check: invert the Poisson tail probabilities directly
        def tail_lower(k, py):
            lo, hi = 1e-9, 1.0
            for _ in range(200):
                mid = (lo + hi) / 2.0
                if stats.poisson.sf(k - 1, mid * py) < 0.025:
                    lo = mid
                else:
                    hi = mid
            return (lo + hi) / 2.0

        def tail_upper(k, py):
            lo, hi = 1e-9, 1.0
            for _ in range(200):
                mid = (lo + hi) / 2.0
                if stats.poisson.cdf(k, mid * py) > 0.025:
                    lo = mid
                else:
                    hi = mid
            return (lo + hi) / 2.0

        for k, py in ((5, 500.0), (40, 1000.0), (120, 3000.0)):
            lo, hi = exact_poisson_ci(k, py)
            assert lo == pytest.approx(tail_lower(k, py), rel=1e-6)
            assert hi == pytest.approx(tail_upper(k, py), rel=1e-6)

    def test_coverage_monotone_in_level(self):
        lo95, hi95 = exact_poisson_ci(10, 1000.0)
        lo99, hi99 = exact_poisson_ci(10, 1000.0, coverage=0.99)
        assert lo99 < lo95 and hi99 > hi95


class TestSentinel:
    def test_single_cohort(self):
        pooled = sentinel_pooled_incidence(
            [SentinelCohort("site-a", (2024.0, 2025.0), ArmSummary(40, 1000.0))]
        )
        assert len(pooled) == 1
        assert pooled[0].rate == pytest.approx(0.04, rel=1e-12)
        assert pooled[0].ci_low == pytest.approx(0.02858, abs=1e-5)
        assert pooled[0].ci_high == pytest.approx(0.05447, abs=1e-5)

    def test_pooling_narrows(self):
        one = sentinel_pooled_incidence(
            [SentinelCohort("a", (0.0, 1.0), ArmSummary(40, 1000.0))]
        )[0]
        two = sentinel_pooled_incidence(
            [
                SentinelCohort("a", (0.0, 1.0), ArmSummary(40, 1000.0)),
                SentinelCohort("b", (0.0, 1.0), ArmSummary(40, 1000.0)),
            ]
        )[0]
        assert two.rate == pytest.approx(one.rate, rel=1e-12)
        assert (two.ci_high - two.ci_low) < (one.ci_high - one.ci_low)
        assert two.labels == ("a", "b")

    def test_windows_sorted(self):
        pooled = sentinel_pooled_incidence(
            [
                SentinelCohort("late", (2.0, 3.0), ArmSummary(5, 100.0)),
                SentinelCohort("early", (0.0, 1.0), ArmSummary(5, 100.0)),
            ]
        )
        assert [p.calendar_window for p in pooled] == [(0.0, 1.0), (2.0, 3.0)]

    def test_empty(self):
        with pytest.raises(EmptyInput):
            sentinel_pooled_incidence([])


class TestArmSummaryValidation:
    def test_negative_events(self):
        with pytest.raises(ValidationError):
            ArmSummary(-1, 100.0)

    def test_zero_person_years(self):
        with pytest.raises(ValidationError):
            ArmSummary(3, 0.0)
