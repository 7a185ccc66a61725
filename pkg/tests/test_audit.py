"""The Monte-Carlo auditor itself: CIs, event families, soundness."""

import math

import pytest
from statsmodels.stats.proportion import proportion_confint

from dpcloak.audit import (
    ExactEventFamily,
    InsufficientTrials,
    PredicateEventFamily,
    ThresholdEventFamily,
    clopper_pearson,
    dp_audit,
    min_decidable_trials,
)
from dpcloak.noise import PrivacyParams, SeededLaplaceNoise


class TestClopperPearson:
    def test_edges(self):
        lo, hi = clopper_pearson(0, 100)
        assert lo == 0.0 and 0 < hi < 0.1
        lo, hi = clopper_pearson(100, 100)
        assert hi == 1.0 and 0.9 < lo < 1.0

    @pytest.mark.parametrize("k,n", [(0, 50), (3, 50), (25, 50), (50, 50), (490, 1000)])
    def test_matches_statsmodels_beta_method(self, k, n):
        lo, hi = clopper_pearson(k, n, 0.99)
        ref_lo, ref_hi = proportion_confint(k, n, alpha=0.01, method="beta")
        assert lo == pytest.approx(ref_lo, abs=1e-9)
        assert hi == pytest.approx(ref_hi, abs=1e-9)

    def test_bad_counts(self):
        with pytest.raises(ValueError):
            clopper_pearson(5, 4)


class TestEventFamilies:
    def test_exact_counts(self):
        family = ExactEventFamily([1, 2, 9])
        assert family.counts([1, 1, 2, 5]) == [2, 1, 0]

    def test_threshold_counts_match_naive(self):
        family = ThresholdEventFamily([0.0, 2.5])
        data = [-1.0, 0.0, 1.0, 3.0]
        counts = dict(zip(family.labels, family.counts(data)))
        assert counts["x<=0"] == 2
        assert counts["x<=2.5"] == 3
        assert counts["x>0"] == 2
        assert counts["x>2.5"] == 1

    def test_threshold_from_samples_spacing(self):
        family = ThresholdEventFamily.from_samples(list(range(1000)), n_cuts=64)
        assert len(family.cuts) == 64
        assert family.cuts == sorted(family.cuts)

    def test_predicate_family(self):
        family = PredicateEventFamily([("even", lambda x: x % 2 == 0)])
        assert family.counts([1, 2, 4]) == [2]


class TestMinDecidableTrials:
    def test_known_value(self):
        # At eps=1, delta=1e-4 the smallest decidable trial count is small
        # but definitely more than 10.
        n = min_decidable_trials(1.0, 1e-4)
        assert 10 < n < 50

    def test_grows_with_epsilon(self):
        assert min_decidable_trials(2.0, 1e-4) > min_decidable_trials(0.5, 1e-4)


class TestDpAudit:
    def test_identical_samplers_pass(self):
        sampler = lambda s: float(SeededLaplaceNoise(s).draw(1.0))
        report = dp_audit(sampler, sampler, None, PrivacyParams(0.25, 1e-4), 3000, seed=1)
        assert report.passed

    def test_laplace_shift_estimates_epsilon(self):
        # Analytic oracle: Lap(1/eps) vs the same shifted by 1 is exactly
        # eps-DP, with the ratio achieved in the tails.
        eps = 1.0
        sd = lambda s: SeededLaplaceNoise(s).draw(1.0 / eps)
        sdp = lambda s: SeededLaplaceNoise(s).draw(1.0 / eps) + 1.0
        report = dp_audit(sd, sdp, None, PrivacyParams(eps, 1e-12), 60_000, seed=2)
        assert report.passed
        assert report.eps_hat_point == pytest.approx(eps, abs=0.15)

    def test_deterministic_distinct_constants_fail_with_infinite_epsilon(self):
        report = dp_audit(
            lambda s: 0.0, lambda s: 1.0, None, PrivacyParams(1.0, 1e-4), 1000, seed=3
        )
        assert not report.passed
        assert math.isinf(report.eps_hat_point)
        # Certified bound stays finite at finite trials but far above budget.
        assert report.eps_hat_certified > 3.0

    def test_insufficient_trials(self):
        with pytest.raises(InsufficientTrials) as err:
            dp_audit(lambda s: 0.0, lambda s: 0.0, None, PrivacyParams(1.0, 1e-4), 10)
        assert err.value.suggested == min_decidable_trials(1.0, 1e-4)

    def test_planted_scale_violation_detected(self):
        # Lap(1/2) vs shifted: true epsilon is 2, audited budget is 1.
        sd = lambda s: SeededLaplaceNoise(s).draw(0.5)
        sdp = lambda s: SeededLaplaceNoise(s).draw(0.5) + 1.0
        report = dp_audit(sd, sdp, None, PrivacyParams(1.0, 1e-12), 60_000, seed=4)
        assert not report.passed
        assert report.eps_hat_certified > 1.0

    def test_exact_family_audit_and_report_text(self):
        events = ExactEventFamily([0, 1])
        report = dp_audit(
            lambda s: s % 2, lambda s: (s + 1) % 2, events,
            PrivacyParams(1.0, 1e-4), 1000, seed=5
        )
        text = report.to_text()
        assert "clopper-pearson" in text
        assert "trials=1000" in text
        assert text.endswith("PASS") or text.endswith("FAIL")
        assert len(report.events) == 2

    def test_trials_recorded(self):
        report = dp_audit(
            lambda s: 0.0, lambda s: 0.0, None, PrivacyParams(1.0, 1e-4), 500, seed=6
        )
        assert report.trials == 500
        assert report.confidence == 0.99
