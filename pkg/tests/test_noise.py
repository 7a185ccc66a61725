"""Noise primitives: quantiles, tau calibrations, positive Laplace."""

import math
import random

import numpy as np
import pytest

from dpcloak.audit import dp_audit
from dpcloak.noise import (
    PrivacyParams,
    RecordingNoise,
    ScriptedNoise,
    SeededLaplaceNoise,
    TauMode,
    ZeroNoise,
    compute_tau,
    derive_seed,
    laplace_quantile_abs,
    positive_laplace,
)


class TestPrivacyParams:
    def test_valid(self):
        p = PrivacyParams(1.0, 1e-4, 2.0)
        assert p.scale == 2.0

    @pytest.mark.parametrize(
        "eps,delta,sens",
        [
            (0.0, 1e-4, 1.0),
            (-1.0, 1e-4, 1.0),
            (1.0, 0.0, 1.0),
            (1.0, 0.5, 1.0),   # quantile formula domain ends below 1/2
            (1.0, 0.9, 1.0),
            (1.0, 1e-4, 0.0),
            (1.0, 1e-4, -3.0),
            (math.inf, 1e-4, 1.0),
        ],
    )
    def test_rejected(self, eps, delta, sens):
        with pytest.raises(ValueError):
            PrivacyParams(eps, delta, sens)


class TestLaplaceQuantileAbs:
    def test_median_limit(self):
        assert laplace_quantile_abs(0.5 - 1e-12, 1.0) == pytest.approx(0.0, abs=1e-10)

    def test_ln_e_point(self):
        # phi = 1/(2e) makes the quantile exactly one scale unit.
        assert laplace_quantile_abs(1.0 / (2.0 * math.e), 1.0) == pytest.approx(1.0)

    def test_empirical_quantile_oracle(self):
        # Independent oracle: the phi-quantile of 10^7 numpy Laplace draws.
        draws = np.random.default_rng(20240601).laplace(0.0, 2.0, 10**7)
        empirical = -np.quantile(draws, 1e-4)
        assert laplace_quantile_abs(1e-4, 2.0) == pytest.approx(empirical, abs=0.3)

    def test_tail_probability_is_phi(self):
        # Pr[Lap(b) < -q_phi] = phi by construction.
        phi, scale = 0.01, 3.0
        q = laplace_quantile_abs(phi, scale)
        draws = np.random.default_rng(7).laplace(0.0, scale, 10**6)
        assert np.mean(draws < -q) == pytest.approx(phi, abs=4e-4)

    @pytest.mark.parametrize("phi,scale", [(0.0, 1.0), (0.5, 1.0), (0.7, 1.0), (-0.1, 1.0),
                                           (0.1, 0.0), (0.1, -2.0)])
    def test_domain_errors(self, phi, scale):
        with pytest.raises(ValueError):
            laplace_quantile_abs(phi, scale)


class TestComputeTau:
    def test_bespoke_closed_form(self):
        p = PrivacyParams(1.0, 1e-4, 1.0)
        assert compute_tau(p, TauMode.BESPOKE) == pytest.approx(1.0 + math.log(5000.0))

    def test_simple_closed_form(self):
        p = PrivacyParams(1.0, 1e-4, 1.0)
        expected = math.log((1.0 + math.e) / (2.0 * 1e-4))
        assert compute_tau(p, TauMode.SIMPLE) == pytest.approx(expected)

    @pytest.mark.parametrize("eps", [0.5, 1.0, 2.0, 5.0])
    @pytest.mark.parametrize("delta", [1e-6, 1e-4, 1e-2])
    @pytest.mark.parametrize("sens", [1.0, 7.0])
    def test_bespoke_below_simple_when_log_term_dominates(self, eps, delta, sens):
        # Simple - Bespoke = (sens/eps) ln(e^eps + 1) - sens, positive when
        # the log term exceeds sens, in particular for every eps >= 1.
        p = PrivacyParams(eps, delta, sens)
        gap = (sens / eps) * math.log(math.exp(eps) + 1.0) - sens
        if gap > 0:
            assert compute_tau(p, TauMode.BESPOKE) < compute_tau(p, TauMode.SIMPLE)

    def test_default_mode_is_bespoke(self):
        p = PrivacyParams(2.0, 1e-3, 4.0)
        assert compute_tau(p) == compute_tau(p, TauMode.BESPOKE)


class TestPositiveLaplace:
    def test_zero_noise_adds_exactly_tau(self):
        p = PrivacyParams(1.0, 1e-4, 1.0)
        for v in (-100.0, 0.0, 3.7):
            expected = v + compute_tau(p, TauMode.BESPOKE)
            assert positive_laplace(v, p, TauMode.BESPOKE, ZeroNoise()) == expected

    def test_clamps_at_input(self):
        p = PrivacyParams(1.0, 1e-4, 1.0)
        tau = compute_tau(p, TauMode.BESPOKE)
        assert positive_laplace(0.0, p, TauMode.BESPOKE, ScriptedNoise([-2.0 * tau])) == 0.0

    def test_shift_equivariance(self):
        p = PrivacyParams(0.8, 1e-3, 2.0)
        script = [0.31, -5.2, 1.7]
        a = [positive_laplace(1.0, p, TauMode.BESPOKE, ScriptedNoise([e])) for e in script]
        b = [positive_laplace(11.5, p, TauMode.BESPOKE, ScriptedNoise([e])) for e in script]
        for x, y in zip(a, b):
            assert y == pytest.approx(x + 10.5)

    def test_positivity_fuzz(self):
        p = PrivacyParams(1.0, 1e-4, 1.0)
        rng = random.Random(99)
        noise = SeededLaplaceNoise(4)
        for _ in range(20_000):
            v = rng.uniform(-1e6, 1e6)
            assert positive_laplace(v, p, TauMode.BESPOKE, noise) >= v

    @pytest.mark.parametrize("mode", [TauMode.BESPOKE, TauMode.SIMPLE])
    def test_near_input_mass_bounded_by_delta(self, mode):
        # Mass bound near the input: Pr[result <= v + sensitivity] <= delta.
        p = PrivacyParams(1.0, 0.01, 1.0)
        noise = SeededLaplaceNoise(12)
        trials = 200_000
        hits = sum(
            positive_laplace(0.0, p, mode, noise) <= 1.0 for _ in range(trials)
        )
        sigma = math.sqrt(0.01 * 0.99 / trials)
        assert hits / trials <= 0.01 + 3.0 * sigma

    def test_dp_audit_on_length_thresholds(self):
        # v vs v + sensitivity must satisfy the (eps, delta) inequality on
        # a grid of threshold events, both directions.
        p = PrivacyParams(1.0, 1e-3, 1.0)

        def sampler(v):
            return lambda s: positive_laplace(v, p, TauMode.BESPOKE, SeededLaplaceNoise(s))

        report = dp_audit(sampler(0.0), sampler(1.0), None, p, 30_000, seed=17)
        assert report.passed, report.to_text()


class TestNoiseSources:
    def test_seeded_moments(self):
        noise = SeededLaplaceNoise(123)
        scale = 3.0
        draws = np.array([noise.draw(scale) for _ in range(400_000)])
        assert abs(draws.mean()) < 0.02
        assert np.var(draws) == pytest.approx(2.0 * scale**2, rel=0.02)

    def test_seeded_reproducible(self):
        a = SeededLaplaceNoise(5)
        b = SeededLaplaceNoise(5)
        assert [a.draw(1.0) for _ in range(10)] == [b.draw(1.0) for _ in range(10)]

    def test_zero_noise(self):
        z = ZeroNoise()
        assert all(z.draw(s) == 0.0 for s in (0.1, 1.0, 50.0))

    def test_scripted_order_and_exhaustion(self):
        s = ScriptedNoise([1.0, -2.0])
        assert s.draw(1.0) == 1.0
        assert s.draw(1.0) == -2.0
        with pytest.raises(RuntimeError):
            s.draw(1.0)

    def test_scale_must_be_positive(self):
        for src in (SeededLaplaceNoise(0), ZeroNoise(), ScriptedNoise([1.0])):
            with pytest.raises(ValueError):
                src.draw(0.0)

    def test_recording_wrapper(self):
        rec = RecordingNoise(ScriptedNoise([4.0, 5.0]))
        rec.draw(1.0)
        rec.draw(2.0)
        assert rec.calls == [(1.0, 4.0), (2.0, 5.0)]


def test_derive_seed_stable_and_distinct():
    assert derive_seed(1, "leaf", 0) == derive_seed(1, "leaf", 0)
    assert derive_seed(1, "leaf", 0) != derive_seed(1, "leaf", 1)
    assert derive_seed(1, "leaf", 0) != derive_seed(2, "leaf", 0)
