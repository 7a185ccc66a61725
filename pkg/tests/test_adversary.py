"""Attacks and audit fixtures of the adversary harness."""

import pytest

from dpcloak.adversary import (
    NeighborPair,
    allocation_attack,
    audit_dp_map,
    audit_padding,
    audit_positive_laplace,
    audit_release,
    audit_strict_uds,
    audit_uds,
    best_threshold_advantage,
    distinguisher_bound,
    message_length_attack,
    sybil_allocation_pair,
    sybil_contribution_pair,
    uds_neighbor_streams,
)
from dpcloak.aggregator import run_pipeline
from dpcloak.adversary import _attack_config


class TestThresholdClassifier:
    def test_disjoint_supports_give_full_advantage(self):
        advantage, _ = best_threshold_advantage([0.0] * 40, [5.0] * 40)
        assert advantage == 1.0

    def test_identical_distributions_give_near_zero(self):
        data = [float(i % 7) for i in range(400)]
        advantage, halfwidth = best_threshold_advantage(data, data)
        assert advantage <= halfwidth + 0.05

    def test_polarity_learned_from_training(self):
        # D above D': the rule must still find the gap.
        advantage, _ = best_threshold_advantage([10.0] * 40, [1.0] * 40)
        assert advantage == 1.0


class TestFixtures:
    def test_contribution_pair_differs_by_target_group(self):
        pair = sybil_contribution_pair()
        assert pair.d[:-1] == pair.d_prime[:-1]
        assert pair.d[-1].rows != pair.d_prime[-1].rows

    def test_contribution_pair_satisfies_bounds(self):
        pair = sybil_contribution_pair()
        for dataset in (pair.d, pair.d_prime):
            run_pipeline(dataset, _attack_config(True, 1.0, 1e-4, 0))  # must not raise

    def test_allocation_pair_parks_load_below_capacity(self):
        pair = sybil_allocation_pair(capacity=64)
        assert len(set(pair.d[:-1])) == 63
        assert pair.d[-1] not in pair.d[:-1]
        assert pair.d_prime[-1] in pair.d_prime[:-1]

    def test_uds_streams_are_unidirectional(self):
        for pair in uds_neighbor_streams():
            diffs = [b - a for a, b in zip(pair.d, pair.d_prime)]
            assert all(d >= 0 for d in diffs) or all(d <= 0 for d in diffs)
            assert max(abs(d) for d in diffs) <= 1


class TestMessageLengthAttack:
    def test_unmitigated_is_perfect(self):
        advantage, _ = message_length_attack(
            sybil_contribution_pair(), mitigated=False, trials=200, seed=0
        )
        assert advantage == 1.0

    def test_mitigated_below_dp_bound(self):
        advantage, _ = message_length_attack(
            sybil_contribution_pair(), mitigated=True, trials=600,
            epsilon=1.0, delta=1e-4, seed=0,
        )
        assert advantage <= distinguisher_bound(1.0, 1e-4) + 0.05

    def test_identical_datasets_give_near_zero(self):
        pair = sybil_contribution_pair()
        same = NeighborPair(pair.d, pair.d)
        advantage, halfwidth = message_length_attack(same, True, 300, seed=4)
        assert advantage <= halfwidth + 0.05


class TestAllocationAttack:
    def test_unmitigated_is_perfect(self):
        advantage, _ = allocation_attack(
            sybil_allocation_pair(), mitigated=False, trials=200, seed=0
        )
        assert advantage == 1.0

    def test_mitigated_below_dp_bound(self):
        advantage, _ = allocation_attack(
            sybil_allocation_pair(), mitigated=True, trials=600,
            epsilon=1.0, delta=1e-4, seed=0,
        )
        assert advantage <= distinguisher_bound(1.0, 1e-4) + 0.05

    def test_identical_streams_give_near_zero(self):
        pair = sybil_allocation_pair()
        same = NeighborPair(pair.d, pair.d)
        advantage, halfwidth = allocation_attack(same, True, 300, seed=2)
        assert advantage <= halfwidth + 0.05


class TestAuditFixtures:
    # Smaller trial counts here; full-budget runs live in the acceptance suite.

    def test_positive_laplace_passes(self):
        assert audit_positive_laplace(1.0, 1e-4, 20_000, seed=1).passed

    def test_uds_passes(self):
        assert audit_uds(1.0, 20_000, seed=1).passed

    def test_uds_sabotage_fails(self):
        report = audit_uds(1.0, 20_000, seed=1, sabotage=True)
        assert not report.passed
        assert report.eps_hat_certified > 1.0

    def test_strict_uds_passes(self):
        assert audit_strict_uds(1.0, 1e-4, 20_000, seed=1).passed

    def test_dp_map_passes(self):
        assert audit_dp_map(1.0, 1e-4, 5_000, seed=1).passed

    def test_padding_passes(self):
        assert audit_padding(1.0, 1e-4, 5_000, seed=1).passed

    def test_release_passes(self):
        assert audit_release(1.0, 1e-4, 5_000, seed=1).passed

    def test_distinguisher_bound_value(self):
        assert distinguisher_bound(1.0, 1e-4) == pytest.approx(0.4622, abs=1e-3)
