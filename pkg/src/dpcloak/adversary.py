"""Attacks against the side channels and audit fixtures for every mechanism.

Two attacks, mirroring what an insider observing network traffic or
allocations could do:

* message-length: Sybil filler clients pin the group set; the target
  client either joins an existing group or opens a new one. Without
  padding the serialized leaf message has two deterministic, distinct
  lengths, so one observation identifies the input.
* allocation: filler keys park a map's load one below its capacity; the
  target key is either novel (deterministic schedule: resize fires) or
  a duplicate (it does not).

Both attacks train a single-threshold classifier on half of the
observed traces and report its distinguishing advantage |TPR - FPR| on
the other half. For an (epsilon, delta)-DP observable no classifier
can beat (e^eps - 1)/(e^eps + 1) + delta.

The audit fixtures build worst-case neighbor pairs for each mechanism
and hand them to :func:`dpcloak.audit.dp_audit`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

from .aggregator import Contribution, PipelineConfig, run_pipeline
from .audit import AuditReport, ExactEventFamily, dp_audit
from .dp_map import histogram_from_stream
from .encoding import Column, ColumnKind, ColumnSchema, HistogramTable, pad_serialize
from .noise import (
    PrivacyParams,
    SeededLaplaceNoise,
    TauMode,
    derive_seed,
    positive_laplace,
)
from .sparse_vector import (
    QueryStream,
    _scan,
    crossing_index,
    strict_stop_quantile,
    strict_uds_above_threshold,
    uds_above_threshold,
)
from . import aggregator


@dataclass(frozen=True)
class NeighborPair:
    """Two datasets differing in one client's contribution."""

    d: object
    d_prime: object
    description: str = ""


def distinguisher_bound(epsilon: float, delta: float) -> float:
    """Best possible advantage against an (epsilon, delta)-DP observable."""
    return math.tanh(epsilon / 2.0) + delta


# -- classifier ---------------------------------------------------------------


def best_threshold_advantage(
    obs_d: Sequence[float], obs_dp: Sequence[float]
) -> tuple[float, float]:
    """Train/eval a one-threshold rule; returns (advantage, 99% CI halfwidth).

    First halves train the cut point and polarity, second halves are
    scored. Observations must be 1-D numbers.
    """
    if len(obs_d) < 2 or len(obs_dp) < 2:
        raise ValueError("need at least two observations per dataset")
    half_d, half_dp = len(obs_d) // 2, len(obs_dp) // 2
    train_d, eval_d = list(obs_d[:half_d]), list(obs_d[half_d:])
    train_dp, eval_dp = list(obs_dp[:half_dp]), list(obs_dp[half_dp:])

    values = sorted(set(train_d) | set(train_dp))
    cuts = [values[0] - 1.0]
    cuts += [(a + b) / 2.0 for a, b in zip(values, values[1:])]
    cuts.append(values[-1] + 1.0)

    def frac_below(data: list[float], cut: float) -> float:
        return sum(1 for x in data if x <= cut) / len(data)

    best_cut, best_sign, best_gap = cuts[0], 1.0, -1.0
    for cut in cuts:
        gap = frac_below(train_d, cut) - frac_below(train_dp, cut)
        if abs(gap) > best_gap:
            best_cut, best_sign, best_gap = cut, math.copysign(1.0, gap or 1.0), abs(gap)

    # "Predict D" when being at-or-below the cut is the D-ish side.
    tpr = frac_below(eval_d, best_cut) if best_sign > 0 else 1.0 - frac_below(eval_d, best_cut)
    fpr = frac_below(eval_dp, best_cut) if best_sign > 0 else 1.0 - frac_below(eval_dp, best_cut)
    advantage = abs(tpr - fpr)
    halfwidth = 2.576 * math.sqrt(
        tpr * (1.0 - tpr) / max(len(eval_d), 1) + fpr * (1.0 - fpr) / max(len(eval_dp), 1)
    )
    return advantage, halfwidth


# -- fixtures -----------------------------------------------------------------

ATTACK_SCHEMA = ColumnSchema(
    (
        Column("app", ColumnKind.GROUP_STRING, 15),
        Column("os", ColumnKind.GROUP_STRING, 10),
        Column("usage", ColumnKind.SUM_INT64),
    )
)

_FILLER_APPS = ("Reddit", "Instagram", "X", "TikTok", "Youtube")


def sybil_contribution_pair() -> NeighborPair:
    """Length-attack fixture: the target's row either lands in the Sybil
    group (Reddit, android) or opens the fresh group (Reddit, ios)."""
    fillers = [
        Contribution(f"sybil-{i}", (((app, "android"), (1,)),))
        for i, app in enumerate(_FILLER_APPS)
    ]
    target_d = Contribution("target", ((("Reddit", "android"), (1,)),))
    target_dp = Contribution("target", ((("Reddit", "ios"), (1,)),))
    return NeighborPair(
        fillers + [target_d],
        fillers + [target_dp],
        "sybil groups fixed; target joins an existing group vs a new one",
    )


def sybil_allocation_pair(capacity: int = 64) -> NeighborPair:
    """Allocation-attack fixture: filler keys park the load at
    capacity - 1; the target key is novel in D, a duplicate in D'."""
    fillers = [f"filler-{i}" for i in range(capacity - 1)]
    return NeighborPair(
        fillers + ["target-novel"],
        fillers + [fillers[0]],
        f"load parked at {capacity - 1} of {capacity}; novel vs duplicate key",
    )


def _attack_config(mitigated: bool, epsilon: float, delta: float, seed: int) -> PipelineConfig:
    return PipelineConfig(
        schema=ATTACK_SCHEMA,
        max_groups=1,
        value_bounds={"usage": (0.0, 10.0)},
        epsilon_pad=epsilon,
        epsilon_resize=1.0,
        epsilon_release=1.0,
        delta=delta,
        num_leaves=1,
        seed=seed,
        pad_messages=mitigated,
    )


# -- attacks ------------------------------------------------------------------


def message_length_attack(
    pair: NeighborPair,
    mitigated: bool,
    trials: int,
    epsilon: float = 1.0,
    delta: float = 1e-4,
    seed: int = 0,
) -> tuple[float, float]:
    """Observe total leaf-to-root bytes per pipeline run; returns
    (advantage, 99% CI halfwidth)."""

    def lengths(dataset, tag: str) -> list[float]:
        out = []
        for t in range(trials):
            config = _attack_config(mitigated, epsilon, delta, derive_seed(seed, tag, t))
            result = run_pipeline(dataset, config)
            out.append(float(sum(m.n_bytes for m in result.trace.message_lengths())))
        return out

    return best_threshold_advantage(lengths(pair.d, "d"), lengths(pair.d_prime, "dp"))


def allocation_attack(
    pair: NeighborPair,
    mitigated: bool,
    trials: int,
    epsilon: float = 1.0,
    delta: float = 1e-4,
    seed: int = 0,
    capacity: int = 64,
) -> tuple[float, float]:
    """Observe when (if ever) the map's first resize happens; returns
    (advantage, 99% CI halfwidth)."""
    params = PrivacyParams(epsilon, delta) if mitigated else None

    def first_resize(stream, tag: str) -> list[float]:
        out = []
        for t in range(trials):
            noise = SeededLaplaceNoise(derive_seed(seed, tag, t)) if mitigated else None
            _, bits = histogram_from_stream(
                stream, mitigated, params, noise, initial_capacity=capacity
            )
            idx = bits.index(True) if True in bits else len(bits) + 1
            out.append(float(idx))
        return out

    return best_threshold_advantage(
        first_resize(pair.d, "d"), first_resize(pair.d_prime, "dp")
    )


# -- audit fixtures -----------------------------------------------------------

_PURE_DELTA = 1e-12  # stands in for delta=0 on pure-epsilon mechanisms


def _merge(label_a: str, a: AuditReport, label_b: str, b: AuditReport) -> AuditReport:
    merged = AuditReport(a.epsilon, a.delta, a.trials, a.confidence)
    for label, report in ((label_a, a), (label_b, b)):
        for check in report.events:
            merged.events.append(replace(check, label=f"{label}:{check.label}"))
    merged.eps_hat_point = max(a.eps_hat_point, b.eps_hat_point)
    merged.eps_hat_certified = max(a.eps_hat_certified, b.eps_hat_certified)
    return merged


def audit_positive_laplace(
    epsilon: float, delta: float, trials: int, seed: int = 0
) -> AuditReport:
    """Positive Laplace on v=0 vs v=1 at sensitivity 1, threshold events."""
    params = PrivacyParams(epsilon, delta, 1.0)

    def sampler(v: float) -> Callable[[int], float]:
        return lambda s: positive_laplace(v, params, TauMode.BESPOKE, SeededLaplaceNoise(s))

    return dp_audit(sampler(0.0), sampler(1.0), None, params, trials, seed)


def _svt_uds_sampler(
    values: Sequence[float], epsilon: float, sabotage: bool
) -> Callable[[int], int]:
    """Outcome is k for the pattern below^{k-1} above, 0 for no crossing.

    ``sabotage`` plants the broken variant with noise scale 1/epsilon on
    both the threshold and the queries (the planted violation the audit
    must catch).
    """

    def sample(s: int) -> int:
        noise = SeededLaplaceNoise(s)
        if sabotage:
            broken = 1.0 / epsilon
            noisy_threshold = noise.draw(broken)
            answers = _scan(values, noisy_threshold, broken, noise)
        else:
            answers = uds_above_threshold(
                QueryStream(values, uds=True), 0.0, epsilon, noise
            )
        index = crossing_index(answers)
        return 0 if index is None else index + 1

    return sample


def uds_neighbor_streams() -> tuple[NeighborPair, NeighborPair]:
    """Worst-case UDS pairs around threshold T=0, eight queries each.

    Suffix pair: every query moves up by 1 on D'. Window pair: only the
    first three move, so the shift engages the threshold variable and
    the crossing query separately; this is the sharpest family for
    catching an under-noised variant.
    """
    base = [0.0] * 8
    suffix = NeighborPair(base, [v + 1.0 for v in base], "shift +1 everywhere")
    window = NeighborPair(
        base, [v + 1.0 if i < 3 else v for i, v in enumerate(base)], "shift +1 on [0,3)"
    )
    return suffix, window


def audit_uds(
    epsilon: float, trials: int, seed: int = 0, sabotage: bool = False
) -> AuditReport:
    """Audit UDSAboveThreshold (pure epsilon-DP, so no delta slack)."""
    params = PrivacyParams(epsilon, _PURE_DELTA)
    events = ExactEventFamily(list(range(1, 9)), [f"below^{k-1} above" for k in range(1, 9)])
    suffix, window = uds_neighbor_streams()
    reports = []
    for tag, pair in (("suffix", suffix), ("window", window)):
        reports.append(
            dp_audit(
                _svt_uds_sampler(pair.d, epsilon, sabotage),
                _svt_uds_sampler(pair.d_prime, epsilon, sabotage),
                events,
                params,
                trials,
                derive_seed(seed, tag),
            )
        )
    return _merge("suffix", reports[0], "window", reports[1])


def audit_strict_uds(
    epsilon: float, delta: float, trials: int, seed: int = 0
) -> AuditReport:
    """Strict variant on the same worst-case shapes, pushed 2q below T so
    the noisy condition (not the hard stop) is what gets exercised."""
    params = PrivacyParams(epsilon, delta)
    shift = 2.0 * strict_stop_quantile(params)

    def sampler(values: Sequence[float]) -> Callable[[int], int]:
        shifted = [v - shift for v in values]

        def sample(s: int) -> int:
            answers = strict_uds_above_threshold(
                QueryStream(shifted, uds=True), 0.0, params, SeededLaplaceNoise(s)
            )
            index = crossing_index(answers)
            return 0 if index is None else index + 1

        return sample

    events = ExactEventFamily(list(range(1, 9)), [f"below^{k-1} above" for k in range(1, 9)])
    suffix, window = uds_neighbor_streams()
    reports = []
    for tag, pair in (("suffix", suffix), ("window", window)):
        reports.append(
            dp_audit(
                sampler(pair.d), sampler(pair.d_prime), events, params, trials,
                derive_seed(seed, tag),
            )
        )
    return _merge("suffix", reports[0], "window", reports[1])


def audit_dp_map(
    epsilon: float, delta: float, trials: int, seed: int = 0, capacity: int = 64
) -> AuditReport:
    """First-resize-index distribution on the parked-load neighbor pair."""
    params = PrivacyParams(epsilon, delta)
    pair = sybil_allocation_pair(capacity)

    def sampler(stream) -> Callable[[int], int]:
        def sample(s: int) -> int:
            _, bits = histogram_from_stream(
                stream, True, params, SeededLaplaceNoise(s), initial_capacity=capacity
            )
            return bits.index(True) if True in bits else -1

        return sample

    n = len(pair.d)
    events = ExactEventFamily(
        [-1] + list(range(n)), ["no resize"] + [f"first resize at {i}" for i in range(n)]
    )
    return dp_audit(sampler(pair.d), sampler(pair.d_prime), events, params, trials, seed)


def _padding_tables() -> tuple[HistogramTable, HistogramTable]:
    schema = ColumnSchema(
        (Column("key", ColumnKind.GROUP_STRING, 3), Column("total", ColumnKind.SUM_INT64))
    )
    return (
        HistogramTable(schema, (("a", 1),)),
        HistogramTable(schema, (("a", 1), ("b", 2))),
    )


def audit_padding(
    epsilon: float, delta: float, trials: int, seed: int = 0
) -> AuditReport:
    """Padded total length of tables differing by one contributor's row."""
    params = PrivacyParams(epsilon, delta)
    table_d, table_dp = _padding_tables()

    def sampler(table: HistogramTable) -> Callable[[int], float]:
        return lambda s: float(
            len(pad_serialize(table, params, 1, TauMode.BESPOKE, SeededLaplaceNoise(s)))
        )

    return dp_audit(sampler(table_d), sampler(table_dp), None, params, trials, seed)


def audit_release(
    epsilon: float, delta: float, trials: int, seed: int = 0
) -> AuditReport:
    """Released per-cell sums on a 2-group fixture where one client moves
    a value of 4 (bounds [0, 5]) from group a to group b."""
    schema = ColumnSchema(
        (Column("key", ColumnKind.GROUP_STRING, 3), Column("total", ColumnKind.SUM_INT64))
    )
    config = PipelineConfig(
        schema=schema,
        max_groups=1,
        value_bounds={"total": (0.0, 5.0)},
        epsilon_pad=1.0,
        epsilon_resize=1.0,
        epsilon_release=epsilon,
        delta=delta,
    )
    table_d = HistogramTable(schema, (("a", 4), ("b", 0)))
    table_dp = HistogramTable(schema, (("a", 0), ("b", 4)))
    params = PrivacyParams(epsilon, _PURE_DELTA)

    def cell(table: HistogramTable, row: int) -> Callable[[int], float]:
        def sample(s: int) -> float:
            released = aggregator.release(table, config, SeededLaplaceNoise(s))
            return float(released.rows[row][1])

        return sample

    report_a = dp_audit(cell(table_d, 0), cell(table_dp, 0), None, params, trials,
                        derive_seed(seed, "a"))
    report_b = dp_audit(cell(table_d, 1), cell(table_dp, 1), None, params, trials,
                        derive_seed(seed, "b"))
    return _merge("cell-a", report_a, "cell-b", report_b)
