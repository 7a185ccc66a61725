"""End-to-end DP GROUP BY SUM pipeline over a simulated leaf/root topology.

Contributions are bounded (at most ``max_groups`` groups per client,
values inside per-column bounds), partitioned round-robin by client so
one client's data lives on exactly one leaf, accumulated into per-leaf
partial histograms backed by privately-resizing maps, shipped to the
root as DP-padded payloads, merged, and released with Laplace noise on
every sum cell. The full side-channel transcript (message lengths and
resize events) is returned alongside the released table so the
adversary harness can attack it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .dp_map import DpMap
from .encoding import (
    Column,
    ColumnKind,
    ColumnSchema,
    HistogramTable,
    PaddedPayload,
    check_cell,
    deserialize_histogram,
    pad_serialize,
    serialize_histogram,
)
from .noise import (
    NoiseSource,
    PrivacyParams,
    SeededLaplaceNoise,
    TauMode,
    ZeroNoise,
    derive_seed,
)
from .trace import MessageLength, ObservationTrace, ResizeEvent

INT64_MIN = -(1 << 63)
INT64_MAX = (1 << 63) - 1


class ContributionBoundViolation(ValueError):
    """A contribution touches more groups than the configured bound."""


class ValueOutOfBounds(ValueError):
    """A sum value falls outside its column's configured bounds.

    Rejected rather than clamped: silent clamping would hide client
    bugs behind the privacy machinery.
    """


@dataclass(frozen=True)
class Contribution:
    """One client's rows: (group-key tuple, per-sum-column values)."""

    client_id: str
    rows: tuple[tuple[tuple, tuple], ...]

    def __post_init__(self) -> None:
        keys = [key for key, _ in self.rows]
        if len(set(keys)) != len(keys):
            raise ContributionBoundViolation(
                f"client {self.client_id!r}: duplicate group keys within one contribution"
            )


def value_sensitivity(bounds: tuple[float, float]) -> float:
    """Worst single-group change one client can cause to a sum.

    Covers both an in-place change (hi - lo) and moving a value into or
    out of the group (|lo| or |hi|).
    """
    lo, hi = bounds
    return max(abs(lo), abs(hi), hi - lo)


@dataclass(frozen=True)
class PipelineConfig:
    """Schema, contribution bounds, per-stage budgets, and topology.

    The total budget is split across three mechanism families: padding
    of leaf messages (epsilon_pad), the private resize schedule of leaf
    maps (epsilon_resize), and the released sums (epsilon_release). The
    recommended default split of a total budget is 25/25/50. ``delta``
    is spent by padding and by resizing; the release is pure epsilon-DP.
    """

    schema: ColumnSchema
    max_groups: int
    value_bounds: dict[str, tuple[float, float]]
    epsilon_pad: float
    epsilon_resize: float
    epsilon_release: float
    delta: float
    num_leaves: int = 1
    tau_mode: TauMode = TauMode.BESPOKE
    seed: int = 0
    initial_capacity: int = 4
    pad_messages: bool = True
    zero_noise: bool = False  # noiseless mode for correctness oracles

    def __post_init__(self) -> None:
        if self.max_groups < 1:
            raise ValueError(f"max_groups must be >= 1, got {self.max_groups}")
        if self.num_leaves < 1:
            raise ValueError(f"num_leaves must be >= 1, got {self.num_leaves}")
        for budget in (self.epsilon_pad, self.epsilon_resize, self.epsilon_release):
            if not budget > 0:
                raise ValueError(f"stage budgets must be positive, got {budget}")
        for column in self.schema.columns:
            if column.kind.is_sum:
                if column.name not in self.value_bounds:
                    raise ValueError(f"no value bounds for sum column {column.name!r}")
                lo, hi = self.value_bounds[column.name]
                if not lo < hi:
                    raise ValueError(f"bounds for {column.name!r} must satisfy lo < hi")


@dataclass(frozen=True)
class BudgetReport:
    """Per-stage budgets actually spent, combined by simple composition
    (epsilons and deltas summed across every mechanism invocation)."""

    epsilon_padding: float
    epsilon_resize: float
    epsilon_release: float
    delta_padding: float
    delta_resize: float

    @property
    def epsilon_total(self) -> float:
        return self.epsilon_padding + self.epsilon_resize + self.epsilon_release

    @property
    def delta_total(self) -> float:
        return self.delta_padding + self.delta_resize

    def summary(self) -> str:
        return (
            f"budget consumed: epsilon={self.epsilon_total:g} "
            f"(padding={self.epsilon_padding:g}, resize={self.epsilon_resize:g}, "
            f"release={self.epsilon_release:g}), delta={self.delta_total:g}"
        )


class LeafState:
    """One leaf worker's accumulation state."""

    def __init__(self, leaf_id: int, config: PipelineConfig, noise: NoiseSource) -> None:
        self.leaf_id = leaf_id
        self.config = config
        self.noise = noise
        self.map = DpMap(
            PrivacyParams(config.epsilon_resize, config.delta),
            noise,
            initial_capacity=config.initial_capacity,
            contribution_multiplier=config.max_groups,
        )

    def table(self) -> HistogramTable:
        rows = []
        for key, sums in self.map.dump():
            row, g, s = [], iter(key), iter(sums)
            for column in self.config.schema.columns:
                row.append(next(g) if column.kind.is_group else next(s))
            rows.append(tuple(row))
        return HistogramTable(self.config.schema, tuple(rows))


def _zero(column: Column):
    return 0 if column.kind is ColumnKind.SUM_INT64 else 0.0


def accumulate(state: LeafState, contribution: Contribution) -> LeafState:
    """Fold one contribution into the leaf's per-group running sums.

    Validates everything before touching the map so a rejected
    contribution leaves no partial state behind.
    """
    config = state.config
    schema = config.schema
    if len(contribution.rows) > config.max_groups:
        raise ContributionBoundViolation(
            f"client {contribution.client_id!r} touches {len(contribution.rows)} groups, "
            f"bound is {config.max_groups}"
        )
    group_columns = [schema.columns[i] for i in schema.group_indices]
    sum_columns = [schema.columns[i] for i in schema.sum_indices]
    for key, values in contribution.rows:
        if len(key) != len(group_columns) or len(values) != len(sum_columns):
            raise ContributionBoundViolation(
                f"client {contribution.client_id!r}: row shape does not match schema"
            )
        for column, cell in zip(group_columns, key):
            check_cell(column, cell)
        for column, cell in zip(sum_columns, values):
            check_cell(column, cell)
            lo, hi = config.value_bounds[column.name]
            if not lo <= cell <= hi:
                raise ValueOutOfBounds(
                    f"client {contribution.client_id!r}, column {column.name!r}: "
                    f"{cell} outside [{lo}, {hi}]"
                )
    for key, values in contribution.rows:
        current = state.map.read(key) if state.map.present(key) else tuple(
            _zero(c) for c in sum_columns
        )
        state.map.private_write(key, tuple(a + b for a, b in zip(current, values)))
    return state


def leaf_serialize(state: LeafState) -> PaddedPayload | bytes:
    """Serialize the leaf's partial histogram, padded unless disabled."""
    table = state.table()
    if not state.config.pad_messages:
        return serialize_histogram(table)
    params = PrivacyParams(state.config.epsilon_pad, state.config.delta)
    return pad_serialize(
        table, params, state.config.max_groups, state.config.tau_mode, state.noise
    )


def root_merge(schema: ColumnSchema, payloads) -> HistogramTable:
    """Decode every leaf payload and add sums per group across leaves."""
    merged: dict[tuple, list] = {}
    for payload in payloads:
        table = deserialize_histogram(schema, payload)
        for row in table.rows:
            key = schema.group_key(row)
            sums = [row[i] for i in schema.sum_indices]
            if key in merged:
                merged[key] = [a + b for a, b in zip(merged[key], sums)]
            else:
                merged[key] = sums
    rows = []
    for key, sums in merged.items():
        row, g, s = [], iter(key), iter(sums)
        for column in schema.columns:
            row.append(next(g) if column.kind.is_group else next(s))
        rows.append(tuple(row))
    return HistogramTable(schema, tuple(rows))


def release(table: HistogramTable, config: PipelineConfig, noise: NoiseSource) -> HistogramTable:
    """Add Laplace noise to every sum cell; group keys pass through.

    Per-column scale is max_groups * value_sensitivity / epsilon_release.
    Integer sum columns are rounded back to int64 (monotone
    post-processing) so the released table still conforms to its schema.
    """
    schema = config.schema
    scales = {}
    for i in schema.sum_indices:
        column = schema.columns[i]
        scales[i] = (
            config.max_groups * value_sensitivity(config.value_bounds[column.name])
            / config.epsilon_release
        )
    rows = []
    for row in table.rows:
        cells = list(row)
        for i in schema.sum_indices:
            noisy = cells[i] + noise.draw(scales[i])
            if schema.columns[i].kind is ColumnKind.SUM_INT64:
                noisy = min(INT64_MAX, max(INT64_MIN, round(noisy)))
            cells[i] = noisy
        rows.append(tuple(cells))
    return HistogramTable(schema, tuple(rows))


@dataclass
class PipelineResult:
    table: HistogramTable
    trace: ObservationTrace
    budget: BudgetReport


def _partition(contributions, num_leaves: int) -> list[list[Contribution]]:
    """Round-robin by client id in order of first appearance, so all of
    one client's contributions land on a single leaf."""
    leaf_of: dict[str, int] = {}
    parts: list[list[Contribution]] = [[] for _ in range(num_leaves)]
    for contribution in contributions:
        if contribution.client_id not in leaf_of:
            leaf_of[contribution.client_id] = len(leaf_of) % num_leaves
        parts[leaf_of[contribution.client_id]].append(contribution)
    return parts


def run_pipeline(contributions, config: PipelineConfig) -> PipelineResult:
    """Scatter, accumulate, pad, gather, merge, release.

    Deterministic under a fixed config.seed: each leaf and the root
    derive independent noise streams from it. The returned trace holds
    every resize event and every leaf-to-root message length.
    """
    def noise_for(*tag: object) -> NoiseSource:
        if config.zero_noise:
            return ZeroNoise()
        return SeededLaplaceNoise(derive_seed(config.seed, *tag))

    trace = ObservationTrace()
    payloads = []
    for leaf_id, part in enumerate(_partition(contributions, config.num_leaves)):
        state = LeafState(leaf_id, config, noise_for("leaf", leaf_id))
        for contribution in part:
            accumulate(state, contribution)
        payload = leaf_serialize(state)
        for record in state.map.resize_log:
            trace.record(
                ResizeEvent(leaf_id, record.write_index, record.old_capacity,
                            record.new_capacity)
            )
        trace.record(MessageLength(leaf_id, len(payload)))
        payloads.append(payload)
    merged = root_merge(config.schema, payloads)
    released = release(merged, config, noise_for("release"))
    leaves = config.num_leaves
    budget = BudgetReport(
        epsilon_padding=leaves * config.epsilon_pad if config.pad_messages else math.inf,
        epsilon_resize=leaves * config.epsilon_resize,
        epsilon_release=config.epsilon_release,
        delta_padding=leaves * config.delta if config.pad_messages else 0.0,
        delta_resize=leaves * config.delta,
    )
    return PipelineResult(released, trace, budget)
