"""Differentially private mitigations for side channels in distributed
aggregation: DP-padded serialization, UDS-tuned AboveThreshold variants,
a privately resizing associative map, a GROUP BY SUM pipeline wired for
side-channel observation, and an adversary harness that attacks and
audits all of it."""

from .aggregator import (
    BudgetReport,
    Contribution,
    ContributionBoundViolation,
    PipelineConfig,
    PipelineResult,
    ValueOutOfBounds,
    accumulate,
    leaf_serialize,
    release,
    root_merge,
    run_pipeline,
)
from .audit import (
    AuditReport,
    ExactEventFamily,
    InsufficientTrials,
    PredicateEventFamily,
    ThresholdEventFamily,
    clopper_pearson,
    dp_audit,
    min_decidable_trials,
)
from .adversary import (
    NeighborPair,
    allocation_attack,
    best_threshold_advantage,
    distinguisher_bound,
    message_length_attack,
    sybil_allocation_pair,
    sybil_contribution_pair,
)
from .dp_map import DpMap, KeyAbsent, ResizeRecord, histogram_from_stream
from .encoding import (
    Column,
    ColumnKind,
    ColumnSchema,
    HistogramTable,
    MalformedPayload,
    MalformedVarint,
    PaddedPayload,
    SchemaViolation,
    calculate_serialize_sensitivity,
    deserialize_histogram,
    pad_serialize,
    serialize_histogram,
    varint_decode,
    varint_encode,
)
from .noise import (
    NoiseSource,
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
from .sparse_vector import (
    ABOVE,
    BELOW,
    QueryStream,
    above_threshold_textbook,
    crossing_index,
    strict_uds_above_threshold,
    uds_above_threshold,
)
from .trace import MessageLength, ObservationTrace, ResizeEvent

__version__ = "0.1.0"
