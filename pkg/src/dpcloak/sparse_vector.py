"""AboveThreshold variants: textbook, UDS-tuned, and strict-stopping.

All three answer a stream of "is f_i >= T?" questions and halt at the
first noisy yes. The UDS variant assumes the query family has
unidirectional sensitivity: switching to a neighboring dataset can only
move every query value in the same direction. That assumption halves
the per-query noise scale (2/eps instead of the textbook 4/eps).

The strict variant additionally guarantees it never answers "below"
once the true value has reached T, by combining a hard comparison
against T with a threshold shifted down two noise quantiles. The shift
buys the hard stop at a delta cost.

Queries arrive as precomputed values; 1-sensitivity and
unidirectionality are caller-asserted contracts (they cannot be checked
from a single stream), carried on :class:`QueryStream` as a flag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

from .noise import NoiseSource, PrivacyParams, laplace_quantile_abs

BELOW = False
ABOVE = True


@dataclass
class QueryStream:
    """A stream of 1-sensitive query values.

    ``uds`` asserts unidirectional sensitivity; the UDS mechanisms
    refuse streams without it.
    """

    values: Iterable[float]
    uds: bool = False


def _scan(
    values: Iterable[float],
    noisy_threshold: float,
    query_scale: float,
    noise: NoiseSource,
    hard_threshold: float | None = None,
) -> list[bool]:
    """Shared loop: one noise draw per query, halt on first crossing.

    The per-query draw happens before the hard comparison so the draw
    sequence consumed from ``noise`` depends only on the halt index,
    never on which condition fired.
    """
    answers: list[bool] = []
    for value in values:
        if not math.isfinite(value):
            raise ValueError(f"query values must be finite, got {value}")
        nu = noise.draw(query_scale)
        hard = hard_threshold is not None and value >= hard_threshold
        if hard or value + nu >= noisy_threshold:
            answers.append(ABOVE)
            return answers
        answers.append(BELOW)
    return answers


def above_threshold_textbook(
    queries: QueryStream,
    threshold: float,
    epsilon: float,
    noise: NoiseSource,
) -> list[bool]:
    """Classic AboveThreshold: threshold noise 2/eps, query noise 4/eps.

    eps-DP for arbitrary 1-sensitive queries. Output is a (possibly
    empty) run of BELOW answers, closed by a single terminal ABOVE if a
    crossing happened before the stream ran out.
    """
    if not (epsilon > 0):
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    noisy_threshold = threshold + noise.draw(2.0 / epsilon)
    return _scan(queries.values, noisy_threshold, 4.0 / epsilon, noise)


def uds_above_threshold(
    queries: QueryStream,
    threshold: float,
    epsilon: float,
    noise: NoiseSource,
) -> list[bool]:
    """AboveThreshold tuned for unidirectional sensitivity.

    Per-query noise drops to 2/eps while retaining eps-DP, because a
    neighbor can no longer push the running maximum of past queries and
    the current query in opposite directions.
    """
    if not (epsilon > 0):
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if not queries.uds:
        raise ValueError("uds_above_threshold requires a stream asserting uds=True")
    noisy_threshold = threshold + noise.draw(2.0 / epsilon)
    return _scan(queries.values, noisy_threshold, 2.0 / epsilon, noise)


def strict_stop_quantile(params: PrivacyParams) -> float:
    """The quantile q by which the strict variant lowers its threshold.

    q is the magnitude of the delta/(2(1+e^eps)) quantile of the 2/eps
    query noise: each of the two Laplace variables in the halting
    condition exceeds q with probability at most half of
    delta/(1+e^eps), so continuing past the true threshold is a
    union-bounded delta/(1+e^eps) event.
    """
    phi = params.delta / (2.0 * (1.0 + math.exp(params.epsilon)))
    return laplace_quantile_abs(phi, 2.0 / params.epsilon)


def strict_uds_above_threshold(
    queries: QueryStream,
    threshold: float,
    params: PrivacyParams,
    noise: NoiseSource,
) -> list[bool]:
    """UDS AboveThreshold that never proceeds once T is truly crossed.

    Halts at the first index where either the raw value has reached the
    threshold (hard condition) or the noisy comparison against
    T + Lap(2/eps) - 2q fires. (eps, delta)-DP for UDS streams.
    """
    if not queries.uds:
        raise ValueError("strict_uds_above_threshold requires a stream asserting uds=True")
    q = strict_stop_quantile(params)
    scale = 2.0 / params.epsilon
    noisy_threshold = threshold + noise.draw(scale) - 2.0 * q
    return _scan(queries.values, noisy_threshold, scale, noise, hard_threshold=threshold)


def crossing_index(answers: list[bool]) -> int | None:
    """Index of the terminal ABOVE answer, or None if none fired."""
    if answers and answers[-1] is ABOVE:
        return len(answers) - 1
    return None
