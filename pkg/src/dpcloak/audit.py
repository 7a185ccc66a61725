"""Monte-Carlo (epsilon, delta) auditing of paired samplers.

The auditor runs two samplers on independent per-trial seeds, counts
how often each event in a finite family occurs under each sampler, and
checks the DP inequality p1 <= e^eps * p2 + delta in both directions
using Clopper-Pearson interval endpoints at 99% confidence. A FAIL is
one-sided sound: it means the lower confidence bound on one probability
exceeds the budgeted upper bound built from the other, so the evidence
contradicts the claimed guarantee at the stated confidence. A PASS
never proves privacy; it reports the absence of a certified violation
plus the worst empirical epsilon observed.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import beta

from .noise import PrivacyParams, derive_seed

CONFIDENCE = 0.99
_ALPHA = 1.0 - CONFIDENCE


class InsufficientTrials(ValueError):
    """Too few trials to certify even a maximal violation."""

    def __init__(self, trials: int, suggested: int) -> None:
        super().__init__(
            f"{trials} trials cannot certify a violation at this budget; "
            f"use at least {suggested}"
        )
        self.trials = trials
        self.suggested = suggested


def clopper_pearson(successes: int, trials: int, confidence: float = CONFIDENCE) -> tuple[float, float]:
    """Two-sided exact binomial confidence interval."""
    if not 0 <= successes <= trials:
        raise ValueError(f"need 0 <= successes <= trials, got {successes}/{trials}")
    tail = (1.0 - confidence) / 2.0
    lower = 0.0 if successes == 0 else float(beta.ppf(tail, successes, trials - successes + 1))
    upper = 1.0 if successes == trials else float(beta.ppf(1.0 - tail, successes + 1, trials - successes))
    return lower, upper


def min_decidable_trials(epsilon: float, delta: float, confidence: float = CONFIDENCE) -> int:
    """Smallest trial count at which a maximal violation (p1=1, p2=0)
    would be certified, i.e. at which the audit has any power at all."""
    tail = (1.0 - confidence) / 2.0
    needed = (math.exp(epsilon) + delta) / (1.0 + math.exp(epsilon))
    if needed >= 1.0:
        raise ValueError("budget admits no violation: e^eps + delta covers everything")
    return math.ceil(math.log(tail) / math.log(needed))


# -- event families ----------------------------------------------------------


class ExactEventFamily:
    """Events of the form "outcome == value" over a discrete space."""

    def __init__(self, values: Sequence, labels: Sequence[str] | None = None) -> None:
        self.values = list(values)
        self.labels = list(labels) if labels is not None else [repr(v) for v in values]

    def counts(self, outcomes: Sequence) -> list[int]:
        tally = Counter(outcomes)
        return [tally.get(v, 0) for v in self.values]


class ThresholdEventFamily:
    """Events "outcome <= t" and "outcome > t" over numeric outcomes."""

    def __init__(self, cuts: Sequence[float]) -> None:
        self.cuts = sorted(set(float(c) for c in cuts))
        self.labels = [f"x<={c:g}" for c in self.cuts] + [f"x>{c:g}" for c in self.cuts]

    @classmethod
    def from_samples(cls, samples: Sequence[float], n_cuts: int = 64) -> "ThresholdEventFamily":
        """Quantile-spaced cut points over pooled samples."""
        qs = np.linspace(0.0, 1.0, n_cuts + 2)[1:-1]
        return cls(np.quantile(np.asarray(samples, dtype=float), qs))

    def counts(self, outcomes: Sequence[float]) -> list[int]:
        data = np.sort(np.asarray(outcomes, dtype=float))
        below = np.searchsorted(data, np.asarray(self.cuts), side="right")
        return [int(b) for b in below] + [int(len(data) - b) for b in below]


class PredicateEventFamily:
    """Arbitrary labeled predicates (slowest; for odd outcome spaces)."""

    def __init__(self, events: Sequence[tuple[str, Callable[[object], bool]]]) -> None:
        self.labels = [label for label, _ in events]
        self._predicates = [pred for _, pred in events]

    def counts(self, outcomes: Sequence) -> list[int]:
        return [sum(1 for o in outcomes if pred(o)) for pred in self._predicates]


# -- report ------------------------------------------------------------------


@dataclass(frozen=True)
class EventCheck:
    label: str
    p_d: float
    p_dp: float
    ci_d: tuple[float, float]
    ci_dp: tuple[float, float]
    violated: bool

    def record(self) -> str:
        flag = "VIOLATION" if self.violated else "ok"
        return (
            f"event={self.label} p_d={self.p_d:.6g} p_dp={self.p_dp:.6g} "
            f"ci_d=[{self.ci_d[0]:.6g},{self.ci_d[1]:.6g}] "
            f"ci_dp=[{self.ci_dp[0]:.6g},{self.ci_dp[1]:.6g}] {flag}"
        )


@dataclass
class AuditReport:
    epsilon: float
    delta: float
    trials: int
    confidence: float
    events: list[EventCheck] = field(default_factory=list)
    eps_hat_point: float = 0.0
    eps_hat_certified: float = 0.0

    @property
    def passed(self) -> bool:
        return not any(e.violated for e in self.events)

    def to_text(self) -> str:
        lines = [
            f"dp-audit trials={self.trials} epsilon={self.epsilon:g} delta={self.delta:g} "
            f"ci=clopper-pearson confidence={self.confidence:g}",
        ]
        lines += [e.record() for e in self.events]
        lines.append(
            f"worst empirical epsilon: point={_fmt_eps(self.eps_hat_point)} "
            f"certified={_fmt_eps(self.eps_hat_certified)}"
        )
        lines.append("result: " + ("PASS" if self.passed else "FAIL"))
        return "\n".join(lines)


def _fmt_eps(value: float) -> str:
    return "inf" if math.isinf(value) else f"{value:.4f}"


def _eps_estimate(p1: float, p2: float, delta: float) -> float:
    """ln((p1 - delta) / p2), the epsilon this event pair demonstrates."""
    excess = p1 - delta
    if excess <= 0:
        return 0.0
    if p2 <= 0:
        return math.inf
    return max(0.0, math.log(excess / p2))


# -- auditor -----------------------------------------------------------------


def dp_audit(
    sampler_d: Callable[[int], object],
    sampler_dp: Callable[[int], object],
    event_family,
    params: PrivacyParams,
    trials: int,
    seed: int = 0,
    n_cuts: int = 64,
) -> AuditReport:
    """Audit a pair of samplers against an (epsilon, delta) budget.

    Samplers map a derived integer seed to one outcome; each trial owns
    an independent seed so trials can be distributed freely. The event
    family must expose ``labels`` and ``counts(outcomes)``; pass None
    for numeric outcomes to get ``n_cuts`` quantile-spaced threshold
    events over the pooled samples.
    """
    suggested = min_decidable_trials(params.epsilon, params.delta)
    if trials < suggested:
        raise InsufficientTrials(trials, suggested)

    outcomes_d = [sampler_d(derive_seed(seed, "d", t)) for t in range(trials)]
    outcomes_dp = [sampler_dp(derive_seed(seed, "dp", t)) for t in range(trials)]
    if event_family is None:
        event_family = ThresholdEventFamily.from_samples(
            list(outcomes_d) + list(outcomes_dp), n_cuts
        )
    counts_d = event_family.counts(outcomes_d)
    counts_dp = event_family.counts(outcomes_dp)

    e_eps = math.exp(params.epsilon)
    report = AuditReport(params.epsilon, params.delta, trials, CONFIDENCE)
    for label, k_d, k_dp in zip(event_family.labels, counts_d, counts_dp):
        ci_d = clopper_pearson(k_d, trials)
        ci_dp = clopper_pearson(k_dp, trials)
        violated = (
            ci_d[0] > e_eps * ci_dp[1] + params.delta
            or ci_dp[0] > e_eps * ci_d[1] + params.delta
        )
        p_d, p_dp = k_d / trials, k_dp / trials
        report.events.append(EventCheck(label, p_d, p_dp, ci_d, ci_dp, violated))
        report.eps_hat_point = max(
            report.eps_hat_point,
            _eps_estimate(p_d, p_dp, params.delta),
            _eps_estimate(p_dp, p_d, params.delta),
        )
        report.eps_hat_certified = max(
            report.eps_hat_certified,
            _eps_estimate(ci_d[0], ci_dp[1], params.delta),
            _eps_estimate(ci_dp[0], ci_d[1], params.delta),
        )
    return report
