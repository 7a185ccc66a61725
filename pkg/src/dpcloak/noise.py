"""Laplace noise primitives and the one-sided (positive) Laplace mechanism.

The positive Laplace mechanism releases a value that is never below its
input, which makes it suitable for quantities that can only be added on
top of a true value: padding bytes, artificial delays, capacity head
room. It draws symmetric Laplace noise, shifts it up by an offset tau,
and clamps at the input. Two calibrations of tau are provided:

* ``TauMode.SIMPLE``: tau is the absolute phi-quantile of the noise
  distribution at phi = delta / (1 + e^epsilon).
* ``TauMode.BESPOKE``: tau = sensitivity + |quantile at delta|. This is
  a tighter offset (smaller for every epsilon >= 1) and is the default.

Both give an (epsilon, delta) guarantee for inputs differing by at most
``sensitivity``.
"""

from __future__ import annotations

import enum
import hashlib
import math
import random
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class PrivacyParams:
    """Privacy budget plus the sensitivity of the protected quantity.

    ``sensitivity`` is expressed in the units of whatever is being
    protected: bytes for message padding, distinct keys for map loads.
    ``delta`` must lie in (0, 1/2); values >= 1/2 are rejected because
    the small-tail quantile formula used throughout is only valid below
    the median.
    """

    epsilon: float
    delta: float
    sensitivity: float = 1.0

    def __post_init__(self) -> None:
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ValueError(f"epsilon must be positive and finite, got {self.epsilon}")
        if not (0 < self.delta < 0.5):
            raise ValueError(f"delta must lie in (0, 1/2), got {self.delta}")
        if not (self.sensitivity > 0 and math.isfinite(self.sensitivity)):
            raise ValueError(f"sensitivity must be positive and finite, got {self.sensitivity}")

    @property
    def scale(self) -> float:
        """Laplace scale sensitivity/epsilon used by the mechanism."""
        return self.sensitivity / self.epsilon


class TauMode(enum.Enum):
    """Which calibration of the positive-Laplace offset to use."""

    SIMPLE = "simple"
    BESPOKE = "bespoke"


class NoiseSource(ABC):
    """A stream of Laplace draws.

    Single-owner mutable state: an instance may be handed between
    threads but must not be shared concurrently. Deterministic
    implementations (:class:`ZeroNoise`, :class:`ScriptedNoise`) exist
    so mechanisms can be replayed exactly in tests and audits.
    """

    @abstractmethod
    def draw(self, scale: float) -> float:
        """Return one draw from a zero-mean Laplace with the given scale."""


class SeededLaplaceNoise(NoiseSource):
    """Laplace draws via inverse CDF on a uniform 63-bit integer.

    The uniform is (k + 0.5) / 2**63 for k drawn from a seeded Mersenne
    Twister, so it is strictly inside (0, 1) and symmetric about 1/2.
    Tails are therefore truncated at about 44 scales, an event of
    probability ~2**-63 per draw; every delta used by this library is
    astronomically larger.
    """

    def __init__(self, seed: int) -> None:
        self._rand = random.Random(seed)

    def draw(self, scale: float) -> float:
        if not (scale > 0):
            raise ValueError(f"scale must be positive, got {scale}")
        u = (self._rand.getrandbits(63) + 0.5) * 2.0**-63
        p = u - 0.5
        if p < 0:
            return scale * math.log(1.0 + 2.0 * p)
        return -scale * math.log(1.0 - 2.0 * p)


class ZeroNoise(NoiseSource):
    """Test oracle: every draw is exactly 0."""

    def draw(self, scale: float) -> float:
        if not (scale > 0):
            raise ValueError(f"scale must be positive, got {scale}")
        return 0.0


class ScriptedNoise(NoiseSource):
    """Test oracle: replays a fixed sequence of draws."""

    def __init__(self, values: Sequence[float]) -> None:
        self._values = list(values)
        self._next = 0

    def draw(self, scale: float) -> float:
        if not (scale > 0):
            raise ValueError(f"scale must be positive, got {scale}")
        if self._next >= len(self._values):
            raise RuntimeError("scripted noise sequence exhausted")
        value = self._values[self._next]
        self._next += 1
        return value


class RecordingNoise(NoiseSource):
    """Wraps another source and logs every (scale, value) call."""

    def __init__(self, inner: NoiseSource) -> None:
        self.inner = inner
        self.calls: list[tuple[float, float]] = []

    def draw(self, scale: float) -> float:
        value = self.inner.draw(scale)
        self.calls.append((scale, value))
        return value


def derive_seed(master: int, *parts: object) -> int:
    """Deterministically derive an independent child seed.

    Used to give every leaf worker / audit trial its own noise stream
    from one master seed. Stable across processes and platforms.
    """
    label = repr((master,) + parts).encode()
    return int.from_bytes(hashlib.blake2b(label, digest_size=8).digest(), "big")


def laplace_quantile_abs(phi: float, scale: float) -> float:
    """Absolute value of the phi-quantile of a zero-mean Laplace.

    For phi in (0, 1/2) this is scale * ln(1 / (2 phi)): a Laplace draw
    with this scale falls below minus the returned value with
    probability exactly phi.
    """
    if not (0 < phi < 0.5):
        raise ValueError(f"phi must lie in (0, 1/2), got {phi}")
    if not (scale > 0):
        raise ValueError(f"scale must be positive, got {scale}")
    return scale * math.log(1.0 / (2.0 * phi))


def compute_tau(params: PrivacyParams, mode: TauMode = TauMode.BESPOKE) -> float:
    """Offset added to the input before clamping, per the chosen mode.

    SIMPLE:  |quantile| at phi = delta / (1 + e^epsilon), scale Delta/eps.
    BESPOKE: Delta + |quantile| at phi = delta, same scale.

    BESPOKE is strictly smaller whenever (Delta/eps) ln(e^eps + 1) >
    Delta, in particular for every epsilon >= 1.
    """
    if mode is TauMode.SIMPLE:
        phi = params.delta / (1.0 + math.exp(params.epsilon))
        return laplace_quantile_abs(phi, params.scale)
    if mode is TauMode.BESPOKE:
        return params.sensitivity + laplace_quantile_abs(params.delta, params.scale)
    raise ValueError(f"unknown tau mode: {mode!r}")


def positive_laplace(
    v: float,
    params: PrivacyParams,
    mode: TauMode = TauMode.BESPOKE,
    noise: NoiseSource | None = None,
) -> float:
    """Release a noisy value that is never below ``v``.

    Returns max(v, v + tau + eta) with eta drawn at scale
    sensitivity/epsilon. The clamp only ever moves probability mass of
    the shifted Laplace upward onto v itself, which is what the delta
    term of the guarantee pays for.
    """
    if noise is None:
        raise ValueError("a NoiseSource is required")
    tau = compute_tau(params, mode)
    eta = noise.draw(params.scale)
    return max(v, v + tau + eta)
