"""Associative map whose resize schedule is differentially private.

A plain open-addressing table doubles its backing array the moment
load reaches capacity, so anyone who can observe allocations learns
exactly when the number of distinct keys crossed a power-of-two style
boundary. ``write`` implements that vulnerable baseline. ``private_write``
replaces the deterministic schedule with a noisy one: it compares an
adjusted load against a noised capacity threshold after every write,
resizing when the noisy comparison (or a hard capacity backstop) fires.

The adjusted load is max(previous trigger capacity, current load),
which pins the comparison input to a constant right after every resize.
That rounding-up is what keeps a single contributor's influence
confined to one noisy-threshold episode, and the hard backstop
guarantees the table never stores more distinct keys than its capacity.

Each contributor is assumed to add at most one key; pass
``contribution_multiplier`` when contributions arrive in batches of up
to that many keys (the noise scale and quantile are recalibrated to
epsilon / multiplier).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .noise import NoiseSource, PrivacyParams, laplace_quantile_abs


class KeyAbsent(KeyError):
    """read() on a key that is not present."""


@dataclass(frozen=True)
class ResizeRecord:
    write_index: int
    old_capacity: int
    new_capacity: int


_FREE = object()


class DpMap:
    """Open-addressing key/value table with a private resize schedule.

    The backing arrays hold exactly ``capacity`` slots so "allocated
    memory" is well defined: it is capacity times the slot size, and
    the only allocation events are resizes. Single-owner mutable state.
    """

    def __init__(
        self,
        params: PrivacyParams | None = None,
        noise: NoiseSource | None = None,
        initial_capacity: int = 4,
        growth_factor: int = 2,
        contribution_multiplier: int = 1,
    ) -> None:
        if initial_capacity < 1:
            raise ValueError(f"initial_capacity must be >= 1, got {initial_capacity}")
        if growth_factor < 2:
            # One write must not be able to re-cross the new threshold.
            raise ValueError(f"growth_factor must be >= 2, got {growth_factor}")
        if contribution_multiplier < 1:
            raise ValueError(
                f"contribution_multiplier must be >= 1, got {contribution_multiplier}"
            )
        if (params is None) != (noise is None):
            raise ValueError("params and noise must be provided together")
        self._params = params
        self._noise = noise
        self._growth_factor = growth_factor
        self._capacity = initial_capacity
        self._previous_capacity = 0
        self._keys: list = [_FREE] * initial_capacity
        self._values: list = [None] * initial_capacity
        self._load = 0
        self._write_index = 0
        self.resize_log: list[ResizeRecord] = []
        if params is not None:
            epsilon = params.epsilon / contribution_multiplier
            self._scale = 2.0 / epsilon
            self._quantile = laplace_quantile_abs(
                params.delta / (2.0 * (1.0 + math.exp(epsilon))), self._scale
            )
            # Same rule as after a resize; the initial value is not
            # observable until the first private write.
            self._noised_capacity = (
                self._capacity + noise.draw(self._scale) - 2.0 * self._quantile
            )
        else:
            self._scale = None
            self._quantile = None
            self._noised_capacity = None

    # -- off-the-shelf interface -------------------------------------------

    def get_load(self) -> int:
        return self._load

    def get_capacity(self) -> int:
        return self._capacity

    def get_previous_capacity(self) -> int:
        return self._previous_capacity

    def get_noised_capacity(self) -> float:
        if self._noised_capacity is None:
            raise ValueError("map was built without privacy params")
        return self._noised_capacity

    def present(self, key) -> bool:
        return self._keys[self._probe(key)] is not _FREE

    def read(self, key):
        slot = self._probe(key)
        if self._keys[slot] is _FREE:
            raise KeyAbsent(key)
        return self._values[slot]

    def dump(self) -> list[tuple]:
        pairs = [
            (k, v) for k, v in zip(self._keys, self._values) if k is not _FREE
        ]
        pairs.sort(key=lambda kv: kv[0])
        return pairs

    def resize(self) -> None:
        """Grow capacity by the growth factor and rehash contents."""
        old_capacity = self._capacity
        old_keys, old_values = self._keys, self._values
        self._capacity *= self._growth_factor
        self._keys = [_FREE] * self._capacity
        self._values = [None] * self._capacity
        for k, v in zip(old_keys, old_values):
            if k is not _FREE:
                slot = self._probe(k)
                self._keys[slot] = k
                self._values[slot] = v
        self._previous_capacity = old_capacity
        self.resize_log.append(ResizeRecord(self._write_index, old_capacity, self._capacity))

    # -- writes -------------------------------------------------------------

    def write(self, key, value) -> None:
        """Upsert with the deterministic (vulnerable) resize schedule."""
        self._upsert(key, value)
        if self._load >= self._capacity:
            self.resize()
        self._write_index += 1

    def private_write(self, key, value) -> bool:
        """Upsert with the noisy resize schedule; returns the resize bit.

        The per-write noise draw happens unconditionally so replaying a
        stream under a fixed seed consumes draws at fixed positions,
        and the hard backstop keeps load <= capacity on every path.
        """
        if self._params is None:
            raise ValueError("private_write requires privacy params and a noise source")
        self._upsert(key, value)
        adjusted_load = max(self._previous_capacity, self._load)
        nu = self._noise.draw(self._scale)
        resized = False
        if adjusted_load >= self._capacity or adjusted_load + nu >= self._noised_capacity:
            self.resize()
            self._noised_capacity = (
                self._capacity + self._noise.draw(self._scale) - 2.0 * self._quantile
            )
            resized = True
        self._write_index += 1
        return resized

    # -- internals ----------------------------------------------------------

    def _probe(self, key) -> int:
        """First slot holding ``key``, else the free slot for it."""
        slot = hash(key) % self._capacity
        while True:
            occupant = self._keys[slot]
            if occupant is _FREE or occupant == key:
                return slot
            slot = (slot + 1) % self._capacity

    def _upsert(self, key, value) -> None:
        slot = self._probe(key)
        if self._keys[slot] is _FREE:
            self._keys[slot] = key
            self._load += 1
        self._values[slot] = value


def histogram_from_stream(
    stream,
    private: bool,
    params: PrivacyParams | None = None,
    noise: NoiseSource | None = None,
    initial_capacity: int = 4,
) -> tuple[dict, list[bool]]:
    """Count element multiplicities with a DpMap.

    Returns the counts and the per-write resize bit vector, which is
    exactly the transcript an allocation observer sees. Counts are
    identical between modes; only resize timing differs.
    """
    if private:
        table = DpMap(params, noise, initial_capacity=initial_capacity)
    else:
        table = DpMap(initial_capacity=initial_capacity)
    bits: list[bool] = []
    for element in stream:
        count = table.read(element) + 1 if table.present(element) else 1
        if private:
            bits.append(table.private_write(element, count))
        else:
            before = len(table.resize_log)
            table.write(element, count)
            bits.append(len(table.resize_log) > before)
    return dict(table.dump()), bits
