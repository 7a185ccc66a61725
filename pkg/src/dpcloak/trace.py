"""Side-channel transcripts: what a host-level observer would see.

A trace is an append-only sequence of two event kinds: the byte length
of an inter-worker message, and a resize of a worker's map (standing in
for the page-fault spike a real allocation produces). Traces are
produced by the pipeline and consumed by the adversary harness; they
can be serialized as one structured-text record per line.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Union


@dataclass(frozen=True)
class MessageLength:
    leaf_id: int
    n_bytes: int


@dataclass(frozen=True)
class ResizeEvent:
    leaf_id: int
    write_index: int
    old_capacity: int
    new_capacity: int


Observation = Union[MessageLength, ResizeEvent]


class ObservationTrace:
    """Append-only transcript with per-event validation."""

    def __init__(self) -> None:
        self._events: list[Observation] = []
        self._last_capacity: dict[int, int] = {}

    def record(self, event: Observation) -> None:
        if isinstance(event, MessageLength):
            if event.n_bytes <= 0:
                raise ValueError(f"message length must be positive, got {event.n_bytes}")
        elif isinstance(event, ResizeEvent):
            if event.new_capacity <= event.old_capacity:
                raise ValueError(f"capacity must grow on resize: {event}")
            last = self._last_capacity.get(event.leaf_id)
            if last is not None and event.old_capacity < last:
                raise ValueError(f"capacities must be non-decreasing per leaf: {event}")
            self._last_capacity[event.leaf_id] = event.new_capacity
        else:
            raise TypeError(f"not an observation: {event!r}")
        self._events.append(event)

    def __iter__(self) -> Iterator[Observation]:
        return iter(self._events)

    def __len__(self) -> int:
        return len(self._events)

    def message_lengths(self) -> list[MessageLength]:
        return [e for e in self._events if isinstance(e, MessageLength)]

    def resize_events(self) -> list[ResizeEvent]:
        return [e for e in self._events if isinstance(e, ResizeEvent)]

    def to_lines(self) -> list[str]:
        lines = []
        for event in self._events:
            if isinstance(event, MessageLength):
                lines.append(f"message_length leaf={event.leaf_id} bytes={event.n_bytes}")
            else:
                lines.append(
                    f"resize leaf={event.leaf_id} write_index={event.write_index} "
                    f"old={event.old_capacity} new={event.new_capacity}"
                )
        return lines
