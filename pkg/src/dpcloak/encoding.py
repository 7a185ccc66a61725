"""Wire format for intermediate histograms and DP-padded serialization.

The encoding is deliberately self-contained and bit-exact (see
FORMAT.md for worked examples):

* integers that describe the layout are base-128 varints;
* each column is emitted in schema order as varint(body length) ++ body;
* numeric bodies are fixed-width 8-byte little-endian values in row
  order; string bodies are varint(row count) ++ one length varint per
  string ++ the concatenated string bytes;
* rows are canonically ordered by their group-key tuple, so equal
  tables serialize to identical bytes.

Because every per-row field is either fixed width or capped
(``max_len`` on string columns), the worst-case effect of one
contributor on the serialized length is computable; pad_serialize uses
that bound as the sensitivity of a positive Laplace mechanism and pads
the payload with zero bytes to the noised length.
"""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass, replace

from .noise import NoiseSource, PrivacyParams, TauMode, positive_laplace

INT64_MIN = -(1 << 63)
INT64_MAX = (1 << 63) - 1
_VARINT_MAX_BYTES = 10


class MalformedVarint(ValueError):
    """Varint has no terminator within 10 bytes or overflows 64 bits."""


class MalformedPayload(ValueError):
    """Byte sequence does not parse as a (possibly padded) histogram."""


class SchemaViolation(ValueError):
    """Row data does not conform to the declared column schema."""


class ColumnKind(enum.Enum):
    GROUP_STRING = "group_string"
    GROUP_INT64 = "group_int64"
    SUM_INT64 = "sum_int64"
    SUM_DOUBLE = "sum_double"

    @property
    def is_group(self) -> bool:
        return self in (ColumnKind.GROUP_STRING, ColumnKind.GROUP_INT64)

    @property
    def is_sum(self) -> bool:
        return not self.is_group


@dataclass(frozen=True)
class Column:
    """One column descriptor. ``max_len`` is required for GROUP_STRING:
    a hard byte-length cap is what makes the length sensitivity finite."""

    name: str
    kind: ColumnKind
    max_len: int | None = None

    def __post_init__(self) -> None:
        if self.kind is ColumnKind.GROUP_STRING:
            if self.max_len is None or self.max_len < 1:
                raise SchemaViolation(
                    f"column {self.name!r}: GROUP_STRING needs max_len >= 1, got {self.max_len}"
                )
        elif self.max_len is not None:
            raise SchemaViolation(f"column {self.name!r}: max_len only applies to GROUP_STRING")


@dataclass(frozen=True)
class ColumnSchema:
    columns: tuple[Column, ...]

    def __post_init__(self) -> None:
        if not any(c.kind.is_group for c in self.columns):
            raise SchemaViolation("schema needs at least one group column")
        if not any(c.kind.is_sum for c in self.columns):
            raise SchemaViolation("schema needs at least one sum column")
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaViolation(f"duplicate column names in {names}")

    @property
    def group_indices(self) -> tuple[int, ...]:
        return tuple(i for i, c in enumerate(self.columns) if c.kind.is_group)

    @property
    def sum_indices(self) -> tuple[int, ...]:
        return tuple(i for i, c in enumerate(self.columns) if c.kind.is_sum)

    def group_key(self, row: tuple) -> tuple:
        return tuple(row[i] for i in self.group_indices)


def check_cell(column: Column, value: object) -> None:
    kind = column.kind
    if kind is ColumnKind.GROUP_STRING:
        if not isinstance(value, str):
            raise SchemaViolation(f"column {column.name!r}: expected str, got {value!r}")
        if len(value.encode("utf-8")) > column.max_len:
            raise SchemaViolation(
                f"column {column.name!r}: string longer than max_len={column.max_len}: {value!r}"
            )
    elif kind in (ColumnKind.GROUP_INT64, ColumnKind.SUM_INT64):
        if not isinstance(value, int) or isinstance(value, bool):
            raise SchemaViolation(f"column {column.name!r}: expected int, got {value!r}")
        if not (INT64_MIN <= value <= INT64_MAX):
            raise SchemaViolation(f"column {column.name!r}: int64 out of range: {value}")
    elif kind is ColumnKind.SUM_DOUBLE:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise SchemaViolation(f"column {column.name!r}: expected float, got {value!r}")


@dataclass(frozen=True)
class HistogramTable:
    """Grouped-sum rows under a schema, held in canonical order.

    Rows are tuples aligned with the schema's columns. Group-key tuples
    must be distinct; rows are sorted by group key at construction so
    two tables with the same row set compare (and serialize) equal.
    """

    schema: ColumnSchema
    rows: tuple[tuple, ...]

    def __post_init__(self) -> None:
        for row in self.rows:
            if len(row) != len(self.schema.columns):
                raise SchemaViolation(f"row has {len(row)} cells, schema has "
                                      f"{len(self.schema.columns)} columns: {row!r}")
            for column, value in zip(self.schema.columns, row):
                check_cell(column, value)
        keys = [self.schema.group_key(r) for r in self.rows]
        if len(set(keys)) != len(keys):
            raise SchemaViolation("duplicate group-key tuples across rows")
        ordered = tuple(sorted(self.rows, key=self.schema.group_key))
        object.__setattr__(self, "rows", ordered)

    def __len__(self) -> int:
        return len(self.rows)


def varint_encode(n: int) -> bytes:
    """Base-128 little-endian groups, continuation bit 0x80; 1-10 bytes."""
    if n < 0:
        raise ValueError(f"varint requires a nonnegative value, got {n}")
    if n > (1 << 64) - 1:
        raise ValueError(f"varint limited to 64 bits, got {n}")
    out = bytearray()
    while True:
        low = n & 0x7F
        n >>= 7
        if n:
            out.append(low | 0x80)
        else:
            out.append(low)
            return bytes(out)


def varint_decode(data: bytes, offset: int = 0) -> tuple[int, int]:
    """Decode one varint at ``offset``; returns (value, bytes consumed)."""
    value = 0
    shift = 0
    consumed = 0
    while True:
        if offset + consumed >= len(data):
            raise MalformedVarint("varint truncated: missing terminator byte")
        if consumed >= _VARINT_MAX_BYTES:
            raise MalformedVarint("varint longer than 10 bytes")
        byte = data[offset + consumed]
        value |= (byte & 0x7F) << shift
        consumed += 1
        if not byte & 0x80:
            break
        shift += 7
    if value > (1 << 64) - 1:
        raise MalformedVarint(f"varint overflows 64 bits: {value}")
    return value, consumed


def varint_size(n: int) -> int:
    return len(varint_encode(n))


def serialize_histogram(table: HistogramTable) -> bytes:
    """Deterministic column-major encoding of a table (see module doc)."""
    out = bytearray()
    for index, column in enumerate(table.schema.columns):
        body = bytearray()
        if column.kind is ColumnKind.GROUP_STRING:
            encoded = [row[index].encode("utf-8") for row in table.rows]
            body += varint_encode(len(encoded))
            for item in encoded:
                body += varint_encode(len(item))
            for item in encoded:
                body += item
        elif column.kind is ColumnKind.SUM_DOUBLE:
            for row in table.rows:
                body += struct.pack("<d", float(row[index]))
        else:
            for row in table.rows:
                body += struct.pack("<q", row[index])
        out += varint_encode(len(body))
        out += body
    return bytes(out)


def _decode_column(column: Column, body: bytes) -> list:
    if column.kind is ColumnKind.GROUP_STRING:
        try:
            count, pos = varint_decode(body)
        except MalformedVarint as exc:
            raise MalformedPayload(f"column {column.name!r}: {exc}") from exc
        lengths = []
        for _ in range(count):
            try:
                length, used = varint_decode(body, pos)
            except MalformedVarint as exc:
                raise MalformedPayload(f"column {column.name!r}: {exc}") from exc
            lengths.append(length)
            pos += used
        values = []
        for length in lengths:
            if pos + length > len(body):
                raise MalformedPayload(f"column {column.name!r}: string data truncated")
            raw = body[pos:pos + length]
            pos += length
            try:
                values.append(raw.decode("utf-8"))
            except UnicodeDecodeError as exc:
                raise MalformedPayload(f"column {column.name!r}: invalid utf-8") from exc
        if pos != len(body):
            raise MalformedPayload(f"column {column.name!r}: {len(body) - pos} stray bytes")
        return values
    if len(body) % 8:
        raise MalformedPayload(f"column {column.name!r}: body not a multiple of 8 bytes")
    fmt = "<d" if column.kind is ColumnKind.SUM_DOUBLE else "<q"
    return [struct.unpack_from(fmt, body, i)[0] for i in range(0, len(body), 8)]


def deserialize_histogram(schema: ColumnSchema, data: "bytes | PaddedPayload") -> HistogramTable:
    """Exact inverse of serialize_histogram.

    Accepts either raw serialized bytes or a :class:`PaddedPayload`
    (whose padding is validated and stripped first).
    """
    if isinstance(data, PaddedPayload):
        data = data.payload()
    columns: list[list] = []
    pos = 0
    for column in schema.columns:
        try:
            body_len, used = varint_decode(data, pos)
        except MalformedVarint as exc:
            raise MalformedPayload(f"column {column.name!r}: bad body length: {exc}") from exc
        pos += used
        if pos + body_len > len(data):
            raise MalformedPayload(f"column {column.name!r}: body truncated")
        columns.append(_decode_column(column, data[pos:pos + body_len]))
        pos += body_len
    if pos != len(data):
        raise MalformedPayload(f"{len(data) - pos} trailing bytes after last column")
    counts = {len(col) for col in columns}
    if len(counts) > 1:
        raise MalformedPayload(f"columns disagree on row count: {sorted(counts)}")
    rows = tuple(zip(*columns)) if columns and columns[0] else ()
    try:
        return HistogramTable(schema, rows)
    except SchemaViolation as exc:
        raise MalformedPayload(f"decoded rows violate schema: {exc}") from exc


@dataclass(frozen=True)
class PaddedPayload:
    """varint(payload length) ++ payload ++ zero bytes.

    The header pins down where the payload ends so padding can be
    stripped without trusting the transport; any nonzero byte in the
    padding region is rejected.
    """

    data: bytes

    def payload(self) -> bytes:
        try:
            payload_len, header = varint_decode(self.data)
        except MalformedVarint as exc:
            raise MalformedPayload(f"bad payload-length header: {exc}") from exc
        if header + payload_len > len(self.data):
            raise MalformedPayload(
                f"declared payload of {payload_len} bytes exceeds message of {len(self.data)}"
            )
        if any(self.data[header + payload_len:]):
            raise MalformedPayload("nonzero bytes in padding region")
        return self.data[header:header + payload_len]

    def __len__(self) -> int:
        return len(self.data)


def calculate_serialize_sensitivity(schema: ColumnSchema, max_groups: int) -> int:
    """Upper bound, in bytes, on how much one contributor can move the
    serialized length.

    A contributor influences at most ``max_groups`` rows; replacing
    their data can therefore add or remove up to that many rows (sum
    values only change in place and are fixed width). Per changed row
    each numeric column moves by 8 bytes and each string column by up
    to max_len bytes plus its length varint at worst-case width. On top
    of the row bytes, the row-count varint of every string column and
    the body-length varint of every column can widen; a varint over a
    quantity that changes by at most d widens by at most varint_size(d)
    bytes, which is what is charged here. Conservative by construction:
    soundness is verified against brute-force neighbor enumeration in
    the tests, tightness is only measured.
    """
    if max_groups < 1:
        raise ValueError(f"max_groups must be >= 1, got {max_groups}")
    total = 0
    for column in schema.columns:
        if column.kind is ColumnKind.GROUP_STRING:
            row_bytes = max_groups * (column.max_len + varint_size(column.max_len))
            body_delta = row_bytes + varint_size(max_groups)
        else:
            body_delta = 8 * max_groups
        total += body_delta + varint_size(body_delta)
    return total


def pad_serialize(
    table: HistogramTable,
    params: PrivacyParams,
    max_groups: int,
    mode: TauMode = TauMode.BESPOKE,
    noise: NoiseSource | None = None,
) -> PaddedPayload:
    """Serialize ``table`` and pad it to a DP-noised length.

    ``params.sensitivity`` is ignored; the byte sensitivity is computed
    from the schema and ``max_groups``. The padded content length is
    the ceiling of a positive-Laplace draw on the raw length (ceiling
    is monotone post-processing, so both the never-shorter guarantee
    and the privacy guarantee survive rounding).
    """
    if noise is None:
        raise ValueError("a NoiseSource is required")
    raw = serialize_histogram(table)
    sensitivity = calculate_serialize_sensitivity(table.schema, max_groups)
    calibrated = replace(params, sensitivity=float(sensitivity))
    content_len = math.ceil(positive_laplace(len(raw), calibrated, mode, noise))
    header = varint_encode(len(raw))
    return PaddedPayload(header + raw + b"\x00" * (content_len - len(raw)))
