"""External text formats: input records, pipeline config, outputs.

Records file (CSV, UTF-8): the header names the schema, every later
line is one row of one client's contribution. Column declarations are
``name:kind`` with kind one of group_string:<max_len>, group_int64,
sum_int64, sum_double; the first header field must be ``client_id``.

    client_id,app:group_string:15,os:group_string:10,usage:sum_int64
    alice,Reddit,android,5
    bob,X,ios,2

A client appearing on several lines contributes several rows (one per
distinct group); contribution bounds are enforced by the pipeline, not
the parser.

Config file: flat ``key = value`` lines, '#' comments. Recognized keys:
epsilon_pad, epsilon_resize, epsilon_release, delta, max_groups,
num_leaves, tau_mode (simple|bespoke), initial_capacity, and one
``bounds.<sum column> = lo,hi`` line per sum column.
"""

from __future__ import annotations

import csv
import io

from .aggregator import Contribution, PipelineConfig
from .encoding import Column, ColumnKind, ColumnSchema, HistogramTable
from .noise import TauMode


class RecordParseError(ValueError):
    def __init__(self, line_no: int, message: str) -> None:
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class ConfigError(ValueError):
    pass


_KINDS = {
    "group_string": ColumnKind.GROUP_STRING,
    "group_int64": ColumnKind.GROUP_INT64,
    "sum_int64": ColumnKind.SUM_INT64,
    "sum_double": ColumnKind.SUM_DOUBLE,
}


def parse_schema_header(fields: list[str]) -> ColumnSchema:
    if not fields or fields[0].strip() != "client_id":
        raise RecordParseError(1, "first header field must be 'client_id'")
    columns = []
    for field in fields[1:]:
        parts = [p.strip() for p in field.split(":")]
        if len(parts) < 2 or parts[1] not in _KINDS:
            raise RecordParseError(
                1, f"bad column declaration {field!r}; expected name:kind[:max_len]"
            )
        kind = _KINDS[parts[1]]
        if kind is ColumnKind.GROUP_STRING:
            if len(parts) != 3 or not parts[2].isdigit():
                raise RecordParseError(1, f"group_string column {parts[0]!r} needs :max_len")
            columns.append(Column(parts[0], kind, int(parts[2])))
        else:
            if len(parts) != 2:
                raise RecordParseError(1, f"column {field!r}: unexpected extra field")
            columns.append(Column(parts[0], kind))
    return ColumnSchema(tuple(columns))


def _parse_cell(column: Column, text: str, line_no: int):
    kind = column.kind
    if kind is ColumnKind.GROUP_STRING:
        return text
    try:
        if kind is ColumnKind.SUM_DOUBLE:
            return float(text)
        return int(text)
    except ValueError:
        raise RecordParseError(
            line_no, f"column {column.name!r}: cannot parse {text!r} as {kind.value}"
        ) from None


def read_records(text: str) -> tuple[ColumnSchema, list[Contribution]]:
    """Parse a records file into a schema and per-client contributions.

    Clients keep their order of first appearance, which is what the
    pipeline's round-robin partitioner keys on.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise RecordParseError(1, "empty records file") from None
    schema = parse_schema_header(header)
    per_client: dict[str, list] = {}
    for line_no, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != len(schema.columns) + 1:
            raise RecordParseError(
                line_no,
                f"expected {len(schema.columns) + 1} fields, got {len(row)}",
            )
        client_id = row[0]
        cells = [
            _parse_cell(column, field, line_no)
            for column, field in zip(schema.columns, row[1:])
        ]
        key = tuple(cells[i] for i in schema.group_indices)
        values = tuple(cells[i] for i in schema.sum_indices)
        per_client.setdefault(client_id, []).append((key, values))
    contributions = [
        Contribution(client_id, tuple(rows)) for client_id, rows in per_client.items()
    ]
    return schema, contributions


def parse_config(text: str, schema: ColumnSchema, seed: int = 0) -> PipelineConfig:
    """Build a PipelineConfig from flat key-value text."""
    values: dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()

    def need(key: str) -> str:
        if key not in values:
            raise ConfigError(f"missing required config key {key!r}")
        return values.pop(key)

    def number(key: str, default: str | None = None) -> float:
        raw = need(key) if default is None else values.pop(key, default)
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"config key {key!r}: bad number {raw!r}") from None

    bounds = {}
    for key in [k for k in values if k.startswith("bounds.")]:
        name = key[len("bounds."):]
        raw = values.pop(key)
        parts = raw.split(",")
        if len(parts) != 2:
            raise ConfigError(f"config key {key!r}: expected 'lo,hi', got {raw!r}")
        try:
            bounds[name] = (float(parts[0]), float(parts[1]))
        except ValueError:
            raise ConfigError(f"config key {key!r}: bad bounds {raw!r}") from None

    mode_raw = values.pop("tau_mode", "bespoke").lower()
    try:
        tau_mode = TauMode(mode_raw)
    except ValueError:
        raise ConfigError(f"tau_mode must be 'simple' or 'bespoke', got {mode_raw!r}") from None

    config = PipelineConfig(
        schema=schema,
        max_groups=int(number("max_groups")),
        value_bounds=bounds,
        epsilon_pad=number("epsilon_pad"),
        epsilon_resize=number("epsilon_resize"),
        epsilon_release=number("epsilon_release"),
        delta=number("delta"),
        num_leaves=int(number("num_leaves", "1")),
        tau_mode=tau_mode,
        seed=seed,
        initial_capacity=int(number("initial_capacity", "4")),
    )
    if values:
        raise ConfigError(f"unknown config keys: {sorted(values)}")
    return config


def format_histogram(table: HistogramTable) -> str:
    """Released histogram as CSV with a schema-naming header."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow([c.name for c in table.schema.columns])
    for row in table.rows:
        writer.writerow([f"{v:.6f}" if isinstance(v, float) else v for v in row])
    return out.getvalue()
