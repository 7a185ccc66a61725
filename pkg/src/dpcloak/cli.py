"""Command-line front end: attacks, overhead benchmark, audits, pipeline.

Every subcommand takes a ``--seed`` and is byte-identical given the
same arguments and seed. Exit codes: 0 success, 1 domain failure
(failed audit, insufficient trials, unparsable input), 2 usage error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import adversary
from .aggregator import run_pipeline
from .audit import InsufficientTrials
from .encoding import Column, ColumnKind, ColumnSchema, HistogramTable, pad_serialize
from .noise import PrivacyParams, SeededLaplaceNoise, TauMode, derive_seed
from .records import ConfigError, RecordParseError, format_histogram, parse_config, read_records

OVERHEAD_EPSILONS = (0.5, 1.0, 2.0)
OVERHEAD_GROUP_COUNTS = (256, 512, 1024, 2048)

_OVERHEAD_SCHEMA = ColumnSchema(
    (
        Column("key1", ColumnKind.GROUP_STRING, 15),
        Column("key2", ColumnKind.GROUP_STRING, 15),
        Column("agg1", ColumnKind.SUM_DOUBLE),
        Column("agg2", ColumnKind.SUM_DOUBLE),
    )
)


def _csv_floats(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part.strip()]


def _csv_ints(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part.strip()]


def _emit(text: str, output: str | None) -> None:
    print(text)
    if output:
        Path(output).write_text(text + "\n")


def cmd_attack(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    if args.mitigated and args.epsilon is None:
        parser.error("--epsilon is required when --mitigated=true")
    epsilon = args.epsilon if args.epsilon is not None else 1.0
    if args.kind == "length":
        pair = adversary.sybil_contribution_pair()
        advantage, halfwidth = adversary.message_length_attack(
            pair, args.mitigated, args.trials, epsilon, args.delta, args.seed
        )
    else:
        pair = adversary.sybil_allocation_pair()
        advantage, halfwidth = adversary.allocation_attack(
            pair, args.mitigated, args.trials, epsilon, args.delta, args.seed
        )
    lines = [
        f"attack={args.kind}",
        f"mitigated={str(args.mitigated).lower()}",
        f"trials={args.trials}",
        f"advantage={advantage:.4f}",
        f"ci99_halfwidth={halfwidth:.4f}",
    ]
    if args.mitigated:
        bound = adversary.distinguisher_bound(epsilon, args.delta)
        lines.append(f"dp_bound={bound:.4f}")
    _emit("\n".join(lines), args.output)
    return 0


def _overhead_table(group_count: int) -> HistogramTable:
    rows = tuple((f"{i:015d}", "android", 1.0, 1.0) for i in range(group_count))
    return HistogramTable(_OVERHEAD_SCHEMA, rows)


def cmd_overhead(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    if args.runs < 10:
        parser.error("--runs must be at least 10")
    lines = ["epsilon,groups,p10,p25,p50,p75,p90"]
    for epsilon in args.epsilons:
        for group_count in args.group_counts:
            table = _overhead_table(group_count)
            params = PrivacyParams(epsilon, args.delta)
            lengths = []
            for run in range(args.runs):
                noise = SeededLaplaceNoise(derive_seed(args.seed, epsilon, group_count, run))
                lengths.append(len(pad_serialize(table, params, 1, TauMode.BESPOKE, noise)))
            lengths.sort()
            n = args.runs
            picks = (lengths[n // 10], lengths[n // 4], lengths[n // 2],
                     lengths[3 * n // 4], lengths[9 * n // 10])
            lines.append(f"{epsilon:g},{group_count}," + ",".join(str(p) for p in picks))
    _emit("\n".join(lines), args.output)
    return 0


def cmd_audit(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    if args.sabotage and args.target != "uds":
        parser.error("--sabotage is only supported for target 'uds'")
    try:
        if args.target == "positive-laplace":
            report = adversary.audit_positive_laplace(args.epsilon, args.delta,
                                                      args.trials, args.seed)
        elif args.target == "uds":
            report = adversary.audit_uds(args.epsilon, args.trials, args.seed,
                                         sabotage=args.sabotage)
        elif args.target == "strict-uds":
            report = adversary.audit_strict_uds(args.epsilon, args.delta,
                                                args.trials, args.seed)
        elif args.target == "dp-map":
            report = adversary.audit_dp_map(args.epsilon, args.delta,
                                            args.trials, args.seed)
        elif args.target == "padding":
            report = adversary.audit_padding(args.epsilon, args.delta,
                                             args.trials, args.seed)
        else:
            report = adversary.audit_release(args.epsilon, args.delta,
                                             args.trials, args.seed)
    except InsufficientTrials as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _emit(report.to_text(), args.output)
    return 0 if report.passed else 1


def cmd_pipeline(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    try:
        schema, contributions = read_records(Path(args.records).read_text())
        config = parse_config(Path(args.config).read_text(), schema, seed=args.seed)
    except (RecordParseError, ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    result = run_pipeline(contributions, config)
    Path(args.output_histogram).write_text(format_histogram(result.table))
    Path(args.output_trace).write_text("\n".join(result.trace.to_lines()) + "\n")
    messages = result.trace.message_lengths()
    print(f"groups released: {len(result.table)}")
    print(f"messages: {len(messages)}, total bytes: {sum(m.n_bytes for m in messages)}")
    print(f"resize events: {len(result.trace.resize_events())}")
    print(result.budget.summary())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dpcloak",
        description="DP mitigations for message-length and allocation side channels",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    attack = sub.add_parser("attack", help="run a distinguishing attack")
    attack.add_argument("kind", choices=("length", "allocation"))
    attack.add_argument("--mitigated", type=_parse_bool, default=False,
                        metavar="BOOL", help="attack the DP-mitigated variant")
    attack.add_argument("--epsilon", type=float, default=None)
    attack.add_argument("--delta", type=float, default=1e-4)
    attack.add_argument("--trials", type=int, default=1000)
    attack.add_argument("--seed", type=int, required=True)
    attack.add_argument("--output", default=None)

    overhead = sub.add_parser("overhead", help="padding overhead benchmark")
    overhead.add_argument("--epsilons", type=_csv_floats, default=list(OVERHEAD_EPSILONS))
    overhead.add_argument("--group-counts", type=_csv_ints,
                          default=list(OVERHEAD_GROUP_COUNTS))
    overhead.add_argument("--delta", type=float, default=1e-4)
    overhead.add_argument("--runs", type=int, default=40)
    overhead.add_argument("--seed", type=int, required=True)
    overhead.add_argument("--output", default=None)

    audit = sub.add_parser("audit", help="Monte-Carlo (epsilon, delta) audit")
    audit.add_argument("target", choices=("positive-laplace", "uds", "strict-uds",
                                          "dp-map", "padding", "release"))
    audit.add_argument("--epsilon", type=float, default=1.0)
    audit.add_argument("--delta", type=float, default=1e-4)
    audit.add_argument("--trials", type=int, default=100_000)
    audit.add_argument("--seed", type=int, required=True)
    audit.add_argument("--sabotage", action="store_true",
                       help="plant a known violation (uds only); the audit must FAIL")
    audit.add_argument("--output", default=None)

    pipeline = sub.add_parser("pipeline", help="run GROUP BY SUM on a records file")
    pipeline.add_argument("records", help="input records file (see README for grammar)")
    pipeline.add_argument("--config", required=True)
    pipeline.add_argument("--seed", type=int, required=True)
    pipeline.add_argument("--output-histogram", required=True)
    pipeline.add_argument("--output-trace", required=True)

    return parser


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {text!r}")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "attack": cmd_attack,
        "overhead": cmd_overhead,
        "audit": cmd_audit,
        "pipeline": cmd_pipeline,
    }
    return handlers[args.command](args, parser)


if __name__ == "__main__":
    sys.exit(main())
