"""Command-line entry point.

Exit status: 0 on success, 1 when some episodes or instances failed, 2 on
configuration, validation or input errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import RunConfig, load_config
from .dataset import filter_dataset
from .ecosystem import load_graph, validate_graph
from .metrics import emit_report
from .errors import ConfigError, HarnessError, RecordParseError, ValidationError
from .runner import (
    build_ecosystems,
    load_dataset,
    make_intent_judge,
    metrics_for_log,
    provenance,
    run_experiment,
    select_instances,
    write_reports,
)

logger = logging.getLogger("geoharness")

EXIT_OK, EXIT_PARTIAL, EXIT_INVALID = 0, 1, 2


def _config(args) -> RunConfig:
    return load_config(args.config, args.set or ())


def _ids(raw: str | None) -> list[str] | None:
    return [s.strip() for s in raw.split(",") if s.strip()] if raw else None


def cmd_build_ecosystem(args) -> int:
    cfg = _config(args)
    instances = select_instances(load_dataset(cfg), _ids(args.instances), args.limit)
    written, failures = build_ecosystems(cfg, instances)
    for path in written:
        print(path)
    for failure in failures:
        print(f"error: {failure}", file=sys.stderr)
    return EXIT_INVALID if failures else EXIT_OK


def cmd_run(args) -> int:
    cfg = _config(args)
    instances = select_instances(load_dataset(cfg), _ids(args.instances), args.limit)
    summary = run_experiment(cfg, instances)
    for path in summary.logs:
        print(path)
    logger.info("completed %d episodes, skipped %d already logged, %d failed",
                summary.completed, summary.skipped, len(summary.failures))
    for failure in summary.failures:
        print(f"failed: {failure}", file=sys.stderr)
    return EXIT_PARTIAL if summary.failures else EXIT_OK


def cmd_metrics(args) -> int:
    cfg = _config(args) if (args.config or args.set) else None
    mode = args.denominators or (cfg.denominator_mode if cfg else "all")
    paths = [Path(p) for p in args.logs]
    if not paths:
        if cfg is None:
            raise ConfigError("pass log files or a config whose output_dir holds logs")
        paths = sorted(p for p in (Path(cfg.output_dir) / "logs").rglob("*.jsonl")
                       if not p.name.endswith(".verdicts.jsonl"))
    reports = [metrics_for_log(p, mode) for p in paths]
    reports = [r for r in reports if r.n_episodes > 0]
    header = {"logs": [str(p) for p in paths], "denominator_mode": mode,
              "judges": sorted({f"{r.judge_model}/{r.prompt_version}" for r in reports})}
    if cfg is not None:
        header.update(provenance(cfg))
    out_dir = Path(args.out) if args.out else Path(cfg.output_dir if cfg else ".") / "reports"
    txt, csv_path = write_reports(reports, out_dir, header)
    print(emit_report(reports, "aligned-text"), end="")
    logger.info("wrote %s and %s", txt, csv_path)
    return EXIT_OK


def _read_queries(path: Path) -> tuple[list[str], list, bool]:
    """Queries plus the raw items (records for JSONL, lines for plain text)."""
    is_jsonl = path.suffix == ".jsonl"
    items, queries = [], []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            if is_jsonl:
                try:
                    rec = json.loads(line)
                    query = rec["query"]
                except (ValueError, KeyError, TypeError) as exc:
                    raise RecordParseError(f"bad query record: {exc}", line=lineno, path=str(path)) from exc
                items.append(rec)
                queries.append(str(query))
            else:
                items.append(line.rstrip("\n"))
                queries.append(line.strip())
    return queries, items, is_jsonl


def cmd_filter_queries(args) -> int:
    cfg = _config(args)
    raw = Path(args.raw)
    queries, items, is_jsonl = _read_queries(raw)
    retained, _ = filter_dataset(queries, make_intent_judge(cfg), max_workers=cfg.parallelism)
    keep = set(retained)
    out_dir = Path(args.out) if args.out else Path(cfg.output_dir) / "filtered"
    out_dir.mkdir(parents=True, exist_ok=True)
    ext = ".jsonl" if is_jsonl else ".txt"
    kept_lines, dropped_lines = [], []
    for query, item in zip(queries, items):
        text = json.dumps(item, ensure_ascii=False, sort_keys=True) if is_jsonl else item
        (kept_lines if query in keep else dropped_lines).append(text + "\n")
    (out_dir / f"retained{ext}").write_text("".join(kept_lines), encoding="utf-8")
    (out_dir / f"rejected{ext}").write_text("".join(dropped_lines), encoding="utf-8")
    meta = {"input": str(raw), "retained": len(kept_lines), "rejected": len(dropped_lines), **provenance(cfg)}
    (out_dir / "filter.provenance.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n",
                                                    encoding="utf-8")
    print(f"{len(queries)} -> {len(kept_lines)} retained ({len(dropped_lines)} rejected)")
    return EXIT_OK


def cmd_validate(args) -> int:
    """Check the config (and its dataset) plus any exported ecosystem directories."""
    status = EXIT_OK
    if args.config or args.set:
        cfg = _config(args)
        if cfg.dataset:
            print(f"dataset ok: {len(load_dataset(cfg))} instances")
        print("config ok")
    for d in args.dirs:
        violations = validate_graph(load_graph(d))
        if violations:
            status = EXIT_INVALID
            for v in violations:
                print(f"{d}: {v.page_id}: [{v.rule}] {v.message}")
        else:
            print(f"{d}: ok")
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geoharness", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", "-c", required=config_required, help="YAML run configuration")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key, e.g. --set policy.kind=greedy (repeatable)")

    p = sub.add_parser("build-ecosystem", help="generate, validate and export evidence graphs")
    common(p)
    p.add_argument("--instances", help="comma-separated instance ids")
    p.add_argument("--limit", type=int)
    p.set_defaults(func=cmd_build_ecosystem)

    p = sub.add_parser("run", help="run episodes and write trajectory logs")
    common(p)
    p.add_argument("--instances", help="comma-separated instance ids")
    p.add_argument("--limit", type=int)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("metrics", help="compute metric tables from trajectory logs")
    common(p, config_required=False)
    p.add_argument("logs", nargs="*", help="trajectory log files (default: all logs under output_dir)")
    p.add_argument("--out", help="report directory")
    p.add_argument("--denominators", choices=["all", "conditioned"])
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("filter-queries", help="keep queries with open-ended recommendation intent")
    common(p, config_required=False)
    p.add_argument("raw", help="raw queries (.jsonl with a query field, or one query per line)")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_filter_queries)

    p = sub.add_parser("validate", help="check a config and exported ecosystem directories")
    common(p, config_required=False)
    p.add_argument("dirs", nargs="*", help="exported ecosystem directories")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValidationError, RecordParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        for v in getattr(exc, "violations", None) or ():
            print(f"  {v}", file=sys.stderr)
        return EXIT_INVALID
    except HarnessError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
