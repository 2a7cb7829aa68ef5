"""Command line entry point.

Subcommands::

    iotad synth   --out data.csv [--seed N] [--config cfg.toml]
    iotad run     [--config cfg.toml] [--seed N] [--out DIR] [--model M] [--eval-scope S]
    iotad report  REPORT.json [--format json|csv] [--out PATH]
    iotad compare FIRST.json SECOND.json [--out PATH]

Exit codes: 0 success, 2 config error, 3 data error, 4 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from iotad.dataset import SyntheticSpec, generate_synthetic, write_csv
from iotad.errors import ConfigError, DataError, PipelineError
from iotad.pipeline import (
    RunConfig,
    compare_reports,
    emit_plot_data,
    emit_report,
    load_config,
    run_pipeline,
    table_rows,
    TABLE_HEADER,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4

logger = logging.getLogger("iotad")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="iotad", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="generate a synthetic telemetry CSV")
    synth.add_argument("--config", type=Path, help="take [input.synthetic] from this config")
    synth.add_argument("--out", type=Path, required=True, help="CSV file to write")
    synth.add_argument("--seed", type=int)
    synth.add_argument("--normal", type=int, help="normal row count")
    synth.add_argument("--anomalies", type=int, help="anomaly row count")
    synth.add_argument("--dim", type=int, help="feature count")
    synth.add_argument("--spread", type=float, help="normal cluster standard deviation")
    synth.add_argument("--halfwidth", type=float, help="anomaly box half-width")

    run = sub.add_parser("run", help="run the full benchmark pipeline")
    run.add_argument("--config", type=Path, help="TOML run config (default: synthetic data)")
    run.add_argument("--seed", type=int, help="overrides the config seed")
    run.add_argument("--out", type=Path, help="output directory")
    run.add_argument("--model", choices=["iforest", "ocsvm", "both"])
    run.add_argument("--eval-scope", choices=["test", "full"])

    rep = sub.add_parser("report", help="re-emit a saved report")
    rep.add_argument("report", type=Path)
    rep.add_argument("--format", choices=["json", "csv"], default="csv")
    rep.add_argument("--out", type=Path, help="file to write (default: stdout)")

    cmp_ = sub.add_parser("compare", help="metric deltas between two saved reports")
    cmp_.add_argument("first", type=Path)
    cmp_.add_argument("second", type=Path)
    cmp_.add_argument("--out", type=Path, help="JSON file to write (default: stdout)")
    return parser


def _read_report(path: Path) -> dict:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read report {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path} is not a JSON report: {exc}") from None


def _print_table(report: dict) -> None:
    rows = table_rows(report)
    widths = [max(len(h), 12) for h in TABLE_HEADER]
    print("  ".join(h.rjust(w) for h, w in zip(TABLE_HEADER, widths)))
    for row in rows:
        cells = []
        for h, w in zip(TABLE_HEADER, widths):
            v = row[h]
            cells.append((f"{v:.2f}" if isinstance(v, float) else str(v)).rjust(w))
        print("  ".join(cells))


def _cmd_synth(args: argparse.Namespace) -> int:
    spec = SyntheticSpec()
    seed = 0
    if args.config is not None:
        config = load_config(args.config)
        if config.synthetic is None:
            raise ConfigError("config has no [input.synthetic] table")
        spec, seed = config.synthetic, config.seed
    overrides = {
        "normal_count": args.normal,
        "anomaly_count": args.anomalies,
        "dimension": args.dim,
        "normal_cluster_spread": args.spread,
        "anomaly_box_halfwidth": args.halfwidth,
    }
    try:
        spec = SyntheticSpec(**{**spec.to_dict(), **{k: v for k, v in overrides.items() if v is not None}})
    except DataError as exc:
        raise ConfigError(str(exc)) from None
    if args.seed is not None:
        seed = args.seed
    frame = generate_synthetic(spec, seed)
    write_csv(frame, args.out)
    print(f"wrote {frame.row_count} rows ({int(frame.labels.sum())} anomalies) to {args.out}")
    return EXIT_OK


def _cmd_run(args: argparse.Namespace) -> int:
    config = load_config(args.config) if args.config is not None else RunConfig(synthetic=SyntheticSpec())
    config = config.with_overrides(
        seed=args.seed,
        models=args.model,
        eval_scope=args.eval_scope,
        output_dir=str(args.out) if args.out is not None else None,
    )
    report = run_pipeline(config)
    outdir = Path(config.output_dir)
    emit_report(report, "json", outdir / "report.json")
    emit_report(report, "csv", outdir / "report.csv")
    emit_plot_data(report, outdir)
    _print_table(report)
    print(f"report written to {outdir}")
    return EXIT_OK


def _cmd_report(args: argparse.Namespace) -> int:
    report = _read_report(args.report)
    if args.out is None:
        if args.format == "json":
            print(json.dumps(report, indent=2))
        else:
            _print_table(report)
        return EXIT_OK
    emit_report(report, args.format, args.out)
    return EXIT_OK


def _cmd_compare(args: argparse.Namespace) -> int:
    try:
        result = compare_reports(_read_report(args.first), _read_report(args.second))
    except (KeyError, ValueError) as exc:
        raise DataError(f"cannot compare reports: {exc}") from None
    text = json.dumps(result, indent=2)
    if args.out is None:
        print(text)
    else:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text + "\n", encoding="utf-8")
    return EXIT_OK


_COMMANDS = {"synth": _cmd_synth, "run": _cmd_run, "report": _cmd_report, "compare": _cmd_compare}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        logger.error("config error: %s", exc)
        return EXIT_CONFIG
    except PipelineError as exc:
        logger.error("%s", exc)
        return EXIT_DATA if isinstance(exc.cause, DataError) else EXIT_RUNTIME
    except DataError as exc:
        logger.error("data error: %s", exc)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - surfaced as exit code 4
        logger.exception("runtime error: %s", exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
