"""Command-line entry point: ``tempora <generate|train|backtest|sweep|report>``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from tempora import pipeline
from tempora.config import load_config
from tempora.errors import ConfigError, DataError, SchemaError

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_RUNTIME = 0, 2, 3, 4
COMMANDS = ("generate", "train", "backtest", "sweep", "report")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tempora", description="Era-wise ranking backtests.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", help="output directory (overrides the config)")
    parser.add_argument("--seed", type=int, help="master seed (overrides the config)")
    parser.add_argument("--workers", type=int, help="worker processes for members and sweep cells")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def _run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg = cfg.replace(seed=args.seed)
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        cfg = cfg.replace(workers=args.workers)
    out = Path(args.out) if args.out else cfg.output

    if args.command == "generate":
        print(pipeline.run_generate(cfg, out))
    elif args.command == "train":
        for p in pipeline.run_train(cfg, out):
            print(p)
    elif args.command == "backtest":
        result = pipeline.run_backtest(cfg)
        pipeline.write_backtest(result, out)
        print(pipeline.format_report(result.summary))
    elif args.command == "sweep":
        rows = pipeline.run_sweep(cfg)
        out.mkdir(parents=True, exist_ok=True)
        (out / "sweep.csv").write_text(pipeline.sweep_csv(rows), encoding="utf-8", newline="")
        print(pipeline.sweep_csv(rows), end="")
    else:
        summary = pipeline.report(out / "eras.csv")
        (out / "summary.csv").write_text(pipeline.summary_csv(summary), encoding="utf-8", newline="")
        print(pipeline.format_report(summary))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, SchemaError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
