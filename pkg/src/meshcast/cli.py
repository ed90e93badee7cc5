"""Command-line entry points: ``meshcast`` (one experiment) and ``meshcast-sweep``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import ConfigError, GeneratorError, GraphFormatError, SgstConstructionError
from .harness import ExperimentConfig, SweepConfig, aggregate_csv, run_experiment, sweep

EXIT_OK, EXIT_CONFIG, EXIT_CONSTRUCTION, EXIT_IO = 0, 2, 3, 4


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="meshcast", description="Run broadcast trials on a mesh graph.")
    src = ap.add_mutually_exclusive_group(required=True)
    src.add_argument("--graph", metavar="PATH", help="edge-list graph file")
    src.add_argument("--gen", metavar="SPEC", help='generator spec, e.g. "expander(128,8)"')
    ap.add_argument("--protocol", default="robust", help="decay, faultless, robust or multi")
    ap.add_argument("--p", type=float, default=0.0, help="fault probability")
    ap.add_argument("--delta", type=float, default=0.1, help="target failure probability")
    ap.add_argument("--x", type=int, default=None, help="ranking parameter (default ceil(log2 n))")
    ap.add_argument("--k", type=int, default=None, help="message count (multi only)")
    ap.add_argument("--trials", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--max-rounds", type=int, default=None)
    ap.add_argument("--out", metavar="PATH", help="summary CSV path (stdout when omitted)")
    ap.add_argument("--trace", choices=("summary", "events"), default="summary")
    ap.add_argument("--export-schedule", metavar="PATH")
    ap.add_argument("--c-mult", type=int, default=6, help="robust superround multiplier")
    ap.add_argument("--block-size", type=int, default=None, help="robust block size S")
    ap.add_argument("--source", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1, help="worker processes for trials")
    ap.add_argument("--timing", action="store_true", help="add a wall_time_ms column")
    return ap


def _guarded(fn):
    try:
        return fn()
    except (ConfigError, GraphFormatError, GeneratorError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SgstConstructionError as exc:
        print(f"construction failure: {exc}", file=sys.stderr)
        return EXIT_CONSTRUCTION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = ExperimentConfig(**vars(args))

    def go():
        res = run_experiment(cfg)
        if not cfg.out:
            sys.stdout.write(res.summary_csv())
        return EXIT_OK

    return _guarded(go)


def build_sweep_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="meshcast-sweep", description="Grid sweep with aggregate CSV output.")
    ap.add_argument("--family", default="path({n})", help='graph template, e.g. "expander({n},8)"')
    ap.add_argument("--n", type=int, nargs="+", default=[16])
    ap.add_argument("--protocol", nargs="+", default=["robust"])
    ap.add_argument("--p", type=float, nargs="+", default=[0.0])
    ap.add_argument("--k", type=int, nargs="+", default=[1])
    ap.add_argument("--trials", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--delta", type=float, default=0.1)
    ap.add_argument("--max-rounds", type=int, default=None)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", metavar="PATH")
    return ap


def sweep_main(argv=None) -> int:
    args = vars(build_sweep_parser().parse_args(argv))
    out = args.pop("out")

    def go():
        text = aggregate_csv(sweep(SweepConfig(**args)))
        if out:
            Path(out).write_text(text, newline="\n")
        else:
            sys.stdout.write(text)
        return EXIT_OK

    return _guarded(go)


if __name__ == "__main__":
    sys.exit(main())
