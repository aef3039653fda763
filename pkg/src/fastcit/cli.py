"""Command line entry point: ``fastcit {gen,test,sweep,summarize}``.

Exit status is 0 on success, 1 on usage errors and 2 on data errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .bench import (
    SweepConfig,
    aggregate_metrics,
    read_records,
    run_sweep,
    summarize_errors,
    write_metrics,
    write_records,
    write_summary,
)
from .core import FcitError
from .datasets import generate, make_spec
from .fit import FitConfig, auto_test
from .io import DataFormatError, parse_columns, read_csv, write_dataset

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fastcit", description="Fast (conditional) independence testing with decision trees.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    gen = sub.add_parser("gen", help="write a synthetic dataset as CSV plus metadata")
    gen.add_argument("--setting", required=True, choices=["lingauss", "chaos", "hybrid", "pnl"])
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--dim", type=int)
    gen.add_argument("--alpha", type=float)
    gen.add_argument("--gamma", type=int)
    gen.add_argument("--dependent", action="store_true")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)

    test = sub.add_parser("test", help="run the test on columns of a CSV file")
    test.add_argument("--data", required=True)
    test.add_argument("--x-cols", required=True)
    test.add_argument("--y-cols", required=True)
    test.add_argument("--z-cols")
    test.add_argument("--seed", type=int, default=0)
    test.add_argument("--n-perm", type=int, default=8)
    test.add_argument("--frac-test", type=float, default=0.1)
    test.add_argument("--bootstrap", action="store_true")
    test.add_argument("--workers", type=int)

    sweep = sub.add_parser("sweep", help="run a benchmark sweep from a JSON config")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--out", help="records CSV path (default: standard output)")
    sweep.add_argument("--workers", type=int)

    summ = sub.add_parser("summarize", help="turn a records CSV into error and metric tables")
    summ.add_argument("--records", required=True)
    summ.add_argument("--out", required=True, help="error summary CSV")
    summ.add_argument("--metrics-out", help="metrics CSV (default: <out stem>.metrics.csv)")
    summ.add_argument("--alpha", type=float, default=0.05)
    summ.add_argument("--time-cap", type=float, default=60.0)
    return parser


def _gen(args) -> int:
    params = {
        "lingauss": {"dim": args.dim},
        "pnl": {"dim": args.dim},
        "chaos": {"alpha": args.alpha},
        "hybrid": {"gamma": args.gamma, "dim": args.dim},
    }[args.setting]
    missing = [k for k, v in params.items() if v is None]
    if missing:
        raise UsageError(f"--setting {args.setting} requires --{' --'.join(missing)}")
    ds = generate(make_spec(args.setting, params, args.dependent, args.n, args.seed))
    write_dataset(ds, args.out)
    return EXIT_OK


def _test(args) -> int:
    _, data = read_csv(args.data)
    try:
        xc = parse_columns(args.x_cols, data.shape[1])
        yc = parse_columns(args.y_cols, data.shape[1])
        zc = parse_columns(args.z_cols, data.shape[1]) if args.z_cols else None
    except ValueError as exc:
        if isinstance(exc, DataFormatError):
            raise
        raise UsageError(str(exc)) from None
    cfg = FitConfig(
        n_perm=args.n_perm, frac_test=args.frac_test, use_bootstrap=args.bootstrap,
        seed=args.seed, workers=args.workers,
    )
    out = auto_test(data[:, xc], data[:, yc], data[:, zc] if zc else None, cfg)
    json.dump(out.to_dict(), sys.stdout, indent=2)
    sys.stdout.write("\n")
    return EXIT_OK


def _sweep(args) -> int:
    try:
        cfg = SweepConfig.from_json(args.config)
    except (OSError, json.JSONDecodeError, TypeError) as exc:
        raise DataFormatError(f"cannot load config {args.config}: {exc}") from exc
    records = run_sweep(cfg, workers=args.workers)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            write_records(records, fh, cfg.digest())
    else:
        write_records(records, sys.stdout, cfg.digest())
    return EXIT_OK


def _summarize(args) -> int:
    try:
        with open(args.records, newline="") as fh:
            records, digest = read_records(fh)
    except (OSError, ValueError, KeyError) as exc:
        raise DataFormatError(f"cannot read records {args.records}: {exc}") from exc
    summary = summarize_errors(records, args.alpha, args.time_cap)
    metrics = aggregate_metrics(records, args.time_cap)
    with open(args.out, "w", newline="") as fh:
        write_summary(summary, metrics, fh, digest)
    metrics_out = args.metrics_out or str(Path(args.out).with_suffix("")) + ".metrics.csv"
    with open(metrics_out, "w", newline="") as fh:
        write_metrics(metrics, fh, digest)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    handler = {"gen": _gen, "test": _test, "sweep": _sweep, "summarize": _summarize}[args.command]
    try:
        return handler(args)
    except UsageError as exc:
        print(f"fastcit {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FcitError, OSError) as exc:
        print(f"fastcit {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
