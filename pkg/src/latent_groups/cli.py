"""Command-line front end.

    latent-groups analyze-ancova --data flurry.csv --response strength --slgf plant --covariate thickness
    latent-groups analyze-twoway --data builtin:dog-lymphoma
    latent-groups simulate --layout twoway --true-class III --reps 100 --output summary.csv

Results go to stdout (or ``--output``) as JSON or CSV.  Failures print a JSON
error object ``{"error": {"category": ..., "message": ...}}`` on stderr and
exit nonzero.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys

from . import __version__
from .analysis import analyze
from .data import builtin_dataset, load_ancova_csv, load_twoway_csv, load_twoway_long_csv, transpose_layout
from .errors import ConfigurationError, LatentGroupsError
from .posterior import PosteriorTable
from .simulate import preset_study, run_study

THREADS_ENV = "LATENT_GROUPS_THREADS"

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2


def _num(x: float | None):
    """Round to 12 significant digits; non-finite values become null."""
    if x is None or not math.isfinite(x):
        return None
    return float(f"{x:.12g}")


def _fmt(x: float | None) -> str:
    v = _num(x)
    return "" if v is None else f"{v:.12g}"


def table_to_dict(table: PosteriorTable) -> dict:
    meta = dict(table.metadata)
    if "b" in meta:
        meta["b"] = _num(meta["b"])
    return {
        **meta,
        "models": [
            {
                "class": e.model_class,
                "scheme": None if e.spec.scheme is None else e.scheme,
                "log_marginal": _num(e.log_q),
                "prior": _num(e.prior),
                "posterior": _num(e.posterior),
                "warnings": list(e.warnings),
            }
            for e in table.sorted_entries()
        ],
        "class_aggregates": {c: _num(v) for c, v in table.class_aggregates.items()},
        "scheme_aggregates": {s: _num(v) for s, v in sorted(table.scheme_aggregates.items(), key=lambda kv: -kv[1])},
    }


def table_to_csv(table: PosteriorTable) -> str:
    """One CSV with a ``kind`` column: model rows, then class and scheme aggregates."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["kind", "class", "scheme", "log_marginal", "prior", "posterior", "warnings"])
    for e in table.sorted_entries():
        scheme = "" if e.spec.scheme is None else e.scheme
        w.writerow(["model", e.model_class, scheme, _fmt(e.log_q), _fmt(e.prior), _fmt(e.posterior), "; ".join(e.warnings)])
    for c, v in table.class_aggregates.items():
        w.writerow(["class", c, "", "", "", _fmt(v), ""])
    for s, v in sorted(table.scheme_aggregates.items(), key=lambda kv: -kv[1]):
        w.writerow(["scheme", "", s, "", "", _fmt(v), ""])
    return buf.getvalue()


def _default_threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigurationError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigurationError(f"{THREADS_ENV} must be at least 1")
    return n


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--prior", choices=["flat", "gprior"], help="prior system (default: flat for ancova, gprior for twoway)")
    p.add_argument("--classes", help="comma-separated subset of model classes, e.g. I,II,IV")
    p.add_argument("--min-group-size", type=int, help="smallest number of levels allowed in a group")
    p.add_argument("--drop-empty", action="store_true", help="drop scheme-indexed classes that have no admissible scheme")
    p.add_argument("--b", type=float, help="EXPERIMENTAL: override the fractional exponent b")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--output", "-o", help="output file (default: stdout)")
    p.add_argument("--threads", type=int, help=f"worker processes (default: ${THREADS_ENV} or 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="latent-groups", description="Bayesian detection of latent two-group structure.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-model warnings to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze-ancova", help="one-way or ANCOVA data in long CSV format")
    a.add_argument("--data", required=True, help="CSV file with a header row")
    a.add_argument("--response", required=True, help="response column")
    a.add_argument("--slgf", required=True, help="column holding the suspected latent grouping factor")
    a.add_argument("--covariate", help="continuous covariate column (omit for one-way data)")
    _add_common(a)

    t = sub.add_parser("analyze-twoway", help="unreplicated two-way layout")
    t.add_argument("--data", required=True, help="matrix CSV, long CSV (with --long) or builtin:NAME")
    t.add_argument("--slgf", choices=["rows", "cols"], default="rows", help="which factor may hide the groups")
    t.add_argument("--long", nargs=3, metavar=("RESPONSE", "ROW", "COL"), help="read long format with these columns")
    _add_common(t)

    s = sub.add_parser("simulate", help="run a simulation study and write the per-class summary CSV")
    s.add_argument("--layout", choices=["ancova", "twoway"], required=True)
    s.add_argument("--true-class", required=True)
    s.add_argument("--reps", type=int, default=100)
    s.add_argument("--seed", type=int, default=20240601)
    s.add_argument("--n-per-level", type=int, help="ancova: observations per level (default 90)")
    s.add_argument("--prior", choices=["flat", "gprior"])
    s.add_argument("--output", "-o", help="summary CSV file (default: stdout)")
    s.add_argument("--threads", type=int, help=f"worker processes (default: ${THREADS_ENV} or 1)")
    return parser


def _load(args):
    if args.command == "analyze-ancova":
        return load_ancova_csv(args.data, args.response, args.slgf, args.covariate)
    if args.data.startswith("builtin:"):
        layout = builtin_dataset(args.data)
    elif args.long:
        layout = load_twoway_long_csv(args.data, *args.long)
    else:
        layout = load_twoway_csv(args.data)
    return transpose_layout(layout) if args.slgf == "cols" else layout


def _write(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _threads(args) -> int:
    n = _default_threads() if args.threads is None else args.threads
    if n < 1:
        raise ConfigurationError("--threads must be at least 1")
    return n


def _run_analyze(args) -> int:
    data = _load(args)
    classes = None if args.classes is None else [c.strip() for c in args.classes.split(",") if c.strip()]
    if args.b is not None:
        logging.getLogger(__name__).warning("--b overrides the fractional exponent; results are experimental")
    table = analyze(
        data,
        prior_system=args.prior,
        classes=classes,
        min_group_size=args.min_group_size,
        b=args.b,
        threads=_threads(args),
        drop_empty=args.drop_empty,
    )
    if args.b is not None:
        table.metadata["experimental_b"] = True
    text = json.dumps(table_to_dict(table), indent=2) + "\n" if args.format == "json" else table_to_csv(table)
    _write(text, args.output)
    return EXIT_OK


def _run_simulate(args) -> int:
    overrides = {}
    if args.n_per_level is not None:
        overrides["n_per_level"] = args.n_per_level
    if args.prior is not None:
        overrides["prior_system"] = args.prior
    cfg = preset_study(args.layout, args.true_class, replicates=args.reps, seed=args.seed, **overrides)
    summary = run_study(cfg, threads=_threads(args))
    buf = io.StringIO()
    summary.write_csv(buf)
    _write(buf.getvalue(), args.output)
    for rep, err in summary.failures:
        print(json.dumps({"warning": {"replicate": rep, "message": err}}), file=sys.stderr)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        if args.command == "simulate":
            return _run_simulate(args)
        return _run_analyze(args)
    except LatentGroupsError as exc:
        print(json.dumps({"error": exc.to_dict()}), file=sys.stderr)
        return EXIT_USAGE if exc.category == "configuration" else EXIT_ERROR
    except OSError as exc:
        print(json.dumps({"error": {"category": "io", "message": str(exc)}}), file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
