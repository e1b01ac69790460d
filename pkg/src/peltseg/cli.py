"""Command-line interface: ``peltseg detect | simulate | bench``.

Changepoints in every output use the change-after-index convention: a value
``t`` means the change happens between observations ``t`` and ``t + 1``
(1-based). Data goes to stdout or ``--out``; diagnostics go to stderr.

Exit codes: 0 success, 2 unreadable input or bad arguments, 3 non-finite
values, 4 infeasible model, series or design.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from .core import ChangepointError, InfeasibleError, TimeSeries
from .costs import make_cost_model
from .penalty import concave_iteration, parse_penalty
from .search import binary_segmentation, optimal_partitioning, pelt, segment_neighbourhood, select_from_neighbourhood
from .simeval import CSV_COLUMNS, SimDesign, generate_ar_series, generate_variance_series, run_benchmark

EXIT_OK = 0
EXIT_UNREADABLE = 2
EXIT_NONFINITE = 3
EXIT_INFEASIBLE = 4


class CLIError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def read_series(path: str, column: str | None = None) -> np.ndarray:
    """Read one value per line, or one column of a CSV file (header optional).

    ``column`` is a header name or a 0-based index. Raises :class:`CLIError`
    with exit code 2 for unreadable input and 3 for non-finite values.
    """
    try:
        text = sys.stdin.read() if path == "-" else Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise CLIError(f"cannot read {path}: {exc}", EXIT_UNREADABLE) from None
    rows = [(i + 1, row) for i, row in enumerate(csv.reader(io.StringIO(text)))]
    rows = [(ln, row) for ln, row in rows if row and any(f.strip() for f in row)]
    if not rows:
        raise CLIError(f"{path}: no data", EXIT_UNREADABLE)

    first = rows[0][1]
    idx = 0
    if column is not None:
        if column.isdigit():
            idx = int(column)
        else:
            names = [f.strip() for f in first]
            if column not in names:
                raise CLIError(f"{path}: no column named {column!r}", EXIT_UNREADABLE)
            idx = names.index(column)
            rows = rows[1:]
    if rows and (column is None or column.isdigit()):
        _, row = rows[0]
        if idx < len(row) and not _is_number(row[idx].strip()) and row[idx].strip():
            rows = rows[1:]

    values, bad = [], []
    for ln, row in rows:
        field = row[idx].strip() if idx < len(row) else ""
        if field == "":
            bad.append(ln)
            values.append(math.nan)
            continue
        try:
            v = float(field)
        except ValueError:
            raise CLIError(f"{path}:{ln}: not a number: {field!r}", EXIT_UNREADABLE) from None
        if not math.isfinite(v):
            bad.append(ln)
        values.append(v)
    if bad:
        raise CLIError(f"{path}: non-finite values on lines {bad}", EXIT_NONFINITE)
    if not values:
        raise CLIError(f"{path}: no data", EXIT_UNREADABLE)
    return np.asarray(values)


def _model_from_args(args):
    mu = None
    if args.mu not in (None, "auto"):
        try:
            mu = float(args.mu)
        except ValueError:
            raise CLIError(f"--mu must be a number or 'auto', got {args.mu!r}", EXIT_UNREADABLE) from None
    try:
        return make_cost_model(args.model, p_max=args.p_max, mu=mu, min_segment_length=args.min_seg)
    except ChangepointError as exc:
        raise CLIError(str(exc), EXIT_UNREADABLE) from None


def detect(args) -> dict:
    values = read_series(args.input, args.column)
    series = TimeSeries(values)
    if args.diff:
        try:
            series = series.diff(args.diff)
        except ChangepointError as exc:
            raise CLIError(str(exc), EXIT_INFEASIBLE) from None
    model = _model_from_args(args)
    try:
        penalty = parse_penalty(args.penalty, model, series.n)
    except ChangepointError as exc:
        raise CLIError(str(exc), EXIT_UNREADABLE) from None

    extra: dict = {}
    try:
        if args.algorithm == "sn":
            q = args.Q if args.Q is not None else 10
            seg = select_from_neighbourhood(segment_neighbourhood(series, model, q), penalty)
            extra["Q"] = q
        elif not penalty.is_linear:
            if args.algorithm != "pelt":
                raise CLIError("concave penalties need --algorithm pelt or sn", EXIT_UNREADABLE)
            result = concave_iteration(series, model, penalty)
            seg = result.segmentation
            extra["iterations"] = result.iterations
            extra["converged"] = result.converged
            extra["gammas"] = [r.gamma for r in result.trace]
        elif args.algorithm == "pelt":
            seg = pelt(series, model, penalty.beta)
        elif args.algorithm == "op":
            seg = optimal_partitioning(series, model, penalty.beta)
        else:
            seg = binary_segmentation(series, model, penalty.beta)
    except InfeasibleError as exc:
        raise CLIError(str(exc), EXIT_INFEASIBLE) from None

    out = {
        "algorithm": args.algorithm,
        "model": model.config(),
        **seg.to_dict(),
        "penalty": penalty.describe(),
        "diff": args.diff,
    }
    if "max_candidates" in seg.info:
        out["pruning_stats"] = {k: seg.info[k] for k in ("K", "max_candidates", "mean_candidates", "evaluations")}
    out.update(extra)
    return out


def _design_from_args(args, n: int) -> SimDesign:
    growth = args.growth or ("ar" if args.study == "ar" else "linear")
    gap = args.min_gap or (50 if args.study == "ar" else 30)
    return SimDesign(n=n, growth=growth, min_gap=gap, law=args.study, seed=args.seed, m=args.m)


def simulate(args) -> dict:
    design = _design_from_args(args, args.n)
    try:
        if args.study == "ar":
            series, truth = generate_ar_series(design)
            params = [
                {"order": o, "coefficients": c}
                for o, c in zip(truth.info["orders"], truth.info["coefficients"])
            ]
        else:
            series, truth, _ = generate_variance_series(design)
            params = [{"mean": 0.0, "variance": v} for v in truth.info["variances"]]
    except ChangepointError as exc:
        raise CLIError(str(exc), EXIT_INFEASIBLE) from None
    out = Path(args.out)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        fh.write("value\n")
        for v in series.values:
            fh.write(f"{float(v)!r}\n")
    sidecar = out.with_suffix(".truth.json")
    truth_doc = {
        "convention": "change-after-index",
        "design": {"n": design.n, "growth": design.growth, "min_gap": design.min_gap,
                   "law": design.law, "seed": design.seed, "m": design.n_changepoints},
        "n": truth.n,
        "changepoints": list(truth.changepoints),
        "segments": params,
    }
    sidecar.write_text(json.dumps(truth_doc, indent=2) + "\n", encoding="utf-8")
    return {"series": str(out), "truth": str(sidecar), "changepoints": list(truth.changepoints)}


def bench(args) -> list[dict]:
    try:
        ns = [int(x) for x in args.n.split(",") if x.strip()]
    except ValueError:
        raise CLIError(f"--n must be a comma-separated list of integers, got {args.n!r}", EXIT_UNREADABLE) from None
    algorithms = [a.strip() for a in args.algorithms.split(",") if a.strip()]
    model = _model_from_args(args)
    try:
        scenarios = [_design_from_args(args, n) for n in ns]
        for d in scenarios:
            d.check()
        penalty_spec = args.penalty

        def penalty(n, mdl):
            return parse_penalty(penalty_spec, mdl, n)

        if not penalty(ns[0], model).is_linear:
            raise CLIError("bench needs a linear penalty (sic, aic or manual:<x>)", EXIT_UNREADABLE)
        result = run_benchmark(
            scenarios, algorithms, model, penalty, reps=args.reps, seed=args.seed,
            timing_repeats=args.timing_repeats,
        )
    except InfeasibleError as exc:
        raise CLIError(str(exc), EXIT_INFEASIBLE) from None
    except ChangepointError as exc:
        raise CLIError(str(exc), EXIT_UNREADABLE) from None
    for err in result.errors:
        print(f"rep failed: {err}", file=sys.stderr)
    if args.out:
        result.write_csv(args.out)
    else:
        writer = csv.DictWriter(sys.stdout, fieldnames=CSV_COLUMNS, extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        writer.writerows(result.rows)
    return result.summary


def _print_summary(summary: list[dict], stream) -> None:
    header = f"{'scenario':<24}{'algorithm':<10}{'reps':>5}{'runtime_s':>12}{'cost':>14}{'mse':>10}{'true':>8}{'false':>8}"
    print(header, file=stream)
    for row in summary:
        print(
            f"{row['scenario']:<24}{row['algorithm']:<10}{row['reps']:>5}{row['runtime_s']:>12.4g}"
            f"{row['cost']:>14.6g}{row['mse']:>10.4g}{row['true_det']:>8.2f}{row['false_det']:>8.2f}",
            file=stream,
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="peltseg", description="Exact multiple changepoint detection.")
    sub = parser.add_subparsers(dest="command", required=True)

    def model_flags(p):
        p.add_argument("--model", choices=["mean", "var", "meanvar", "ar-mdl"], default="meanvar")
        p.add_argument("--penalty", default="sic",
                       help="sic, aic, manual:<x>, mdl, concave:sqrt[:<beta>] or concave:log[:<beta>]")
        p.add_argument("--p-max", dest="p_max", type=int, default=7)
        p.add_argument("--mu", default=None, help="fixed mean for --model var: a number or 'auto'")
        p.add_argument("--min-seg", dest="min_seg", type=int, default=None)

    p = sub.add_parser("detect", help="segment a series read from a file ('-' for stdin)")
    p.add_argument("input")
    model_flags(p)
    p.add_argument("--algorithm", choices=["pelt", "op", "bs", "sn"], default="pelt")
    p.add_argument("--Q", type=int, default=None, help="max changepoints for --algorithm sn (default 10)")
    p.add_argument("--diff", type=int, default=0, help="difference the series this many times first")
    p.add_argument("--column", default=None, help="CSV column name or 0-based index")
    p.add_argument("--out", default=None)

    def design_flags(p):
        p.add_argument("--study", choices=["variance", "ar"], default="variance")
        p.add_argument("--growth", choices=["linear", "sqrt", "fixed", "ar"], default=None)
        p.add_argument("--m", type=int, default=None, help="override the number of changepoints")
        p.add_argument("--min-gap", dest="min_gap", type=int, default=None)
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("simulate", help="write a simulated series and its truth")
    p.add_argument("--n", type=int, required=True)
    design_flags(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("bench", help="run the benchmark and write a CSV")
    p.add_argument("--n", default="1000,2000,5000")
    design_flags(p)
    model_flags(p)
    p.set_defaults(model="var", mu="0")
    p.add_argument("--algorithms", default="pelt,op,bs,subbs")
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--timing-repeats", dest="timing_repeats", type=int, default=1)
    p.add_argument("--out", default=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "detect":
            doc = detect(args)
            text = json.dumps(doc, indent=2) + "\n"
            if args.out:
                Path(args.out).write_text(text, encoding="utf-8")
            else:
                sys.stdout.write(text)
        elif args.command == "simulate":
            doc = simulate(args)
            print(f"wrote {doc['series']} and {doc['truth']}", file=sys.stderr)
        else:
            summary = bench(args)
            _print_summary(summary, sys.stdout if args.out else sys.stderr)
    except CLIError as exc:
        print(f"peltseg: {exc}", file=sys.stderr)
        return exc.code
    except ChangepointError as exc:
        print(f"peltseg: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
