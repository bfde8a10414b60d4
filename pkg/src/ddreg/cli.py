"""Command-line entry point: ``ddreg {fit,predict,bench,permtest,kde}``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from .core import DEFAULT_D, DDRError
from .ddr import HyperparameterGrid, ddr_fit, ddr_predict
from .io import emit_densities, load_csv, load_model, load_outcome, load_queries, save_model

logger = logging.getLogger("ddreg")


def _floats(text):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _names(text):
    return [v.strip() for v in text.split(",") if v.strip()]


def _hpgrid(args) -> HyperparameterGrid:
    default = HyperparameterGrid()
    return HyperparameterGrid(
        h_candidates=args.h_grid or default.h_candidates,
        ridge_candidates=args.ridge_grid or default.ridge_candidates,
        sigma_multipliers=args.sigma_grid or default.sigma_multipliers,
        eta_candidate_count=args.eta_count if args.eta_count is not None else default.eta_candidate_count,
    )


def _check_d(d):
    if d < 3:
        raise DDRError("invalid argument", "--d must be at least 3")


def _add_data_args(p, treatment_required=False):
    p.add_argument("--input", required=True, help="CSV file with a header row")
    p.add_argument("--outcome", required=True, help="outcome column")
    p.add_argument("--treatment", required=treatment_required, help="treatment label column")
    p.add_argument("--covariates", type=_names, help="comma-separated covariate columns (default: all remaining)")


def _add_grid_args(p):
    p.add_argument("--d", type=int, default=DEFAULT_D, help="outcome grid size (default %(default)s)")
    p.add_argument("--h-grid", type=_floats, help="candidate h values")
    p.add_argument("--ridge-grid", type=_floats, help="candidate ridge penalties")
    p.add_argument("--sigma-grid", type=_floats, help="candidate median-distance multipliers")
    p.add_argument("--eta-count", type=int, help="number of eta candidates")


def cmd_fit(args):
    _check_d(args.d)
    data = load_csv(args.input, args.outcome, args.treatment, args.covariates)
    model = ddr_fit(data, d=args.d, hpgrid=_hpgrid(args))
    save_model(model, args.out)
    print(json.dumps({"arms": {k: r.summary() for k, r in model.reports.items()}}))


def cmd_predict(args):
    model = load_model(args.model)
    Xq = load_queries(args.queries, model.covariate_names)
    dens = ddr_predict(model, args.arm, Xq)
    emit_densities(dens, args.out, args.format, queries=Xq)


def cmd_bench(args):
    from .synth import KINDS, run_benchmark, write_results_csv, write_results_json

    _check_d(args.d)
    kinds = KINDS if args.kinds == "all" else tuple(_names(args.kinds))
    for k in kinds:
        if k not in KINDS:
            raise DDRError("invalid argument", f"unknown kind {k!r}; choose from {', '.join(KINDS)}")
    results = run_benchmark(kinds, args.dims, args.reps, n=args.n, d=args.d, hpgrid=_hpgrid(args),
                            seed=args.seed, n_jobs=args.jobs or os.cpu_count() or 1, method=args.method)
    write_results_csv(results, args.out, timing=args.timing)
    if args.json:
        write_results_json(results, args.json, timing=args.timing)
    failed = sum(1 for r in results if r.error)
    logger.info("%d replications, %d failed", len(results), failed)


def cmd_permtest(args):
    from .inference import permutation_test

    _check_d(args.d)
    data = load_csv(args.input, args.outcome, args.treatment, args.covariates)
    if args.b < 19:
        raise DDRError("insufficient permutations", "insufficient permutations for α = 0.05")
    Xq = load_queries(args.query, data.covariate_names)
    arm0 = arm1 = None
    if args.arm1 is not None:
        others = [a for a in data.arms() if a != args.arm1]
        if len(others) != 1 or args.arm1 not in data.arms():
            raise DDRError("unknown arm", f"--arm1 {args.arm1!r} must name one of exactly two arms")
        arm1, arm0 = args.arm1, others[0]
    model = ddr_fit(data, d=args.d, hpgrid=_hpgrid(args))
    tests = []
    for x in Xq:
        res = permutation_test(data, x, args.b, args.seed, model, arm1=arm1, arm0=arm0)
        tests.append({"x": x.tolist(), **res.to_dict(include_permuted=args.include_permuted)})
    text = json.dumps({"tests": tests})
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def cmd_kde(args):
    from .core import make_grid
    from .inference import kde_ucv, welch_t_test

    _check_d(args.d)
    y_all, labels = load_outcome(args.input, args.outcome, args.treatment)
    out = {"arms": {}}
    samples = {}
    arms = ["all"] if labels is None else sorted(set(labels))
    for arm in arms:
        y = y_all if labels is None else y_all[labels == arm]
        samples[arm] = y
        res = kde_ucv(y, make_grid(y, args.d))
        out["arms"][arm] = {
            "bandwidth": res.bandwidth,
            "grid": res.density.grid.points.tolist(),
            "density": res.density.values.tolist(),
        }
    if len(samples) == 2:
        a0, a1 = sorted(samples)
        t, p = welch_t_test(samples[a1], samples[a0])
        out["welch"] = {"arm1": a1, "arm0": a0, "t": t, "p_value": p}
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(out) + "\n")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(2, f"error: usage: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ddreg", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit per-arm conditional density models")
    _add_data_args(p)
    _add_grid_args(p)
    p.add_argument("--out", required=True, help="model JSON path")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predict densities at query covariates")
    p.add_argument("--model", required=True)
    p.add_argument("--arm", default="all", help="treatment arm label (default: %(default)s)")
    p.add_argument("--queries", required=True, help="CSV of query covariates")
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("bench", help="synthetic true-MISE benchmark")
    p.add_argument("--kinds", default="all")
    p.add_argument("--dims", type=_ints, default=(2, 4, 6, 8, 10, 15, 20))
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default: all cores)")
    p.add_argument("--method", choices=("ddr", "kde"), default="ddr")
    p.add_argument("--timing", action="store_true", help="record wall time (output no longer reproducible)")
    p.add_argument("--json", help="also write results as JSON")
    p.add_argument("--out", required=True)
    _add_grid_args(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("permtest", help="sup-CDF permutation test between two arms")
    _add_data_args(p, treatment_required=True)
    _add_grid_args(p)
    p.add_argument("--query", required=True, help="CSV of query covariates (one test per row)")
    p.add_argument("--b", type=int, default=2000, help="number of permutations")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--arm1", help="label of arm 1 (default: second label in sorted order)")
    p.add_argument("--include-permuted", action="store_true", help="include per-permutation statistics")
    p.add_argument("--out", help="JSON output path (default: stdout)")
    p.set_defaults(func=cmd_permtest)

    p = sub.add_parser("kde", help="unconditional KDE per arm (UCV bandwidth)")
    p.add_argument("--input", required=True)
    p.add_argument("--outcome", required=True)
    p.add_argument("--treatment")
    p.add_argument("--d", type=int, default=DEFAULT_D)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_kde)
    return parser


def _error_code(exc: DDRError) -> str:
    return exc.code.replace(" ", "_")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except DDRError as exc:
        print(f"error: {_error_code(exc)}: {exc.message}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: io_error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
