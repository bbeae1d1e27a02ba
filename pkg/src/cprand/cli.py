"""Command-line front end.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical
consistency error.  Tables go to ``--out`` (or stdout) as CSV.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import json
import logging
import os
import sys
import warnings

from .als import SolveOptions, exact_fit
from .bench import FITCHECK_FIELDS, ITER_FIELDS, bench_fitcheck, bench_iterations
from .errors import ConfigError, NumericalConsistencyError
from .io import read_model, read_tensor, write_model, write_tensor, write_trace
from .randomized import default_sample_count
from .synthetic import (
    GridCell,
    SynthParams,
    gen_problem,
    run_experiment_grid,
    run_method,
    score,
    write_results_csv,
)

log = logging.getLogger("cprand")

METHODS = ("als", "rand", "mix", "premix")


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _words(text: str) -> list[str]:
    return [t for t in text.split(",") if t]


def _solver_flags(p: argparse.ArgumentParser):
    p.add_argument("--method", choices=METHODS, default="rand")
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--samples", type=int, default=None, help="rows per sampled solve (default 10 R ln R)")
    p.add_argument("--fit-samples", type=int, default=2**14)
    p.add_argument("--stall", type=int, default=10, help="iterations without improvement before stopping")
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--fit-tol", type=float, default=1e-4)
    p.add_argument("--fit-threshold", type=float, default=None)
    p.add_argument("--init", choices=("random", "hosvd"), default="random")
    p.add_argument("--transform", choices=("fft", "dct", "wht"), default=None)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cprand", description="Randomized CP decomposition of dense tensors.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a synthetic tensor and its true model")
    p.add_argument("--dims", type=_ints, required=True, help="e.g. 50,50,50")
    p.add_argument("--rank-true", type=int, default=5)
    p.add_argument("--collinearity", type=float, default=0.5)
    p.add_argument("--noise", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="tensor file (DNT1)")
    p.add_argument("--truth", required=True, help="true model (JSON)")

    p = sub.add_parser("decompose", help="fit a CP model to a tensor file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True, help="model JSON")
    p.add_argument("--trace", default=None, help="trace CSV")
    _solver_flags(p)

    p = sub.add_parser("bench-iter", help="mean time per iteration, no fit checks")
    p.add_argument("--methods", type=_words, default=["als", "rand", "mix"])
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--sizes", type=_ints, default=[50, 100, 200])
    p.add_argument("--rank", type=int, default=5)
    p.add_argument("--samples", type=int, default=90)
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--tensors", type=int, default=3)
    p.add_argument("--transform", choices=("fft", "dct", "wht"), default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)

    p = sub.add_parser("bench-fitcheck", help="exact vs sampled fit timing")
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--sizes", type=_ints, default=[50, 100, 200])
    p.add_argument("--rank", type=int, default=5)
    p.add_argument("--fit", type=float, default=0.95)
    p.add_argument("--fit-samples", type=int, default=2**14)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)

    p = sub.add_parser("eval", help="fit of a model and its score against a true model")
    p.add_argument("--model", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", default=None, help="JSON report (default stdout)")

    p = sub.add_parser("grid", help="synthetic experiment grid")
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--size", type=int, default=50)
    p.add_argument("--rank-true", type=int, default=5)
    p.add_argument("--collinearity", type=_floats, default=[0.5, 0.9])
    p.add_argument("--noise", type=_floats, default=[0.01, 0.1])
    p.add_argument("--ranks", type=_ints, default=[5, 6])
    p.add_argument("--methods", type=_words, default=["als", "rand", "mix"])
    p.add_argument("--tensors", type=int, default=2)
    p.add_argument("--starts", type=int, default=1)
    p.add_argument("--fit-samples", type=int, default=2**14)
    p.add_argument("--stall", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    return parser


@contextlib.contextmanager
def _output(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _write_rows(rows, fields, path):
    with _output(path) as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        for row in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def cmd_gen(args) -> int:
    prob = gen_problem(SynthParams(tuple(args.dims), args.rank_true, args.collinearity, args.noise, args.seed))
    write_tensor(prob.tensor, args.out)
    write_model(prob.truth, args.truth)
    log.info("wrote %s (noise ratio %.3g) and %s", args.out, prob.noise_norm_ratio, args.truth)
    return 0


def cmd_decompose(args) -> int:
    X = read_tensor(args.input)
    if args.init == "hosvd" and args.method != "als":
        warnings.warn("randomized methods gain nothing from HOSVD initialization")
    if args.transform is not None and args.method not in ("mix", "premix"):
        warnings.warn(f"--transform is ignored by method {args.method}")
    opts = SolveOptions(
        max_iters=args.max_iters,
        fit_tolerance=args.fit_tol,
        fit_threshold=args.fit_threshold,
        seed=args.seed,
        init=args.init,
        fit_samples=args.fit_samples,
        stall_limit=args.stall,
    )
    S = args.samples if args.samples is not None else default_sample_count(args.rank)
    model, trace = run_method(args.method, X, args.rank, opts, S, args.transform)
    write_model(model, args.out)
    if args.trace:
        write_trace(trace, args.trace)
    log.info("%s: %d iterations, final %s fit %.6f", args.method, len(trace), trace[-1].fit_kind, trace[-1].fit)
    return 0


def cmd_bench_iter(args) -> int:
    unknown = set(args.methods) - set(METHODS)
    if unknown:
        raise ConfigError(f"unknown methods {sorted(unknown)}")
    rows = bench_iterations(args.methods, args.order, args.sizes, args.rank, args.samples,
                            args.iters, args.tensors, args.seed, args.transform)
    _write_rows(rows, ITER_FIELDS, args.out)
    return 0


def cmd_bench_fitcheck(args) -> int:
    rows = bench_fitcheck(args.order, args.sizes, args.rank, args.fit, args.fit_samples,
                          args.repeats, args.seed)
    _write_rows(rows, FITCHECK_FIELDS, args.out)
    return 0


def cmd_eval(args) -> int:
    X = read_tensor(args.input)
    model, truth = read_model(args.model), read_model(args.truth)
    report = {"fit": exact_fit(X, model), "score": score(truth, model)}
    with _output(args.out) as fh:
        json.dump(report, fh)
        fh.write("\n")
    return 0


def cmd_grid(args) -> int:
    cells = []
    for C in args.collinearity:
        for eta in args.noise:
            for t in range(args.tensors):
                p = SynthParams((args.size,) * args.order, args.rank_true, C, eta, args.seed + t)
                for R in args.ranks:
                    for method in args.methods:
                        for s in range(args.starts):
                            cells.append(GridCell(p, method, R, args.seed + s))
    rows = run_experiment_grid(cells, fit_samples=args.fit_samples, stall_limit=args.stall)
    if args.out:
        write_results_csv(rows, args.out)
    else:
        _write_rows(rows, list(rows[0]) if rows else [], None)
    return 0


COMMANDS = {
    "gen": cmd_gen,
    "decompose": cmd_decompose,
    "bench-iter": cmd_bench_iter,
    "bench-fitcheck": cmd_bench_fitcheck,
    "eval": cmd_eval,
    "grid": cmd_grid,
}


def _thread_limit():
    threads = os.environ.get("CPRAND_THREADS")
    if not threads:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=int(threads))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with _thread_limit():
            return COMMANDS[args.command](args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"cprand: error: {exc}", file=sys.stderr)
        return 2
    except NumericalConsistencyError as exc:
        print(f"cprand: numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
