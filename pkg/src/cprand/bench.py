"""Timing harness for per-iteration cost and fit-check cost."""
from __future__ import annotations

import time

import numpy as np

from .als import SolveOptions, exact_fit
from .randomized import FitEstimator, estimate_fit
from .synthetic import SynthParams, gen_prescribed_fit, gen_problem, run_method

__all__ = ["ITER_FIELDS", "FITCHECK_FIELDS", "time_per_iteration", "bench_iterations", "bench_fitcheck"]

ITER_FIELDS = ("method", "N", "I", "R", "S", "iters", "mean_time_s")
FITCHECK_FIELDS = ("N", "I", "R", "fit_samples", "exact_time_s", "sampled_time_s",
                   "exact_fit", "estimated_fit", "rel_error")


def time_per_iteration(method: str, X, rank: int, n_samples: int, iters: int, seed=0,
                       transform=None) -> float:
    """Mean seconds per outer iteration with all fit checks switched off.

    Setup (initialization, up-front mixing) is not counted.
    """
    opts = SolveOptions(max_iters=iters, check_fit=False, seed=seed)
    _, trace = run_method(method, X, rank, opts, n_samples, transform)
    return trace[-1].elapsed_seconds / len(trace)


def bench_iterations(methods, order: int, sizes, rank: int = 5, n_samples: int = 90,
                     iters: int = 100, tensors: int = 3, seed: int = 0, transform=None) -> list[dict]:
    """Mean time per iteration of each method on ``tensors`` random tensors per size."""
    rows = []
    for I in sizes:
        problems = [gen_problem(SynthParams((I,) * order, rank_true=rank, collinearity=0.5,
                                            noise=0.01, seed=seed + t))
                    for t in range(tensors)]
        for method in methods:
            times = [time_per_iteration(method, p.tensor, rank, n_samples, iters, seed + t, transform)
                     for t, p in enumerate(problems)]
            rows.append(dict(method=method, N=order, I=I, R=rank, S=n_samples, iters=iters,
                             mean_time_s=float(np.mean(times))))
    return rows


def _median_time(fn, repeats: int) -> tuple[float, object]:
    times, out = [], None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times)), out


def bench_fitcheck(order: int, sizes, rank: int = 5, fit: float = 0.95, fit_samples: int = 2**14,
                   repeats: int = 10, seed: int = 0) -> list[dict]:
    """Exact vs sampled fit on tensors built to have the prescribed exact fit."""
    rows = []
    for I in sizes:
        X, model = gen_prescribed_fit((I,) * order, rank, fit, seed)
        est = FitEstimator.from_tensor(X, fit_samples, np.random.default_rng(seed))
        t_exact, f_exact = _median_time(lambda: exact_fit(X, model), repeats)
        t_est, f_est = _median_time(lambda: estimate_fit(model, est), repeats)
        rows.append(dict(N=order, I=I, R=rank, fit_samples=fit_samples, exact_time_s=t_exact,
                         sampled_time_s=t_est, exact_fit=float(f_exact), estimated_fit=float(f_est),
                         rel_error=float(abs(f_est - f_exact) / abs(f_exact))))
    return rows
