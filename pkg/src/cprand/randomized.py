"""Randomized CP-ALS: uniform fiber sampling and sampled-fit stopping."""
from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .als import SolveOptions, TraceRecord, _zero_result, exact_fit, initial_model
from .errors import ConfigError
from .ktensor import KruskalModel, model_entries, normalize_columns
from .linalg import least_squares
from .tensor import DenseTensor, gather_fibers, tensor_norm

__all__ = [
    "SampleSet",
    "FitEstimator",
    "default_sample_count",
    "draw_samples",
    "exhaustive_samples",
    "skr",
    "sampled_update",
    "estimate_fit",
    "chernoff_min_samples",
    "should_stop",
    "cprand",
]


@dataclass(frozen=True)
class SampleSet:
    """``S`` multiindices for mode ``mode`` with that mode left out.

    Row ``j`` of ``idxs`` holds ``(i_1, .., i_{n-1}, i_{n+1}, .., i_N)``.
    Rows may repeat.
    """

    mode: int
    idxs: np.ndarray

    @property
    def count(self) -> int:
        return self.idxs.shape[0]


def default_sample_count(rank: int) -> int:
    """``round(10 R ln R)``, with 10 for ``R = 1``."""
    if rank < 1:
        raise ConfigError("rank must be at least 1")
    if rank == 1:
        return 10
    return int(round(10 * rank * math.log(rank)))


def draw_samples(dims, n: int, count: int, rng) -> SampleSet:
    """``count`` i.i.d. uniform multiindices over every mode but ``n``."""
    if count < 1:
        raise ConfigError("sample count must be at least 1")
    rng = np.random.default_rng(rng)
    others = [I for m, I in enumerate(dims) if m != n]
    idxs = np.empty((count, len(others)), dtype=np.int64)
    for k, I in enumerate(others):
        idxs[:, k] = rng.integers(0, I, size=count)
    return SampleSet(n, idxs)


def exhaustive_samples(dims, n: int) -> SampleSet:
    """Every multiindex once, in unfolding column order."""
    others = [I for m, I in enumerate(dims) if m != n]
    total = int(np.prod(others, dtype=np.int64))
    idxs = np.stack(np.unravel_index(np.arange(total), others, order="F"), axis=1)
    return SampleSet(n, idxs.astype(np.int64).reshape(total, len(others)))


def skr(samples: SampleSet, factors, n: Optional[int] = None) -> np.ndarray:
    """Sampled Khatri-Rao rows as Hadamard products of factor rows, shape ``(S, R)``."""
    n = samples.mode if n is None else n
    others = [m for m in range(len(factors)) if m != n]
    idxs = samples.idxs
    if idxs.shape[1] != len(others):
        raise IndexError(f"sample table of width {idxs.shape[1]} does not fit mode {n}")
    Z = np.ones((idxs.shape[0], factors[0].shape[1]), dtype=np.result_type(*factors))
    for k, m in enumerate(others):
        col = idxs[:, k]
        if col.size and (col.min() < 0 or col.max() >= factors[m].shape[0]):
            raise IndexError(f"sample index out of range for mode {m}")
        Z *= factors[m][col]
    return Z


def sampled_update(Z_S: np.ndarray, X_S: np.ndarray) -> np.ndarray:
    """Factor minimizing ``||Z_S A^T - X_S^T||``; ``X_S`` is ``I_n x S``."""
    S, R = Z_S.shape
    if S < R:
        raise ConfigError(f"need at least R={R} sampled rows, got S={S}")
    if X_S.shape[1] != S:
        raise ValueError(f"sampled fibers have {X_S.shape[1]} columns, expected {S}")
    return least_squares(Z_S, X_S.T).T


@dataclass
class FitEstimator:
    """Fixed set of tensor entries used to estimate the fit, plus best-fit tracking.

    When ``sample_count >= P`` every entry is used once and the estimate is
    exact.  Otherwise the entries are i.i.d. uniform draws.
    """

    idxs: np.ndarray
    x_values: np.ndarray
    x_norm: float
    total: int
    stall_limit: int = 10
    best_fit: float = -np.inf
    stall_count: int = 0

    @classmethod
    def from_tensor(cls, X: DenseTensor, sample_count: int = 2**14, rng=None, stall_limit: int = 10):
        rng = np.random.default_rng(rng)
        total = X.size
        if sample_count >= total:
            lin = np.arange(total)
        else:
            lin = rng.integers(0, total, size=sample_count)
        idxs = np.stack(np.unravel_index(lin, X.dims, order="F"), axis=1).astype(np.int64)
        return cls(
            idxs=idxs,
            x_values=X.values[lin],
            x_norm=tensor_norm(X),
            total=total,
            stall_limit=stall_limit,
        )

    @property
    def sample_count(self) -> int:
        return self.idxs.shape[0]

    def estimate(self, model: KruskalModel) -> float:
        return estimate_fit(model, self)


def estimate_fit(model: KruskalModel, est: FitEstimator) -> float:
    """``1 - sqrt(P * mean squared error on the sampled entries) / ||X||``."""
    if est.x_norm == 0:
        return 1.0
    err = est.x_values - model_entries(model, est.idxs)
    mu_hat = float(np.mean(np.abs(err) ** 2))
    return 1.0 - math.sqrt(est.total * mu_hat) / est.x_norm


def chernoff_min_samples(gamma: float, mu: float, mu_max: float = 1.0, confidence: float = 0.98) -> int:
    """Smallest sample count for which both tail bounds

        exp(-2 gamma^2 mu^2 P / mu_max^2)   (upper tail)
        exp(-gamma^2 mu^2 P / mu_max^2)     (lower tail)

    are at most ``1 - confidence``.  Each tail gets the full failure budget
    and the result is rounded up.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    if not 0 < mu <= mu_max:
        raise ValueError("need 0 < mu <= mu_max")
    if not 0 < confidence < 1:
        raise ValueError("confidence must lie in (0, 1)")
    log_fail = math.log(1.0 / (1.0 - confidence))
    scale = (gamma * mu / mu_max) ** 2
    upper = log_fail / (2.0 * scale)
    lower = log_fail / scale
    return max(1, math.ceil(max(upper, lower) - 1e-9))


def should_stop(est: FitEstimator, new_fit: float, iteration: int, opts: SolveOptions) -> bool:
    """Update the best fit seen so far and decide whether to terminate."""
    if new_fit > est.best_fit:
        est.best_fit = new_fit
        est.stall_count = 0
    else:
        est.stall_count += 1
    if opts.fit_threshold is not None and new_fit >= opts.fit_threshold:
        return True
    if iteration >= opts.max_iters:
        return True
    return est.stall_count >= est.stall_limit


def _warn_hosvd(opts: SolveOptions):
    if isinstance(opts.init, str) and opts.init == "hosvd":
        warnings.warn("randomized solvers gain nothing from HOSVD initialization", stacklevel=3)


def _check_samples(rank: int, n_samples: Optional[int], opts: SolveOptions) -> int:
    S = default_sample_count(rank) if n_samples is None else int(n_samples)
    if not opts.exhaustive and S < rank:
        raise ConfigError(f"sample count S={S} is smaller than the rank R={rank}")
    return S


def _sampled_loop(
    X_fit: DenseTensor,
    model: KruskalModel,
    opts: SolveOptions,
    rng: np.random.Generator,
    update: Callable[[KruskalModel, int], None],
    callback,
) -> list:
    """Outer iteration shared by the sampled solvers.

    ``update(model, n)`` re-solves and normalizes factor ``n``.  The fit is
    checked once per outer iteration against ``X_fit``.
    """
    est = None
    if opts.check_fit:
        est = FitEstimator.from_tensor(X_fit, opts.fit_samples, rng, opts.stall_limit)
    trace: list[TraceRecord] = []
    start = time.perf_counter()
    for it in range(1, opts.max_iters + 1):
        for n in range(X_fit.ndim):
            update(model, n)
        if callback is not None:
            callback(it, model)
        if est is None:
            trace.append(TraceRecord(it, time.perf_counter() - start, float("nan"), "none", float("nan")))
            continue
        if opts.exact_fit_check:
            fit, kind = exact_fit(X_fit, model), "exact"
        else:
            fit, kind = estimate_fit(model, est), "estimated"
        stop = should_stop(est, fit, it, opts)
        trace.append(TraceRecord(it, time.perf_counter() - start, fit, kind, est.best_fit))
        if stop:
            break
    return trace


def cprand(
    X: DenseTensor,
    rank: int,
    n_samples: Optional[int] = None,
    opts: Optional[SolveOptions] = None,
    callback: Optional[Callable[[int, KruskalModel], None]] = None,
) -> tuple[KruskalModel, list]:
    """CP-ALS with each least squares problem solved on ``n_samples`` sampled rows.

    A fresh uniform sample of fibers is drawn for every mode update.  The
    fit is estimated on a fixed set of ``opts.fit_samples`` entries, and the
    run stops once the best estimate has not improved for
    ``opts.stall_limit`` iterations (or on ``max_iters`` / ``fit_threshold``).
    Neither the true nor the estimated fit is monotone.

    Returns
    -------
    model : KruskalModel
        The model at termination.
    trace : list of TraceRecord
    """
    opts = opts or SolveOptions()
    if not isinstance(X, DenseTensor):
        X = DenseTensor(X)
    S = _check_samples(rank, n_samples, opts)
    _warn_hosvd(opts)
    if tensor_norm(X) == 0:
        return _zero_result(X, rank)
    rng = np.random.default_rng(opts.seed)
    model = initial_model(X, rank, opts, rng)
    full = [exhaustive_samples(X.dims, n) for n in range(X.ndim)] if opts.exhaustive else None

    def update(model, n):
        samples = full[n] if full is not None else draw_samples(X.dims, n, S, rng)
        Z_S = skr(samples, model.factors, n)
        X_S = gather_fibers(X, n, samples)
        model.factors[n] = sampled_update(Z_S, X_S)
        normalize_columns(model, n, absorb=False, rng=rng)

    trace = _sampled_loop(X, model, opts, rng, update, callback)
    return model, trace
