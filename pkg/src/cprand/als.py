"""Alternating least squares for the CP model, plus shared solver plumbing."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
import scipy.linalg

from .errors import ConfigError
from .ktensor import KruskalModel, normalize_columns
from .linalg import gram_of_khatri_rao, least_squares, mttkrp
from .tensor import DenseTensor, matricize, tensor_norm

__all__ = [
    "SolveOptions",
    "TraceRecord",
    "init_random",
    "init_hosvd",
    "initial_model",
    "exact_fit",
    "fit_from_parts",
    "cp_als",
]


@dataclass
class SolveOptions:
    """Stopping rules and knobs shared by every solver.

    ``init`` is ``"random"``, ``"hosvd"`` or a :class:`KruskalModel` whose
    factors for modes 2..N are used as the starting point.  The sampling
    fields only matter to the randomized solvers: ``exhaustive`` replaces
    the random row draw with every row exactly once, ``exact_fit_check``
    replaces the sampled fit with the exact one, and ``check_fit=False``
    runs exactly ``max_iters`` iterations with no fit computation at all
    (used for timing).
    """

    max_iters: int = 200
    fit_tolerance: float = 1e-4
    fit_threshold: Optional[float] = None
    seed: Optional[int] = 0
    init: Union[str, KruskalModel] = "random"
    fit_samples: int = 2**14
    stall_limit: int = 10
    exhaustive: bool = False
    exact_fit_check: bool = False
    check_fit: bool = True

    def __post_init__(self):
        if self.max_iters < 1:
            raise ConfigError("max_iters must be at least 1")
        if not self.fit_tolerance > 0:
            raise ConfigError("fit_tolerance must be positive")
        if self.stall_limit < 1:
            raise ConfigError("stall_limit must be at least 1")
        if self.fit_samples < 1:
            raise ConfigError("fit_samples must be at least 1")
        if isinstance(self.init, str) and self.init not in ("random", "hosvd"):
            raise ConfigError(f"unknown init {self.init!r}")


@dataclass
class TraceRecord:
    iteration: int
    elapsed_seconds: float
    fit: float
    fit_kind: str  # "exact", "estimated" or "none"
    best_fit: float


def init_random(dims, rank: int, seed=None) -> KruskalModel:
    """Uniform [0, 1) factors for modes 2..N; mode 1 is zero until first solved."""
    if rank < 1:
        raise ConfigError("rank must be at least 1")
    rng = np.random.default_rng(seed)
    factors = [np.zeros((dims[0], rank))]
    factors += [rng.random((I, rank)) for I in dims[1:]]
    return KruskalModel(np.ones(rank), factors)


def init_hosvd(X: DenseTensor, rank: int, seed=None) -> KruskalModel:
    """Leading eigenvectors of each ``X_(n) X_(n)^T`` for modes 2..N.

    When ``rank`` exceeds ``I_n`` the surplus columns are random unit vectors.
    """
    if rank < 1:
        raise ConfigError("rank must be at least 1")
    rng = np.random.default_rng(seed)
    dims = X.dims
    factors = [np.zeros((dims[0], rank))]
    for n in range(1, X.ndim):
        Xn = matricize(X, n)
        _, vecs = scipy.linalg.eigh(Xn @ Xn.T)
        k = min(rank, dims[n])
        A = vecs[:, ::-1][:, :k]
        if rank > k:
            extra = rng.standard_normal((dims[n], rank - k))
            A = np.hstack([A, extra / np.linalg.norm(extra, axis=0)])
        factors.append(A)
    return KruskalModel(np.ones(rank), factors)


def initial_model(X: DenseTensor, rank: int, opts: SolveOptions, rng) -> KruskalModel:
    """Starting model with modes 2..N at unit column norm."""
    if isinstance(opts.init, KruskalModel):
        init = opts.init
        if init.rank != rank or init.dims[1:] != X.dims[1:]:
            raise ConfigError("initial model does not match the tensor shape or rank")
        model = KruskalModel(np.ones(rank), [np.zeros((X.dims[0], rank))] + [np.array(A, dtype=float) for A in init.factors[1:]])
    elif opts.init == "hosvd":
        model = init_hosvd(X, rank, seed=rng)
    else:
        model = init_random(X.dims, rank, seed=rng)
    for n in range(1, X.ndim):
        normalize_columns(model, n, absorb=True, rng=rng)
    model.weights = np.ones(rank)
    return model


def fit_from_parts(x_norm: float, inner: float, model_norm_sq: float) -> float:
    """``1 - ||X - M|| / ||X||`` from ``<X, M>`` and ``||M||^2``."""
    if x_norm == 0:
        return 1.0
    resid_sq = x_norm**2 - 2.0 * inner + model_norm_sq
    return 1.0 - math.sqrt(max(float(resid_sq), 0.0)) / x_norm


def _model_norm_sq(model: KruskalModel) -> float:
    V = gram_of_khatri_rao(model.factors, skip=None)
    return float(model.weights @ V @ model.weights)


def exact_fit(X: DenseTensor, model: KruskalModel) -> float:
    """Exact fit through the mode-1 MTTKRP, never forming the reconstruction."""
    if X.dims != model.dims:
        raise ValueError(f"model dims {model.dims} do not match tensor dims {X.dims}")
    W = mttkrp(X, model.factors, 0)
    inner = float(np.sum(W * model.factors[0] * model.weights))
    return fit_from_parts(tensor_norm(X), inner, _model_norm_sq(model))


def _solve_normal(W: np.ndarray, V: np.ndarray) -> np.ndarray:
    """``A`` with ``A V = W``; Cholesky first, least squares if V is not positive definite."""
    try:
        c = scipy.linalg.cho_factor(V, lower=False, check_finite=False)
        A = scipy.linalg.cho_solve(c, W.T, check_finite=False).T
        if np.all(np.isfinite(A)):
            return A
    except np.linalg.LinAlgError:
        pass
    return least_squares(V, W.T).T


def _zero_result(X: DenseTensor, rank: int) -> tuple[KruskalModel, list]:
    factors = [np.zeros((I, rank)) for I in X.dims]
    for A in factors:
        A[0, :] = 1.0
    return KruskalModel(np.zeros(rank), factors), [TraceRecord(0, 0.0, 1.0, "exact", 1.0)]


def cp_als(
    X: DenseTensor,
    rank: int,
    opts: Optional[SolveOptions] = None,
    callback: Optional[Callable[[int, KruskalModel], None]] = None,
) -> tuple[KruskalModel, list]:
    """Fit a rank-``rank`` CP model by alternating least squares.

    Each outer iteration re-solves every factor from the normal equations
    ``A^(n) V = X_(n) Z^(n)`` and normalizes it.  The exact fit is recorded
    once per outer iteration.  Stops after ``max_iters`` iterations, when
    the fit changes by at most ``fit_tolerance``, or when it reaches
    ``fit_threshold``.

    ``callback(iteration, model)`` is invoked after each outer iteration.

    Returns
    -------
    model : KruskalModel
    trace : list of TraceRecord
    """
    opts = opts or SolveOptions()
    if rank < 1:
        raise ConfigError("rank must be at least 1")
    if not isinstance(X, DenseTensor):
        X = DenseTensor(X)
    x_norm = tensor_norm(X)
    if x_norm == 0:
        return _zero_result(X, rank)
    rng = np.random.default_rng(opts.seed)
    model = initial_model(X, rank, opts, rng)
    N = X.ndim
    trace: list[TraceRecord] = []
    fit_old, best = 0.0, -np.inf
    start = time.perf_counter()
    for it in range(1, opts.max_iters + 1):
        for n in range(N):
            V = gram_of_khatri_rao(model.factors, skip=n)
            W = mttkrp(X, model.factors, n)
            model.factors[n] = _solve_normal(W, V)
            normalize_columns(model, n, absorb=False, rng=rng)
        if callback is not None:
            callback(it, model)
        if not opts.check_fit:
            trace.append(TraceRecord(it, time.perf_counter() - start, float("nan"), "none", float("nan")))
            continue
        # W is the last mode's MTTKRP; the other factors have not changed since.
        inner = float(np.sum(W * model.factors[N - 1] * model.weights))
        fit = fit_from_parts(x_norm, inner, _model_norm_sq(model))
        best = max(best, fit)
        trace.append(TraceRecord(it, time.perf_counter() - start, fit, "exact", best))
        if opts.fit_threshold is not None and fit >= opts.fit_threshold:
            break
        if it > 1 and abs(fit - fit_old) <= opts.fit_tolerance:
            break
        fit_old = fit
    return model, trace
