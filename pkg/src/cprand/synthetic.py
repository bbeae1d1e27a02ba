"""Synthetic CP problems with controlled collinearity and noise, and recovery metrics."""
from __future__ import annotations

import csv
import itertools
import logging
import time
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.optimize

from .als import SolveOptions, cp_als, exact_fit
from .errors import ConfigError
from .ktensor import KruskalModel
from .mixing import cprand_mix, cprand_premix
from .randomized import cprand
from .tensor import DenseTensor

__all__ = [
    "SynthParams",
    "SynthProblem",
    "gen_collinear_factor",
    "gen_problem",
    "gen_spiked_problem",
    "gen_prescribed_fit",
    "score",
    "GridCell",
    "run_method",
    "run_experiment_grid",
    "RESULT_FIELDS",
    "write_results_csv",
    "read_results_csv",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SynthParams:
    dims: tuple
    rank_true: int = 5
    collinearity: float = 0.5
    noise: float = 0.01
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if not 0 <= self.collinearity < 1:
            raise ConfigError("collinearity must lie in [0, 1)")
        if self.noise < 0:
            raise ConfigError("noise must be nonnegative")
        if self.rank_true > min(self.dims):
            warnings.warn("rank_true exceeds the smallest dimension", stacklevel=2)


@dataclass
class SynthProblem:
    tensor: DenseTensor
    truth: KruskalModel
    noise_norm_ratio: float


def gen_collinear_factor(I: int, R: int, C: float, rng) -> np.ndarray:
    """``I x R`` matrix with unit columns whose pairwise inner products all equal ``C``.

    Built as ``Q L^T`` where ``L L^T = (1 - C) I + C 11^T`` and ``Q`` has
    orthonormal columns from the QR of a Gaussian matrix.
    """
    if not 0 <= C < 1:
        raise ConfigError("collinearity must lie in [0, 1)")
    if R > I:
        raise ConfigError(f"cannot fit {R} collinear columns in dimension {I}")
    rng = np.random.default_rng(rng)
    K = (1 - C) * np.eye(R) + C * np.ones((R, R))
    L = np.linalg.cholesky(K)
    Q, _ = np.linalg.qr(rng.standard_normal((I, R)))
    return Q @ L.T


def gen_problem(p: SynthParams) -> SynthProblem:
    """Weights uniform on [0.2, 0.8], collinear factors, Gaussian noise scaled to ``noise``."""
    rng = np.random.default_rng(p.seed)
    weights = rng.uniform(0.2, 0.8, size=p.rank_true)
    factors = [gen_collinear_factor(I, p.rank_true, p.collinearity, rng) for I in p.dims]
    return _add_noise(KruskalModel(weights, factors), p.noise, rng)


def _add_noise(truth: KruskalModel, eta: float, rng) -> SynthProblem:
    X_true = truth.full().data
    if eta == 0:
        return SynthProblem(DenseTensor(X_true), truth, 0.0)
    noise = rng.standard_normal(X_true.shape)
    E = eta * (np.linalg.norm(X_true) / np.linalg.norm(noise)) * noise
    return SynthProblem(DenseTensor(X_true + E), truth, float(np.linalg.norm(E) / np.linalg.norm(X_true)))


def gen_spiked_problem(p: SynthParams, mode: int = 0) -> SynthProblem:
    """Like :func:`gen_problem`, but component 0 is ``e_1`` in factor ``mode``.

    The other columns of that factor keep collinearity ``C`` among
    themselves and vanish in row 0, so the factor has coherence 1 and a
    uniformly sampled Khatri-Rao row rarely sees the spiked component.
    """
    if p.rank_true < 2:
        raise ConfigError("a spiked problem needs at least two components")
    rng = np.random.default_rng(p.seed)
    weights = rng.uniform(0.2, 0.8, size=p.rank_true)
    factors = []
    for m, I in enumerate(p.dims):
        if m == mode:
            A = np.zeros((I, p.rank_true))
            A[0, 0] = 1.0
            A[1:, 1:] = gen_collinear_factor(I - 1, p.rank_true - 1, p.collinearity, rng)
        else:
            A = gen_collinear_factor(I, p.rank_true, p.collinearity, rng)
        factors.append(A)
    return _add_noise(KruskalModel(weights, factors), p.noise, rng)


def gen_prescribed_fit(dims, rank: int = 5, fit: float = 0.95, seed=None) -> tuple[DenseTensor, KruskalModel]:
    """Tensor and model whose exact fit equals ``fit``.

    The tensor is the model plus Gaussian noise ``c N``, with ``c`` chosen
    so that ``||c N|| = (1 - fit) ||M + c N||``.
    """
    if not 0 < fit < 1:
        raise ValueError("fit must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    factors = [rng.standard_normal((I, rank)) for I in dims]
    factors = [A / np.linalg.norm(A, axis=0) for A in factors]
    model = KruskalModel(rng.uniform(0.2, 0.8, size=rank), factors)
    M = model.full().data
    N = rng.standard_normal(tuple(dims))
    rho = (1 - fit) ** 2
    nn, mn, mdot = np.vdot(N, N), np.vdot(M, M), np.vdot(M, N)
    # (1 - rho) nn c^2 - 2 rho mdot c - rho mn = 0, positive root
    a, b, c0 = (1 - rho) * nn, -2 * rho * mdot, -rho * mn
    c = (-b + np.sqrt(b * b - 4 * a * c0)) / (2 * a)
    return DenseTensor(M + c * N), model


def _unit_columns(A: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(A, axis=0)
    return A / np.where(norms == 0, 1.0, norms)


def score(M1: KruskalModel, M2: KruskalModel) -> float:
    """Best mean over component matchings of the product of per-mode cosines.

    Weights are ignored.  Every component of ``M1`` is matched to a distinct
    component of ``M2``, so ``M2`` may carry extra components.  Matchings
    are enumerated exhaustively up to rank 8 and found by linear assignment
    beyond that.
    """
    if M1.dims != M2.dims:
        raise ValueError(f"dims differ: {M1.dims} vs {M2.dims}")
    R1, R2 = M1.rank, M2.rank
    if R2 < R1:
        raise ValueError(f"second model has fewer components ({R2}) than the first ({R1})")
    pair = np.ones((R1, R2))
    for A, B in zip(M1.factors, M2.factors):
        pair *= _unit_columns(A).T @ _unit_columns(B)
    if R2 <= 8:
        best = max(
            pair[np.arange(R1), list(perm)].sum()
            for perm in itertools.permutations(range(R2), R1)
        )
    else:
        rows, cols = scipy.optimize.linear_sum_assignment(pair, maximize=True)
        best = pair[rows, cols].sum()
    return float(best / R1)


@dataclass(frozen=True)
class GridCell:
    params: SynthParams
    method: str
    rank: int
    seed: int = 0


RESULT_FIELDS = ("method", "N", "I", "R_true", "R", "C", "eta", "seed",
                 "time_s", "iters", "fit", "score")


def run_method(method: str, X: DenseTensor, rank: int, opts: SolveOptions, n_samples=None,
               transform: Optional[str] = None):
    """Dispatch to one of the solvers by name: als, rand, mix, premix."""
    if method == "als":
        return cp_als(X, rank, opts)
    if method == "rand":
        return cprand(X, rank, n_samples, opts)
    if method == "mix":
        return cprand_mix(X, rank, n_samples, opts, transform=transform or "fft")
    if method == "premix":
        return cprand_premix(X, rank, n_samples, opts, transform=transform or "dct")
    raise ConfigError(f"unknown method {method!r}")


def protocol_options(eta: float, seed: int, **overrides) -> SolveOptions:
    """Stopping rules of the synthetic study: 200 iterations, 1e-4 fit change, fit >= 1 - 1.2 eta."""
    kw = dict(max_iters=200, fit_tolerance=1e-4, fit_threshold=1 - 1.2 * eta, seed=seed)
    kw.update(overrides)
    return SolveOptions(**kw)


def run_experiment_grid(cells: Iterable[GridCell], n_samples=None, fit_samples: int = 2**14,
                        stall_limit: int = 10, init: str = "random") -> list[dict]:
    """Run each cell and collect one result row per cell.

    A failing cell is logged and reported with NaN time, fit and score.
    """
    rows = []
    problems: dict[SynthParams, SynthProblem] = {}
    for cell in cells:
        p = cell.params
        row = dict(method=cell.method, N=len(p.dims), I=p.dims[0], R_true=p.rank_true, R=cell.rank,
                   C=p.collinearity, eta=p.noise, seed=cell.seed)
        try:
            if p not in problems:
                problems[p] = gen_problem(p)
            prob = problems[p]
            opts = protocol_options(p.noise, cell.seed, fit_samples=fit_samples,
                                    stall_limit=stall_limit, init=init)
            t0 = time.perf_counter()
            model, trace = run_method(cell.method, prob.tensor, cell.rank, opts, n_samples)
            elapsed = time.perf_counter() - t0
            row.update(time_s=elapsed, iters=len(trace), fit=exact_fit(prob.tensor, model),
                       score=score(prob.truth, model))
        except Exception as exc:  # recorded, the grid carries on
            log.warning("cell %s failed: %s", cell, exc)
            row.update(time_s=float("nan"), iters=0, fit=float("nan"), score=float("nan"))
        rows.append(row)
    return rows


_INT_FIELDS = {"N", "I", "R_true", "R", "seed", "iters"}
_FLOAT_FIELDS = {"C", "eta", "time_s", "fit", "score"}


def write_results_csv(rows: Sequence[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=RESULT_FIELDS)
        w.writeheader()
        for row in rows:
            w.writerow({k: repr(float(row[k])) if k in _FLOAT_FIELDS else row[k] for k in RESULT_FIELDS})


def read_results_csv(path) -> list[dict]:
    out = []
    with open(Path(path), newline="") as fh:
        for rec in csv.DictReader(fh):
            row = {}
            for k in RESULT_FIELDS:
                v = rec[k]
                row[k] = int(v) if k in _INT_FIELDS else float(v) if k in _FLOAT_FIELDS else v
            out.append(row)
    return out
