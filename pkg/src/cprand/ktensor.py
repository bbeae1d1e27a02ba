"""Kruskal (CP) model: component weights plus one factor matrix per mode."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .linalg import gram_of_khatri_rao, khatri_rao, krp_factors
from .tensor import DenseTensor, fold

__all__ = ["KruskalModel", "model_entry", "model_entries", "normalize_columns"]


@dataclass
class KruskalModel:
    """``sum_r weights[r] * a_r^(1) o ... o a_r^(N)``.

    ``factors[n]`` has shape ``(I_n, R)``.  Solvers keep every factor column
    at unit norm and push the scale into ``weights``.
    """

    weights: np.ndarray
    factors: list = field(default_factory=list)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        self.factors = [np.asarray(A) for A in self.factors]
        R = self.weights.size
        for n, A in enumerate(self.factors):
            if A.ndim != 2 or A.shape[1] != R:
                raise ValueError(f"factor {n} has shape {A.shape}, expected (I_{n}, {R})")

    @property
    def rank(self) -> int:
        return self.weights.size

    @property
    def ndim(self) -> int:
        return len(self.factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(A.shape[0] for A in self.factors)

    def copy(self) -> "KruskalModel":
        return KruskalModel(self.weights.copy(), [A.copy() for A in self.factors])

    def full(self) -> DenseTensor:
        """Dense reconstruction through the mode-1 unfolding ``A1 diag(w) Z1^T``."""
        A1 = self.factors[0] * self.weights
        if self.ndim == 1:
            return DenseTensor(A1.sum(axis=1))
        Z = khatri_rao(krp_factors(self.factors, 0))
        return fold(A1 @ Z.T, 0, self.dims)

    def norm(self) -> float:
        V = gram_of_khatri_rao(self.factors, skip=None)
        return float(np.sqrt(max(np.real(self.weights @ V @ self.weights), 0.0)))

    def column_norms(self, n: int) -> np.ndarray:
        return np.linalg.norm(self.factors[n], axis=0)


def model_entries(model: KruskalModel, idxs) -> np.ndarray:
    """Model values at each row of an ``(P, N)`` table of multiindices; O(P R N)."""
    idxs = np.asarray(idxs, dtype=np.int64)
    prod = np.broadcast_to(model.weights, (idxs.shape[0], model.rank)).copy()
    for n, A in enumerate(model.factors):
        prod *= A[idxs[:, n]]
    return prod.sum(axis=1)


def model_entry(model: KruskalModel, i: Sequence[int]) -> float:
    if len(i) != model.ndim:
        raise IndexError(f"multiindex {tuple(i)} does not match order {model.ndim}")
    for n, (ik, Ik) in enumerate(zip(i, model.dims)):
        if not 0 <= ik < Ik:
            raise IndexError(f"index {ik} out of range for mode {n} of size {Ik}")
    return float(model_entries(model, np.asarray(i).reshape(1, -1))[0])


def normalize_columns(model: KruskalModel, n: int, absorb: bool = True, rng=None) -> KruskalModel:
    """Scale the columns of factor ``n`` to unit norm, in place.

    With ``absorb=True`` the norms multiply into the weights, leaving the
    represented tensor unchanged.  With ``absorb=False`` the weights are
    overwritten by the norms; the solvers use this right after a factor has
    been re-solved, because the solved factor then carries the entire
    component scale.

    A zero column gets weight 0 and is replaced by a random unit vector
    drawn from ``rng``.
    """
    A = np.array(model.factors[n], dtype=float)
    norms = np.linalg.norm(A, axis=0)
    zero = norms == 0
    if np.any(zero):
        rng = np.random.default_rng(rng)
        for r in np.flatnonzero(zero):
            v = rng.standard_normal(A.shape[0])
            A[:, r] = v / np.linalg.norm(v)
    safe = np.where(zero, 1.0, norms)
    A[:, ~zero] /= safe[~zero]
    model.factors[n] = A
    model.weights = model.weights * norms if absorb else norms.copy()
    return model
