"""Kronecker / Khatri-Rao kernels, MTTKRP, least squares and coherence."""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np
import scipy.linalg

from .tensor import matricize

__all__ = [
    "LeverageProfile",
    "kron",
    "khatri_rao",
    "hadamard",
    "gram_of_khatri_rao",
    "krp_factors",
    "mttkrp",
    "least_squares",
    "leverage_and_coherence",
    "coherence",
    "coherence_product_checks",
]


def kron(A, B) -> np.ndarray:
    """Kronecker product; vectors are treated as columns."""
    A, B = _as_matrix(A), _as_matrix(B)
    return np.kron(A, B)


def _as_matrix(A) -> np.ndarray:
    A = np.asarray(A)
    return A.reshape(-1, 1) if A.ndim == 1 else A


def khatri_rao(mats: Sequence) -> np.ndarray:
    """Columnwise Kronecker product of ``mats[0] ⊙ mats[1] ⊙ ...``.

    The last matrix's row index varies fastest, as in :func:`kron`.
    """
    mats = [_as_matrix(M) for M in mats]
    if not mats:
        raise ValueError("khatri_rao needs at least one matrix")
    R = mats[0].shape[1]
    if any(M.shape[1] != R for M in mats):
        raise ValueError(f"column counts differ: {[M.shape[1] for M in mats]}")
    return reduce(lambda A, B: (A[:, None, :] * B[None, :, :]).reshape(-1, R), mats)


def hadamard(A, B) -> np.ndarray:
    A, B = np.asarray(A), np.asarray(B)
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch {A.shape} vs {B.shape}")
    return A * B


def krp_factors(factors: Sequence, skip: int) -> list:
    """Factors in the order that builds ``Z^(skip)``: highest mode first, ``skip`` left out."""
    return [factors[m] for m in reversed(range(len(factors))) if m != skip]


def gram_of_khatri_rao(factors: Sequence, skip: int | None) -> np.ndarray:
    """``Z^T Z`` for ``Z = krp(factors without skip)``, via the Hadamard-of-Grams identity."""
    R = factors[0].shape[1]
    if any(A.shape[1] != R for A in factors):
        raise ValueError("all factors must share the column count")
    V = np.ones((R, R), dtype=np.result_type(*factors))
    for m, A in enumerate(factors):
        if m != skip:
            V = V * (A.conj().T @ A)
    return V


def mttkrp(X, factors: Sequence, n: int) -> np.ndarray:
    """``X_(n) @ Z^(n)`` using an explicit Khatri-Rao product."""
    dims = X.dims if hasattr(X, "dims") else np.shape(X)
    if len(factors) != len(dims):
        raise ValueError(f"expected {len(dims)} factors, got {len(factors)}")
    for m, A in enumerate(factors):
        if m != n and A.shape[0] != dims[m]:
            raise ValueError(f"factor {m} has {A.shape[0]} rows, tensor mode has {dims[m]}")
    if len(dims) == 1:
        R = factors[0].shape[1]
        return np.asarray(X.data if hasattr(X, "data") else X).reshape(-1, 1) * np.ones((1, R))
    Z = khatri_rao(krp_factors(factors, n))
    return matricize(X, n) @ Z


def least_squares(A, B) -> np.ndarray:
    """Minimize ``||A @ Y - B||_F`` for real ``A`` (n x d, n >= d).

    A column-pivoted QR solves the full-rank case.  If a diagonal entry of
    R falls below ``max(n, d) * eps * |R_11|`` the minimum-norm solution is
    returned instead.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    vector_rhs = B.ndim == 1
    B2 = B.reshape(-1, 1) if vector_rhs else B
    n, d = A.shape
    if n < d:
        raise ValueError(f"least squares needs at least as many rows as columns, got {A.shape}")
    if B2.shape[0] != n:
        raise ValueError(f"right-hand side has {B2.shape[0]} rows, expected {n}")
    Q, Rf, piv = scipy.linalg.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(Rf))
    tol = max(n, d) * np.finfo(float).eps * (diag[0] if d else 0.0)
    if d and diag[0] > 0 and diag[-1] >= tol:
        Y = np.empty((d, B2.shape[1]))
        Y[piv] = scipy.linalg.solve_triangular(Rf, Q.T @ B2)
    else:
        Y = np.linalg.lstsq(A, B2, rcond=None)[0]
    return Y[:, 0] if vector_rhs else Y


@dataclass(frozen=True)
class LeverageProfile:
    scores: np.ndarray
    coherence: float


def leverage_and_coherence(A) -> LeverageProfile:
    """Row leverage scores from the orthonormal factor of a pivoted QR.

    Only the first ``rank`` columns of Q span the range, so the scores sum to
    the numerical rank.
    """
    A = _as_matrix(A)
    n, d = A.shape
    if n < d:
        raise ValueError(f"leverage scores need a tall matrix, got {A.shape}")
    Q, Rf, _ = scipy.linalg.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(Rf))
    if d == 0 or diag[0] == 0:
        return LeverageProfile(np.zeros(n), 0.0)
    rank = int(np.sum(diag > max(n, d) * np.finfo(float).eps * diag[0]))
    scores = np.sum(np.abs(Q[:, :rank]) ** 2, axis=1)
    return LeverageProfile(scores, float(scores.max()))


def coherence(A) -> float:
    return leverage_and_coherence(A).coherence


def coherence_product_checks(A, B) -> tuple[float, float, float]:
    """``(mu(A ⊗ B), mu(A ⊙ B), mu(A) * mu(B))``."""
    A, B = _as_matrix(A), _as_matrix(B)
    mu_kron = coherence(kron(A, B))
    mu_krp = coherence(khatri_rao([A, B])) if A.shape[1] == B.shape[1] else float("nan")
    return mu_kron, mu_krp, coherence(A) * coherence(B)
