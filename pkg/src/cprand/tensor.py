"""Dense tensor storage and the unfolding arithmetic used throughout.

Modes and indices are 0-based.  Storage is generalized column-major: the
first mode varies fastest, so the flat value array and the column order of
every unfolding follow the same rule.  For a multiindex ``i`` the column of
the mode-``n`` unfolding holding ``x[i]`` is

    j = sum_{k != n} i_k * J_k,   J_k = prod_{m < k, m != n} I_m

which is the usual 1-based formula shifted by one.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

__all__ = [
    "DenseTensor",
    "unfold_column_index",
    "matricize",
    "fold",
    "fiber",
    "gather_fibers",
    "ttm",
    "multi_ttm",
    "tensor_norm",
]


class DenseTensor:
    """Order-N dense array with mode-1-fastest layout.

    The wrapped array is read-only after construction, so a tensor can be
    shared between solvers without copying.  Real data is stored as float64;
    complex input (a tensor mixed with the FFT) is stored as complex128.

    Parameters
    ----------
    data : array_like
        Array of shape ``(I_1, ..., I_N)``.
    """

    __slots__ = ("_data",)

    def __init__(self, data):
        arr = data.data if isinstance(data, DenseTensor) else np.asarray(data)
        if arr.ndim < 1:
            raise ValueError("a tensor needs at least one mode")
        if any(d < 1 for d in arr.shape):
            raise ValueError(f"every dimension must be positive, got {arr.shape}")
        dtype = np.complex128 if np.iscomplexobj(arr) else np.float64
        arr = np.array(arr, dtype=dtype, order="F", copy=True)
        arr.flags.writeable = False
        self._data = arr

    @classmethod
    def from_values(cls, dims: Sequence[int], values) -> "DenseTensor":
        """Build a tensor from a flat value array in storage order."""
        dims = tuple(int(d) for d in dims)
        values = np.asarray(values)
        if values.ndim != 1 or values.size != int(np.prod(dims)):
            raise ValueError(
                f"expected {int(np.prod(dims))} values for dims {dims}, got {values.size}"
            )
        return cls(values.reshape(dims, order="F"))

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def dims(self) -> tuple[int, ...]:
        return self._data.shape

    shape = dims

    @property
    def ndim(self) -> int:
        return self._data.ndim

    @property
    def size(self) -> int:
        return self._data.size

    @property
    def values(self) -> np.ndarray:
        """Flat read-only view in storage order (mode 1 fastest)."""
        return self._data.reshape(-1, order="F")

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self._data)

    def norm(self) -> float:
        return tensor_norm(self)

    def matricize(self, n: int) -> np.ndarray:
        return matricize(self, n)

    def __getitem__(self, idx):
        return self._data[idx]

    def __eq__(self, other):
        if not isinstance(other, DenseTensor):
            return NotImplemented
        return self.dims == other.dims and np.array_equal(self._data, other._data)

    __hash__ = None

    def __repr__(self):
        kind = "complex" if self.is_complex else "real"
        return f"DenseTensor(dims={self.dims}, {kind})"


def _check_mode(n: int, ndim: int) -> int:
    if not 0 <= n < ndim:
        raise IndexError(f"mode {n} out of range for an order-{ndim} tensor")
    return n


def _strides(dims: Sequence[int]) -> np.ndarray:
    """Element strides of the column-major layout."""
    return np.concatenate(([1], np.cumprod(dims[:-1]))).astype(np.int64)


def unfold_column_index(n: int, i: Sequence[int], dims: Sequence[int]) -> int:
    """Column of the mode-``n`` unfolding that holds entry ``i`` (0-based)."""
    dims = tuple(dims)
    _check_mode(n, len(dims))
    if len(i) != len(dims):
        raise IndexError(f"multiindex {tuple(i)} does not match dims {dims}")
    j, stride = 0, 1
    for k, (ik, Ik) in enumerate(zip(i, dims)):
        if not 0 <= ik < Ik:
            raise IndexError(f"index {ik} out of range for mode {k} of size {Ik}")
        if k == n:
            continue
        j += ik * stride
        stride *= Ik
    return j


def _as_array(X) -> np.ndarray:
    return X.data if isinstance(X, DenseTensor) else np.asarray(X)


def matricize(X, n: int) -> np.ndarray:
    """Mode-``n`` unfolding, shape ``(I_n, prod_{m != n} I_m)``.

    Mode 0 is a view of the storage; other modes are copies.
    """
    arr = _as_array(X)
    _check_mode(n, arr.ndim)
    return np.moveaxis(arr, n, 0).reshape(arr.shape[n], -1, order="F")


def fold(M, n: int, dims: Sequence[int]) -> DenseTensor:
    """Inverse of :func:`matricize`."""
    dims = tuple(int(d) for d in dims)
    _check_mode(n, len(dims))
    M = np.asarray(M)
    rest = tuple(d for k, d in enumerate(dims) if k != n)
    expected = (dims[n], int(np.prod(rest, dtype=np.int64)))
    if M.shape != expected:
        raise ValueError(f"matrix of shape {M.shape} cannot fold into mode {n} of {dims}")
    arr = M.reshape((dims[n],) + rest, order="F")
    return DenseTensor(np.moveaxis(arr, 0, n))


def fiber(X, n: int, idx: Sequence[int]) -> np.ndarray:
    """Mode-``n`` fiber; ``idx`` lists the indices of the other modes in order."""
    arr = _as_array(X)
    _check_mode(n, arr.ndim)
    idx = list(idx)
    if len(idx) != arr.ndim - 1:
        raise IndexError(f"expected {arr.ndim - 1} indices, got {len(idx)}")
    others = [k for k in range(arr.ndim) if k != n]
    for k, ik in zip(others, idx):
        if not 0 <= ik < arr.shape[k]:
            raise IndexError(f"index {ik} out of range for mode {k} of size {arr.shape[k]}")
    key = idx[:n] + [slice(None)] + idx[n:]
    return np.array(arr[tuple(key)])


def gather_fibers(X: DenseTensor, n: int, samples) -> np.ndarray:
    """Stack the sampled mode-``n`` fibers as columns, shape ``(I_n, S)``.

    ``samples`` is a :class:`~cprand.randomized.SampleSet` or an ``S x (N-1)``
    integer table.  Entries are read straight out of storage, no unfolding
    is formed.
    """
    if not isinstance(X, DenseTensor):
        X = DenseTensor(X)
    _check_mode(n, X.ndim)
    idxs = np.asarray(getattr(samples, "idxs", samples), dtype=np.int64)
    if idxs.ndim != 2 or idxs.shape[1] != X.ndim - 1:
        raise IndexError(f"sample table of shape {idxs.shape} does not fit mode {n} of {X.dims}")
    dims = np.asarray(X.dims, dtype=np.int64)
    others = np.delete(np.arange(X.ndim), n)
    if idxs.size and (np.any(idxs < 0) or np.any(idxs >= dims[others])):
        raise IndexError("sample index out of range")
    strides = _strides(dims)
    base = idxs @ strides[others]
    offsets = base[None, :] + strides[n] * np.arange(dims[n], dtype=np.int64)[:, None]
    return X.values[offsets]


def ttm(X, A, n: int) -> DenseTensor:
    """Mode-``n`` product: the result's mode-``n`` unfolding is ``A @ X_(n)``."""
    arr = _as_array(X)
    _check_mode(n, arr.ndim)
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[1] != arr.shape[n]:
        raise ValueError(f"matrix of shape {A.shape} cannot multiply mode {n} of size {arr.shape[n]}")
    return DenseTensor(np.moveaxis(np.tensordot(A, arr, axes=(1, n)), 0, n))


def multi_ttm(X, mats: Sequence) -> DenseTensor:
    """Apply one matrix per mode, in mode order."""
    arr = _as_array(X)
    if len(mats) != arr.ndim:
        raise ValueError(f"need {arr.ndim} matrices, got {len(mats)}")
    Y = X if isinstance(X, DenseTensor) else DenseTensor(arr)
    for n, A in enumerate(mats):
        Y = ttm(Y, A, n)
    return Y


def tensor_norm(X) -> float:
    """Frobenius norm."""
    return float(np.linalg.norm(_as_array(X).reshape(-1)))
