"""Random sign flips followed by fast unitary transforms, and the mixed solvers.

Each mode ``m`` gets an operator ``F_m D_m``: ``D_m`` flips the sign of each
row at random and ``F_m`` is a unitary FFT, orthonormal DCT-II or
orthonormal Walsh-Hadamard transform.  ``"identity"`` (no transform, all
signs +1) exists so tests can check the mixed code paths against the
unmixed ones exactly.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.fft

from .als import SolveOptions, _zero_result, initial_model
from .errors import ConfigError, NumericalConsistencyError
from .ktensor import KruskalModel, normalize_columns
from .linalg import least_squares
from .randomized import (
    _check_samples,
    _sampled_loop,
    _warn_hosvd,
    cprand,
    draw_samples,
    exhaustive_samples,
    skr,
)
from .tensor import DenseTensor, gather_fibers, tensor_norm

__all__ = [
    "TRANSFORMS",
    "MixingOperator",
    "make_mixing_operator",
    "fwht",
    "mix_tensor",
    "mix_factor",
    "unmix_factor",
    "unmix_sampled_rhs",
    "real_least_squares",
    "cprand_mix",
    "cprand_premix",
]

TRANSFORMS = ("fft", "dct", "wht", "identity")

# Imaginary parts below this fraction of the magnitude count as round-off.
IMAG_TOL = 1e-8


def fwht(x: np.ndarray, axis: int = 0) -> np.ndarray:
    """Orthonormal fast Walsh-Hadamard transform (natural order) along ``axis``."""
    x = np.moveaxis(np.asarray(x), axis, 0)
    n = x.shape[0]
    if n & (n - 1):
        raise ConfigError(f"Walsh-Hadamard transform needs a power-of-two length, got {n}")
    rest = x.shape[1:]
    y = x.reshape(n, -1).astype(np.result_type(x, np.float64))
    h = 1
    while h < n:
        y = y.reshape(n // (2 * h), 2, h, -1)
        y = np.stack((y[:, 0] + y[:, 1], y[:, 0] - y[:, 1]), axis=1)
        h *= 2
    y = y.reshape((n,) + rest) / np.sqrt(n)
    return np.moveaxis(y, 0, axis)


def _forward(x, kind: str, axis: int):
    if kind == "fft":
        return scipy.fft.fft(x, axis=axis, norm="ortho")
    if kind == "dct":
        return scipy.fft.dct(x, type=2, axis=axis, norm="ortho")
    if kind == "wht":
        return fwht(x, axis)
    return np.array(x)


def _adjoint(x, kind: str, axis: int):
    if kind == "fft":
        return scipy.fft.ifft(x, axis=axis, norm="ortho")
    if kind == "dct":
        return scipy.fft.idct(x, type=2, axis=axis, norm="ortho")
    if kind == "wht":
        return fwht(x, axis)
    return np.array(x)


def _along(v: np.ndarray, axis: int, ndim: int) -> np.ndarray:
    shape = [1] * ndim
    shape[axis] = v.size
    return v.reshape(shape)


@dataclass(frozen=True)
class MixingOperator:
    signs: tuple
    transform: str

    @property
    def is_complex(self) -> bool:
        return self.transform == "fft"

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(d.size for d in self.signs)

    def apply(self, x, m: int, axis: int = 0):
        """``F_m D_m`` applied to every vector along ``axis``."""
        x = np.asarray(x)
        self._check_len(x.shape[axis], m)
        return _forward(x * _along(self.signs[m], axis, x.ndim), self.transform, axis)

    def apply_adjoint(self, x, m: int, axis: int = 0):
        """``D_m F_m^*`` applied to every vector along ``axis``."""
        x = np.asarray(x)
        self._check_len(x.shape[axis], m)
        return _adjoint(x, self.transform, axis) * _along(self.signs[m], axis, x.ndim)

    def matrix(self, m: int) -> np.ndarray:
        """Dense ``F_m D_m``; for checks only."""
        return self.apply(np.eye(self.signs[m].size), m, axis=0)

    def _check_len(self, length: int, m: int):
        if length != self.signs[m].size:
            raise ValueError(f"mode {m} operator has length {self.signs[m].size}, got {length}")


def make_mixing_operator(dims, transform: str = "fft", seed=None) -> MixingOperator:
    """Seeded random signs for every mode plus the chosen transform."""
    if transform not in TRANSFORMS:
        raise ConfigError(f"unknown transform {transform!r}; choose from {TRANSFORMS}")
    if transform == "wht":
        bad = [I for I in dims if I & (I - 1)]
        if bad:
            raise ConfigError(f"Walsh-Hadamard mixing needs power-of-two dims, got {tuple(dims)}")
    if transform == "identity":
        signs = tuple(np.ones(I) for I in dims)
    else:
        rng = np.random.default_rng(seed)
        signs = tuple(rng.choice(np.array([-1.0, 1.0]), size=I) for I in dims)
    return MixingOperator(signs, transform)


def _mixing_seed(seed):
    # Separate stream from the solver's generator so that the identity
    # transform reproduces the unmixed solver draw for draw.
    return None if seed is None else np.random.SeedSequence([int(seed), 0x6D6978])


def mix_tensor(X: DenseTensor, op: MixingOperator) -> DenseTensor:
    """``X x_1 F_1 D_1 ... x_N F_N D_N`` with fast transforms along the fibers."""
    arr = X.data if isinstance(X, DenseTensor) else np.asarray(X)
    if tuple(arr.shape) != op.dims:
        raise ValueError(f"operator built for {op.dims}, tensor has {arr.shape}")
    for m in range(arr.ndim):
        arr = op.apply(arr, m, axis=m)
    return DenseTensor(arr)


def mix_factor(A, op: MixingOperator, m: int) -> np.ndarray:
    """``F_m D_m A``."""
    return op.apply(A, m, axis=0)


def _drop_imag(Y: np.ndarray, what: str) -> np.ndarray:
    if not np.iscomplexobj(Y):
        return Y
    scale = max(float(np.max(np.abs(Y), initial=0.0)), np.finfo(float).tiny)
    residue = float(np.max(np.abs(Y.imag), initial=0.0))
    if residue > IMAG_TOL * scale:
        raise NumericalConsistencyError(
            f"{what} has imaginary residue {residue:.3e} relative to magnitude {scale:.3e}"
        )
    return np.ascontiguousarray(Y.real)


def unmix_factor(Ahat, op: MixingOperator, m: int, real: bool = True) -> np.ndarray:
    """``D_m F_m^* Ahat``.

    With ``real=True`` the result must be real up to round-off; a larger
    imaginary part raises :class:`NumericalConsistencyError`.
    """
    A = op.apply_adjoint(Ahat, m, axis=0)
    return _drop_imag(A, "unmixed factor") if real else A


def unmix_sampled_rhs(G, op: MixingOperator, n: int) -> np.ndarray:
    """Undo mode ``n`` mixing on sampled fibers stored as rows of ``G`` (``S x I_n``).

    The other modes stay mixed, so with the FFT the result is complex in
    general; it is the right-hand side of the complex sampled problem.
    """
    G = np.asarray(G)
    if G.ndim != 2:
        raise ValueError("sampled right-hand side must be a matrix")
    return op.apply_adjoint(G, n, axis=1)


def real_least_squares(A, B) -> np.ndarray:
    """Real minimizer of ``||A Y - B||`` for complex ``A``, ``B``.

    Solves the stacked system ``[Re A; Im A] Y = [Re B; Im B]``, so the
    result is real by construction.
    """
    A, B = np.asarray(A), np.asarray(B)
    if A.shape[0] != B.shape[0]:
        raise ValueError(f"row mismatch {A.shape} vs {B.shape}")
    if A.shape[0] < A.shape[1]:
        raise ValueError(f"least squares needs a tall coefficient matrix, got {A.shape}")
    if not (np.iscomplexobj(A) or np.iscomplexobj(B)):
        return least_squares(A, B)
    A_st = np.concatenate([A.real, A.imag], axis=0)
    B_st = np.concatenate([B.real, B.imag], axis=0)
    return least_squares(A_st, B_st)


def cprand_mix(
    X: DenseTensor,
    rank: int,
    n_samples: Optional[int] = None,
    opts: Optional[SolveOptions] = None,
    transform: str = "fft",
    callback: Optional[Callable[[int, KruskalModel], None]] = None,
) -> tuple[KruskalModel, list]:
    """Sampled CP-ALS on a tensor mixed once up front.

    Factors are kept both plain (real, normalized) and mixed.  Each mode
    update samples rows of the mixed Khatri-Rao product and the matching
    fibers of the mixed tensor, undoes the mixing of mode ``n`` on those
    fibers only, and solves for a real factor.  Stopping follows
    :func:`~cprand.randomized.cprand`, with the fit measured on the
    original tensor.
    """
    opts = opts or SolveOptions()
    if not isinstance(X, DenseTensor):
        X = DenseTensor(X)
    S = _check_samples(rank, n_samples, opts)
    _warn_hosvd(opts)
    op = make_mixing_operator(X.dims, transform, _mixing_seed(opts.seed))
    if tensor_norm(X) == 0:
        return _zero_result(X, rank)
    rng = np.random.default_rng(opts.seed)
    model = initial_model(X, rank, opts, rng)
    Xhat = mix_tensor(X, op)
    mixed = [mix_factor(A, op, m) for m, A in enumerate(model.factors)]
    full = [exhaustive_samples(X.dims, n) for n in range(X.ndim)] if opts.exhaustive else None

    def update(model, n):
        samples = full[n] if full is not None else draw_samples(X.dims, n, S, rng)
        Zhat_S = skr(samples, mixed, n)
        rhs = unmix_sampled_rhs(gather_fibers(Xhat, n, samples).T, op, n)
        model.factors[n] = real_least_squares(Zhat_S, rhs).T
        normalize_columns(model, n, absorb=False, rng=rng)
        mixed[n] = mix_factor(model.factors[n], op, n)

    trace = _sampled_loop(X, model, opts, rng, update, callback)
    return model, trace


def cprand_premix(
    X: DenseTensor,
    rank: int,
    n_samples: Optional[int] = None,
    opts: Optional[SolveOptions] = None,
    transform: str = "dct",
    callback: Optional[Callable[[int, KruskalModel], None]] = None,
) -> tuple[KruskalModel, list]:
    """Mix with a real orthogonal transform, run :func:`cprand`, unmix the factors.

    The weights are unaffected by unmixing.  The fit in the trace is
    measured on the mixed tensor, which equals the fit on the original up
    to sampling.
    """
    opts = opts or SolveOptions()
    if transform == "fft":
        raise ConfigError("premixing needs a real transform (dct or wht), not fft")
    if not isinstance(X, DenseTensor):
        X = DenseTensor(X)
    op = make_mixing_operator(X.dims, transform, _mixing_seed(opts.seed))
    Xhat = mix_tensor(X, op)
    if isinstance(opts.init, KruskalModel):
        init = opts.init
        opts = SolveOptions(**{**opts.__dict__, "init": KruskalModel(
            init.weights, [mix_factor(A, op, m) for m, A in enumerate(init.factors)])})
    model, trace = cprand(Xhat, rank, n_samples, opts, callback)
    factors = [unmix_factor(A, op, m) for m, A in enumerate(model.factors)]
    return KruskalModel(model.weights, factors), trace
