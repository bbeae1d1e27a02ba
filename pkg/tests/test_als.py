import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cprand.als import SolveOptions, cp_als, exact_fit, init_hosvd, init_random
from cprand.errors import ConfigError
from cprand.ktensor import KruskalModel, model_entries, model_entry, normalize_columns
from cprand.linalg import gram_of_khatri_rao, khatri_rao, mttkrp
from cprand.synthetic import SynthParams, gen_problem, score
from cprand.tensor import DenseTensor, fold


def dense_fit(X, model):
    X = np.asarray(X.data)
    R = np.einsum("r,ir,jr,kr->ijk", model.weights, *model.factors)
    return 1 - np.linalg.norm(X - R) / np.linalg.norm(X)


def random_model(rng, dims, R):
    return KruskalModel(rng.uniform(0.5, 2, R), [rng.standard_normal((I, R)) for I in dims])


def rank_one(rng, dims, lam=1.0):
    vecs = [rng.standard_normal(I) for I in dims]
    vecs = [v / np.linalg.norm(v) for v in vecs]
    model = KruskalModel([lam], [v[:, None] for v in vecs])
    return model.full(), vecs


# model

def test_model_entry_examples(rng):
    m = KruskalModel([2.5], [np.ones((I, 1)) for I in (2, 3, 4)])
    np.testing.assert_allclose(m.full().data, 2.5)
    assert model_entry(m, (1, 2, 3)) == 2.5
    zero = KruskalModel([0.0, 0.0], [rng.standard_normal((I, 2)) for I in (2, 3)])
    assert model_entry(zero, (1, 1)) == 0
    with pytest.raises(IndexError):
        model_entry(m, (0, 3, 0))


def test_full_matches_entrywise_sum(rng):
    m = random_model(rng, (3, 4, 5), 3)
    oracle = np.einsum("r,ir,jr,kr->ijk", m.weights, *m.factors)
    idxs = np.array(list(np.ndindex(3, 4, 5)))
    np.testing.assert_allclose(model_entries(m, idxs), oracle.reshape(-1), rtol=1e-12, atol=1e-12)
    A1 = m.factors[0] * m.weights
    via_krp = fold(A1 @ khatri_rao([m.factors[2], m.factors[1]]).T, 0, (3, 4, 5)).data
    np.testing.assert_allclose(m.full().data, via_krp, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(m.full().data, oracle, rtol=1e-12, atol=1e-12)


def test_model_rejects_bad_shapes():
    with pytest.raises(ValueError):
        KruskalModel([1.0, 1.0], [np.ones((3, 2)), np.ones((3, 1))])


def test_normalize_columns_examples(rng):
    A = np.linalg.qr(rng.standard_normal((5, 2)))[0]
    m = KruskalModel([1.5, 0.5], [A, rng.standard_normal((4, 2))])
    normalize_columns(m, 0)
    np.testing.assert_allclose(m.weights, [1.5, 0.5])

    m = KruskalModel([2.0], [np.array([[3.0], [0.0]]), np.ones((2, 1))])
    normalize_columns(m, 0)
    assert m.weights[0] == pytest.approx(6.0)
    np.testing.assert_allclose(m.factors[0], [[1.0], [0.0]])

    m = KruskalModel([2.0, 1.0], [np.array([[0.0, 2.0], [0.0, 0.0]]), np.ones((2, 2))])
    normalize_columns(m, 0, rng=1)
    assert m.weights[0] == 0
    assert np.linalg.norm(m.factors[0][:, 0]) == pytest.approx(1.0)


@given(st.integers(0, 10_000), st.integers(0, 2))
def test_normalize_with_absorb_keeps_tensor(seed, n):
    r = np.random.default_rng(seed)
    m = random_model(r, (2, 3, 4), 3)
    before = m.full().data
    normalize_columns(m, n, absorb=True)
    np.testing.assert_allclose(m.full().data, before, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(m.factors[n], axis=0), 1.0, atol=1e-12)


# initialization

def test_init_random(rng):
    a, b = init_random((3, 4, 5), 2, seed=7), init_random((3, 4, 5), 2, seed=7)
    for A, B in zip(a.factors, b.factors):
        np.testing.assert_array_equal(A, B)
    c = init_random((3, 4, 5), 2, seed=8)
    assert not np.array_equal(a.factors[1], c.factors[1])
    for A in a.factors[1:]:
        assert A.min() >= 0 and A.max() < 1
    np.testing.assert_array_equal(a.weights, 1)
    with pytest.raises(ConfigError):
        init_random((3, 4), 0)


def test_init_hosvd_rank_one(rng):
    X, vecs = rank_one(rng, (4, 5, 6), lam=3.0)
    m = init_hosvd(X, 1)
    for A, v in zip(m.factors[1:], vecs[1:]):
        assert abs(A[:, 0] @ v) > 1 - 1e-8


def test_init_hosvd_superdiagonal():
    X = DenseTensor(np.einsum("ir,jr,kr->ijk", np.eye(3), np.eye(3), np.diag([3.0, 2.0, 1.0]) @ np.eye(3)))
    m = init_hosvd(X, 3)
    for A in m.factors[1:]:
        P = np.abs(A)
        np.testing.assert_allclose(np.sort(P, axis=0)[-1], 1.0, atol=1e-12)
        np.testing.assert_allclose(P.sum(axis=0), 1.0, atol=1e-12)


def test_init_hosvd_orthonormal_and_extra_columns(rng):
    X = DenseTensor(rng.standard_normal((6, 7, 3)))
    m = init_hosvd(X, 3)
    for A in m.factors[1:]:
        np.testing.assert_allclose(A.T @ A, np.eye(3), atol=1e-10)
    wide = init_hosvd(X, 5, seed=0)
    np.testing.assert_allclose(np.linalg.norm(wide.factors[2], axis=0), 1.0)
    np.testing.assert_allclose(wide.factors[2][:, :3].T @ wide.factors[2][:, :3], np.eye(3), atol=1e-10)


# fit

def test_exact_fit_examples(rng):
    m = random_model(rng, (3, 4, 5), 2)
    X = m.full()
    assert exact_fit(X, m) == pytest.approx(1.0, abs=1e-7)
    zero = KruskalModel(np.zeros(2), m.factors)
    assert exact_fit(X, zero) == pytest.approx(0.0, abs=1e-15)
    Y = DenseTensor(rng.standard_normal((3, 4, 5)))
    assert exact_fit(Y, m) == pytest.approx(dense_fit(Y, m), abs=1e-10)
    with pytest.raises(ValueError):
        exact_fit(DenseTensor(np.ones((3, 4))), m)


@given(st.integers(0, 10_000))
def test_exact_fit_matches_dense(seed):
    r = np.random.default_rng(seed)
    m = random_model(r, (2, 3, 4), 2)
    Y = DenseTensor(r.standard_normal((2, 3, 4)))
    assert exact_fit(Y, m) == pytest.approx(dense_fit(Y, m), abs=1e-10)


# solver

def test_options_validation():
    with pytest.raises(ConfigError):
        SolveOptions(max_iters=0)
    with pytest.raises(ConfigError):
        SolveOptions(fit_tolerance=0)
    with pytest.raises(ConfigError):
        SolveOptions(init="svd")


def test_cp_als_rank_one(rng):
    X, _ = rank_one(rng, (5, 6, 7), lam=2.0)
    m, trace = cp_als(X, 1, SolveOptions(max_iters=50, fit_tolerance=1e-12))
    assert trace[-1].fit >= 1 - 1e-8
    assert len(trace) <= 50


def test_cp_als_zero_tensor():
    m, trace = cp_als(DenseTensor(np.zeros((3, 4, 5))), 2)
    np.testing.assert_array_equal(m.weights, 0)
    assert trace[-1].fit == 1.0
    assert len(trace) == 1


def test_cp_als_hosvd_recovers_collinear():
    p = gen_problem(SynthParams((20, 20, 20), rank_true=3, collinearity=0.5, noise=0.0, seed=3))
    m, _ = cp_als(p.tensor, 3, SolveOptions(init="hosvd", fit_tolerance=1e-10, max_iters=500))
    assert score(p.truth, m) >= 0.99


def test_cp_als_monotone_and_consistent(rng):
    X = DenseTensor(rng.standard_normal((6, 7, 8)))
    residuals = []

    def check(it, model):
        # the last solved mode satisfies its normal equations
        n = model.ndim - 1
        V = gram_of_khatri_rao(model.factors, skip=n)
        W = mttkrp(X, model.factors, n)
        residuals.append(np.linalg.norm(model.factors[n] * model.weights @ V - W) / np.linalg.norm(W))
        assert np.all(model.weights >= 0)
        for A in model.factors:
            np.testing.assert_allclose(np.linalg.norm(A, axis=0), 1.0, atol=1e-12)

    m, trace = cp_als(X, 4, SolveOptions(max_iters=40, fit_tolerance=1e-12, seed=2), callback=check)
    fits = [t.fit for t in trace]
    assert all(b >= a - 1e-10 for a, b in zip(fits, fits[1:]))
    assert max(residuals) <= 1e-8
    assert exact_fit(X, m) == pytest.approx(fits[-1], abs=1e-10)
    times = [t.elapsed_seconds for t in trace]
    assert times == sorted(times)


def test_cp_als_stopping_rules(rng):
    m0 = random_model(rng, (5, 6, 7), 2)
    X = m0.full()
    _, trace = cp_als(X, 2, SolveOptions(fit_threshold=0.5, max_iters=100))
    assert trace[-1].fit >= 0.5
    assert all(t.fit < 0.5 for t in trace[:-1])
    _, trace = cp_als(DenseTensor(rng.standard_normal((5, 6, 7))), 2, SolveOptions(max_iters=3, fit_tolerance=1e-15))
    assert len(trace) == 3


def test_cp_als_given_init_and_determinism(rng):
    X = DenseTensor(rng.standard_normal((4, 5, 6)))
    init = random_model(rng, (4, 5, 6), 2)
    a, _ = cp_als(X, 2, SolveOptions(init=init, max_iters=5))
    b, _ = cp_als(X, 2, SolveOptions(init=init, max_iters=5, seed=99))
    for A, B in zip(a.factors, b.factors):
        np.testing.assert_array_equal(A, B)
    with pytest.raises(ConfigError):
        cp_als(X, 3, SolveOptions(init=init))
