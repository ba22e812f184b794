import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from dynamo.acyclicity import has_cycle, h_from_squares, h_gradient, h_value, h_value_and_gradient, matrix_exp


def test_antidiagonal_two_cycle():
    W = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert h_value(W) == pytest.approx(2 * np.cosh(1) - 2, abs=1e-12)
    assert h_value(W) == pytest.approx(1.0861612696, abs=1e-10)


def test_zero_and_triangular_are_acyclic():
    assert h_value(np.zeros((4, 4))) == 0.0
    assert h_value(np.triu(np.ones((4, 4)), 1)) == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("scale", [1e-3, 0.5, 3.0, 20.0])
def test_matrix_exp_matches_scipy(scale):
    M = np.random.default_rng(1).standard_normal((6, 6)) * scale
    ref = sla.expm(M)
    assert np.allclose(matrix_exp(M), ref, rtol=1e-10, atol=1e-12 * np.abs(ref).max())


def test_matrix_exp_inverse():
    M = np.random.default_rng(2).standard_normal((5, 5))
    assert np.allclose(matrix_exp(M) @ matrix_exp(-M), np.eye(5), atol=1e-11)


def test_matrix_exp_overflow_raises():
    with pytest.raises(OverflowError):
        matrix_exp(np.full((3, 3), 1e4))


def test_non_square_rejected():
    with pytest.raises(ValueError):
        h_value(np.zeros((2, 3)))


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    W = rng.uniform(-0.8, 0.8, (5, 5))
    g = h_gradient(W)
    eps = 1e-6
    fd = np.zeros_like(W)
    for i in range(5):
        for j in range(5):
            E = np.zeros_like(W)
            E[i, j] = eps
            fd[i, j] = (h_value(W + E) - h_value(W - E)) / (2 * eps)
    assert np.allclose(g, fd, rtol=1e-6, atol=1e-9)
    v, g2 = h_value_and_gradient(W)
    assert v == h_value(W) and np.array_equal(g, g2)


def test_h_from_squares_consistent():
    W = np.random.default_rng(4).uniform(-1, 1, (4, 4))
    v, dS = h_from_squares(W * W)
    assert v == pytest.approx(h_value(W))
    assert np.allclose(2 * W * dS, h_gradient(W))


def test_dfs_agrees_on_random_matrices():
    rng = np.random.default_rng(5)
    for _ in range(200):
        d = int(rng.integers(2, 8))
        M = (rng.random((d, d)) < 0.25) * rng.uniform(0.5, 1.5, (d, d))
        np.fill_diagonal(M, 0)
        assert has_cycle(M) == (h_value(M) > 1e-8)


def test_self_loop_is_cycle():
    M = np.zeros((3, 3))
    M[1, 1] = 0.5
    assert has_cycle(M) and h_value(M) > 0


@settings(max_examples=50)
@given(arrays(np.float64, (4, 4), elements=st.floats(-2, 2)))
def test_h_nonnegative_and_sign_invariant(W):
    assert h_value(W) >= -1e-12
    assert h_value(W) == pytest.approx(h_value(-W), abs=1e-12)


@settings(max_examples=50)
@given(st.integers(2, 7), st.randoms(use_true_random=False))
def test_permuted_triangular_has_zero_h(d, rnd):
    rng = np.random.default_rng(rnd.randint(0, 2**32 - 1))
    U = np.triu(rng.uniform(-2, 2, (d, d)), 1)
    p = rng.permutation(d)
    assert h_value(U[np.ix_(p, p)]) == pytest.approx(0.0, abs=1e-12)
