import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eqlm.linalg import InvalidInputError, ShapeError, matmul, pinv, transpose


def penrose_residuals(m, mp):
    return (
        np.abs(m @ mp @ m - m).max(),
        np.abs(mp @ m @ mp - mp).max(),
        np.abs((m @ mp).T - m @ mp).max(),
        np.abs((mp @ m).T - mp @ m).max(),
    )


def scaled_penrose_residuals(m, mp):
    """Residuals divided by the size of the products formed, so ill-conditioned
    inputs are judged on backward error rather than absolute magnitude."""
    a, x = np.linalg.norm(m, 2) or 1.0, np.linalg.norm(mp, 2) or 1.0
    c1, c2, c3, c4 = penrose_residuals(m, mp)
    return c1 / (a * a * x), c2 / (x * x * a), c3 / (a * x), c4 / (a * x)


def naive_matmul(a, b):
    out = np.zeros((a.shape[0], b.shape[1]))
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            for k in range(a.shape[1]):
                out[i, j] += a[i, k] * b[k, j]
    return out


def test_pinv_identity():
    np.testing.assert_array_equal(pinv(np.eye(3)), np.eye(3))


def test_pinv_rank_deficient_diagonal():
    np.testing.assert_allclose(pinv([[2.0, 0.0], [0.0, 0.0]]), [[0.5, 0.0], [0.0, 0.0]])


def test_pinv_full_column_rank():
    m = np.random.default_rng(3).normal(size=(5, 3))
    mp = pinv(m)
    assert mp.shape == (3, 5)
    assert max(penrose_residuals(m, mp)) < 1e-10


def test_pinv_invertible_equals_inverse():
    rng = np.random.default_rng(4)
    m = rng.normal(size=(6, 6)) + 6 * np.eye(6)
    np.testing.assert_allclose(pinv(m), np.linalg.inv(m), atol=1e-8)


def test_pinv_zero_matrix():
    np.testing.assert_array_equal(pinv(np.zeros((2, 3))), np.zeros((3, 2)))


def test_pinv_rejects_non_finite():
    with pytest.raises(InvalidInputError):
        pinv([[1.0, np.nan]])
    with pytest.raises(InvalidInputError):
        pinv(np.zeros((0, 0)))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 50), st.integers(1, 50), st.integers(0, 50), st.integers(0, 2**32 - 1))
def test_penrose_conditions(rows, cols, rank, seed):
    rng = np.random.default_rng(seed)
    r = min(rank, rows, cols)
    m = rng.normal(size=(rows, r)) @ rng.normal(size=(r, cols)) if r else np.zeros((rows, cols))
    assert max(scaled_penrose_residuals(m, pinv(m))) < 1e-12


def test_matmul_identity_and_small():
    m = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(matmul(np.eye(2), m), m)
    np.testing.assert_array_equal(matmul([[1, 2]], [[3], [4]]), [[11.0]])


def test_matmul_matches_triple_loop():
    rng = np.random.default_rng(5)
    a, b = rng.normal(size=(3, 4)), rng.normal(size=(4, 2))
    np.testing.assert_allclose(matmul(a, b), naive_matmul(a, b), atol=1e-12)


def test_matmul_shape_error():
    with pytest.raises(ShapeError):
        matmul(np.ones((2, 3)), np.ones((2, 3)))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(1, 6), st.integers(1, 6),
       st.integers(0, 2**32 - 1))
def test_matmul_associative(p, q, r, s, seed):
    rng = np.random.default_rng(seed)
    a, b, c = rng.normal(size=(p, q)), rng.normal(size=(q, r)), rng.normal(size=(r, s))
    left = matmul(matmul(a, b), c)
    right = matmul(a, matmul(b, c))
    scale = np.abs(a).max() * np.abs(b).max() * np.abs(c).max() * q * r
    assert np.abs(left - right).max() <= 1e-9 * max(scale, 1.0)


def test_transpose():
    np.testing.assert_array_equal(transpose(np.eye(2)), np.eye(2))
    np.testing.assert_array_equal(transpose([[1, 2, 3]]), [[1], [2], [3]])
    m = np.random.default_rng(0).normal(size=(3, 5))
    np.testing.assert_array_equal(transpose(transpose(m)), m)
