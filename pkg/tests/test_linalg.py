from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from matprod.errors import InputError, NotSquare, ProductVanished, ZeroMatrix
from matprod.linalg import (as_matrix, common_left_eigenvector, eigen_decompose, entry_norm, exact_det,
                            exact_null_vector, exact_rank, float_det, matrix_from_literal, matrix_to_literal,
                            parse_scalar, qr_eigenvalues, scaled_identity, scaled_multiply, shape_functionals,
                            singular_values, spectral_radius, support_pattern)

small = st.floats(min_value=-10, max_value=10, allow_nan=False, allow_infinity=False)
nonneg = st.one_of(st.just(0.0), st.floats(min_value=1e-3, max_value=10))


def test_parse_scalar_fraction_strings():
    assert parse_scalar("3/4", exact=True) == Fraction(3, 4)
    assert parse_scalar("3/4") == 0.75
    assert parse_scalar(2, exact=True) == Fraction(2)


def test_as_matrix_rejects_negative_when_asked():
    with pytest.raises(InputError):
        as_matrix([[1, -1], [0, 1]], nonnegative=True)


def test_literal_roundtrip_exact():
    M = as_matrix([["1/3", "0"], ["2", "5/7"]], exact=True)
    back = matrix_from_literal(matrix_to_literal(M))
    assert back.dtype == object
    assert (back == M).all()


def test_literal_shape_mismatch():
    with pytest.raises(InputError):
        matrix_from_literal({"rows": 3, "cols": 2, "data": [[1, 2], [3, 4]]})


def test_entry_norm_exact_and_float():
    assert entry_norm(as_matrix([["1/2", "-1/3"]], exact=True)) == Fraction(5, 6)
    assert entry_norm(np.array([[1.0, -2.0], [0.5, 0.0]])) == 3.5


def test_exact_det_and_rank_against_numpy():
    rng = np.random.default_rng(3)
    for _ in range(20):
        A = rng.integers(-4, 5, size=(4, 4))
        E = as_matrix(A.tolist(), exact=True)
        assert float(exact_det(E)) == pytest.approx(np.linalg.det(A), abs=1e-9)
        assert exact_rank(E) == np.linalg.matrix_rank(A)


def test_exact_det_requires_square():
    with pytest.raises(NotSquare):
        exact_det(as_matrix([[1, 2, 3]], exact=True))


def test_exact_null_vector():
    M = as_matrix([[1, 2], [2, 4]], exact=True)
    v = exact_null_vector(M)
    assert v is not None
    assert all(x == 0 for x in M @ np.array(v, dtype=object))
    assert exact_null_vector(as_matrix([[1, 0], [0, 1]], exact=True)) is None


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (4, 4), elements=small))
def test_float_det_matches_numpy(A):
    assert float_det(A) == pytest.approx(np.linalg.det(A), rel=1e-8, abs=1e-8)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.data())
def test_singular_values_match_numpy(m, n, data):
    A = data.draw(arrays(np.float64, (m, n), elements=small))
    mine = singular_values(A)
    ref = np.linalg.svd(A, compute_uv=False)
    assert np.allclose(mine[:len(ref)], ref, atol=1e-9 * max(1.0, ref.max(initial=0.0)))


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (5, 5), elements=small))
def test_eigenvalues_match_numpy(A):
    mine = np.sort_complex(np.round(qr_eigenvalues(A), 6))
    ref = np.sort_complex(np.round(np.linalg.eigvals(A), 6))
    scale = max(1.0, np.abs(A).max())
    # compare as multisets via sorted absolute difference of closest matches
    for z in ref:
        assert np.min(np.abs(mine - z)) < 1e-5 * scale


def test_eigen_decompose_perron_pair():
    A = np.array([[2.0, 1.0], [1.0, 2.0]])
    dec = eigen_decompose(A)
    assert dec.spectral_radius == pytest.approx(3.0)
    assert np.allclose(A @ dec.perron_right, 3 * dec.perron_right)
    assert np.all(dec.perron_right >= 0)
    assert spectral_radius(A) == pytest.approx(max(abs(np.linalg.eigvals(A))))


def test_scaled_multiply_tracks_log_norm():
    rng = np.random.default_rng(0)
    mats = [rng.random((3, 3)) + 0.1 for _ in range(50)]
    acc = scaled_identity(3)
    direct = np.eye(3)
    for M in mats:
        acc = scaled_multiply(acc, M)
        direct = direct @ M
    assert acc.log_norm() == pytest.approx(np.log(np.abs(direct).sum()), rel=1e-12)
    assert np.allclose(acc.value(), direct, rtol=1e-10)


def test_scaled_multiply_vanishing():
    with pytest.raises(ProductVanished):
        scaled_multiply(scaled_identity(2), np.zeros((2, 2)))


def test_support_pattern_counts_distinct_columns():
    pat, n = support_pattern(np.array([[1.0, 1.0, 0.0], [0.0, 0.0, 2.0]]))
    assert n == 2


def test_common_left_eigenvector_found_and_absent():
    # (1,1) is a common left eigenvector of column-stochastic matrices
    A = np.array([[0.5, 0.2], [0.5, 0.8]])
    B = np.array([[0.9, 0.3], [0.1, 0.7]])
    found, w = common_left_eigenvector(A, B)
    assert found
    w = np.real(w)
    assert abs(w[0] - w[1]) < 1e-8 * abs(w[0])
    C = np.array([[1.0, 1.0], [0.0, 2.0]])
    D = np.array([[1.0, 0.0], [1.0, 2.0]])   # left eigenvectors (1,0), (1,1)
    assert common_left_eigenvector(C, D)[0] is False


def test_shape_functionals_exact_ratios():
    M = as_matrix([[1, 3], [2, 0]], exact=True)
    sf = shape_functionals(M)
    assert sf.Lambda == Fraction(2)
    with pytest.raises(ZeroMatrix):
        shape_functionals(as_matrix([[0, 0], [0, 0]], exact=True))


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (3, 3), elements=nonneg))
def test_shape_functionals_scale_invariant(A):
    if not (A > 0).any():
        return
    a = shape_functionals(A)
    b = shape_functionals(7.0 * A)
    assert a.Lambda == pytest.approx(b.Lambda, rel=1e-9)
    assert a.lambda_small == pytest.approx(b.lambda_small, rel=1e-9)
    assert a.Lambda >= 1.0


def test_eigenvalues_with_subnormal_entry():
    # a subnormal entry used to overflow the complex phase in the Householder and Givens steps
    A = np.ones((5, 5))
    A[1, 0] = 2.22507386e-311
    mine = qr_eigenvalues(A)
    for z in np.linalg.eigvals(A):
        assert np.min(np.abs(mine - z)) < 1e-9
