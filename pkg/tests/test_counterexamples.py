import math
from fractions import Fraction

import numpy as np
import pytest

from matprod.counterexamples import (ce12_build_and_verify, ce12_family, ce13_closed_form, ce13_verify, ce13_word,
                                     ce22_limits, p_upper)
from matprod.errors import InputError
from matprod.trajectory import make_rng


def test_p_upper_bounds_the_infinite_product():
    prod = 1.0
    for j in range(200):
        prod *= 1 + 2.0 ** -j
    assert float(p_upper()) >= prod
    assert float(p_upper()) - prod < 1e-10


def test_ce12_k1_matches_displayed_shape():
    b = ce12_build_and_verify(1)
    n1 = b.exponents[0]
    assert b.v(1) == (Fraction(1, 2 ** n1), Fraction(1))
    assert b.partial_sums == [n1 + 1]


def test_ce12_k4_certificates():
    b = ce12_build_and_verify(4)
    assert b.verified
    assert b.exponents == [1, 4, 6, 8]
    assert b.checkpoints == [3, 9, 17, 27]
    assert b.certificates_ok
    assert all(d >= b.bound for d in b.dets)
    assert min(b.sv_ratios) >= 0.01


def test_ce12_independent_float_replay():
    # rebuild P_n from the word with plain floats and compare the certificate values
    b = ce12_build_and_verify(4)
    D, F = np.array([[0.5, 0.0], [0.0, 1.0]]), np.array([[1.0, 1.0], [1.0, 0.0]])
    P = np.eye(2)
    got = {}
    for n, s in enumerate(b.word(), start=1):
        P = P @ (D if s == 0 else F)
        if n in b.checkpoints:
            got[n] = abs(np.linalg.det(P)) / np.abs(P).sum() ** 2
            col = np.abs(P).sum(axis=0)
            assert 1 <= col[0] / col[1] <= 2
    for n, d in zip(b.checkpoints, b.dets):
        assert got[n] == pytest.approx(float(d), rel=1e-12)


def test_ce12_recurrence_and_bounds_reverified():
    b = ce12_build_and_verify(4)
    ns = [0] + b.exponents
    for k in range(1, 5):
        vk, v1, v2 = b.v(k), b.v(k - 1), b.v(k - 2)
        rec = tuple(Fraction(1, 2 ** ns[k]) * x + Fraction(1, 2 ** ns[k - 1]) * y for x, y in zip(v1, v2))
        assert rec == vk
        assert sum(vk) <= (Fraction(1, 2 ** k) + 1) * Fraction(1, 2 ** ns[k - 1]) * sum(v2)
    for k in range(1, 4):
        assert b.offsets[k - 1] <= b.exponents[k]


def test_ce12_rejects_large_k():
    with pytest.raises(InputError):
        ce12_build_and_verify(9)


def test_ce12_family_matrices():
    fam = ce12_family()
    assert fam.matrices[0].tolist() == [[0.5, 0.0], [0.0, 1.0]]


def test_ce13_closed_form_k1():
    assert ce13_closed_form(1).tolist() == [[1, 0, 2], [0, 1, 2], [0, 0, 1]]
    rep = ce13_verify(1, limit_k=12)
    assert rep.closed_form_match and rep.appended_match


def test_ce13_closed_form_up_to_12_by_numpy_int():
    A = np.array([[1, 0, 1], [0, 1, 0], [0, 0, 1]], dtype=np.int64)
    B = np.array([[1, 0, 0], [0, 1, 1], [0, 0, 1]], dtype=np.int64)
    for k in range(1, 13):
        P = np.eye(3, dtype=np.int64)
        for i in range(1, k + 1):
            P = P @ np.linalg.matrix_power(A, 2 ** i) @ np.linalg.matrix_power(B, 2 ** i)
        assert P.tolist() == ce13_closed_form(k).tolist()
        Q = P @ np.linalg.matrix_power(A, 2 ** (k + 1))
        assert Q.tolist() == ce13_closed_form(k, appended=True).tolist()


def test_ce13_k5_centroids_and_orders():
    rep = ce13_verify(5)
    assert rep.closed_form_match
    assert max(rep.centroid_errors) < 1e-6
    assert len(rep.centroids) == 2
    lo, hi = rep.sv_orders["n_delta3"]
    assert 0.05 <= lo and hi <= 20


def test_ce13_word_length():
    assert len(ce13_word(3)) == 2 * (2 + 4 + 8)


def test_ce22_example_values():
    rep = ce22_limits((0.4, 0.1, 0.2, 0.3))
    assert rep.limit_11 == pytest.approx([2 / 3, 1 / 3], abs=1e-9)
    assert rep.predicted_11 == pytest.approx(rep.limit_11, abs=1e-9)
    assert rep.limit_12 == pytest.approx([1.0, 0.0], abs=1e-9)
    assert not rep.uniform


def test_ce22_limit_by_power_iteration():
    # plain power iteration on M_1 as an independent route
    p0, p1, p2, p3 = 0.4, 0.1, 0.2, 0.3
    M1 = np.array([[p1, p0], [0.0, p3]])
    v = np.array([0.5, 0.5])
    for _ in range(400):
        v = M1 @ v
        v /= v.sum()
    assert v == pytest.approx(ce22_limits((p0, p1, p2, p3)).limit_11, abs=1e-12)


@pytest.mark.parametrize("p", [(0.25, 0.25, 0.25, 0.25), (0.1, 0.4, 0.2, 0.3)])
def test_ce22_uniform_cases(p):
    assert ce22_limits(p).uniform


def test_ce22_sweep_uniform_iff_p3_le_p1():
    rng = make_rng(7)
    for _ in range(20):
        w = rng.random(4) + 0.05
        p = tuple((w / w.sum()).tolist())
        rep = ce22_limits(p)
        assert rep.uniform == (p[3] <= p[1])
        assert rep.uniform == rep.predicted_uniform
