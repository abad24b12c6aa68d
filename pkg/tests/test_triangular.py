from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from matprod.counterexamples import ce13_family, ce13_word
from matprod.errors import HorizonTooShort, InconclusiveFiniteness, InputError, NotTriangular, ZeroDiagonal
from matprod.trajectory import make_rng
from matprod.triangular import (BlockPartition, block_form_detect, classify3x3_and_predict, distinct_column_count,
                                finiteness, in_block_triangular, lower_tri_sv_check, series3x3)

F = Fraction


def upper(a, b, c, d, e, f):
    return [[a, b, c], [0, d, e], [0, 0, f]]


def fraction_product(mats):
    P = [[F(int(i == j)) for j in range(3)] for i in range(3)]
    for M in mats:
        P = [[sum(P[i][k] * M[k][j] for k in range(3)) for j in range(3)] for i in range(3)]
    return P


def random_dyadic_upper(rng):
    def dy(lo=0):
        return F(int(rng.integers(lo, 9)), 2 ** int(rng.integers(0, 4)))
    return upper(dy(1), dy(), dy(), dy(1), dy(), dy(1))


def test_identity_series():
    s = series3x3([upper(1, 0, 0, 1, 0, 1)], n=10, exact=True)
    assert all(x == 0 for x in s.s + s.t + s.u + s.tau)
    assert (s.closed_form == np.eye(3, dtype=int)).all()


def test_constant_factor_geometric_sums():
    s = series3x3([upper("1/2", 1, 0, 1, 1, "1/3")], n=20)
    assert s.exact
    assert s.s[-1] == 2 - F(1, 2 ** 19)
    assert s.u[-1] == sum(F(3) ** k for k in range(1, 21))
    assert s.agreement


def test_random_dyadic_closed_form_exact():
    rng = make_rng(12)
    for _ in range(100):
        mats = [random_dyadic_upper(rng) for _ in range(30)]
        s = series3x3(mats, n=30)
        assert s.exact and s.agreement
        direct = fraction_product(mats)
        assert [[s.closed_form[i, j] for j in range(3)] for i in range(3)] == direct
        assert all(s.monotone.values())


entry = st.floats(0.0, 4.0)
diag = st.floats(0.1, 4.0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(diag, entry, entry, diag, entry, diag), min_size=2, max_size=40))
def test_series_monotone_and_closed_form_float(raw):
    s = series3x3([upper(*r) for r in raw])
    assert all(s.monotone.values())
    assert s.agreement


def test_series_input_errors():
    with pytest.raises(NotTriangular):
        series3x3([[[1, 0, 0], [1, 1, 0], [0, 0, 1]]])
    with pytest.raises(ZeroDiagonal):
        series3x3([upper(1, 0, 0, 0, 0, 1)])
    with pytest.raises(InputError):
        series3x3([])


def test_finiteness_rule():
    assert finiteness([1, 1.5, 1.75, 1.75, 1.75, 1.75, 1.75, 1.75]) is True
    assert finiteness([2.0 ** k for k in range(20)]) is False
    assert finiteness(list(range(1, 41))) is None
    assert finiteness([1, 2]) is None


def _classify(factor, n=200):
    s = series3x3([factor], n=n, exact=False)
    return classify3x3_and_predict(s)


def test_case1_exemplar():
    cl = _classify(upper(2, 1, 1, 1, 1, 1 / 3))
    assert cl.case == 1
    assert cl.prediction == [1.0, 0.0, 0.0]
    assert cl.gap < 1e-6


def test_equal_diagonal_case1_shape_is_inconclusive():
    # b ≡ e ≡ 1 with a = d makes s grow linearly, which the last-quarter rule cannot call
    with pytest.raises(InconclusiveFiniteness):
        _classify(upper(1, 1, 1, 1, 1, 0.25))


def test_case2_exemplar():
    cl = _classify(upper(2, 1, 0, 1, 1, 4))
    assert cl.case == 2
    assert cl.gap < 1e-6


def test_case3_exemplar():
    cl = _classify(upper(0.5, 1, 0, 1, 1, 1 / 3))
    assert cl.case == 3
    assert cl.prediction[2] == 0.0
    assert cl.gap < 1e-8


def test_case4_exemplar():
    cl = _classify(upper(0.5, 1, 1, 1, 1, 2))
    assert cl.case == 4
    assert cl.gap < 1e-6


def test_identity_has_no_common_limit():
    cl = _classify(upper(1, 0, 0, 1, 0, 1), n=40)
    assert cl.case == 4
    assert cl.verdict == "NO_COMMON_LIMIT"
    imgs = np.array(cl.empirical)
    assert np.abs(imgs[0] - imgs[1]).max() > 0.1


def test_case3_prediction_against_power_iteration():
    A = np.array(upper(0.5, 1, 0, 1, 1, 1 / 3))
    v = np.array([1.0, 2.0, 3.0])
    for _ in range(300):
        v = A @ v
        v /= v.sum()
    cl = _classify(A.tolist())
    assert np.allclose(v, cl.prediction, atol=1e-10)


def test_partition_and_membership_helpers():
    Z = np.array([[1, 0, 1], [0, 1, 1], [0, 0, 1]])
    assert distinct_column_count(Z) == 3
    assert distinct_column_count(np.zeros((2, 3))) == 1
    part = BlockPartition([[0], [1], [2]])
    assert part.delta == 3
    assert in_block_triangular(Z, part)
    assert not in_block_triangular(Z.T, part)
    with pytest.raises(InputError):
        BlockPartition([[0], [2]])


def test_block_form_constant_positive():
    M = np.full((3, 3), 0.5)
    rep = block_form_detect([M] * 40, horizon=40)
    assert rep.delta == 1
    assert rep.partition == [[0, 1, 2]]
    assert rep.t1_membership


def test_block_form_ce13():
    rep = block_form_detect((ce13_family(), ce13_word(8)), horizon=400)
    assert rep.delta == 3
    assert rep.pattern == [[1, 0, 1], [0, 1, 1], [0, 0, 1]]
    assert rep.t1_membership
    assert len(rep.checkpoints) >= 3


def test_block_form_upper_triangular_pair_by_direct_scan():
    A = np.array([[2.0, 1.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    B = np.array([[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]])
    rep = block_form_detect([A, B] * 30, horizon=60)
    assert rep.t1_membership
    mats = [A, B] * 30
    cps = rep.checkpoints
    for i, a in enumerate(cps):
        for b in cps[i + 1:]:
            P = np.eye(3)
            for M in mats[a:b]:
                P = P @ M
            assert ((P != 0).astype(int).tolist()) == rep.pattern


def test_block_form_horizon_bounds():
    with pytest.raises(InputError):
        block_form_detect([np.eye(2)] * 10, horizon=4)
    with pytest.raises(InputError):
        block_form_detect([np.eye(2)] * 10, horizon=20)


def test_block_form_horizon_too_short():
    # a positive stretch then identities: the window maxima only settle at n = 15
    mats = [np.ones((3, 3))] * 15 + [np.eye(3)] * 25
    with pytest.raises(HorizonTooShort):
        block_form_detect(mats, horizon=40)


def test_lower_tri_verdicts():
    diagonal = lower_tri_sv_check([[[2, 0], [0, 1]]])
    assert diagonal.ratio_bounded and diagonal.sv_column_match
    bounded = lower_tri_sv_check([[[2, 0], [1, 1]]])
    assert bounded.ratio_bounded and bounded.sv_column_match
    divergent = lower_tri_sv_check([[[1, 0], [1, 1]]])
    assert not divergent.ratio_bounded and not divergent.sv_column_match
    assert diagonal.agree and bounded.agree and divergent.agree


def test_lower_tri_rejects_upper():
    with pytest.raises(NotTriangular):
        lower_tri_sv_check([[[1, 1], [0, 1]]])
