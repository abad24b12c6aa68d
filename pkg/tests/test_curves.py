from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from matprod.bernoulli import build_representation, cylinder_measure
from matprod.curves import build_refinement_matrices, digits, residual_checks, sample_curve, system_from_bernoulli
from matprod.errors import EigenvalueNotOne, InputError
from matprod.trajectory import make_rng

F = Fraction


def hat():
    return build_refinement_matrices(2, ["1/2", "1", "1/2"])


def test_indicator_system():
    s = build_refinement_matrices(2, [1, 1])
    assert s.q == 0
    assert [B.tolist() for B in s.matrices] == [[[1]], [[1]]]
    assert s.coeff_sum == 2


def test_hat_matrices_by_index_rule():
    s = hat()
    assert s.q == 1
    assert s.matrices[0].tolist() == [[F(1, 2), 0], [F(1, 2), 1]]
    assert s.matrices[1].tolist() == [[1, F(1, 2)], [0, F(1, 2)]]
    assert s.even_odd_balanced
    assert np.allclose(s.seed, [0.5, 0.5])


def test_build_errors():
    with pytest.raises(InputError):
        build_refinement_matrices(1, [1, 1])
    with pytest.raises(InputError):
        build_refinement_matrices(2, [1])


def test_digits_exact():
    assert digits(F(3, 8), 2, 5) == [0, 1, 1, 0, 0]
    assert digits(F(1, 3), 3, 3) == [1, 0, 0]
    with pytest.raises(InputError):
        digits(1, 2, 3)


def test_scalar_system_is_constant():
    s = build_refinement_matrices(2, [1, 1])
    cs = sample_curve(s, [F(0), F(1, 3), F(7, 8)], depth=20)
    assert np.allclose(cs.psi, 1.0)
    rep = residual_checks(s, [F(1, 3), F(5, 7)], depth=20)
    assert rep.self_similarity_residual == 0


def test_hat_half():
    cs = sample_curve(hat(), [F(1, 2)], depth=40)
    assert np.abs(cs.psi[0] - [0.5, 0.5]).max() < 1e-8


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 20 - 1))
def test_hat_matches_closed_form(m):
    x = F(m, 2 ** 20)
    psi = sample_curve(hat(), [x], depth=40).psi[0]
    assert np.allclose(psi, [float(x), 1 - float(x)], atol=1e-9)


def test_psi_at_zero_is_perron_projection():
    s = hat()
    B0 = s.float_matrices()[0]
    v = s.seed.copy()
    for _ in range(200):
        v = B0 @ v
    assert np.allclose(sample_curve(s, [F(0)], depth=60).psi[0], v, atol=1e-12)


def test_hat_residuals():
    rng = make_rng(0)
    xs = [F(int(rng.integers(1, 2 ** 30)), 2 ** 30) for _ in range(50)]
    rep = residual_checks(hat(), xs, depth=40)
    assert rep.self_similarity_residual < 1e-8
    assert rep.passes()
    assert max(rep.endpoint_gaps) < 1e-8
    assert rep.self_similarity_residual <= 3 * max(rep.truncation_gap, 1e-15)


def test_broken_endpoint_matching_reported():
    s = build_refinement_matrices(2, [1, 0.5])
    with pytest.raises(EigenvalueNotOne):
        residual_checks(s, [F(1, 3)], depth=20)
    rep = residual_checks(s, [F(1, 3)], depth=20, seed=[1])
    assert rep.endpoint_gaps[0] > 0.1


def test_bernoulli_system_integrates_back_to_c_nu():
    law = build_representation(2, ["1/4", "1/2", "1/4"])
    s = system_from_bernoulli(law)
    n = 10
    xs = [F(2 * j + 1, 2 ** (n + 1)) for j in range(2 ** n)]
    psi = sample_curve(s, xs, depth=40).psi
    assert np.allclose(psi.mean(axis=0), law.c_nu, atol=1e-4)
    # psi_h(x) is the distribution-function density: cylinder mass over cylinder width
    for j in (0, 17, 600):
        w = digits(xs[j], 2, n)
        for h in range(2):
            assert psi[j][h] == pytest.approx(float(cylinder_measure(law, w, h, exact=True)) * 2 ** n, rel=1e-6)
