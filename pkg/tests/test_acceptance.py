"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest -s tests/test_acceptance.py`` to see the lines; a summary
table is also printed at the end of the session.
"""

import itertools
import time
from fractions import Fraction

import numpy as np
import pytest

from matprod.bernoulli import (beta_representation, build_representation, cylinder_interval, cylinder_measure,
                               enumeration_oracle, markov_representation, thm23_family)
from matprod.counterexamples import ce12_build_and_verify, ce13_verify, ce22_limits
from matprod.curves import build_refinement_matrices, residual_checks, sample_curve
from matprod.factorize import (BODY_TEMPLATES, HEAD_TEMPLATES, U135, growth_and_bounds, letter_matrices,
                               structure_checks, tokenize, word_matrix)
from matprod.gibbs import cylinder_ratio_probe, potential_and_ratio, scale_spectrum_and_legendre
from matprod.trajectory import (SymbolSequence, divergence_detector, limit_image, make_rng, monte_carlo_divergence,
                                run_trajectory, uniform_convergence_probe)
from matprod.triangular import classify3x3_and_predict, series3x3

F = Fraction
RESULTS = {}


def record(number, budget, checks):
    """Run ``checks`` (returns a dict name -> bool, plus optional 'detail'), print and assert."""
    t0 = time.perf_counter()
    outcome = checks()
    elapsed = time.perf_counter() - t0
    detail = outcome.pop("detail", "")
    outcome["runtime"] = elapsed < budget
    failed = [k for k, ok in outcome.items() if not ok]
    status = "PASS" if not failed else "FAIL"
    line = f"criterion {number:2d}: {status}  ({elapsed:.2f}s of {budget}s)"
    if failed:
        line += "  failed: " + ", ".join(failed)
    if detail:
        line += "  | " + detail
    RESULTS[number] = line
    print("\n" + line)
    assert not failed, line


@pytest.fixture(scope="module", autouse=True)
def summary():
    yield
    print("\n\nacceptance summary")
    for n in sorted(RESULTS):
        print(RESULTS[n])


def obj_eye(d):
    return np.eye(d, dtype=int).astype(object)


def obj_power(M, e):
    out, base = obj_eye(M.shape[0]), M
    while e:
        if e & 1:
            out = out.dot(base)
        base = base.dot(base)
        e >>= 1
    return out


# 1 -----------------------------------------------------------------------------------------------

def test_criterion_01_beta_eigenvector():
    def checks():
        b = beta_representation()
        c = np.array([F(x, 20) for x in (12, 8, 13, 4, 12, 6, 4)], dtype=object)
        S = b.matrices[0] + b.matrices[1] + b.matrices[2]
        exact = all(isinstance(x, F) or isinstance(x, int) for x in S.ravel())
        return {"exact_entries": exact, "fixed_vector": bool((S.dot(c) == c).all()),
                "stored_c_beta": tuple(b.c_beta) == tuple(c), "first_two_sum_to_one": c[0] + c[1] == 1}
    record(1, 1, checks)


# 2 -----------------------------------------------------------------------------------------------

def test_criterion_02_ce13_closed_form_and_centroids():
    def checks():
        from matprod.counterexamples import ce13_closed_form
        A = np.array([[1, 0, 1], [0, 1, 0], [0, 0, 1]], dtype=object)
        B = np.array([[1, 0, 0], [0, 1, 1], [0, 0, 1]], dtype=object)
        closed = True
        P = obj_eye(3)
        for k in range(1, 11):
            P = P.dot(obj_power(A, 2 ** k)).dot(obj_power(B, 2 ** k))
            m = 2 ** (k + 1) - 2
            literal = [[1, 0, m], [0, 1, m], [0, 0, 1]]
            closed &= P.tolist() == literal and ce13_closed_form(k).tolist() == literal
        rep = ce13_verify(5)
        targets = [(0.5, 0.5, 0.0), (2 / 3, 1 / 3, 0.0)]
        found = [np.asarray(c, dtype=float) for c in rep.centroids]
        matched = len(found) == 2 and all(
            min(np.abs(f - t).max() for f in found) < 1e-6 for t in targets)
        errs = max(rep.centroid_errors)
        return {"closed_form_k1_10": closed, "centroids_1e-6": matched, "detail": f"max centroid error {errs:.2e}"}
    record(2, 5, checks)


# 3 -----------------------------------------------------------------------------------------------

def test_criterion_03_ce12_certificates():
    def checks():
        b = ce12_build_and_verify(4)
        # replay the word with exact 2x2 fractions, independent of the builder's bookkeeping
        D = ((F(1, 2), F(0)), (F(0), F(1)))
        Fm = ((F(1), F(1)), (F(1), F(0)))

        def mul(X, Y):
            return tuple(tuple(X[i][0] * Y[0][j] + X[i][1] * Y[1][j] for j in range(2)) for i in range(2))

        P = ((F(1), F(0)), (F(0), F(1)))
        dets, ratios = {}, {}
        for n, s in enumerate(b.word(), start=1):
            P = mul(P, D if s == 0 else Fm)
            if n in b.checkpoints:
                norm = sum(abs(x) for row in P for x in row)
                dets[n] = abs(P[0][0] * P[1][1] - P[0][1] * P[1][0]) / norm ** 2
                ratios[n] = (abs(P[0][0]) + abs(P[1][0])) / (abs(P[0][1]) + abs(P[1][1]))
        bound = b.bound
        cert = len(dets) == 4 and all(d >= bound for d in dets.values())
        cert &= [dets[n] for n in b.checkpoints] == list(b.dets)
        ratio_ok = all(1 <= r <= 2 for r in ratios.values())
        ns = [0] + b.exponents
        rec_ok = norm_ok = True
        for k in range(1, 5):
            vk, v1, v2 = b.v(k), b.v(k - 1), b.v(k - 2)
            rec_ok &= tuple(F(1, 2 ** ns[k]) * x + F(1, 2 ** ns[k - 1]) * y for x, y in zip(v1, v2)) == vk
            norm_ok &= sum(vk) <= (F(1, 2 ** k) + 1) * F(1, 2 ** ns[k - 1]) * sum(v2)
        from matprod.counterexamples import p_upper
        return {"certificates": cert, "bound_is_1_over_9p": bound == 1 / (9 * p_upper()),
                "recurrence": rec_ok, "norm_bound": norm_ok, "ratio_in_1_2": ratio_ok,
                "detail": f"checkpoints {b.checkpoints}, min det {float(min(dets.values())):.4g} vs {float(bound):.4g}"}
    record(3, 30, checks)


# 4 -----------------------------------------------------------------------------------------------

def test_criterion_04_lambda_scan():
    def checks():
        rep = growth_and_bounds(alpha_cap=40)
        return {"max_Lambda_is_3": rep.max_Lambda == 3,
                "argmax_M2M0^4": rep.argmax_Lambda == ["M2M0^4"],
                "max_lambda_is_2": rep.max_lambda == 2,
                "display_alpha_1_10": rep.display_matches == list(range(1, 11)),
                "detail": (f"max Lambda {rep.max_Lambda} at {rep.argmax_Lambda}; M2M0^a family max "
                           f"{rep.max_Lambda_m2m0} at a={rep.argmax_m2m0}; max lambda {rep.max_lambda}; "
                           f"closed form of M0^(4a) holds: {rep.closed_form_ok}; "
                           f"display matches at a in {rep.display_matches}")}
    record(4, 10, checks)


# 5 -----------------------------------------------------------------------------------------------

_POW = {}


def _letter_power(letter, alpha):
    key = (letter, alpha)
    if key not in _POW:
        _POW[key] = obj_power(letter_matrices()[int(letter)], alpha)
    return _POW[key]


_TOKENS = {}


def _token_from_template(tok):
    key = (tok.kind, tok.template, tok.alpha)
    if key not in _TOKENS:
        stem, run = (BODY_TEMPLATES if tok.kind == "body" else HEAD_TEMPLATES)[tok.template - 1]
        P = obj_eye(7)
        for ch in stem:
            P = P.dot(_letter_power(ch, 1))
        if run is not None:
            P = P.dot(_letter_power(run, tok.alpha))
        _TOKENS[key] = P
    return _TOKENS[key]


def _template_product(res):
    P = obj_eye(7)
    for tok in ([res.head] if res.head else []) + list(res.body):
        P = P.dot(_token_from_template(tok))
    return P


def test_criterion_05_structure_suite():
    def checks():
        rep = structure_checks()
        mats = letter_matrices()
        u = np.array(U135, dtype=object)
        stable = all(all(a >= b for a, b in zip(M.dot(u), U135)) for M in mats)
        rng = make_rng(5)
        round_trip = product_eq = True
        for _ in range(10 ** 4):
            n = int(rng.integers(1, 301))
            w = "".join("012"[i] for i in rng.integers(0, 3, size=n))
            res = tokenize(w)
            round_trip &= "".join(res.literals()) == w
            product_eq &= bool((_template_product(res) == word_matrix(w)).all())
        return {"triples_in_S": rep.triples_ok and len(rep.triple_columns) == 27,
                "u135_stable": stable and rep.stability_ok,
                "round_trip_1e4": round_trip, "factor_product_exact": product_eq}
    record(5, 60, checks)


# 6 -----------------------------------------------------------------------------------------------

def test_criterion_06_convergence_evidence():
    def checks():
        fam = thm23_family()
        worst = 0.0
        for i in range(200):
            prefix = SymbolSequence.random(3, seed=1000 + i).take(80)
            res = uniform_convergence_probe(fam, prefix, extension_samples=200, depth=160, seed=i,
                                            prefix_lengths=[80])
            worst = max(worst, float(res.sup_gap[-1]))
        seq = SymbolSequence.random(3, seed=7)
        starts = [[1, 1, 1, 1, 1, 1, 1], [1, 2, 3, 4, 5, 6, 7], [7, 1, 1, 1, 1, 1, 1],
                  [0.1, 5, 0.3, 2, 1, 9, 4], [3, 3, 1, 1, 2, 2, 5]]
        lims = [limit_image(run_trajectory(fam, seq, 300, start_vector=s)).vector for s in starts]
        spread = max(np.abs(a - lims[0]).max() for a in lims)
        return {"probe_below_1e-4": worst < 1e-4, "limit_image_agree_1e-6": spread < 1e-6,
                "detail": f"worst probe gap at n=80: {worst:.2e}; start-vector spread {spread:.2e}"}
    record(6, 60, checks)


# 7 -----------------------------------------------------------------------------------------------

def test_criterion_07_dichotomy():
    def checks():
        bad = build_representation(3, [0.4, 0.1, 0.2, 0.3])
        probe = cylinder_ratio_probe(bad, 40)
        g40 = float(probe.g[-1])
        ce = ce22_limits((0.4, 0.1, 0.2, 0.3))
        good = build_representation(3, [0.25] * 4)
        rep = potential_and_ratio(good.to_family(), SymbolSequence.random(3, seed=0), n_max=40)
        dev = np.abs(np.asarray(rep.ratio_root) - 1)
        return {"H_fails_for_skewed": not bad.condition_H, "H_holds_for_uniform": good.condition_H,
                "probe_within_0.02_of_1/3": abs(g40 - 1 / 3) < 0.02,
                "ce22_nonuniform": not ce.uniform,
                "ratio_root_dev_below_0.05": rep.deviation_at(20) < 0.05,
                "deviation_decreasing": dev[20:].mean() < dev[:20].mean(),
                "detail": f"g_40 = {g40:.5f}; |ratio_root-1| at n=20: {rep.deviation_at(20):.4f}"}
    record(7, 60, checks)


# 8 -----------------------------------------------------------------------------------------------

def test_criterion_08_measure_consistency():
    def checks():
        laws = [build_representation(2, [0.25, 0.5, 0.25]), build_representation(3, [0.4, 0.1, 0.2, 0.3]),
                 build_representation(2, [0.98, 0.01, 0.01])]
        worst = 0.0
        for s in laws:
            for h in range(s.q + 1):
                for n in range(0, 6):
                    for w in itertools.product(range(s.k), repeat=n):
                        w = list(w)
                        whole = cylinder_measure(s, w, h) if w else sum(
                            cylinder_measure(s, [i], h) for i in range(s.k))
                        parts = sum(cylinder_measure(s, w + [i], h) for i in range(s.k))
                        worst = max(worst, abs(parts - whole))
        law = build_representation(2, [0.25, 0.5, 0.25])
        rng = make_rng(8)
        inside = 0
        for _ in range(20):
            w = [int(x) for x in rng.integers(0, 2, size=int(rng.integers(1, 9)))]
            br = enumeration_oracle(2, law.p, 16, cylinder_interval(2, w))
            inside += br.contains(float(cylinder_measure(law, w)))
        markov_ok = True
        chains = [([["9/10", "1/10"], ["1/5", "4/5"]], ["2/3", "1/3"]),
                  ([["1/2", "1/4", "1/4"], ["0", "1/3", "2/3"], ["1/5", "1/5", "3/5"]], ["1/6", "1/2", "1/3"])]
        for P, pi in chains:
            fam = markov_representation(P, pi)
            Pf = [[F(x) for x in row] for row in P]
            pif = [F(x) for x in pi]
            for n in range(1, 9):
                for w in itertools.product(range(len(pi)), repeat=n):
                    expect = pif[w[0]]
                    for x, y in zip(w, w[1:]):
                        expect *= Pf[x][y]
                    markov_ok &= fam.measure(list(w)) == expect
        return {"additivity_1e-12": worst < 1e-12, "oracle_brackets_20": inside == 20, "markov_exact": markov_ok,
                "detail": f"worst additivity error {worst:.1e}; {inside}/20 brackets"}
    record(8, 120, checks)


# 9 -----------------------------------------------------------------------------------------------

def test_criterion_09_scale_spectrum():
    def checks():
        q = np.linspace(-5, 5, 41)
        leb = scale_spectrum_and_legendre(build_representation(2, [0.5, 0.5]), q, 12)
        lebesgue = bool(np.abs(leb.tau - (q - 1)).max() < 1e-10)
        sources = [build_representation(2, [0.25, 0.5, 0.25]), build_representation(3, [0.4, 0.1, 0.2, 0.3]),
                   build_representation(2, [0.98, 0.01, 0.01]), build_representation(3, [0.25] * 4),
                   build_representation(2, [0.5, 0.5]), "beta"]
        tau1 = concave = True
        worst = 0.0
        i1 = list(q).index(1.0)
        for src in sources:
            sp = scale_spectrum_and_legendre(src, q, 12)
            worst = max(worst, abs(sp.tau[i1]))
            tau1 &= abs(sp.tau[i1]) < 1e-12
            slopes = np.diff(sp.tau) / np.diff(q)
            concave &= bool(np.all(np.diff(slopes) <= 1e-8))
        return {"lebesgue_q_minus_1": lebesgue, "tau1_zero": tau1, "slopes_nonincreasing": concave,
                "detail": f"max |tau(1)| {worst:.1e}"}
    record(9, 30, checks)


# 10 ----------------------------------------------------------------------------------------------

def _deep_limit(A, v, steps=2000):
    # P_n v normalized, with P_n = A^n, by plain float power iteration
    for _ in range(steps):
        v = A @ v
        v = v / np.abs(v).sum()
    return v


def test_criterion_10_triangular_suite():
    def checks():
        rng = make_rng(12)

        def dy(lo=0):
            return F(int(rng.integers(lo, 9)), 2 ** int(rng.integers(0, 4)))

        exact_ok = monotone = True
        for _ in range(100):
            mats = [[[dy(1), dy(), dy()], [0, dy(1), dy()], [0, 0, dy(1)]] for _ in range(30)]
            s = series3x3(mats, n=30)
            P = obj_eye(3)
            for M in mats:
                P = P.dot(np.array(M, dtype=object))
            exact_ok &= s.exact and bool((s.closed_form == P).all())
            monotone &= all(s.monotone.values())
        exemplars = {1: [[2, 1, 1], [0, 1, 1], [0, 0, 1 / 3]], 2: [[2, 1, 0], [0, 1, 1], [0, 0, 4]],
                     3: [[0.5, 1, 0], [0, 1, 1], [0, 0, 1 / 3]], 4: [[0.5, 1, 1], [0, 1, 1], [0, 0, 2]]}
        cases_ok, gaps = True, []
        for case, M in exemplars.items():
            s = series3x3([M], n=200, exact=False)
            monotone &= all(s.monotone.values())
            cl = classify3x3_and_predict(s)
            cases_ok &= cl.case == case
            if cl.prediction is not None:
                deep = _deep_limit(np.array(M, dtype=float), np.array([1.0, 2.0, 3.0]))
                gap = float(np.abs(deep - np.asarray(cl.prediction)).max())
                gaps.append(gap)
                cases_ok &= gap < 1e-6
        return {"closed_form_exact_100": exact_ok, "cases_match_deep_limits": cases_ok, "monotone": monotone,
                "detail": f"prediction gaps {['%.1e' % g for g in gaps]}"}
    record(10, 60, checks)


# 11 ----------------------------------------------------------------------------------------------

def test_criterion_11_divergence_suite():
    def checks():
        fam = thm23_family()
        mixed = [[0, 1], [0, 2], [0, 1, 2], [0, 0, 1], [1, 0, 2, 0]]
        mixed_ok = all(divergence_detector(fam, 300, SymbolSequence.eventually_periodic([], p, 3)).verdict
                       == "diverges" for p in mixed)
        const_ok = all(divergence_detector(fam, 300, SymbolSequence.eventually_periodic([], [i], 3)).verdict
                       != "diverges" for i in range(3))
        mc = monte_carlo_divergence(2, trials=200, depth=300, seed=0)
        return {"mixed_sequences_diverge": mixed_ok, "constant_never": const_ok, "mc_fraction_0.95": mc.fraction >= 0.95,
                "detail": f"Monte Carlo fraction {mc.fraction:.3f}"}
    record(11, 120, checks)


# 12 ----------------------------------------------------------------------------------------------

def test_criterion_12_curves():
    def checks():
        hat = build_refinement_matrices(2, ["1/2", "1", "1/2"])
        rng = make_rng(12)
        xs = [F(int(rng.integers(1, 2 ** 30)), 2 ** 30) for _ in range(50)] + [F(1, 3), F(5, 7)]
        rep = residual_checks(hat, xs, depth=40)
        half = sample_curve(hat, [F(1, 2)], depth=40).psi[0]
        err = float(np.abs(half - [0.5, 0.5]).max())
        return {"residual_below_1e-8": rep.self_similarity_residual < 1e-8, "psi_half_1e-8": err < 1e-8,
                "detail": f"residual {rep.self_similarity_residual:.1e}; psi(1/2) error {err:.1e}"}
    record(12, 10, checks)
