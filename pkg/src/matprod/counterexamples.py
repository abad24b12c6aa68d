"""Exact reconstructions of three counterexamples.

* ``ce12``: products of D = diag(1/2, 1) and F = [[1,1],[1,0]] whose
  normalized determinant stays bounded away from 0 along checkpoints.
* ``ce13``: products of two 3x3 unipotent matrices whose normalized
  column has two different limit points.
* ``ce22``: the base-3 digit law p = (p0..p3) where the image limit along
  1^n jumps when the tail becomes 2^n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .bernoulli import build_representation
from .errors import CheckFailed, InputError, SearchExhausted
from .linalg import exact_det, singular_values, to_float
from .trajectory import MatrixFamily

# ---------------------------------------------------------------------------
# D / F products

D_MATRIX = ((Fraction(1, 2), Fraction(0)), (Fraction(0), Fraction(1)))
F_MATRIX = ((Fraction(1), Fraction(1)), (Fraction(1), Fraction(0)))
SEARCH_LIMIT = 10_000


def _mat(rows) -> np.ndarray:
    out = np.empty((len(rows), len(rows[0])), dtype=object)
    for i, r in enumerate(rows):
        for j, x in enumerate(r):
            out[i, j] = Fraction(x)
    return out


def _l1(v) -> Fraction:
    return sum((abs(x) for x in v), Fraction(0))


def p_upper(terms: int = 40) -> Fraction:
    """Rational upper bound for Π_{j≥0} (1 + 2^{-j}).

    The first ``terms + 1`` factors are kept exactly; the tail is at most
    exp(2^{-terms}) ≤ exp(x) with x = 2^{-(terms-1)}, and exp(x) ≤ 1 + x + x²
    for 0 ≤ x ≤ 1.
    """
    prod = Fraction(1)
    for j in range(terms + 1):
        prod *= 1 + Fraction(1, 2 ** j)
    x = Fraction(1, 2 ** (terms - 1))
    return prod * (1 + x + x * x)


@dataclass
class CE12Build:
    exponents: list            # n_1..n_K
    partial_sums: list         # s_1..s_K
    vectors: list              # v_{-1}, v_0, v_1..v_K as 2-tuples of Fractions
    offsets: list              # h_1..h_K
    checkpoints: list          # s_k + h_k
    dets: list                 # |det(P_n / ‖P_n‖)| at the checkpoints
    bound: Fraction            # 1 / (9 p_upper)
    ratios: list               # column-norm ratio at the checkpoints
    sv_ratios: list = field(default_factory=list)   # δ2/δ1 from float singular values
    verified: bool = False

    def v(self, k: int):
        return self.vectors[k + 1]

    def word(self) -> list[int]:
        """Symbols (0 = D, 1 = F) of D^{n1} F D^{n2} F ... D^{nK} F D^{h_K}."""
        out = []
        for n in self.exponents:
            out += [0] * n + [1]
        return out + [0] * self.offsets[-1]

    @property
    def certificates_ok(self) -> bool:
        return all(d >= self.bound for d in self.dets)

    def to_dict(self) -> dict:
        return {
            "exponents": self.exponents, "partial_sums": self.partial_sums,
            "offsets": self.offsets, "checkpoints": self.checkpoints,
            "dets": [str(d) for d in self.dets], "dets_float": [float(d) for d in self.dets],
            "bound": str(self.bound), "bound_float": float(self.bound),
            "ratios": [float(r) for r in self.ratios], "sv_ratios": self.sv_ratios,
            "certificates_ok": self.certificates_ok, "verified": self.verified,
        }


def ce12_family() -> MatrixFamily:
    return MatrixFamily((_mat(D_MATRIX), _mat(F_MATRIX)), name="ce12")


def _offset(vk, vk1, nk) -> int:
    """Smallest h ≥ 0 with 2^{-h}‖v_k‖ / (2^{-n_k}‖v_{k-1}‖) in [1, 2]."""
    ratio = _l1(vk) / (Fraction(1, 2 ** nk) * _l1(vk1))
    h = 0
    while ratio > 2:
        ratio /= 2
        h += 1
    if ratio < 1:
        raise CheckFailed("column-norm ratio fell below 1 before reaching [1, 2]", k=None)
    return h


def ce12_build_and_verify(K: int = 4, first_exponent: int | None = None) -> CE12Build:
    """Choose n_1..n_K greedily (smallest admissible), then certify and re-verify.

    n_k is the smallest integer ≥ max(1, h_{k-1}) with
    ‖v_k‖ ≤ (2^{-k} + 1) 2^{-n_{k-1}} ‖v_{k-2}‖, where v_{-1} = (0, 1),
    v_0 = (1, 0) and n_0 = 0 (so the k = 1 case reads ‖v_1‖ ≤ 3/2, giving
    n_1 = 1 unless ``first_exponent`` overrides it).
    """
    if not 1 <= K <= 8:
        raise InputError("K must be between 1 and 8")
    vecs = [(Fraction(0), Fraction(1)), (Fraction(1), Fraction(0))]
    ns, hs = [0], [0]
    for k in range(1, K + 1):
        v1, v2 = vecs[-1], vecs[-2]
        target = (Fraction(1, 2 ** k) + 1) * Fraction(1, 2 ** ns[-1]) * _l1(v2)
        lo = max(1, hs[-1])
        if k == 1 and first_exponent is not None:
            lo = first_exponent
        for n in range(lo, SEARCH_LIMIT + 1):
            a, b = Fraction(1, 2 ** n), Fraction(1, 2 ** ns[-1])
            vk = (a * v1[0] + b * v2[0], a * v1[1] + b * v2[1])
            if _l1(vk) <= target or (k == 1 and first_exponent is not None):
                break
        else:
            raise SearchExhausted(f"no n_{k} ≤ {SEARCH_LIMIT} satisfies the norm bound", k=k)
        ns.append(n)
        vecs.append(vk)
        hs.append(_offset(vk, v1, n))
    exps, offs = ns[1:], hs[1:]
    sums = list(np.cumsum([n + 1 for n in exps]).tolist())
    build = CE12Build(exps, sums, vecs, offs, [s + h for s, h in zip(sums, offs)], [],
                      1 / (9 * p_upper()), [])
    _certify(build)
    return build


def _certify(build: CE12Build) -> None:
    """Multiply the D/F word directly and check every construction claim."""
    D, F = _mat(D_MATRIX), _mat(F_MATRIX)
    P = _mat(((1, 0), (0, 1)))
    n = 0
    word = build.word()
    targets = {s: k for k, s in enumerate(build.partial_sums, start=1)}
    checks = {c: k for k, c in enumerate(build.checkpoints, start=1)}
    dets, ratios, svs = [], [], []
    for sym in [None] + word:
        if sym is not None:
            P = P.dot(D if sym == 0 else F)
            n += 1
        if n in targets:
            k = targets[n]
            vk, vk1 = build.v(k), build.v(k - 1)
            nk = build.exponents[k - 1]
            col1, col2 = tuple(P[:, 0]), tuple(P[:, 1])
            if col1 != vk or col2 != tuple(Fraction(1, 2 ** nk) * x for x in vk1):
                raise CheckFailed(f"P_(s_{k}) does not have columns (v_k, 2^-n_k v_(k-1))", k=k)
            nprev = build.exponents[k - 2] if k >= 2 else 0
            vk2 = build.v(k - 2)
            rec = tuple(Fraction(1, 2 ** nk) * a + Fraction(1, 2 ** nprev) * b for a, b in zip(vk1, vk2))
            if rec != vk:
                raise CheckFailed(f"recurrence fails at k = {k}", k=k)
            if _l1(vk) > (Fraction(1, 2 ** k) + 1) * Fraction(1, 2 ** nprev) * _l1(vk2):
                raise CheckFailed(f"norm bound fails at k = {k}", k=k)
            if k < len(build.exponents) and build.offsets[k - 1] > build.exponents[k]:
                raise CheckFailed(f"h_{k} exceeds n_{k + 1}", k=k)
        if n in checks:
            k = checks[n]
            norm = sum((abs(x) for x in P.flat), Fraction(0))
            det = abs(exact_det(P)) / norm ** 2
            ratio = _l1(P[:, 0]) / _l1(P[:, 1])
            if not 1 <= ratio <= 2:
                raise CheckFailed(f"column ratio {float(ratio)} outside [1, 2] at k = {k}", k=k)
            dets.append(det)
            ratios.append(ratio)
            s = singular_values(to_float(P) / float(norm))
            svs.append(float(s[1] / s[0]))
    build.dets, build.ratios, build.sv_ratios = dets, ratios, svs
    build.verified = True


# ---------------------------------------------------------------------------
# 3x3 unipotent products

A13 = ((1, 0, 1), (0, 1, 0), (0, 0, 1))
B13 = ((1, 0, 0), (0, 1, 1), (0, 0, 1))


def ce13_family() -> MatrixFamily:
    return MatrixFamily((_mat(A13), _mat(B13)), name="ce13")


def ce13_word(k: int) -> list[int]:
    """Symbols (0 = A, 1 = B) of A^2 B^2 A^4 B^4 ... A^{2^k} B^{2^k}."""
    out = []
    for i in range(1, k + 1):
        out += [0] * 2 ** i + [1] * 2 ** i
    return out


def _int_mat(rows) -> np.ndarray:
    return np.array(rows, dtype=object)


def _mpow(M: np.ndarray, e: int) -> np.ndarray:
    out = np.eye(M.shape[0], dtype=int).astype(object)
    base = M
    while e:
        if e & 1:
            out = out.dot(base)
        base = base.dot(base)
        e >>= 1
    return out


def ce13_closed_form(k: int, appended: bool = False) -> np.ndarray:
    m = 2 ** (k + 1) - 2
    top = 2 ** (k + 2) - 2 if appended else m
    return _int_mat([[1, 0, top], [0, 1, m], [0, 0, 1]])


@dataclass
class CE13Report:
    k: int
    product: list
    closed_form_match: bool
    appended_match: bool
    centroids: list
    expected_centroids: list
    centroid_errors: list
    limit_k: int
    sv_orders: dict

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def ce13_verify(k: int = 5, limit_k: int = 40, sv_range: tuple[int, int] = (50, 400)) -> CE13Report:
    """Exact product by letter-by-letter multiplication, closed-form comparison, limit points.

    The normalized third column c_n approaches its two limit points only at
    rate 2^{-k}, so the centroids are computed from checkpoint products
    (obtained by repeated squaring) up to ``limit_k`` blocks, whatever k is.
    Members are grouped greedily with radius 0.05 and each centroid averages
    the members from the second half of the checkpoint range.
    """
    if not 1 <= k <= 12:
        raise InputError("k must be between 1 and 12")
    A, B = _int_mat(A13), _int_mat(B13)
    P = np.eye(3, dtype=int).astype(object)
    for s in ce13_word(k):
        P = P.dot(A if s == 0 else B)
    match = bool((P == ce13_closed_form(k)).all())
    Q = P
    for _ in range(2 ** (k + 1)):
        Q = Q.dot(A)
    appended = bool((Q == ce13_closed_form(k, appended=True)).all())

    points = []   # (block index, vector)
    R = np.eye(3, dtype=int).astype(object)
    for i in range(1, limit_k + 1):
        Ai = _mpow(A, 2 ** i)
        R = R.dot(Ai)
        if i >= 2:
            points.append((i, _unit(R[:, 2])))
        R = R.dot(_mpow(B, 2 ** i))
        points.append((i, _unit(R[:, 2])))
    clusters: list[list] = []
    for i, v in points:
        for cl in clusters:
            if np.abs(cl[0][1] - v).sum() < 0.05:
                cl.append((i, v))
                break
        else:
            clusters.append([(i, v)])
    centroids = []
    for cl in clusters:
        late = [v for i, v in cl if i >= limit_k // 2]
        if late:   # clusters made only of early transients are not limit points
            centroids.append(np.mean(late, axis=0))
    expected = [np.array([0.5, 0.5, 0.0]), np.array([2 / 3, 1 / 3, 0.0])]
    errors = [min(float(np.abs(c - e).max()) for c in centroids) if centroids else math.inf
              for e in expected]

    word = ce13_word(max(k, 8))
    lo, hi = sv_range
    hi = min(hi, len(word))
    T = np.eye(3)
    d1n, d2, nd3 = [], [], []
    Af, Bf = np.array(A13, float), np.array(B13, float)
    for n, s in enumerate(word, start=1):
        T = T @ (Af if s == 0 else Bf)
        if lo <= n <= hi:
            sv = singular_values(T)
            d1n.append(float(sv[0] / n))
            d2.append(float(sv[1]))
            nd3.append(float(n * sv[2]))
    orders = {
        "range": [lo, hi],
        "delta1_over_n": [min(d1n), max(d1n)],
        "delta2": [min(d2), max(d2)],
        "n_delta3": [min(nd3), max(nd3)],
    }
    return CE13Report(k, [[int(x) for x in row] for row in P], match, appended,
                      [c.tolist() for c in centroids], [e.tolist() for e in expected], errors,
                      limit_k, orders)


def _unit(col) -> np.ndarray:
    v = np.array([Fraction(int(x)) for x in col], dtype=object)
    total = sum(v)
    return np.array([float(x / total) for x in v])


# ---------------------------------------------------------------------------
# base-3 discontinuity


@dataclass
class CE22Report:
    p: list
    limit_11: list
    limit_12: list
    predicted_11: list
    gap: float
    uniform: bool
    predicted_uniform: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _deep_power_image(M: np.ndarray, v: np.ndarray, squarings: int = 200) -> np.ndarray:
    """Normalized M^{2^squarings} v, renormalizing the matrix after each squaring."""
    P = M / np.abs(M).sum()
    for _ in range(squarings):
        P = P @ P
        s = np.abs(P).sum()
        if s == 0:
            break
        P = P / s
    w = P @ v
    if np.abs(w).sum() == 0:
        w = M @ v
    return w / np.abs(w).sum()


def ce22_limits(p=(0.4, 0.1, 0.2, 0.3), tol: float = 1e-6) -> CE22Report:
    """lim_n M_1^n c and lim_m lim_n M_1^m M_2^n c (normalized), c the stationary vector.

    Powers are taken by repeated squaring because when p_3 = p_1 the first
    limit is approached only like 1/n.  The closed form for the first limit
    is (p_0, p_3 − p_1)/(p_0 + p_3 − p_1) when p_3 > p_1 and (1, 0) otherwise.
    """
    if len(p) != 4:
        raise InputError("need four probabilities")
    law = build_representation(3, [float(x) for x in p], exact=False)
    M1, M2 = law.matrices[1], law.matrices[2]
    c = law.c_nu
    lim11 = _deep_power_image(M1, c)
    w = _deep_power_image(M2, c)
    lim12 = _deep_power_image(M1, w)
    p0, p1, _, p3 = (float(x) for x in p)
    if p3 > p1:
        pred = np.array([p0, p3 - p1]) / (p0 + p3 - p1)
    else:
        pred = np.array([1.0, 0.0])
    gap = float(np.abs(lim11 - lim12).sum())
    return CE22Report([float(x) for x in p], lim11.tolist(), lim12.tolist(), pred.tolist(), gap,
                      gap <= tol, p3 <= p1)
