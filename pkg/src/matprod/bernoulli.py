"""Matrix representations of Bernoulli convolutions and related measures.

Integer base k with digit law p = (p_0..p_N): the matrices M_i of order
q+1 have entry (h, j) equal to p_{i+kh−j} (zero out of range), and the
measure of ``[w] + h`` is ``u_{h+1}ᵀ M_{w1}...M_{wn} c_ν`` where c_ν is the
probability 1-eigenvector of Σ M_i.

The golden-type case β³ = 2β² − β + 1 is represented by three 7x7
matrices (scaled by 1/2, 1/4, 1/16) acting on the substitution words
0, 10, 1100.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import EigenvalueNotOne, InputError, NotStochastic, WordTooShort
from .linalg import as_matrix, exact_null_vector, identity, parse_scalar, spectral_radius, to_float
from .trajectory import MatrixFamily, make_rng

# The 0/1 matrices of the β-numeration example (rows listed top to bottom).
BETA_MATRICES_01 = (
    ((1, 0, 0, 0, 0, 0, 0), (0, 0, 1, 0, 0, 0, 0), (0, 0, 0, 1, 1, 0, 0), (0, 0, 0, 0, 0, 0, 0),
     (1, 0, 0, 0, 0, 0, 1), (0, 0, 0, 0, 1, 0, 0), (0, 1, 0, 0, 0, 0, 0)),
    ((0, 0, 1, 1, 0, 0, 0), (0, 0, 0, 0, 0, 1, 0), (0, 0, 0, 1, 1, 0, 0), (1, 0, 0, 0, 0, 0, 0),
     (0, 0, 1, 0, 0, 0, 0), (0, 0, 0, 0, 0, 0, 0), (0, 0, 0, 0, 0, 0, 0)),
    ((1, 0, 0, 0, 1, 0, 1), (0, 0, 0, 0, 0, 0, 0), (1, 0, 0, 0, 0, 0, 1), (0, 0, 0, 1, 1, 0, 0),
     (0, 0, 0, 0, 1, 0, 0), (0, 0, 0, 0, 0, 0, 0), (0, 0, 0, 0, 0, 0, 0)),
)
# The published display of the third matrix also has a 1 at row 6, column 5.
# Recomputing the transfer counts from the digit recursion gives a zero row
# there, and only the zero row makes c_β a fixed vector of the sum, so the
# derived version is the default.  ``beta_matrices(printed=True)`` restores it.
PRINTED_EXTRA_ENTRY = (2, 5, 4)   # (matrix, row, col), zero-based
BETA_SCALES = (Fraction(1, 2), Fraction(1, 4), Fraction(1, 16))
BETA_WORDS = ("0", "10", "1100")
BETA_C = tuple(Fraction(x, 20) for x in (12, 8, 13, 4, 12, 6, 4))
BETA_SELECTORS = ((0, Fraction(1)), (2, Fraction(1, 2)), (4, Fraction(1, 8)))  # (slot, weight)


def beta_matrices(exact: bool = True, scaled: bool = False, printed: bool = False) -> list[np.ndarray]:
    """The three 7x7 matrices, either 0/1 or scaled by 1/2, 1/4, 1/16."""
    out = []
    for idx, (M, s) in enumerate(zip(BETA_MATRICES_01, BETA_SCALES)):
        A = as_matrix(M, exact=True)
        if printed and idx == PRINTED_EXTRA_ENTRY[0]:
            A[PRINTED_EXTRA_ENTRY[1], PRINTED_EXTRA_ENTRY[2]] = Fraction(1)
        if scaled:
            A = A * s
        out.append(A if exact else to_float(A))
    return out


# ---------------------------------------------------------------------------
# integer base


def _parse_probabilities(p, exact: bool | None):
    if exact is None:
        exact = any(isinstance(x, (str, Fraction)) for x in p)
    vals = [parse_scalar(x, exact=exact) for x in p]
    if any(v <= 0 for v in vals):
        raise InputError("probabilities must be positive")
    total = sum(vals)
    if (exact and total != 1) or (not exact and abs(total - 1) > 1e-12):
        raise InputError(f"probabilities sum to {total}, not 1")
    return vals, exact


def _stationary_exact(S: np.ndarray) -> list[Fraction]:
    d = S.shape[0]
    x = exact_null_vector(S - identity(d, exact=True))
    if x is None:
        raise EigenvalueNotOne("sum of the matrices has no eigenvalue 1")
    total = sum(x)
    if total == 0:
        raise EigenvalueNotOne("1-eigenvector has zero mass")
    x = [v / total for v in x]
    if any(v < 0 for v in x):
        raise EigenvalueNotOne("1-eigenvector is not nonnegative")
    return x


def _stationary_float(S: np.ndarray, tol: float = 1e-13, max_iter: int = 200000) -> np.ndarray:
    d = S.shape[0]
    c = np.full(d, 1.0 / d)
    A = 0.5 * (S + np.eye(d))
    for _ in range(max_iter):
        nxt = A @ c
        nxt /= nxt.sum()
        if np.abs(nxt - c).sum() < tol:
            c = nxt
            break
        c = nxt
    if np.abs(S @ c - c).sum() > 1e-9 or np.any(c < -1e-12):
        raise EigenvalueNotOne("no nonnegative 1-eigenvector within 1e-9")
    return np.maximum(c, 0.0) / np.maximum(c, 0.0).sum()


@dataclass(frozen=True)
class BernoulliSpec:
    k: int
    p: tuple
    exact: bool
    N: int
    q: int
    r: int
    matrices: tuple            # float arrays
    exact_matrices: tuple | None
    c_nu: np.ndarray           # float
    c_nu_exact: tuple | None
    blocks: dict = field(default_factory=dict)
    rho_block: float | None = None
    condition_H: bool = True

    @property
    def order(self) -> int:
        return self.q + 1

    def to_family(self, h: int = 0) -> MatrixFamily:
        """Family whose cylinder values are ν([w] + h) / ν([0,1) + h) (a probability on words)."""
        if not 0 <= h <= self.q:
            raise InputError("translate outside 0..q")
        mats = self.exact_matrices if self.exact else self.matrices
        c = list(self.c_nu_exact) if self.exact else self.c_nu
        mass = c[h]
        if mass == 0:
            raise InputError("translate carries no mass")
        rows = [M[h, :] / mass for M in mats]
        return MatrixFamily(tuple(mats), tuple(rows), np.array(c, dtype=object if self.exact else float),
                            name=f"bernoulli-k{self.k}-h{h}")

    def to_dict(self) -> dict:
        from .linalg import matrix_to_literal
        mats = self.exact_matrices if self.exact else self.matrices
        return {
            "base": self.k,
            "p": [str(x) for x in self.p] if self.exact else [float(x) for x in self.p],
            "N": self.N, "q": self.q, "r": self.r,
            "matrices": [matrix_to_literal(M) for M in mats],
            "c_nu": [str(x) for x in self.c_nu_exact] if self.exact else [float(x) for x in self.c_nu],
            "rho_block_r": self.rho_block,
            "condition_H": self.condition_H,
        }


def build_representation(k: int, p: Sequence, exact: bool | None = None) -> BernoulliSpec:
    """Matrices, blocks, stationary vector and the weak-Gibbs criterion for base k and digit law p.

    The criterion reported as ``condition_H`` is: p_N ≤ ρ(M'_r) or (k−1) divides N.
    """
    if int(k) != k or k < 2:
        raise InputError("base must be an integer >= 2")
    k = int(k)
    vals, exact = _parse_probabilities(p, exact)
    N = len(vals) - 1
    if N < k - 1:
        raise InputError(f"need N >= k-1 (got N = {N}, k = {k})")
    q = -(-N // (k - 1)) - 1
    r = N - (k - 1) * q
    zero = Fraction(0) if exact else 0.0
    exact_mats = []
    for i in range(k):
        M = np.empty((q + 1, q + 1), dtype=object)
        for h in range(q + 1):
            for j in range(q + 1):
                idx = i + k * h - j
                M[h, j] = vals[idx] if 0 <= idx <= N else zero
        exact_mats.append(M)
    float_mats = tuple(to_float(M) for M in exact_mats)
    if exact:
        S = sum(exact_mats[1:], exact_mats[0])
        c_exact = tuple(_stationary_exact(S))
        c_float = np.array([float(x) for x in c_exact])
    else:
        c_exact = None
        c_float = _stationary_float(sum(float_mats[1:], float_mats[0]))
    blocks = {}
    rho = None
    if q >= 1:
        blocks[0] = (float_mats[0][1:, 1:], float_mats[0][1:, 0])
        blocks[r] = (float_mats[r][:-1, :-1], float_mats[r][:-1, -1])
        for i in range(r + 1, k):
            blocks[i] = (float_mats[i][:-1, :-1], float_mats[i][:-1, -1])
        rho = spectral_radius(blocks[r][0])
        cond = float(vals[N]) <= rho + 1e-12 or N % (k - 1) == 0
    else:
        cond = True
    return BernoulliSpec(k, tuple(vals), exact, N, q, r, float_mats,
                         tuple(exact_mats) if exact else None, c_float, c_exact, blocks, rho, cond)


def cylinder_measure(law: BernoulliSpec, word: Sequence[int], h: int = 0, exact: bool = False):
    """ν(I_w + h) = u_{h+1}ᵀ M_{w1}...M_{wn} c_ν.

    Float mode renormalizes the running vector, so long words do not
    underflow until the final exponentiation.  ``exact=True`` (for exact
    laws) returns a Fraction.
    """
    word = [int(s) for s in word]
    if not 0 <= h <= law.q:
        raise InputError("translate outside 0..q")
    if any(not 0 <= s < law.k for s in word):
        raise InputError("digit outside 0..k-1")
    if exact:
        if not law.exact:
            raise InputError("exact evaluation needs an exact law")
        v = np.array(law.c_nu_exact, dtype=object)
        for s in reversed(word):
            v = law.exact_matrices[s] @ v
        return v[h]
    return math.exp(log_cylinder_measure(law, word, h)) if word else float(law.c_nu[h])


def log_cylinder_measure(law: BernoulliSpec, word: Sequence[int], h: int = 0) -> float:
    v = law.c_nu.copy()
    log_scale = 0.0
    for s in reversed(list(word)):
        v = law.matrices[s] @ v
        tot = v.sum()
        if tot == 0:
            return -math.inf
        v /= tot
        log_scale += math.log(tot)
    return log_scale + math.log(v[h]) if v[h] > 0 else -math.inf


# ---------------------------------------------------------------------------
# Markov measures


def markov_representation(P, pi) -> MatrixFamily:
    """Linear representation of the Markov measure μ[w] = π_{w1} P_{w1 w2} ... P_{w(n-1) wn}.

    r_k carries π_k in slot k, M_k keeps only column k of P, and c is the all-ones vector.
    """
    exact = any(isinstance(x, (Fraction, str)) for row in P for x in row) or \
        any(isinstance(x, (Fraction, str)) for x in pi)
    P = as_matrix(P, exact=exact)
    a = P.shape[0]
    if P.shape != (a, a):
        raise NotStochastic("transition matrix must be square")
    pi = [parse_scalar(x, exact=exact) for x in pi]
    one = Fraction(1) if exact else 1.0
    rows_ok = all((sum(P[i]) == 1) if exact else abs(sum(P[i]) - 1) <= 1e-12 for i in range(a))
    pi_ok = len(pi) == a and ((sum(pi) == 1) if exact else abs(sum(pi) - 1) <= 1e-12)
    if not rows_ok or not pi_ok or any(x < 0 for x in P.flat) or any(x < 0 for x in pi):
        raise NotStochastic("need a row-stochastic P and a probability vector π")
    zero = Fraction(0) if exact else 0.0
    mats, rows = [], []
    for k in range(a):
        M = np.empty((a, a), dtype=object)
        M[...] = zero
        M[:, k] = P[:, k]
        r = [zero] * a
        r[k] = pi[k]
        mats.append(M if exact else to_float(M))
        rows.append(np.array(r, dtype=object if exact else float))
    c = np.array([one] * a, dtype=object if exact else float)
    return MatrixFamily(tuple(mats), tuple(rows), c, name="markov")


# ---------------------------------------------------------------------------
# β³ = 2β² − β + 1


def _beta_poly(x: float) -> float:
    return x ** 3 - 2 * x ** 2 + x - 1


@dataclass(frozen=True)
class BetaSpec:
    beta: float
    words: tuple
    matrices: tuple        # exact, scaled
    c_beta: tuple          # exact
    translates: tuple      # floats j_1..j_7
    selectors: tuple       # exact row vectors

    def to_family(self) -> MatrixFamily:
        return MatrixFamily(self.matrices, self.selectors, np.array(self.c_beta, dtype=object),
                            name="beta")


def beta_representation() -> BetaSpec:
    """Root β ≈ 1.755 by bisection on [1.7, 1.8] plus the exact scaled matrices and c_β."""
    lo, hi = 1.7, 1.8
    dlo, dhi = 3 * lo * lo - 4 * lo + 1, 3 * hi * hi - 4 * hi + 1
    if not (dlo > 0 and dhi > 0 and _beta_poly(lo) < 0 < _beta_poly(hi)):
        raise InputError("bisection bracket does not isolate a simple root")
    while hi - lo > 1e-15:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if _beta_poly(mid) < 0:
            lo = mid
        else:
            hi = mid
    beta = lo if abs(_beta_poly(lo)) <= abs(_beta_poly(hi)) else hi
    b = beta
    translates = (0.0, b - 1, 1 / b ** 2, (1 - b) / b, 1 / b, (b + 1) / b ** 2, 1.0)
    selectors = []
    for slot, weight in BETA_SELECTORS:
        r = np.array([Fraction(0)] * 7, dtype=object)
        r[slot] = weight
        selectors.append(r)
    return BetaSpec(beta, BETA_WORDS, tuple(beta_matrices(exact=True, scaled=True)), BETA_C,
                    translates, tuple(selectors))


def substitute_word(word: Sequence[int]) -> str:
    return "".join(BETA_WORDS[int(s)] for s in word)


def beta_interval(word: Sequence[int], beta: float | None = None) -> tuple[float, float]:
    """[Σ ε_i β^{-i}, β^{-m} + Σ ε_i β^{-i}) for the substituted 0/1 word ε of length m."""
    b = beta if beta is not None else beta_representation().beta
    eps = substitute_word(word)
    left = sum(int(e) * b ** -(i + 1) for i, e in enumerate(eps))
    return left, left + b ** -len(eps)


def beta_cylinder_measure(word: Sequence[int], exact: bool = False, law: BetaSpec | None = None):
    """Selector of the first symbol, then the scaled matrices of the rest, applied to c_β."""
    law = law or beta_representation()
    word = [int(s) for s in word]
    if not word:
        raise InputError("word must be nonempty")
    if any(not 0 <= s < 3 for s in word):
        raise InputError("symbols must be 0, 1 or 2")
    v = np.array(law.c_beta, dtype=object)
    for s in reversed(word[1:]):
        v = law.matrices[s] @ v
    val = law.selectors[word[0]] @ v
    return val if exact else float(val)


# ---------------------------------------------------------------------------
# positivity structure of long products


@dataclass(frozen=True)
class PositivityReport:
    inner_rows_positive: bool
    first_row_positive: bool
    last_row_positive: bool
    first_row_claim_ok: bool      # ω_1 ≠ 0  ⇒ first row positive
    last_row_claim_ok: bool       # ω_1 < r  ⇒ last row positive
    K: float
    sandwich_case: str | None
    sandwich_holds: bool | None


def _positivity_constant(law: BernoulliSpec) -> float:
    K = 1.0
    for w in itertools.product(range(law.k), repeat=law.q + 1):
        M = np.eye(law.q + 1)
        for s in w:
            M = M @ law.matrices[s]
        nz = M[M > 0]
        if nz.size:
            K = max(K, float(nz.max()), float(1 / nz.min()))
    return K


def word_positivity(law: BernoulliSpec, word: Sequence[int], K: float | None = None) -> PositivityReport:
    """Row positivity of M_w for |w| ≥ q and, for |w| = q+1, the two-sided bound by K·uuᵀ.

    K is the largest of x and 1/x over nonzero entries of all products of
    length q+1.  The bound checked is: all entries in [1/K, K] when
    (ω_1, ω_2) = (0, r) or 0 < ω_1 < r; the first q rows ≥ 1/K and all
    entries ≤ K when ω_1 ≠ 0.
    """
    word = [int(s) for s in word]
    if len(word) < law.q:
        raise WordTooShort(f"word length {len(word)} < q = {law.q}")
    if not word:
        M = np.eye(law.q + 1)
    else:
        M = np.eye(law.q + 1)
        for s in word:
            M = M @ law.matrices[s]
    pos = M > 0
    inner = bool(pos[1:-1].all()) if law.q >= 2 else True
    first, last = bool(pos[0].all()), bool(pos[-1].all())
    w1 = word[0] if word else None
    first_ok = True if w1 is None or w1 == 0 else first
    last_ok = True if w1 is None or w1 >= law.r else last
    K = _positivity_constant(law) if K is None else K
    case, holds = None, None
    if len(word) == law.q + 1:
        tol = 1e-12
        if (law.q >= 1 and word[0] == 0 and word[1] == law.r) or 0 < word[0] < law.r:
            case = "full"
            holds = bool(np.all(M >= 1 / K - tol) and np.all(M <= K + tol))
        elif word[0] != 0:
            case = "upper-rows"
            top = M[: law.q] if law.q >= 1 else M
            holds = bool(np.all(top >= 1 / K - tol) and np.all(M <= K + tol))
    return PositivityReport(inner, first, last, first_ok, last_ok, K, case, holds)


# ---------------------------------------------------------------------------
# independent oracle: distribution of truncated digit sums


@dataclass(frozen=True)
class Bracket:
    lower: float
    upper: float
    mode: str

    def contains(self, x: float) -> bool:
        return self.lower <= x <= self.upper

    @property
    def width(self) -> float:
        return self.upper - self.lower


def enumeration_oracle(k: int, p: Sequence, T: int, interval: tuple[float, float],
                       max_cells: int = 1 << 24, samples: int = 10**6, seed: int = 0) -> Bracket:
    """Bracket for P(X ∈ [a, b)) where X = Σ ω_n k^{-n}, ω_n i.i.d. with law p.

    The truncation x_T = Σ_{n≤T} ω_n k^{-n} leaves a tail in
    [0, (N/(k−1)) k^{-T}].  Strings whose whole tail interval sits inside
    [a, b) count toward the lower bound; strings whose tail interval meets
    [a, b) count toward the upper bound.  The distribution of k^T x_T is
    obtained exactly by repeated upsample-and-convolve (equivalent to
    enumerating all (N+1)^T strings) when it fits in ``max_cells``;
    otherwise strings are sampled and a 5-sigma band is added.
    """
    probs = np.array([float(parse_scalar(x)) for x in p])
    N = len(probs) - 1
    a, b = map(float, interval)
    scale = float(k) ** T
    width = N / (k - 1) / scale
    cells = N * (k ** T - 1) // (k - 1) + 1
    if cells <= max_cells:
        D = np.array([1.0])
        for _ in range(T):
            U = np.zeros(k * (len(D) - 1) + 1)
            U[::k] = D
            D = np.convolve(U, probs)
        x = np.arange(len(D)) / scale
        inside = (x >= a) & (x + width < b)
        meets = (x < b) & (x + width >= a)
        return Bracket(float(D[inside].sum()), float(D[meets].sum()), "exhaustive")
    rng = make_rng(seed)
    digits = rng.choice(N + 1, size=(samples, T), p=probs)
    x = digits @ (float(k) ** -np.arange(1, T + 1))
    inside = np.mean((x >= a) & (x + width < b))
    meets = np.mean((x < b) & (x + width >= a))
    band = 5 * math.sqrt(0.25 / samples)
    return Bracket(max(0.0, inside - band), min(1.0, meets + band), "sampled")


def cylinder_interval(k: int, word: Sequence[int], h: int = 0) -> tuple[float, float]:
    left = h + sum(int(s) * float(k) ** -(i + 1) for i, s in enumerate(word))
    return left, left + float(k) ** -len(word)


def thm23_family(terminal=None, exact: bool = False, printed: bool = False) -> MatrixFamily:
    """The unscaled 0/1 matrices as a family (no row vectors), with a positive terminal vector."""
    mats = beta_matrices(exact=exact, printed=printed)
    if terminal is None:
        terminal = [Fraction(1)] * 7 if exact else np.ones(7)
    return MatrixFamily(tuple(mats), None, terminal, name="thm23")
