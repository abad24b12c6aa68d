"""Word factorization and cone structure for the three 7x7 0/1 matrices.

A word over {0,1,2} is read as the product M_{w1} M_{w2} ... of the
unscaled matrices.  :func:`tokenize` splits it, scanning from the right,
into a head from the short list ``HEAD_TEMPLATES`` followed by blocks from
``BODY_TEMPLATES``.  Every template is a fixed stem followed by a run
``0^α`` or ``2^α`` (α ≥ 0, with the bare ``M_1`` block as the only
template without a run).

Scan rule used here: strip the maximal trailing run of 0s or of 2s (its
length is α), then look for the shortest body stem of that run type that
is a suffix of what is left.  A trailing ``1`` is always the block
``M_1``.  If no stem fits, the whole remaining word must be a head.  The
case analysis in ``tests/test_factorize.py`` covers every possible last
two or three letters, so the scan never gets stuck.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .bernoulli import BETA_SCALES, beta_matrices
from .errors import CheckFailed, InputError, NoFactorization
from .linalg import shape_functionals
from .trajectory import make_rng

# (stem, run letter); run letter None means no run is allowed
BODY_TEMPLATES = (
    ("01", "0"), ("11", "0"), ("21", "0"), ("2", "0"), ("1", None),
    ("00", "2"), ("0010", "2"), ("1010", "2"), ("2010", "2"), ("110", "2"),
    ("210", "2"), ("20", "2"), ("01", "2"), ("11", "2"), ("21", "2"),
)
HEAD_TEMPLATES = (
    ("", "0"), ("1", "0"), ("", "2"), ("0", "2"), ("10", "2"), ("010", "2"), ("1", "2"),
)

U135 = np.array([1, 0, 1, 0, 1, 0, 0], dtype=object)

# The non-S column list as published, in u_{ijk} = u_i + u_j + u_k notation.
# "1334" is read as u_1 + 2u_3 + u_4 (checked against the computed set).
LISTED_S_PRIME = ("1", "2", "3", "4", "5", "6", "7", "134", "1334", "145", "15", "23", "236",
                  "27", "34", "356", "36", "57")


def u_vector(indices: str) -> tuple:
    v = [0] * 7
    for ch in indices:
        v[int(ch) - 1] += 1
    return tuple(v)


def u_name(v: Sequence[int]) -> str:
    if not any(v):
        return "0"
    return "u" + "".join(str(i + 1) * int(x) for i, x in enumerate(v))


@dataclass(frozen=True)
class FactorToken:
    kind: str          # "body" or "head"
    template: int      # 1-based position in the template list
    alpha: int
    literal: str

    @property
    def stem(self) -> str:
        table = BODY_TEMPLATES if self.kind == "body" else HEAD_TEMPLATES
        return table[self.template - 1][0]

    @property
    def run_letter(self):
        table = BODY_TEMPLATES if self.kind == "body" else HEAD_TEMPLATES
        return table[self.template - 1][1]

    @property
    def name(self) -> str:
        parts = [f"M{ch}" for ch in self.stem]
        if self.run_letter is not None:
            parts.append(f"M{self.run_letter}^{self.alpha}")
        return "".join(parts) if parts else "I"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "template": self.template, "alpha": self.alpha,
                "literal": self.literal, "name": self.name}


@dataclass(frozen=True)
class FactorizationResult:
    word: str
    head: FactorToken | None
    body: tuple
    boundaries: tuple   # prefix lengths |E_0|, |E_0 E_1|, ..., |word|

    def literals(self) -> list[str]:
        return ([self.head.literal] if self.head else []) + [t.literal for t in self.body]

    def to_dict(self) -> dict:
        return {"word": self.word, "head": self.head.to_dict() if self.head else None,
                "body": [t.to_dict() for t in self.body], "boundaries": list(self.boundaries)}


def _normalize_word(word) -> str:
    if isinstance(word, str):
        w = word.strip()
    else:
        w = "".join(str(int(s)) for s in word)
    if any(ch not in "012" for ch in w):
        raise InputError("words must use the letters 0, 1, 2")
    return w


def _split_run(w: str) -> tuple[str, str | None, int]:
    last = w[-1]
    if last == "1":
        return w, None, 0
    i = len(w)
    while i > 0 and w[i - 1] == last:
        i -= 1
    return w[:i], last, len(w) - i


def _body_match(rest: str, run: str | None) -> int | None:
    """1-based template index of the shortest body stem ending ``rest`` for this run type."""
    if run is None:
        return 5 if rest.endswith("1") else None
    best = None
    for idx, (stem, letter) in enumerate(BODY_TEMPLATES, start=1):
        if letter == run and rest.endswith(stem):
            if best is None or len(stem) < len(BODY_TEMPLATES[best - 1][0]):
                best = idx
    return best


def _head_match(rest: str, run: str | None) -> int | None:
    for idx, (stem, letter) in enumerate(HEAD_TEMPLATES, start=1):
        if run is None:
            continue
        if letter == run and rest == stem:
            return idx
    return None


def tokenize(word) -> FactorizationResult:
    w = _normalize_word(word)
    if not w:
        raise InputError("word must be nonempty")
    body: list[FactorToken] = []
    head = None
    end = len(w)
    while end > 0:
        cur = w[:end]
        rest, run, alpha = _split_run(cur)
        idx = _body_match(rest, run)
        if idx is not None:
            stem = BODY_TEMPLATES[idx - 1][0]
            start = len(rest) - len(stem)
            body.append(FactorToken("body", idx, alpha, cur[start:]))
            end = start
            continue
        hidx = _head_match(rest, run)
        if hidx is None:
            raise NoFactorization(f"no template fits the prefix {cur!r}", prefix=cur)
        head = FactorToken("head", hidx, alpha, cur)
        end = 0
    body.reverse()
    bounds = [len(head.literal) if head else 0]
    for t in body:
        bounds.append(bounds[-1] + len(t.literal))
    return FactorizationResult(w, head, tuple(body), tuple(bounds))


# ---------------------------------------------------------------------------
# matrices


def letter_matrices(scaled: bool = False, printed: bool = False) -> list[np.ndarray]:
    """0/1 matrices as exact integer object arrays, or the 1/2, 1/4, 1/16 scaled Fractions."""
    out = []
    for M, s in zip(beta_matrices(exact=True, printed=printed), BETA_SCALES):
        A = np.vectorize(int, otypes=[object])(M)
        out.append(A * s if scaled else A)
    return out


def word_matrix(word, scaled: bool = False, printed: bool = False) -> np.ndarray:
    mats = letter_matrices(scaled, printed)
    out = np.eye(7, dtype=int).astype(object)
    if scaled:
        out = out * Fraction(1)
    for ch in _normalize_word(word):
        out = out.dot(mats[int(ch)])
    return out


def token_matrix(t: FactorToken | str | None, scaled: bool = False) -> np.ndarray:
    if t is None:
        return word_matrix("", scaled)
    return word_matrix(t.literal if isinstance(t, FactorToken) else t, scaled)


def m0_power_display(alpha: int) -> np.ndarray:
    """The published closed form for M_0^{4α}: first column (1, α, α, 0, α, α, α), rest copied from M_0."""
    base = np.array([[1, 0, 0, 0, 0, 0, 0], [0, 0, 1, 0, 0, 0, 0], [0, 0, 0, 1, 1, 0, 0],
                     [0, 0, 0, 0, 0, 0, 0], [0, 0, 0, 0, 0, 0, 1], [0, 0, 0, 0, 1, 0, 0],
                     [0, 1, 0, 0, 0, 0, 0]], dtype=object)
    base[[1, 2, 4, 5, 6], 0] = alpha
    return base


def m0_power_closed_form(alpha: int) -> np.ndarray:
    """M_0^{4α} for α ≥ 1: same first column as the display, other columns those of M_0^4.

    Columns 2..7 of M_0^k repeat with period 4, which is why the display
    (whose columns 2..7 are those of M_0^1) cannot hold for any α ≥ 1.
    """
    base = np.array([[1, 0, 0, 0, 0, 0, 0], [0, 1, 0, 0, 0, 0, 0], [0, 0, 1, 0, 0, 0, 0],
                     [0, 0, 0, 0, 0, 0, 0], [0, 0, 0, 1, 1, 0, 0], [0, 0, 1, 0, 0, 0, 0],
                     [0, 0, 0, 0, 0, 0, 1]], dtype=object)
    base[[1, 2, 4, 5, 6], 0] = alpha
    return base


# ---------------------------------------------------------------------------
# structure checks


def _in_S(v, level: int = 1) -> bool:
    return all(x >= 0 for x in v) and v[0] >= level and v[2] >= level and v[4] >= level


def _saturate(v) -> tuple:
    return tuple(min(int(x), 2) for x in v)


@dataclass
class StructureReport:
    triples_ok: bool
    triple_columns: dict            # "abc" -> 1-based columns in S
    stability_ok: bool
    stability_images: dict          # letter -> M u135
    closure_ok: bool                # the non-S closure is finite and holds every column seen up to length 6
    computed_s_prime: list          # names of the vectors in that closure
    listed_not_seen: list
    seen_not_listed: list
    max_non_s_entry: int
    block_words_ok: bool
    block_states: int
    block_failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.triples_ok and self.stability_ok and self.closure_ok and self.block_words_ok

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["stability_images"] = {k: [int(x) for x in v] for k, v in self.stability_images.items()}
        d["ok"] = self.ok
        return d


def _block_word_check(mats, blocks: int = 9):
    """Do all admissible block words with ``blocks`` blocks send u135 into 2·u135 + cone?

    A block word is M_{a1}^{i1} ... M_{ak}^{ik} with consecutive letters
    distinct, exponent 1 on every 1-block, and no occurrence of the letter
    pattern 100100.  Vectors are tracked saturated at 2, which is exact for
    nonnegative integer matrices and the threshold 2.  Exponent classes 1, 2
    and ≥3 are enough to see the pattern; the ≥3 class collects every
    saturated vector reachable by further powers.
    """
    sat_mats = [np.vectorize(int, otypes=[object])(M) for M in mats]

    def apply(letter, v):
        return _saturate(sat_mats[letter].dot(np.array(v, dtype=object)))

    def power_images(letter, v, cls):
        if cls == 1:
            return {apply(letter, v)}
        if cls == 2:
            return {apply(letter, apply(letter, v))}
        w = apply(letter, apply(letter, apply(letter, v)))
        seen = set()
        while w not in seen:
            seen.add(w)
            w = apply(letter, w)
        return seen

    start = (_saturate(U135), ())
    states = {start}
    for _ in range(blocks):
        nxt = set()
        for v, tail in states:
            prev = tail[0][0] if tail else None
            for letter in (0, 1, 2):
                if letter == prev:
                    continue
                for cls in ((1,) if letter == 1 else (1, 2, 3)):
                    new_tail = ((letter, cls),) + tail[:2]
                    if (letter == 1 and len(tail) >= 3 and tail[0] == (0, 2) and tail[1] == (1, 1)
                            and tail[2][0] == 0 and tail[2][1] >= 2):
                        continue
                    for w in power_images(letter, v, cls):
                        nxt.add((w, new_tail))
        states = nxt
    failures = sorted({v for v, _ in states if not _in_S(v, 2)})
    return not failures, len(states), failures


def _non_s_closure(mats, cap: int = 10000):
    """Smallest set of non-S vectors containing the non-S letter columns and closed under M·."""
    frontier = [tuple(int(x) for x in M[:, j]) for M in mats for j in range(7)]
    frontier = [v for v in frontier if not _in_S(v)]
    found = set(frontier)
    while frontier and len(found) < cap:
        v = frontier.pop()
        for M in mats:
            w = tuple(int(x) for x in M.dot(np.array(v, dtype=object)))
            if not _in_S(w) and w not in found:
                found.add(w)
                frontier.append(w)
    return found, not frontier


def structure_checks(printed: bool = False, raise_on_failure: bool = False) -> StructureReport:
    """Exhaustive checks on the three matrices (see :class:`StructureReport` fields)."""
    mats = letter_matrices(printed=printed)
    triple_columns = {}
    for a, b, c in itertools.product(range(3), repeat=3):
        P = mats[a].dot(mats[b]).dot(mats[c])
        triple_columns[f"{a}{b}{c}"] = [j + 1 for j in (0, 2, 4) if _in_S(P[:, j])]
    triples_ok = all(triple_columns.values())
    images = {str(i): M.dot(U135) for i, M in enumerate(mats)}
    stability_ok = all(_in_S(v) for v in images.values())

    seen = set()
    P_level = [np.eye(7, dtype=int).astype(object)]
    for _ in range(6):
        P_level = [P.dot(M) for P in P_level for M in mats]
        for P in P_level:
            for j in range(7):
                col = tuple(int(x) for x in P[:, j])
                if not _in_S(col):
                    seen.add(col)
    closure, closure_ok = _non_s_closure(mats)
    closure_ok = closure_ok and seen <= closure
    seen = closure
    listed = {u_vector(s) for s in LISTED_S_PRIME}
    block_ok, n_states, failures = _block_word_check(mats)
    report = StructureReport(
        triples_ok, triple_columns, stability_ok, images, closure_ok,
        sorted(u_name(v) for v in seen),
        sorted(u_name(v) for v in listed - seen),
        sorted(u_name(v) for v in seen - listed),
        max((max(v) for v in seen), default=0),
        block_ok, n_states, [list(v) for v in failures],
    )
    if raise_on_failure and not (triples_ok and stability_ok):
        raise CheckFailed("triple or stability check failed", case="a" if not triples_ok else "b")
    return report


# ---------------------------------------------------------------------------
# Λ / λ bounds


@dataclass
class GrowthReport:
    alpha_cap: int
    max_Lambda: Fraction
    argmax_Lambda: list
    max_lambda: Fraction
    argmax_lambda: list
    max_Lambda_m2m0: Fraction       # max over α ≥ 1 of Λ(M_2 M_0^α)
    argmax_m2m0: list
    display_matches: list           # α values (1..10) where M_0^{4α} equals the published display
    closed_form_ok: bool            # M_0^{4α} equals m0_power_closed_form(α) for α = 1..10
    sup_Lambda_products: float
    k0: int | None
    product_bound: float | None
    product_bound_ok: bool
    K_six: int
    entry_floor_ok: bool
    entry_ceiling_ok: bool
    samples: int

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        for key in ("max_Lambda", "max_lambda", "max_Lambda_m2m0"):
            d[key] = str(d[key])
        return d


def body_tokens(alpha_cap: int) -> list[FactorToken]:
    out = []
    for idx, (stem, run) in enumerate(BODY_TEMPLATES, start=1):
        alphas = [0] if run is None else range(alpha_cap + 1)
        for a in alphas:
            out.append(FactorToken("body", idx, a, stem + (run or "") * a))
    return out


def growth_and_bounds(alpha_cap: int = 40, k_products: int = 100, samples: int = 40,
                      sample_alpha: int = 6, seed: int = 0) -> GrowthReport:
    """Λ/λ over the body templates, the M_0^{4α} formula, sampled body products and K.

    Sampled products draw ``samples`` random sequences of body tokens (α up
    to ``sample_alpha``) of length ``k_products``.  Along each, the running
    Λ of E_1...E_k is recorded together with the first k (k0) at which λ of
    the product drops to 1/2 or below; the chained bound 6·2^{k0} is then
    compared with the sampled supremum.  The entry floor/ceiling checks use
    the exact integer products.
    """
    if alpha_cap < 10:
        raise InputError("alpha_cap must be at least 10")
    if k_products > 200:
        raise InputError("k_products must be at most 200")
    tokens = body_tokens(alpha_cap)
    max_L, arg_L, max_l, arg_l = Fraction(0), [], Fraction(0), []
    m2m0 = {}
    for t in tokens:
        sf = shape_functionals(token_matrix(t))
        if t.template == 4 and t.alpha >= 1:
            m2m0[t.alpha] = sf.Lambda
        if sf.Lambda > max_L:
            max_L, arg_L = sf.Lambda, [t.name]
        elif sf.Lambda == max_L:
            arg_L.append(t.name)
        if sf.lambda_small > max_l:
            max_l, arg_l = sf.lambda_small, [t.name]
        elif sf.lambda_small == max_l:
            arg_l.append(t.name)
    top = max(m2m0.values())
    arg_m2m0 = [a for a, v in sorted(m2m0.items()) if v == top]
    m0 = letter_matrices()[0]
    P = np.eye(7, dtype=int).astype(object)
    display_matches, closed_ok = [], True
    for a in range(1, 11):
        for _ in range(4):
            P = P.dot(m0)
        if (P == m0_power_display(a)).all():
            display_matches.append(a)
        closed_ok &= bool((P == m0_power_closed_form(a)).all())

    rng = make_rng(seed)
    small = body_tokens(sample_alpha)
    small_mats = [token_matrix(t) for t in small]
    sup_L, k0_all = 0.0, []
    floor_ok = ceiling_ok = True
    for _ in range(samples):
        P = np.eye(7, dtype=int).astype(object)
        k0 = None
        for k in range(1, k_products + 1):
            P = P.dot(small_mats[int(rng.integers(len(small)))])
            sf = shape_functionals(P)
            sup_L = max(sup_L, float(sf.Lambda))
            if k0 is None and sf.lambda_small <= Fraction(1, 2):
                k0 = k
            if k >= 15 or k == k_products:
                f_ok, c_ok = _entry_bounds(P, k)
                floor_ok &= f_ok
                ceiling_ok &= c_ok
        k0_all.append(k0)
    k0 = max((k for k in k0_all if k is not None), default=None)
    bound = 6.0 * 2 ** k0 if k0 is not None else None
    six = [np.eye(7, dtype=int).astype(object)]
    mats = letter_matrices()
    for _ in range(6):
        six = [Q.dot(M) for Q in six for M in mats]
    K = max(int(x) for Q in six for x in Q.flat)
    return GrowthReport(alpha_cap, max_L, arg_L, max_l, arg_l, top, arg_m2m0, display_matches, closed_ok, sup_L, k0, bound,
                        bound is None or sup_L <= bound, K, floor_ok, ceiling_ok, samples)


def _entry_bounds(P: np.ndarray, k: int) -> tuple[bool, bool]:
    """Floor ⌊k/15⌋ on some S column among 1, 3, 5; entries ≤ 12 in columns off the full support."""
    cols = [tuple(int(x) for x in P[:, j]) for j in range(7)]
    full = {i for c in cols for i, x in enumerate(c) if x}
    floor = k // 15
    floor_ok = any(_in_S(cols[j]) and all(x >= floor for x in cols[j] if x) for j in (0, 2, 4))
    ceiling_ok = all(max(c) <= 12 for c in cols if {i for i, x in enumerate(c) if x} != full)
    return floor_ok, ceiling_ok
