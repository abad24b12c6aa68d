"""Triangular products: block-triangular stabilization of support patterns,
the closed form of 3×3 upper-triangular products and its four-way
classification, and column growth versus singular values for
lower-triangular products.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import (CheckFailed, HorizonTooShort, InconclusiveFiniteness, InputError,
                     NotTriangular, ZeroDiagonal)
from .linalg import as_matrix, is_exact, singular_values, to_float
from .trajectory import MatrixFamily, SymbolSequence, run_trajectory


# ---------------------------------------------------------------------------
# block-triangular form of pattern products


@dataclass
class BlockPartition:
    blocks: list                   # ordered list of sorted index lists

    def __post_init__(self):
        flat = sorted(i for b in self.blocks for i in b)
        if not self.blocks or flat != list(range(len(flat))):
            raise InputError("blocks must partition 0..d-1")

    @property
    def delta(self) -> int:
        return len(self.blocks)


def distinct_column_count(Z: np.ndarray) -> int:
    """Number of distinct columns of a 0/1 matrix (the zero column counts)."""
    return len({tuple(col) for col in np.asarray(Z, dtype=bool).T.tolist()})


def in_block_triangular(Z: np.ndarray, part: BlockPartition, one_pattern: bool = True) -> bool:
    """Membership of the pattern Z in the block-triangular class.

    Column block J_k may only have nonzero rows in J_1 ∪ … ∪ J_k.  With
    ``one_pattern`` every block (rows J_i, columns J_j) must also have a
    single distinct column.
    """
    Z = np.asarray(Z, dtype=bool)
    allowed = []
    for k, cols in enumerate(part.blocks):
        allowed.extend(part.blocks[k])
        rows_ok = np.zeros(Z.shape[0], dtype=bool)
        rows_ok[allowed] = True
        if Z[np.ix_(~rows_ok, cols)].any():
            return False
    if one_pattern:
        for rows in part.blocks:
            for cols in part.blocks:
                if distinct_column_count(Z[np.ix_(rows, cols)]) != 1:
                    return False
    return True


@dataclass
class BlockFormReport:
    delta: int
    window_maxima: list            # limsup-style window maximum of N(P_{n,n'}) for each start n
    n1: int
    checkpoints: list
    pattern: list                  # common 0/1 pattern of the checkpoint products
    partition: list
    t1_membership: bool
    horizon: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _pattern_sequence(source, horizon: int) -> list[np.ndarray]:
    if isinstance(source, tuple) and len(source) == 2 and isinstance(source[0], MatrixFamily):
        fam, seq = source
        syms = seq.take(horizon) if isinstance(seq, SymbolSequence) else list(seq)[:horizon]
        mats = [to_float(fam.matrices[s]) for s in syms]
    else:
        mats = [to_float(as_matrix(M, nonnegative=True)) for M in source][:horizon]
    if len(mats) < horizon:
        raise InputError(f"only {len(mats)} factors for horizon {horizon}")
    return [(M != 0).astype(float) for M in mats]


def _count_rows(Q: np.ndarray) -> np.ndarray:
    """Distinct-column counts of a stack of 0/1 matrices, vectorized."""
    d = Q.shape[1]
    codes = np.einsum("nij,i->nj", Q, 2.0 ** np.arange(d))
    codes.sort(axis=1)
    return 1 + (np.diff(codes, axis=1) != 0).sum(axis=1)


def _pattern_row(pats: list[np.ndarray], n: int) -> list[np.ndarray]:
    """Z(P_{n,n'}) for n' = n+1..H, with P_{n,n'} = A_{n+1} … A_{n'}."""
    out = []
    acc = np.eye(pats[0].shape[0])
    for m in range(n, len(pats)):
        acc = ((acc @ pats[m]) > 0).astype(float)
        out.append(acc.astype(bool))
    return out


def block_form_detect(source, horizon: int = 400, window: float = 0.25) -> BlockFormReport:
    """Finite-horizon search for the stabilized block-triangular pattern.

    ``source`` is a list of matrices or a ``(family, sequence)`` pair.
    N(P_{n,n'}) is computed on the whole triangle n < n' ≤ horizon.  Its
    limsup in n' is read as the max over the last ``window`` fraction of
    the horizon, δ is the value where that max stops changing for n up to
    horizon/2, and checkpoints are chosen greedily so that every pair
    product has one common pattern.  The lexicographically minimal
    checkpoint sequence is not searched for.
    """
    if horizon < 8 or horizon > 2000:
        raise InputError("horizon must lie in 8..2000")
    pats = _pattern_sequence(source, horizon)
    d = pats[0].shape[0]
    if d > 16:
        raise InputError("order above 16")
    H = horizon
    N = np.zeros((H + 1, H + 1), dtype=np.int16)
    # Q[n] = Z(P_{n,m}) for every n < m, advanced one factor at a time
    Q = np.zeros((H, d, d))
    for m in range(1, H + 1):
        Q[m - 1] = np.eye(d)
        Q[:m] = (np.matmul(Q[:m], pats[m - 1]) > 0)
        N[:m, m] = _count_rows(Q[:m])
    lo = int(H * (1 - window))
    half = H // 2
    wmax = [int(N[n, max(lo, n + 1):].max()) for n in range(half + 1)]
    # wmax is nondecreasing in theory; δ is its value once it stops moving
    n1 = None
    for n in range(half + 1):
        if all(w == wmax[n] for w in wmax[n:]):
            n1 = n
            break
    if n1 is None or n1 > half // 2:
        raise HorizonTooShort("window maxima did not stabilize within the horizon", horizon=H)
    delta = wmax[n1]
    row1 = _pattern_row(pats, n1)
    candidates = [n2 for n2 in range(n1 + 1, H + 1) if N[n1, n2] == delta]
    best: list[int] = []
    best_pattern = None
    seen = []
    for n2 in candidates:
        target = row1[n2 - n1 - 1]
        if any(np.array_equal(target, s) for s in seen):
            continue
        seen.append(target)
        chosen, rows = [n1], {n1: row1}
        for n in candidates:
            if not np.array_equal(row1[n - n1 - 1], target):
                continue
            if all(np.array_equal(rows[k][n - k - 1], target) for k in chosen[1:]):
                chosen.append(n)
                rows[n] = _pattern_row(pats, n)
        if len(chosen) > len(best):
            best, best_pattern = chosen, target
    if len(best) < 3:
        raise HorizonTooShort("fewer than three checkpoints with a common pattern", horizon=H)
    partition = _partition_from_pattern(best_pattern)
    # independent re-verification on freshly multiplied pair products
    ok = partition is not None
    if ok:
        for i, a in enumerate(best):
            for b in best[i + 1:]:
                Z = np.eye(d, dtype=bool)
                for m in range(a, b):
                    Z = (Z.astype(int) @ pats[m].astype(int)) > 0
                if not (np.array_equal(Z, best_pattern) and in_block_triangular(Z, partition)):
                    ok = False
                    break
            if not ok:
                break
    return BlockFormReport(delta, wmax, n1, best, best_pattern.astype(int).tolist(),
                           partition.blocks if partition else [], ok, H)


def _partition_from_pattern(Z: np.ndarray) -> BlockPartition | None:
    """Group columns with equal patterns, then order the groups triangularly."""
    groups: dict[tuple, list[int]] = {}
    for j, col in enumerate(Z.T.tolist()):
        groups.setdefault(tuple(col), []).append(j)
    pending = list(groups.items())
    order, covered = [], set()
    while pending:
        for idx, (col, cols) in enumerate(pending):
            rows = {i for i, x in enumerate(col) if x}
            if rows <= covered | set(cols):
                order.append(cols)
                covered |= set(cols)
                pending.pop(idx)
                break
        else:
            return None
    return BlockPartition(order)


# ---------------------------------------------------------------------------
# 3×3 upper-triangular series


@dataclass
class TriangularSeries:
    exact: bool
    n: int
    factors: list
    a_star: list
    d_star: list
    f_star: list
    s: list
    t: list
    u: list
    tau: list
    closed_form: np.ndarray
    direct: np.ndarray
    agreement: bool
    monotone: dict = field(default_factory=dict)

    def last(self, name: str):
        return getattr(self, name)[-1]

    def to_dict(self) -> dict:
        f = float
        return {"exact": self.exact, "n": self.n, "s": f(self.s[-1]), "t": f(self.t[-1]),
                "u": f(self.u[-1]), "tau": f(self.tau[-1]), "agreement": self.agreement,
                "monotone": self.monotone}


def _check_upper(M: np.ndarray) -> None:
    if M.shape != (3, 3):
        raise NotTriangular("factors must be 3x3")
    if any(M[i, j] != 0 for i in range(3) for j in range(i)):
        raise NotTriangular("factor has a nonzero entry below the diagonal")
    if any(M[i, i] == 0 for i in range(3)):
        raise ZeroDiagonal("factor has a zero diagonal entry")


def series3x3(factors: Sequence, n: int | None = None, exact: bool | None = None) -> TriangularSeries:
    """Partial sums s, t, u, τ and the closed form of P_n = A_1 … A_n.

    ``factors`` is repeated cyclically up to length ``n``.  Any string or
    Fraction entry switches to exact arithmetic.
    """
    raw = list(factors)
    if not raw:
        raise InputError("no factors")
    if exact is None:
        exact = any(isinstance(x, (str, Fraction)) for M in raw
                    for x in np.asarray(M, dtype=object).ravel())
    mats = [as_matrix(M, exact=exact, nonnegative=True) for M in raw]
    for M in mats:
        _check_upper(M)
    n = len(mats) if n is None else n
    if n < 1:
        raise InputError("n must be positive")
    seq = [mats[i % len(mats)] for i in range(n)]
    one = Fraction(1) if exact else 1.0
    zero = one - one
    a_s, d_s, f_s = [one], [one], [one]
    s, t, u, tau = [], [], [], []
    S = T = U = TAU = zero
    for k, A in enumerate(seq, start=1):
        a, b, c = A[0, 0], A[0, 1], A[0, 2]
        d, e, f = A[1, 1], A[1, 2], A[2, 2]
        a_prev, d_prev = a_s[-1], d_s[-1]
        a_s.append(a_prev * a)
        d_s.append(d_prev * d)
        f_s.append(f_s[-1] * f)
        if k >= 2:
            TAU = TAU + S * d_prev * e / f_s[-1]
        S = S + a_prev * b / d_s[-1]
        T = T + a_prev * c / f_s[-1]
        U = U + d_prev * e / f_s[-1]
        s.append(S), t.append(T), u.append(U), tau.append(TAU)
    A_, D_, F_ = a_s[-1], d_s[-1], f_s[-1]
    closed = np.array([[A_, D_ * S, F_ * (T + TAU)], [zero, D_, F_ * U], [zero, zero, F_]],
                      dtype=object if exact else float)
    direct = seq[0]
    for A in seq[1:]:
        direct = direct @ A
    if exact:
        agree = all(closed[i, j] == direct[i, j] for i in range(3) for j in range(3))
    else:
        scale = float(np.abs(direct).max())
        agree = bool(np.abs(closed - direct).max() <= 1e-10 * scale)
    slack = 0 if exact else 1e-12
    mono = {
        "s": _nondecreasing(s, slack), "t": _nondecreasing(t, slack), "u": _nondecreasing(u, slack),
        "tau_over_u": _nondecreasing([x / y for x, y in zip(tau, u) if y != 0], slack),
    }
    return TriangularSeries(exact, n, seq, a_s[1:], d_s[1:], f_s[1:], s, t, u, tau, closed, direct,
                            agree, mono)


def _nondecreasing(xs: list, slack) -> bool:
    return all(y >= x - slack * abs(x) for x, y in zip(xs, xs[1:]))


def finiteness(series: list) -> bool | None:
    """True (finite), False (divergent) or None (inconclusive) from the last quarter."""
    n = len(series)
    if n < 4:
        return None
    q = n - max(1, n // 4)
    last, before = float(series[-1]), float(series[q - 1])
    inc = last - before
    if inc <= 1e-9 * abs(last) or (last == 0 and inc == 0):
        return True
    if before > 0 and last >= 2 * before:
        return False
    return None


@dataclass
class Classification:
    case: int
    finiteness: dict
    limit_point_shape: list        # P_n/‖P_n‖ at the final depth, rounded
    prediction: list | None        # None means NO_COMMON_LIMIT
    empirical: list
    gap: float | None

    @property
    def verdict(self) -> str:
        return "NO_COMMON_LIMIT" if self.prediction is None else "LIMIT"

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["verdict"] = self.verdict
        return d


def _case(fin: dict) -> int:
    s, u, tau = fin["s"], fin["u"], fin["tau"]
    if s is None:
        raise InconclusiveFiniteness("cannot decide whether s is finite", series="s")
    if s is False:
        if u is False or tau is False:
            return 1
        if u is True and tau is True:
            return 2
        raise InconclusiveFiniteness("cannot decide u or tau", series="u/tau")
    if u is None:
        raise InconclusiveFiniteness("cannot decide whether u is finite", series="u")
    return 3 if u is False else 4


def classify3x3_and_predict(series: TriangularSeries, test_vectors: Sequence | None = None,
                            zero_tol: float = 1e-9) -> Classification:
    """Case of the four-way analysis, the predicted limit of P_n v/‖P_n v‖, and its validation.

    The prediction uses the sufficient condition b_n e_n ≠ 0 for all n, or
    the limit-point shape read off P_n/‖P_n‖ at the final depth.
    """
    fin = {k: finiteness(getattr(series, k)) for k in ("s", "u", "tau")}
    case = _case(fin)
    P = to_float(series.direct)
    unit = P / np.abs(P).sum()
    be = all(A[0, 1] != 0 and A[1, 2] != 0 for A in series.factors)
    small = lambda x: abs(x) < zero_tol
    S, T, U, TAU = (float(series.last(k)) for k in ("s", "t", "u", "tau"))
    col = np.array([T + TAU, U, 1.0])
    col_pred = (col / col.sum()).tolist()
    pred = None
    if case == 1:
        pred = [1.0, 0.0, 0.0]
    elif case == 2:
        if be or (small(unit[0, 0]) and small(unit[0, 1])):
            pred = col_pred
    elif case == 3:
        if be or (small(unit[0, 0]) and small(unit[0, 1] * unit[1, 2] - unit[0, 2] * unit[1, 1])):
            pred = [S / (1 + S), 1 / (1 + S), 0.0]
    else:
        if be or (small(unit[0, 0]) and small(unit[1, 1])):
            pred = col_pred
        elif small(unit[1, 1]) and small(unit[2, 2]):
            pred = [1.0, 0.0, 0.0]
    if test_vectors is None:
        test_vectors = [[1, 1, 1], [1, 2, 3], [3, 1, 2], [0.1, 5, 1]]
    fam = MatrixFamily(tuple(to_float(A) for A in series.factors), name="triangular")
    images = []
    for v in test_vectors:
        traj = run_trajectory(fam, list(range(series.n)), series.n, start_vector=v,
                              compute_singular_values=False)
        images.append(traj.images[-1])
    images = np.array(images)
    gap = None
    if pred is not None:
        gap = float(np.abs(images - np.array(pred)[None, :]).max())
    return Classification(case, fin, np.round(unit, 12).tolist(), pred, images.tolist(), gap)


# ---------------------------------------------------------------------------
# lower-triangular column growth versus singular values


@dataclass
class LowerTriReport:
    ratio_series: np.ndarray       # running sup of the cross-entry ratio
    sv_series: np.ndarray          # running sup of max_k max(δ_k/‖P u_k‖, ‖P u_k‖/δ_k)
    ratio_bounded: bool
    sv_column_match: bool

    @property
    def agree(self) -> bool:
        return self.ratio_bounded == self.sv_column_match

    def to_dict(self) -> dict:
        return {"ratio_bounded": self.ratio_bounded, "sv_column_match": self.sv_column_match,
                "agree": self.agree, "final_ratio": float(self.ratio_series[-1]),
                "final_sv": float(self.sv_series[-1])}


def _stable(running: np.ndarray, growth: float) -> bool:
    n = len(running)
    q = n - max(1, n // 4)
    return running[-1] <= growth * running[q - 1]


def lower_tri_sv_check(factors: Sequence, depth: int = 400, growth: float = 1.05) -> LowerTriReport:
    """Empirical check that both sides of the column-growth equivalence agree.

    Side one: sup over n, i, j ≥ j' of m_{ij}/m_{i'j'} (nonzero denominators)
    for the entries of P_n.  Side two: ‖P_n u_k‖ ≍ δ_k(n) for every k.  Each
    side is declared bounded when its running sup grows by less than
    ``growth`` over the last quarter of the depth.
    """
    mats = [to_float(as_matrix(M, nonnegative=True)) for M in factors]
    d = mats[0].shape[0]
    if d > 8:
        raise InputError("order above 8")
    for M in mats:
        if np.any(np.triu(M, 1) != 0):
            raise NotTriangular("factor has a nonzero entry above the diagonal")
        if np.any(np.diag(M) == 0):
            raise ZeroDiagonal("factor has a zero diagonal entry")
    fam = MatrixFamily(tuple(mats), name="lower")
    seq = [i % len(mats) for i in range(depth)]
    traj = run_trajectory(fam, seq, depth, compute_singular_values=True)
    ratio = np.empty(depth)
    svr = np.empty(depth)
    for n in range(depth):
        U = traj.units[n]
        worst = 0.0
        for jp in range(d):
            nz = U[:, jp][U[:, jp] > 0]
            if nz.size == 0:
                continue
            worst = max(worst, float(U[:, jp:].max() / nz.min()))
        ratio[n] = worst
        cols = np.sqrt((U ** 2).sum(axis=0))
        sv = traj.singular_values[n]
        with np.errstate(divide="ignore"):
            r = np.maximum(sv / cols, cols / sv)
        svr[n] = float(np.max(r))
    ratio = np.maximum.accumulate(ratio)
    svr = np.maximum.accumulate(svr)
    return LowerTriReport(ratio, svr, bool(_stable(ratio, growth)), bool(_stable(svr, growth)))
