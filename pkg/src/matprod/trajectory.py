"""Products along symbol sequences and the convergence/divergence diagnostics built on them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import (BadCheckpoints, DimensionTooSmall, InputError, NotConverged,
                     NotStochastic, ProductVanished, ZeroImage)
from .linalg import (ScaledMat, as_matrix, common_left_eigenvector, entry_norm, float_det, is_exact,
                     scaled_identity, scaled_multiply, singular_values, to_float)


def make_rng(seed: int | None) -> np.random.Generator:
    """Counter-based 64-bit generator (Philox) used for every random draw in the package."""
    return np.random.Generator(np.random.Philox(0 if seed is None else int(seed)))


def _as_vector(v, exact: bool) -> np.ndarray:
    arr = as_matrix(np.asarray(v, dtype=object if exact else float).reshape(-1, 1)
                    if not isinstance(v, np.ndarray) or v.ndim == 1 else v, exact=exact)
    return arr.reshape(-1)


# ---------------------------------------------------------------------------
# families and sequences


@dataclass(frozen=True)
class MatrixFamily:
    """Square nonnegative matrices M_0..M_{a-1}, optional row vectors r_i and column vector c.

    When both the row vectors and ``terminal`` are present the family must
    be normalized: ``Σ r_i c = 1`` and ``Σ M_i c = c``.  Cylinder values are
    then ``r_{w1} M_{w2} ... M_{wn} c`` (see :meth:`measure`).
    """

    matrices: tuple
    row_vectors: tuple | None = None
    terminal: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        if not self.matrices:
            raise InputError("a family needs at least one matrix")
        exact = any(is_exact(np.asarray(M)) for M in self.matrices)
        mats = tuple(as_matrix(M, exact=exact, nonnegative=True) for M in self.matrices)
        d = mats[0].shape[0]
        for M in mats:
            if M.shape != (d, d):
                raise InputError("family matrices must be square and of equal order")
        object.__setattr__(self, "matrices", mats)
        if self.terminal is not None:
            c = _as_vector(self.terminal, exact)
            if c.shape != (d,):
                raise InputError("terminal vector has the wrong length")
            object.__setattr__(self, "terminal", c)
        if self.row_vectors is not None:
            rows = tuple(_as_vector(r, exact) for r in self.row_vectors)
            if len(rows) != len(mats) or any(r.shape != (d,) for r in rows):
                raise InputError("need one row vector of length d per matrix")
            object.__setattr__(self, "row_vectors", rows)
            if self.terminal is not None:
                self._check_normalization(exact)

    def _check_normalization(self, exact: bool) -> None:
        c = self.terminal
        total = sum(r @ c for r in self.row_vectors)
        image = sum(M @ c for M in self.matrices)
        if exact:
            ok = total == 1 and all(x == y for x, y in zip(image, c))
        else:
            ok = abs(total - 1) <= 1e-10 and np.abs(image - c).max() <= 1e-10
        if not ok:
            raise InputError("family is not normalized: need Σ r_i c = 1 and Σ M_i c = c")

    @property
    def alphabet_size(self) -> int:
        return len(self.matrices)

    @property
    def order(self) -> int:
        return self.matrices[0].shape[0]

    @property
    def exact(self) -> bool:
        return is_exact(self.matrices[0])

    def float_matrices(self) -> np.ndarray:
        return np.stack([to_float(M) for M in self.matrices])

    def word_matrix(self, word: Sequence[int]) -> np.ndarray:
        out = np.eye(self.order) if not self.exact else None
        if self.exact:
            from .linalg import identity
            out = identity(self.order, exact=True)
        for w in word:
            out = out @ self.matrices[w]
        return out

    def measure(self, word: Sequence[int]):
        """Cylinder value r_{w1} M_{w2} ... M_{wn} c (needs row vectors and terminal vector)."""
        if self.row_vectors is None or self.terminal is None:
            raise InputError("family has no row vectors / terminal vector")
        word = list(word)
        if not word:
            return sum(r @ self.terminal for r in self.row_vectors)
        v = self.terminal
        for w in reversed(word[1:]):
            v = self.matrices[w] @ v
        return self.row_vectors[word[0]] @ v

    def log_measure(self, word: Sequence[int]) -> float:
        """log of :meth:`measure`, renormalizing along the way (float mode)."""
        word = list(word)
        v = to_float(self.terminal.reshape(-1, 1)).reshape(-1)
        mats = self.float_matrices()
        log_scale = 0.0
        for w in reversed(word[1:]):
            v = mats[w] @ v
            s = np.abs(v).sum()
            if s == 0:
                return -math.inf
            v = v / s
            log_scale += math.log(s)
        r = to_float(self.row_vectors[word[0]].reshape(1, -1)).reshape(-1)
        val = float(r @ v)
        return log_scale + math.log(val) if val > 0 else -math.inf


@dataclass(frozen=True)
class SymbolSequence:
    """Symbols over {0..a-1}: an explicit word, a preperiod+period, or seeded random draws."""

    alphabet_size: int
    kind: str
    word: tuple = ()
    period: tuple = ()
    weights: tuple | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.alphabet_size < 1:
            raise InputError("alphabet size must be positive")
        for s in tuple(self.word) + tuple(self.period):
            if not 0 <= s < self.alphabet_size:
                raise InputError(f"symbol {s} outside alphabet of size {self.alphabet_size}")
        if self.kind == "periodic" and not self.period:
            raise InputError("periodic sequence needs a nonempty period")
        if self.kind not in ("explicit", "periodic", "random"):
            raise InputError(f"unknown sequence kind {self.kind!r}")

    @classmethod
    def explicit(cls, word, alphabet_size: int) -> "SymbolSequence":
        return cls(alphabet_size, "explicit", tuple(int(s) for s in word))

    @classmethod
    def eventually_periodic(cls, preperiod, period, alphabet_size: int) -> "SymbolSequence":
        return cls(alphabet_size, "periodic", tuple(int(s) for s in preperiod),
                   tuple(int(s) for s in period))

    @classmethod
    def random(cls, alphabet_size: int, seed: int, weights=None) -> "SymbolSequence":
        if weights is not None:
            weights = tuple(float(w) for w in weights)
            if len(weights) != alphabet_size or min(weights) < 0 or abs(sum(weights) - 1) > 1e-12:
                raise InputError("weights must be a probability vector over the alphabet")
        return cls(alphabet_size, "random", weights=weights, seed=int(seed))

    def take(self, n: int) -> np.ndarray:
        if self.kind == "explicit":
            if n > len(self.word):
                raise InputError(f"explicit word has length {len(self.word)} < {n}")
            return np.array(self.word[:n], dtype=np.int64)
        if self.kind == "periodic":
            pre = list(self.word[:n])
            rest = n - len(pre)
            reps = -(-rest // len(self.period)) if rest > 0 else 0
            return np.array(pre + (list(self.period) * reps)[:rest], dtype=np.int64)
        p = self.weights or tuple([1.0 / self.alphabet_size] * self.alphabet_size)
        return make_rng(self.seed).choice(self.alphabet_size, size=n, p=p).astype(np.int64)


# ---------------------------------------------------------------------------
# trajectories


@dataclass
class ProductTrajectory:
    """Per-step record of P_n = A_1...A_n (row n-1 of each array is step n)."""

    family: MatrixFamily
    symbols: np.ndarray
    log_norms: np.ndarray
    units: np.ndarray
    singular_values: np.ndarray | None
    dets: np.ndarray
    lambdas: np.ndarray
    images: np.ndarray | None = None
    start_vector: np.ndarray | None = None
    final: ScaledMat | None = None

    @property
    def depth(self) -> int:
        return len(self.symbols)

    @property
    def order(self) -> int:
        return self.units.shape[1]

    def csv_header(self) -> list[str]:
        d = self.order
        cols = ["n", "log_norm", "det_normalized"] + [f"delta{k + 1}" for k in range(d)]
        if self.images is not None:
            cols += [f"c{k + 1}" for k in range(d)]
        return cols

    def csv_rows(self) -> list[list]:
        rows = []
        for i in range(self.depth):
            row = [i + 1, float(self.log_norms[i]), float(self.dets[i])]
            sv = self.singular_values[i] if self.singular_values is not None else [math.nan] * self.order
            row += [float(x) for x in sv]
            if self.images is not None:
                row += [float(x) for x in self.images[i]]
            rows.append(row)
        return rows


def run_trajectory(family: MatrixFamily, seq: SymbolSequence | Sequence[int], depth: int,
                   start_vector=None, compute_singular_values: bool = True) -> ProductTrajectory:
    """Multiply out P_n along ``seq`` for n = 1..depth and record the per-step diagnostics.

    The normalized image uses ``start_vector`` if given, else the family's
    terminal vector; with neither, ``images`` is None.  The step factor
    λ_n = ‖P_n‖/(‖P_{n-1}‖‖A_n‖) uses the convention λ_1 = 1, so that
    Π λ_k · Π ‖A_k‖ = ‖P_n‖.
    """
    if depth < 1:
        raise InputError("depth must be at least 1")
    symbols = seq.take(depth) if isinstance(seq, SymbolSequence) else np.asarray(list(seq)[:depth], dtype=np.int64)
    if len(symbols) < depth:
        raise InputError("sequence shorter than depth")
    if symbols.min() < 0 or symbols.max() >= family.alphabet_size:
        raise InputError("sequence uses symbols outside the family's alphabet")
    d = family.order
    exact = family.exact
    c = None
    if start_vector is not None:
        c = to_float(np.asarray(start_vector, dtype=float).reshape(-1, 1)).reshape(-1)
        if c.shape != (d,) or np.any(c <= 0):
            raise InputError("start vector must be positive of length d")
    elif family.terminal is not None:
        c = to_float(family.terminal.reshape(-1, 1)).reshape(-1)
    acc = scaled_identity(d, exact)
    log_norms = np.empty(depth)
    units = np.empty((depth, d, d))
    svals = np.empty((depth, d)) if compute_singular_values else None
    dets = np.empty(depth)
    lambdas = np.empty(depth)
    images = np.empty((depth, d)) if c is not None else None
    factor_log_norms = [math.log(float(entry_norm(M))) if entry_norm(M) != 0 else -math.inf
                        for M in family.matrices]
    prev_log = 0.0
    for n in range(depth):
        try:
            acc = scaled_multiply(acc, family.matrices[symbols[n]])
        except ProductVanished as exc:
            raise ProductVanished(f"P_n vanished at n = {n + 1}", n=n + 1) from exc
        unit = acc.normalized()
        log_norms[n] = acc.log_norm()
        units[n] = unit
        if svals is not None:
            svals[n] = singular_values(unit)
        dets[n] = float_det(unit)
        lambdas[n] = 1.0 if n == 0 else math.exp(log_norms[n] - prev_log - factor_log_norms[symbols[n]])
        prev_log = log_norms[n]
        if images is not None:
            img = unit @ c
            s = np.abs(img).sum()
            if s == 0:
                raise ZeroImage(f"P_n c vanished at n = {n + 1}", n=n + 1)
            images[n] = img / s
    return ProductTrajectory(family, symbols, log_norms, units, svals, dets, lambdas, images,
                             c, acc)


# ---------------------------------------------------------------------------
# diagnostics


@dataclass(frozen=True)
class RankOneReport:
    ratio_series: np.ndarray
    det_series: np.ndarray
    verdict: str
    steps: np.ndarray


def _window(n: int, fraction: float) -> int:
    return max(1, int(math.ceil(fraction * n)))


def rank_one_diagnostic(traj: ProductTrajectory, tol_collapse: float = 1e-6,
                        floor_persist: float = 1e-3, window: float = 0.2,
                        steps: Sequence[int] | None = None) -> RankOneReport:
    """Classify δ_2(n)/δ_1(n) over the trailing window.

    ``steps`` (1-based) restricts the series to a subsequence, e.g. the
    checkpoints at which a persistence certificate is expected.
    """
    if traj.singular_values is None:
        raise InputError("trajectory was run without singular values")
    sv = traj.singular_values
    ratio = np.where(sv[:, 0] > 0, sv[:, 1] / np.where(sv[:, 0] > 0, sv[:, 0], 1.0), 0.0) \
        if sv.shape[1] > 1 else np.zeros(len(sv))
    idx = np.arange(1, traj.depth + 1) if steps is None else np.asarray(steps, dtype=int)
    sel = ratio[idx - 1]
    tail = sel[-_window(len(sel), window):]
    if np.all(tail < tol_collapse):
        verdict = "rank-one-collapse"
    elif np.all(tail > floor_persist):
        verdict = "persistent-rank>=2"
    else:
        verdict = "inconclusive"
    return RankOneReport(ratio, traj.dets.copy(), verdict, idx)


def _suffix_box_width(points: np.ndarray) -> np.ndarray:
    """For each i, an upper bound on the L1 diameter of points[i:] (bounding-box width)."""
    hi = np.maximum.accumulate(points[::-1], axis=0)[::-1]
    lo = np.minimum.accumulate(points[::-1], axis=0)[::-1]
    return (hi - lo).sum(axis=1)


@dataclass(frozen=True)
class LimitImage:
    vector: np.ndarray
    achieved_at: int
    cauchy_gap: float


def limit_image(traj: ProductTrajectory, tol: float = 1e-6, window: float = 0.2) -> LimitImage:
    """Last normalized image once the trailing window is Cauchy to within ``tol``.

    Gaps are measured by the bounding-box width of the window, which bounds
    every pairwise L1 distance from above.
    """
    if traj.images is None:
        raise InputError("trajectory carries no normalized images")
    widths = _suffix_box_width(traj.images)
    start = traj.depth - _window(traj.depth, window)
    gap = float(widths[start])
    if gap >= tol:
        raise NotConverged(f"trailing gap {gap:.3e} >= tol {tol:.1e} at depth {traj.depth}",
                           depth=traj.depth, gap=gap)
    below = np.nonzero(widths < tol)[0]
    achieved = int(below[0]) + 1
    return LimitImage(traj.images[-1].copy(), achieved, gap)


@dataclass(frozen=True)
class ProbeResult:
    prefix_lengths: np.ndarray
    sup_gap: np.ndarray
    samples: int
    depth: int


def _tail_images(mats: np.ndarray, tails: np.ndarray, c: np.ndarray) -> np.ndarray:
    """w[s, m] = normalized A_{t_1}...A_{t_m} c for every sample s and m = 0..len."""
    S, L = tails.shape
    d = mats.shape[1]
    out = np.empty((S, L + 1, d))
    Q = np.broadcast_to(np.eye(d), (S, d, d)).copy()
    out[:, 0] = c / np.abs(c).sum()
    for m in range(L):
        Q = Q @ mats[tails[:, m]]
        Q /= np.abs(Q).sum(axis=(1, 2), keepdims=True)
        w = Q @ c
        out[:, m + 1] = w / np.abs(w).sum(axis=1, keepdims=True)
    return out


def uniform_convergence_probe(family: MatrixFamily, prefix: Sequence[int], extension_samples: int = 200,
                              depth: int = 300, exhaust_len: int = 4, seed: int = 0,
                              prefix_lengths: Sequence[int] | None = None) -> ProbeResult:
    """Estimate sup{‖c_{ξ,p} − c_{ξ,q}‖ : ξ in the cylinder of prefix[:n], n ≤ p, q ≤ depth}.

    Extensions are shared across prefix lengths: the first ``a**exhaust_len``
    of them start with every word of length ``exhaust_len`` (then continue at
    random), the rest are fully random.  The value is an upper bound (bounding
    box) of the sampled oscillation, not a proof of uniformity.
    """
    if family.terminal is None:
        raise InputError("probe needs a terminal vector")
    prefix = [int(s) for s in prefix]
    mats = family.float_matrices()
    c = to_float(family.terminal.reshape(-1, 1)).reshape(-1)
    if np.any(c <= 0):
        raise InputError("probe needs a positive terminal vector")
    a = family.alphabet_size
    rng = make_rng(seed)
    tails = rng.integers(0, a, size=(extension_samples, depth))
    n_exhaust = min(a ** exhaust_len, extension_samples)
    for s in range(n_exhaust):
        x = s
        for j in range(exhaust_len):
            tails[s, exhaust_len - 1 - j] = x % a
            x //= a
    w = _tail_images(mats, tails, c)
    lengths = list(range(1, len(prefix) + 1)) if prefix_lengths is None else list(prefix_lengths)
    gaps = np.empty(len(lengths))
    acc = np.eye(mats.shape[1])
    built = 0
    for idx, n in enumerate(lengths):
        if n > len(prefix) or n > depth:
            raise InputError("prefix length exceeds the prefix or the depth")
        while built < n:
            acc = acc @ mats[prefix[built]]
            acc /= np.abs(acc).sum()
            built += 1
        imgs = np.einsum("ij,smj->smi", acc, w[:, : depth - n + 1])
        norms = np.abs(imgs).sum(axis=2, keepdims=True)
        imgs = imgs / norms
        width = (imgs.max(axis=1) - imgs.min(axis=1)).sum(axis=1)
        gaps[idx] = float(width.max())
    return ProbeResult(np.array(lengths), gaps, extension_samples, depth)


@dataclass(frozen=True)
class CheckpointReport:
    h1_min: float | None
    h2_violations: list
    v_membership: dict


def _factor(traj: ProductTrajectory, n: int) -> np.ndarray:
    """A_n (1-based) as floats."""
    return to_float(traj.family.matrices[traj.symbols[n - 1]])


def checkpoint_conditions(traj: ProductTrajectory, checkpoints: Sequence[int], pattern_tol: float = 1e-8,
                          pattern_floor: float = 1e-3, test_vectors: Sequence | None = None) -> CheckpointReport:
    """Check the two checkpoint conditions for convergence of normalized images.

    h1_min is min over k and n in [n_{k+1}, n_{k+2}) of
    ‖P_n‖/(‖P_{n_k}‖·‖P_{n_k,n}‖).  h2_violations lists windows (n_k, n_{k+1})
    whose normalized product contains a 2x2 submatrix that is (up to
    ``pattern_tol``) diagonal or anti-diagonal with entries above
    ``pattern_floor``.  ``v_membership`` maps the index of each test vector
    to inf_n ‖P_n v‖/‖P_n‖.
    """
    cps = [int(x) for x in checkpoints]
    if any(b <= a for a, b in zip(cps, cps[1:])) or not cps or cps[0] < 0 or cps[-1] > traj.depth:
        raise BadCheckpoints("checkpoints must be increasing and within [0, depth]")
    d = traj.order

    def log_norm_at(n):
        return math.log(d) if n == 0 else float(traj.log_norms[n - 1])

    h1 = None
    for k in range(len(cps) - 2):
        acc = np.eye(d)
        log_acc = 0.0
        for n in range(cps[k] + 1, cps[k + 2]):
            acc = acc @ _factor(traj, n)
            s = np.abs(acc).sum()
            acc /= s
            log_acc += math.log(s)
            if n >= cps[k + 1]:
                val = math.exp(log_norm_at(n) - log_norm_at(cps[k]) - log_acc)
                h1 = val if h1 is None else min(h1, val)
    violations = []
    for k in range(len(cps) - 1):
        W = np.eye(d)
        for n in range(cps[k] + 1, cps[k + 1] + 1):
            W = W @ _factor(traj, n)
            W /= np.abs(W).sum()
        for i in range(d):
            for i2 in range(i + 1, d):
                for j in range(d):
                    for j2 in range(j + 1, d):
                        a, b, c, e = W[i, j], W[i, j2], W[i2, j], W[i2, j2]
                        if a > pattern_floor and e > pattern_floor and b <= pattern_tol and c <= pattern_tol:
                            violations.append((cps[k], cps[k + 1], (i, i2), (j, j2), "diagonal"))
                        elif b > pattern_floor and c > pattern_floor and a <= pattern_tol and e <= pattern_tol:
                            violations.append((cps[k], cps[k + 1], (i, i2), (j, j2), "antidiagonal"))
    membership = {}
    for idx, v in enumerate(test_vectors or []):
        v = np.asarray(v, dtype=float)
        membership[idx] = float(np.min(np.abs(traj.units @ v).sum(axis=1)))
    return CheckpointReport(h1, violations, membership)


@dataclass(frozen=True)
class DivergenceReport:
    matrix_limit_points: list
    cluster_counts: list
    eigen_residual_series: np.ndarray
    common_left_eigenvector: dict
    verdict: str


def _greedy_clusters(points: Sequence[np.ndarray], radius: float):
    centroids: list[np.ndarray] = []
    counts: list[int] = []
    for P in points:
        best, best_dist = None, None
        for i, C in enumerate(centroids):
            dist = np.abs(P - C).sum()
            if dist <= radius and (best_dist is None or dist < best_dist):
                best, best_dist = i, dist
        if best is None:
            centroids.append(P.copy())
            counts.append(1)
        else:
            counts[best] += 1
            centroids[best] += (P - centroids[best]) / counts[best]
    return centroids, counts


def divergence_detector(source, depth: int | None = None, seq: SymbolSequence | None = None,
                        radius: float = 1e-3, tol: float = 1e-8, tail_fraction: float = 0.5) -> DivergenceReport:
    """Look for a certificate that P_n/‖P_n‖ diverges.

    ``source`` is either a :class:`MatrixFamily` (with ``seq`` and ``depth``)
    or a list of factor matrices.  Normalized factors from the trailing part
    of the sequence are clustered to approximate their limit points.  If
    there are at least two and some pair of them has no common left
    eigenvector, then no common left eigenvector exists for all of them and
    the verdict is ``"diverges"``; otherwise ``"inconclusive"``.
    """
    if isinstance(source, MatrixFamily):
        if seq is None or depth is None:
            raise InputError("a family source needs seq and depth")
        symbols = seq.take(depth)
        mats = [to_float(source.matrices[s]) for s in symbols]
    else:
        mats = [to_float(np.asarray(M)) for M in source]
        if depth is not None:
            mats = mats[:depth]
    if not mats:
        raise InputError("empty sequence")
    d = mats[0].shape[0]
    normalized = [M / np.abs(M).sum() for M in mats]
    start = int(len(mats) * (1 - tail_fraction))
    centroids, counts = _greedy_clusters(normalized[start:], radius)
    # eigen-residual series ‖r(A_n/‖A_n‖ − λ_n I)‖ with r a dominant row of the final P_n/‖P_n‖
    acc = np.eye(d)
    lambdas = []
    for n, M in enumerate(mats):
        nxt = acc @ M
        s = np.abs(nxt).sum()
        lambdas.append(1.0 if n == 0 else s / np.abs(M).sum())
        acc = nxt / s
    r = acc[int(np.argmax(np.abs(acc).sum(axis=1)))]
    r = r / np.abs(r).sum()
    residual = np.array([np.abs(r @ (F - lam * np.eye(d))).sum() for F, lam in zip(normalized, lambdas)])
    info = {"exists": True, "witness": None, "pairs_without": []}
    if len(centroids) >= 2:
        for i in range(len(centroids)):
            for j in range(i + 1, len(centroids)):
                if not common_left_eigenvector(centroids[i], centroids[j], tol=tol)[0]:
                    info["pairs_without"].append((i, j))
        if info["pairs_without"]:
            info["exists"] = False
        else:
            info["exists"], info["witness"] = common_left_eigenvector(*centroids, tol=tol)
    verdict = "diverges" if len(centroids) >= 2 and not info["exists"] else "inconclusive"
    return DivergenceReport(centroids, counts, residual, info, verdict)


@dataclass(frozen=True)
class MonteCarloResult:
    fraction: float
    oscillation: np.ndarray
    d: int
    trials: int
    depth: int
    seed: int
    osc_floor: float


def monte_carlo_divergence(d: int, trials: int = 200, depth: int = 300, seed: int = 0,
                           osc_floor: float = 0.1, window: float = 0.2) -> MonteCarloResult:
    """Fraction of i.i.d. complex-Gaussian products whose normalized product keeps oscillating.

    A trial counts as diverging when, over the last ``window`` of the run,
    some P_m/‖P_m‖ is farther than ``osc_floor`` (entry norm) from the final
    one.  The law is the standard complex normal, drawn from Philox(seed).
    """
    if d < 2:
        raise DimensionTooSmall("the normalized 1x1 product is a unimodular phase; need d >= 2", d=d)
    if d > 8 or trials > 10**4 or trials < 1 or depth < 2:
        raise InputError("need d <= 8, 1 <= trials <= 10^4, depth >= 2")
    rng = make_rng(seed)
    P = np.broadcast_to(np.eye(d, dtype=complex), (trials, d, d)).copy()
    start = depth - _window(depth, window)
    history = []
    for n in range(depth):
        A = (rng.standard_normal((trials, d, d)) + 1j * rng.standard_normal((trials, d, d))) / math.sqrt(2)
        P = P @ A
        P /= np.abs(P).sum(axis=(1, 2), keepdims=True)
        if n >= start:
            history.append(P.copy())
    final = history[-1]
    osc = np.max([np.abs(H - final).sum(axis=(1, 2)) for H in history], axis=0)
    return MonteCarloResult(float(np.mean(osc > osc_floor)), osc, d, trials, depth, seed, osc_floor)


@dataclass(frozen=True)
class StochasticSeries:
    series_value: float
    direct_entry: float
    gap: float


def stochastic2x2_series(mats: Sequence, depth: int | None = None) -> StochasticSeries:
    """Compare the (2,1) entry of S_depth...S_1 with y_1 + Σ_{n≥2} y_n Π_{i<n} det S_i.

    Here S_n = [[1−x_n, x_n], [y_n, 1−y_n]].
    """
    mats = [np.asarray(to_float(np.asarray(S, dtype=float)), dtype=float) for S in mats]
    if depth is not None:
        if depth > len(mats):
            raise InputError("fewer matrices than depth")
        mats = mats[:depth]
    for S in mats:
        if S.shape != (2, 2) or np.any(S <= 0) or np.any(S >= 1) or np.abs(S.sum(axis=1) - 1).max() > 1e-12:
            raise NotStochastic("each factor must be row-stochastic 2x2 with entries in (0,1)")
    total = 0.0
    det_prod = 1.0
    for S in mats:
        total += S[1, 0] * det_prod
        det_prod *= S[0, 0] * S[1, 1] - S[0, 1] * S[1, 0]
    direct = np.eye(2)
    for S in mats:
        direct = S @ direct
    return StochasticSeries(total, float(direct[1, 0]), abs(total - float(direct[1, 0])))
