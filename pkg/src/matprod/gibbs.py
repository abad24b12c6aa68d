"""Weak-Gibbs diagnostics for linearly representable measures.

All quantities are computed in log space.  Nothing here proves a
property; every report carries the raw series it was derived from.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bernoulli import BernoulliSpec, BetaSpec, beta_representation
from .errors import InputError, ZeroImage
from .linalg import to_float
from .trajectory import MatrixFamily, SymbolSequence, make_rng, uniform_convergence_probe


def _float_family(family: MatrixFamily):
    if family.row_vectors is None or family.terminal is None:
        raise InputError("family needs row vectors and a terminal vector")
    mats = family.float_matrices()
    rows = np.array([to_float(r.reshape(1, -1)).reshape(-1) for r in family.row_vectors])
    c = to_float(family.terminal.reshape(-1, 1)).reshape(-1)
    return mats, rows, c


def _symbols(word, n: int) -> np.ndarray:
    if isinstance(word, SymbolSequence):
        return word.take(n)
    w = np.asarray([int(s) for s in word], dtype=np.int64)
    if len(w) < n:
        raise InputError(f"word has length {len(w)}, need at least {n}")
    return w[:n]


def _tail_image(mats, symbols, c) -> np.ndarray:
    """Normalized M_{s1}...M_{sm} c (c normalized if m = 0)."""
    v = c / np.abs(c).sum()
    for s in symbols[::-1]:
        v = mats[s] @ v
        tot = np.abs(v).sum()
        if tot == 0:
            return v
        v = v / tot
    return v


# ---------------------------------------------------------------------------
# potential along a word


@dataclass
class GibbsReport:
    n_values: np.ndarray
    ratio_root: np.ndarray
    potentials: np.ndarray          # Φ(σ^k ω), k = 0..n_max-1
    tail_depth: int
    max_deviation: float            # max |ratio_root − 1| over [n_min, n_max]

    def deviation_at(self, n: int) -> float:
        return float(abs(self.ratio_root[list(self.n_values).index(n)] - 1))

    def to_dict(self) -> dict:
        return {"n": self.n_values.tolist(), "ratio_root": self.ratio_root.tolist(),
                "potentials": self.potentials.tolist(), "tail_depth": self.tail_depth,
                "max_deviation": self.max_deviation}


def potential_and_ratio(family: MatrixFamily, word, tail_depth: int = 64, n_min: int = 1,
                        n_max: int | None = None, zero_tol: float = 1e-12) -> GibbsReport:
    """ratio_root(n) = (ν[ω_1..ω_n] / exp Σ_{k<n} Φ(σ^k ω))^{1/n}.

    The potential is Φ(σ^k ω) = log ‖M_{ω_{k+1}} c_{σ^{k+1} ω}‖ with the limit
    image c_ξ replaced by the normalized image of the next ``tail_depth``
    symbols, so the word must have at least n_max + tail_depth symbols.
    """
    mats, rows, c = _float_family(family)
    if n_max is None:
        if isinstance(word, SymbolSequence):
            raise InputError("n_max is required for a sequence source")
        n_max = len(word) - tail_depth
    if n_max < max(1, n_min):
        raise InputError("need n_max >= max(1, n_min)")
    w = _symbols(word, n_max + tail_depth)
    phi = np.empty(n_max)
    for k in range(n_max):
        img = _tail_image(mats, w[k + 1: k + 1 + tail_depth], c)
        val = np.abs(mats[w[k]] @ img).sum()
        if val < zero_tol:
            raise ZeroImage(f"M_i c vanishes along the word at position {k + 1}", position=k + 1)
        phi[k] = math.log(val)
    # log ν[ω_1..ω_n] by a left-to-right row vector
    log_nu = np.empty(n_max)
    rho = rows[w[0]].copy()
    scale = 0.0
    for n in range(1, n_max + 1):
        if n > 1:
            rho = rho @ mats[w[n - 1]]
        tot = np.abs(rho).sum()
        if tot == 0:
            log_nu[n - 1:] = -math.inf
            break
        rho /= tot
        scale += math.log(tot)
        val = float(rho @ c)
        log_nu[n - 1] = scale + math.log(val) if val > 0 else -math.inf
    ns = np.arange(1, n_max + 1)
    ratio = np.exp((log_nu - np.cumsum(phi)) / ns)
    sel = ns >= n_min
    return GibbsReport(ns[sel], ratio[sel], phi, tail_depth, float(np.max(np.abs(ratio[sel] - 1))))


# ---------------------------------------------------------------------------
# three sufficient conditions


@dataclass
class WeakGibbsReport:
    cond1_sup_gap: float
    cond2_root_gap: float
    cond3_min_image: float
    tol: float
    floor: float
    depth: int
    probe_depth: int
    words: int
    worst_word_cond2: list = field(default_factory=list)

    @property
    def passes(self) -> dict:
        return {"cond1": self.cond1_sup_gap < self.tol, "cond2": self.cond2_root_gap < self.tol,
                "cond3": self.cond3_min_image > self.floor}

    @property
    def verdict(self) -> str:
        return "pass" if all(self.passes.values()) else "fail"

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["passes"] = self.passes
        d["verdict"] = self.verdict
        return d


def sample_words(alphabet_size: int, count: int, length: int, seed: int = 0) -> list[np.ndarray]:
    """The constant words i^length first, then seeded uniform random words."""
    words = [np.full(length, i, dtype=np.int64) for i in range(alphabet_size)]
    rng = make_rng(seed)
    while len(words) < count:
        words.append(rng.integers(0, alphabet_size, size=length))
    return words[:max(count, alphabet_size)]


def weak_gibbs_check(family: MatrixFamily, words: Sequence | None = None, depth: int = 4096,
                     probe_depth: int = 64, tol: float = 1e-3, floor: float = 1e-9,
                     n_words: int = 12, extension_samples: int = 100, seed: int = 0) -> WeakGibbsReport:
    """Numerical check of the three sufficient conditions on sample words.

    cond1: largest sampled oscillation of c_{ξ,p} over ξ sharing the first
    ``probe_depth`` symbols of a sample word (see
    :func:`uniform_convergence_probe`).  cond2: max over i and sample words
    of |(r_i c_{ω,depth})^{1/depth} − 1|; the n-th root converges slowly,
    hence the large default depth.  cond3: min over i and sample words of
    ‖M_i c_{ω,depth}‖.  The default words include each constant word.
    """
    mats, rows, c = _float_family(family)
    a = family.alphabet_size
    if words is None:
        words = sample_words(a, n_words, depth, seed)
    words = [_symbols(w, depth) for w in words]
    cond1 = 0.0
    for w in words:
        probe = uniform_convergence_probe(family, w[:probe_depth], extension_samples=extension_samples,
                                          depth=4 * probe_depth, seed=seed, prefix_lengths=[probe_depth])
        cond1 = max(cond1, float(probe.sup_gap[-1]))
    # the n-th root is read at the deepest of a few depths where r_i c_{ω,n}
    # is still representable; exponentially small values underflow otherwise
    depths = sorted({d for d in (depth // 16, depth // 4, depth) if d >= 1})
    cond2, cond3, worst = 0.0, math.inf, []
    for w in words:
        imgs = {d: _tail_image(mats, w[:d], c) for d in depths}
        for i in range(a):
            dev = None
            for d in reversed(depths):
                val = float(rows[i] @ imgs[d])
                if val > 0:
                    dev = abs(math.exp(math.log(val) / d) - 1)
                    break
            if dev is None:
                dev = 1.0
            if dev > cond2:
                cond2, worst = dev, [i, w[:16].tolist()]
            cond3 = min(cond3, float(np.abs(mats[i] @ imgs[depth]).sum()))
    return WeakGibbsReport(cond1, cond2, cond3, tol, floor, depth, probe_depth, len(words), worst)


# ---------------------------------------------------------------------------
# the joint-cylinder ratio


@dataclass
class CylinderRatioReport:
    n_values: np.ndarray
    g: np.ndarray
    limit_estimate: float
    step_ratio: float | None      # median |Δg_n| / |Δg_{n-1}| over the trailing half
    one_over_n_coeff: float       # fitted b in log g_n ≈ log L + b/n

    def to_dict(self) -> dict:
        return {"n": self.n_values.tolist(), "g": self.g.tolist(), "limit_estimate": self.limit_estimate,
                "step_ratio": self.step_ratio, "one_over_n_coeff": self.one_over_n_coeff}


def cylinder_ratio_probe(law: BernoulliSpec, n_max: int = 40, h: int = 0) -> CylinderRatioReport:
    """g_n = (ν[r^n (r+1)^n] / (ν[r^n] ν[(r+1)^n]))^{1/n} for the measure ν(· + h) normalized to mass 1.

    The limit is estimated by a least-squares fit of log g_n against 1/n on
    the trailing half of the series.
    """
    if law.r + 1 > law.k - 1:
        raise InputError("need r + 1 <= k - 1")
    if n_max < 1:
        raise InputError("n_max must be positive")
    fam = _float_copy(law, h)
    r = law.r
    ns = np.arange(1, n_max + 1)
    g = np.empty(n_max)
    for n in ns:
        joint = fam.log_measure([r] * n + [r + 1] * n)
        left = fam.log_measure([r] * n)
        right = fam.log_measure([r + 1] * n)
        g[n - 1] = math.exp((joint - left - right) / n)
    half = ns >= max(1, n_max // 2)
    if half.sum() >= 2:
        x, y = 1.0 / ns[half], np.log(g[half])
        b = float(((x - x.mean()) * (y - y.mean())).sum() / ((x - x.mean()) ** 2).sum())
        limit = float(math.exp(y.mean() - b * x.mean()))
    else:
        limit, b = float(g[-1]), 0.0
    diffs = np.abs(np.diff(g))
    step = None
    if len(diffs) >= 3:
        tail = diffs[len(diffs) // 2:]
        ratios = tail[1:] / np.where(tail[:-1] > 0, tail[:-1], np.nan)
        ratios = ratios[np.isfinite(ratios)]
        step = float(np.median(ratios)) if ratios.size else None
    return CylinderRatioReport(ns, g, limit, step, b)


def _float_copy(law: BernoulliSpec, h: int) -> MatrixFamily:
    mats = law.matrices
    c = law.c_nu
    rows = [M[h, :] / c[h] for M in mats]
    return MatrixFamily(tuple(mats), tuple(rows), c, name=f"bernoulli-k{law.k}-h{h}")


# ---------------------------------------------------------------------------
# scale spectrum


@dataclass
class ScaleSpectrum:
    q_grid: np.ndarray
    tau: np.ndarray
    alpha_grid: np.ndarray
    legendre: np.ndarray
    level: int
    cylinders: int
    log_diameter: float
    mode: str

    def to_dict(self) -> dict:
        return {"q": self.q_grid.tolist(), "tau": self.tau.tolist(), "alpha": self.alpha_grid.tolist(),
                "legendre": self.legendre.tolist(), "level": self.level, "cylinders": self.cylinders,
                "log_diameter": self.log_diameter, "mode": self.mode}


MAX_CYLINDERS = 1 << 22


def _level_measures(mats, rows, c, n: int) -> np.ndarray:
    """Measures of all a^n cylinders, building M_{w2}..M_{wn} c from the right."""
    a = len(mats)
    if a ** n > MAX_CYLINDERS:
        raise InputError(f"{a}^{n} cylinders exceed the enumeration cap")
    V = (c / np.abs(c).sum())[None, :]
    logs = np.zeros(1)
    for _ in range(n - 1):
        V = np.einsum("aij,sj->asi", mats, V).reshape(-1, V.shape[1])
        tot = np.abs(V).sum(axis=1)
        safe = np.where(tot > 0, tot, 1.0)
        V = V / safe[:, None]
        logs = np.tile(logs, a) + np.log(np.where(tot > 0, tot, np.nan))
    vals = rows @ V.T                               # (a, count)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(vals) + logs[None, :] + math.log(np.abs(c).sum())
    return out.reshape(-1)


def _beta_stopping_measures(law: BetaSpec, n: int) -> np.ndarray:
    """Log-measures of the words w whose substituted length first reaches ≥ n."""
    mats = np.array([to_float(M) for M in law.matrices])
    c = np.array([float(x) for x in law.c_beta])
    lengths = np.array([len(w) for w in law.words])
    sel = np.array([to_float(r.reshape(1, -1)).reshape(-1) for r in law.selectors])
    done = []
    rho, m = sel.copy(), lengths.copy()
    logs = np.zeros(len(rho))
    while len(rho):
        fin = m >= n
        if fin.any():
            with np.errstate(divide="ignore"):
                done.append(np.log(rho[fin] @ c) + logs[fin])
        rho, m, logs = rho[~fin], m[~fin], logs[~fin]
        if not len(rho):
            break
        if len(done) and sum(len(x) for x in done) + len(rho) * 3 > MAX_CYLINDERS:
            raise InputError("stopping-time cover exceeds the enumeration cap")
        rho = np.einsum("si,aij->asj", rho, mats).reshape(-1, mats.shape[1])
        m = (m[None, :] + lengths[:, None]).reshape(-1)
        logs = np.tile(logs, len(mats))
        tot = np.abs(rho).sum(axis=1)
        safe = np.where(tot > 0, tot, 1.0)
        rho = rho / safe[:, None]
        with np.errstate(divide="ignore"):
            logs = logs + np.log(np.where(tot > 0, tot, 0.0))
    return np.concatenate(done) if done else np.empty(0)


def _logsumexp(x: np.ndarray) -> float:
    m = np.max(x)
    return float(m + math.log(np.exp(x - m).sum()))


def scale_spectrum_and_legendre(source, q_grid: Sequence[float], level: int,
                                alpha_grid: Sequence[float] | None = None, h: int = 0) -> ScaleSpectrum:
    """τ_n(q) = log Σ_C ν(C)^q / log(diameter) over the level-n cylinders with ν(C) > 0.

    ``source`` may be a :class:`BernoulliSpec` (base-k cylinders of
    ν(· + h)/ν([0,1) + h), diameter k^{-n}), a :class:`MatrixFamily` with row
    and terminal vectors (symbolic diameter a^{-n}), or a
    :class:`BetaSpec`/``"beta"`` (the cover by β-intervals of the words
    whose substituted length first reaches n, diameter β^{-n}).  The
    Legendre conjugate is min over ``q_grid`` of αq − τ(q).
    """
    q = np.asarray(list(q_grid), dtype=float)
    if level < 1:
        raise InputError("level must be positive")
    if isinstance(source, str) and source == "beta":
        source = beta_representation()
    if isinstance(source, BetaSpec):
        logs = _beta_stopping_measures(source, level)
        log_diam = -level * math.log(source.beta)
        mode = "beta-stopping-time"
    else:
        if isinstance(source, BernoulliSpec):
            fam = _float_copy(source, h)
            base = source.k
            mode = "base-k"
        elif isinstance(source, MatrixFamily):
            fam = source
            base = source.alphabet_size
            mode = "symbolic"
        else:
            raise InputError("unsupported source for the scale spectrum")
        mats, rows, c = _float_family(fam)
        logs = _level_measures(mats, rows, c, level)
        log_diam = -level * math.log(base)
    logs = logs[np.isfinite(logs)]
    tau = np.array([_logsumexp(qq * logs) / log_diam for qq in q])
    if alpha_grid is None:
        slopes = np.diff(tau) / np.diff(q) if len(q) > 1 else np.array([1.0])
        alpha_grid = np.linspace(float(np.min(slopes)), float(np.max(slopes)), 21)
    alpha = np.asarray(list(alpha_grid), dtype=float)
    leg = np.array([np.min(a * q - tau) for a in alpha])
    return ScaleSpectrum(q, tau, alpha, leg, level, int(len(logs)), log_diam, mode)
