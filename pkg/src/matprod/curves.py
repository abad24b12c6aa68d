"""Refinement matrices of lattice two-scale difference equations and the
curves ψ(x) = lim B_{x_1} ⋯ B_{x_n} c sampled along base-k expansions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import EigenvalueNotOne, InputError
from .linalg import exact_null_vector, parse_scalar, to_float


@dataclass
class RefinementSystem:
    k: int
    coeffs: tuple
    q: int
    matrices: tuple          # exact object arrays
    seed: np.ndarray | None  # float, sums to 1 when it comes from the Perron vector
    coeff_sum: Fraction
    even_odd_balanced: bool | None

    @property
    def order(self) -> int:
        return self.q + 1

    def float_matrices(self) -> np.ndarray:
        return np.array([to_float(B) for B in self.matrices])

    def to_dict(self) -> dict:
        return {"k": self.k, "coeffs": [str(c) for c in self.coeffs], "q": self.q,
                "matrices": [[[str(x) for x in row] for row in B] for B in self.matrices],
                "seed": None if self.seed is None else self.seed.tolist(),
                "coeff_sum": str(self.coeff_sum), "even_odd_balanced": self.even_odd_balanced}


def _perron_seed(mats) -> np.ndarray | None:
    k = len(mats)
    d = mats[0].shape[0]
    S = sum(mats[1:], mats[0]) / k
    A = S - np.array([[Fraction(int(i == j)) for j in range(d)] for i in range(d)], dtype=object)
    v = exact_null_vector(A)
    if v is None:
        return None
    v = np.array([float(x) for x in v])
    tot = v.sum()
    if tot == 0:
        return None
    return v / tot


def build_refinement_matrices(k: int, coeffs: Sequence, seed=None) -> RefinementSystem:
    """B_i has entry (h, j) = c_{i + kh − j}, zero outside 0..N, for h, j in 0..q."""
    if k < 2:
        raise InputError("k must be at least 2")
    c = tuple(x if isinstance(x, Fraction) else parse_scalar(x, exact=True) for x in coeffs)
    N = len(c) - 1
    if N < 1:
        raise InputError("need at least two coefficients")
    q = -(-N // (k - 1)) - 1
    coef = lambda n: c[n] if 0 <= n <= N else Fraction(0)
    mats = tuple(np.array([[coef(i + k * h - j) for j in range(q + 1)] for h in range(q + 1)],
                          dtype=object) for i in range(k))
    balanced = None
    if k == 2:
        balanced = sum(c[0::2]) == sum(c[1::2])
    if seed is not None:
        seed_v = np.asarray([float(x) for x in seed], dtype=float)
        if seed_v.shape != (q + 1,):
            raise InputError(f"seed must have length {q + 1}")
    else:
        seed_v = _perron_seed(mats)
    return RefinementSystem(k, c, q, mats, seed_v, sum(c), balanced)


def digits(x, k: int, depth: int) -> list[int]:
    """First ``depth`` base-k digits of x in [0, 1), computed exactly."""
    fx = x if isinstance(x, Fraction) else Fraction(x)
    if not 0 <= fx < 1:
        raise InputError("x must lie in [0, 1)")
    out = []
    for _ in range(depth):
        fx *= k
        dgt = math.floor(fx)
        out.append(dgt)
        fx -= dgt
    return out


def _apply(mats: np.ndarray, word: Sequence[int], v: np.ndarray) -> np.ndarray:
    for s in reversed(word):
        v = mats[s] @ v
    return v


@dataclass
class CurveSamples:
    x: list
    psi: np.ndarray
    gap: np.ndarray
    depth: int

    def csv_rows(self) -> list[list]:
        return [[float(x)] + list(map(float, p)) + [float(g)] for x, p, g in zip(self.x, self.psi, self.gap)]


def _seed(system: RefinementSystem, seed) -> np.ndarray:
    if seed is not None:
        return np.asarray([float(s) for s in seed], dtype=float)
    if system.seed is None:
        raise EigenvalueNotOne("sum of B_i / k has no eigenvalue 1; supply a seed vector")
    return system.seed


def sample_curve(system: RefinementSystem, x_grid: Sequence, depth: int = 40, seed=None) -> CurveSamples:
    """ψ(x) ≈ B_{x_1} ⋯ B_{x_depth} c, with the gap to the depth − 5 truncation."""
    if not 5 < depth <= 60:
        raise InputError("depth must lie in 6..60")
    c = _seed(system, seed)
    mats = system.float_matrices()
    psi, gap = [], []
    for x in x_grid:
        w = digits(x, system.k, depth)
        full = _apply(mats, w, c)
        short = _apply(mats, w[:depth - 5], c)
        psi.append(full)
        gap.append(float(np.abs(full - short).max()))
    return CurveSamples(list(x_grid), np.array(psi), np.array(gap), depth)


@dataclass
class ResidualReport:
    self_similarity_residual: float
    truncation_gap: float
    endpoint_gaps: list
    depth: int

    def passes(self, tol: float = 1e-8) -> bool:
        return self.self_similarity_residual < tol

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def residual_checks(system: RefinementSystem, x_samples: Sequence, depth: int = 40, seed=None) -> ResidualReport:
    """max over samples of ‖ψ(x) − B_i ψ(kx − i)‖ (both truncated at ``depth``) and the endpoint gaps.

    The endpoint gap for i is ‖B_i B_{k−1}^depth c − B_{i+1} B_0^depth c‖,
    the mismatch of the two one-sided values at x = (i+1)/k.
    """
    c = _seed(system, seed)
    mats = system.float_matrices()
    k = system.k
    worst, worst_gap = 0.0, 0.0
    for x in x_samples:
        fx = x if isinstance(x, Fraction) else Fraction(x)
        i = math.floor(fx * k)
        y = fx * k - i
        lhs = _apply(mats, digits(fx, k, depth), c)
        rhs = mats[i] @ _apply(mats, digits(y, k, depth), c)
        worst = max(worst, float(np.abs(lhs - rhs).max()))
        short = _apply(mats, digits(fx, k, depth - 5), c)
        worst_gap = max(worst_gap, float(np.abs(lhs - short).max()))
    gaps = []
    for i in range(k - 1):
        left = mats[i] @ _apply(mats, [k - 1] * depth, c)
        right = mats[i + 1] @ _apply(mats, [0] * depth, c)
        gaps.append(float(np.abs(left - right).max()))
    return ResidualReport(worst, worst_gap, gaps, depth)


def system_from_bernoulli(law) -> RefinementSystem:
    """Coefficients c_n = k p_n of a Bernoulli convolution representation."""
    p = law.p
    return build_refinement_matrices(law.k, [Fraction(law.k) * (x if isinstance(x, Fraction) else Fraction(x))
                                              for x in p])
