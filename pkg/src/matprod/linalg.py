"""Dense matrix kernel used by the rest of the package.

Matrices are plain numpy arrays.  Float mode uses ``float64`` (or
``complex128`` inside the eigen solver); exact mode uses ``object`` arrays
holding :class:`fractions.Fraction` entries, which numpy multiplies with
ordinary ``@``.

The singular value and eigenvalue routines are written out here (one-sided
Jacobi, Householder-Hessenberg plus shifted QR) rather than delegated to
LAPACK so that ``numpy.linalg`` stays available as an independent check in
the test-suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import InputError, NoConvergence, NotSquare, ProductVanished, ZeroMatrix

# ---------------------------------------------------------------------------
# construction and conversion


def parse_scalar(x, exact: bool = False):
    """Turn a JSON-ish scalar (number or ``"p/q"`` string) into a float or Fraction."""
    if isinstance(x, str):
        x = x.strip()
        value = Fraction(x)
        return value if exact else float(value)
    if exact:
        if isinstance(x, float):
            return Fraction(x).limit_denominator(10**12) if not x.is_integer() else Fraction(int(x))
        return Fraction(x)
    return float(x)


def as_matrix(data, exact: bool = False, nonnegative: bool = False) -> np.ndarray:
    """Build a 2-d matrix from nested sequences (or an existing array).

    ``exact=True`` gives an object array of Fractions.  With
    ``nonnegative=True`` negative entries raise :class:`InputError`.
    """
    if isinstance(data, np.ndarray) and data.ndim == 1:
        data = data.reshape(-1, 1)
    rows = [list(r) for r in (data.tolist() if isinstance(data, np.ndarray) else data)]
    if not rows or not rows[0]:
        raise InputError("matrix must have at least one row and one column")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise InputError("ragged matrix rows")
    if exact:
        out = np.empty((len(rows), width), dtype=object)
        for i, r in enumerate(rows):
            for j, x in enumerate(r):
                out[i, j] = x if isinstance(x, Fraction) else parse_scalar(x, exact=True)
    else:
        out = np.array([[parse_scalar(x) if isinstance(x, str) else x for x in r] for r in rows],
                       dtype=float)
        if not np.all(np.isfinite(out)):
            raise InputError("matrix entries must be finite")
    if nonnegative and any(x < 0 for x in out.flat):
        raise InputError("matrix must be entrywise nonnegative")
    return out


def is_exact(M: np.ndarray) -> bool:
    return M.dtype == object


def to_float(M: np.ndarray) -> np.ndarray:
    if is_exact(M):
        return np.array([[float(x) for x in row] for row in M], dtype=float).reshape(M.shape)
    return np.asarray(M, dtype=float)


def to_exact(M: np.ndarray) -> np.ndarray:
    if is_exact(M):
        return M
    return as_matrix(M, exact=True)


def identity(d: int, exact: bool = False) -> np.ndarray:
    if not exact:
        return np.eye(d)
    out = np.empty((d, d), dtype=object)
    out[...] = Fraction(0)
    for i in range(d):
        out[i, i] = Fraction(1)
    return out


def matrix_from_literal(obj: dict, exact: bool | None = None) -> np.ndarray:
    """Parse the ``{"rows", "cols", "data"}`` literal.

    When ``exact`` is None the mode is exact if any entry is a string.
    """
    try:
        rows, cols, data = int(obj["rows"]), int(obj["cols"]), obj["data"]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"bad matrix literal: {exc}") from exc
    if exact is None:
        exact = any(isinstance(x, str) for r in data for x in r)
    M = as_matrix(data, exact=exact)
    if M.shape != (rows, cols):
        raise InputError(f"matrix literal declares {rows}x{cols} but data is {M.shape[0]}x{M.shape[1]}")
    return M


def matrix_to_literal(M: np.ndarray) -> dict:
    M = np.atleast_2d(M)
    if is_exact(M):
        data = [[str(x) for x in row] for row in M]
    else:
        data = [[float(x) for x in row] for row in M]
    return {"rows": int(M.shape[0]), "cols": int(M.shape[1]), "data": data}


# ---------------------------------------------------------------------------
# norms and patterns


def entry_norm(M):
    """Sum of absolute values of all entries (the only norm used in the package)."""
    M = np.asarray(M)
    if M.dtype == object:
        return sum((abs(x) for x in M.flat), Fraction(0))
    return float(np.abs(M).sum())


@dataclass(frozen=True)
class SupportPattern:
    mask: np.ndarray

    @property
    def shape(self):
        return self.mask.shape

    def key(self) -> bytes:
        return np.packbits(self.mask).tobytes() + bytes(self.mask.shape)

    def __eq__(self, other):
        return isinstance(other, SupportPattern) and np.array_equal(self.mask, other.mask)

    def __hash__(self):
        return hash(self.key())


def support_mask(M, zero_tol: float | None = None) -> np.ndarray:
    M = np.asarray(M)
    if M.dtype == object:
        return np.array([[x != 0 for x in row] for row in M], dtype=bool).reshape(M.shape)
    if zero_tol is None:
        zero_tol = 1e-12 * float(np.abs(M).sum())
    return np.abs(M) > zero_tol


def distinct_columns(mask: np.ndarray) -> int:
    return len({mask[:, j].tobytes() for j in range(mask.shape[1])})


def support_pattern(M, zero_tol: float | None = None) -> tuple[SupportPattern, int]:
    """Return the 0/1 support of ``M`` and the number of distinct column patterns.

    An all-zero column counts as one pattern.  In float mode entries with
    ``|m| <= zero_tol`` are treated as zero (default ``1e-12 * entry_norm``).
    """
    mask = support_mask(M, zero_tol)
    return SupportPattern(mask), distinct_columns(mask)


def pattern_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Boolean matrix product of two support masks."""
    return (a.astype(np.int64) @ b.astype(np.int64)) > 0


# ---------------------------------------------------------------------------
# scaled products


@dataclass(frozen=True)
class ScaledMat:
    """``exp(log_scale) * unit``; in exact mode ``unit`` is the raw product and log_scale is 0."""

    unit: np.ndarray
    log_scale: float = 0.0

    @property
    def exact(self) -> bool:
        return is_exact(self.unit)

    def value(self) -> np.ndarray:
        if self.exact:
            return self.unit
        return self.unit * math.exp(self.log_scale)

    def log_norm(self) -> float:
        if self.exact:
            return log_fraction(entry_norm(self.unit))
        return self.log_scale + math.log(entry_norm(self.unit))

    def normalized(self) -> np.ndarray:
        """The product divided by its entry norm, as floats."""
        if self.exact:
            n = entry_norm(self.unit)
            return to_float(self.unit / n) if n != 0 else to_float(self.unit)
        return self.unit / entry_norm(self.unit)


def log_fraction(x) -> float:
    """Natural log of a positive rational without overflowing through float()."""
    x = Fraction(x)
    if x <= 0:
        raise ValueError("log of a non-positive number")
    return math.log(x.numerator) - math.log(x.denominator)


def scaled_identity(d: int, exact: bool = False) -> ScaledMat:
    return ScaledMat(identity(d, exact), 0.0)


def scaled_multiply(acc: ScaledMat, A: np.ndarray) -> ScaledMat:
    """Right-multiply the accumulated product by ``A``, renormalizing in float mode."""
    if acc.unit.shape[1] != A.shape[0]:
        raise InputError(f"incompatible shapes {acc.unit.shape} and {A.shape}")
    if acc.exact:
        prod = acc.unit @ (A if is_exact(A) else to_exact(A))
        if all(x == 0 for x in prod.flat):
            raise ProductVanished("product became the zero matrix")
        return ScaledMat(prod, 0.0)
    prod = acc.unit @ to_float(A)
    n = float(np.abs(prod).sum())
    if n == 0.0:
        raise ProductVanished("product became the zero matrix")
    return ScaledMat(prod / n, acc.log_scale + math.log(n))


def product(mats: Sequence[np.ndarray], exact: bool | None = None) -> np.ndarray:
    """Plain left-to-right product of a nonempty list of square matrices."""
    if not mats:
        raise InputError("empty product needs an explicit dimension")
    out = mats[0]
    for A in mats[1:]:
        out = out @ A
    return out


# ---------------------------------------------------------------------------
# exact rational helpers


def _row_echelon(M: np.ndarray):
    A = [[Fraction(x) for x in row] for row in M]
    rows, cols = len(A), len(A[0])
    pivots = []
    r = 0
    sign = 1
    for c in range(cols):
        p = next((i for i in range(r, rows) if A[i][c] != 0), None)
        if p is None:
            continue
        if p != r:
            A[r], A[p] = A[p], A[r]
            sign = -sign
        for i in range(r + 1, rows):
            if A[i][c] != 0:
                f = A[i][c] / A[r][c]
                A[i] = [a - f * b for a, b in zip(A[i], A[r])]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    return A, pivots, sign


def exact_rank(M: np.ndarray) -> int:
    return len(_row_echelon(M)[1])


def _norm2(x: np.ndarray) -> float:
    return math.sqrt(float(np.sum(np.abs(x) ** 2)))


def float_det(M) -> float:
    """Determinant by Gaussian elimination with partial pivoting."""
    A = np.array(to_float(np.asarray(M)), dtype=float, copy=True)
    n = A.shape[0]
    if A.shape != (n, n):
        raise NotSquare("determinant of a non-square matrix")
    det = 1.0
    for c in range(n):
        p = c + int(np.argmax(np.abs(A[c:, c])))
        if A[p, c] == 0.0:
            return 0.0
        if p != c:
            A[[c, p]] = A[[p, c]]
            det = -det
        det *= A[c, c]
        A[c + 1:, c:] -= np.outer(A[c + 1:, c] / A[c, c], A[c, c:])
    return det


def exact_det(M: np.ndarray) -> Fraction:
    if M.shape[0] != M.shape[1]:
        raise NotSquare("determinant of a non-square matrix")
    A, pivots, sign = _row_echelon(M)
    if len(pivots) < M.shape[0]:
        return Fraction(0)
    out = Fraction(sign)
    for i in range(M.shape[0]):
        out *= A[i][i]
    return out


def exact_null_vector(M: np.ndarray) -> list[Fraction] | None:
    """One nonzero rational vector x with M x = 0, or None if M has full column rank."""
    A = [[Fraction(x) for x in row] for row in M]
    rows, cols = len(A), len(A[0])
    pivots = []
    r = 0
    for c in range(cols):
        p = next((i for i in range(r, rows) if A[i][c] != 0), None)
        if p is None:
            continue
        A[r], A[p] = A[p], A[r]
        piv = A[r][c]
        A[r] = [a / piv for a in A[r]]
        for i in range(rows):
            if i != r and A[i][c] != 0:
                f = A[i][c]
                A[i] = [a - f * b for a, b in zip(A[i], A[r])]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    free = [c for c in range(cols) if c not in pivots]
    if not free:
        return None
    x = [Fraction(0)] * cols
    x[free[0]] = Fraction(1)
    for i, c in enumerate(pivots):
        x[c] = -A[i][free[0]]
    return x


# ---------------------------------------------------------------------------
# singular values (one-sided Jacobi)

MAX_SWEEPS = 100


def jacobi_svd(G: np.ndarray, max_sweeps: int = MAX_SWEEPS) -> tuple[np.ndarray, np.ndarray]:
    """Singular values (descending) and right singular vectors of a real matrix.

    This is the one-sided (Hestenes) form of cyclic Jacobi: the rotations
    that would diagonalize ``GᵀG`` are applied to the columns of ``G``
    directly, which keeps small singular values accurate.
    """
    U = np.array(G, dtype=float, copy=True)
    n = U.shape[1]
    V = np.eye(n)
    gram_scale = float(np.abs(U.T @ U).sum())
    negligible = 1e-36 * gram_scale
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                up, uq = U[:, p], U[:, q]
                alpha = up @ up
                beta = uq @ uq
                gamma = up @ uq
                if alpha <= negligible or beta <= negligible:
                    continue
                if gamma == 0.0 or abs(gamma) <= 1e-15 * math.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                if abs(zeta) > 1e150:
                    t = 0.5 / zeta
                else:
                    t = math.copysign(1.0, zeta) / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                U[:, p], U[:, q] = c * up - s * uq, s * up + c * uq
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p], V[:, q] = c * vp - s * vq, s * vp + c * vq
        if not rotated:
            gram = U.T @ U
            off = float(np.abs(gram - np.diag(np.diag(gram))).sum())
            if off <= 1e-13 * max(gram_scale, np.finfo(float).tiny):
                break
    else:
        raise NoConvergence(f"Jacobi sweeps did not converge in {max_sweeps} sweeps")
    sigma = np.sqrt(np.maximum((U * U).sum(axis=0), 0.0))
    order = np.argsort(-sigma, kind="stable")
    return sigma[order], V[:, order]


def singular_values(M) -> np.ndarray:
    """Singular values δ_1 ≥ δ_2 ≥ … of a real matrix (exact input is converted)."""
    M = to_float(np.atleast_2d(M))
    if M.shape[0] < M.shape[1]:
        M = M.T
    return jacobi_svd(M)[0]


def _realify(C: np.ndarray) -> np.ndarray:
    X, Y = C.real, C.imag
    return np.block([[X, -Y], [Y, X]])


def complex_singular_values(C: np.ndarray) -> np.ndarray:
    """Singular values of a complex matrix via its real 2x2-block embedding."""
    C = np.asarray(C, dtype=complex)
    s = jacobi_svd(_realify(C))[0]
    return s[::2]


def null_space(C: np.ndarray, tol: float, min_count: int = 0) -> np.ndarray:
    """Orthonormal complex basis (columns) of the numerical null space of ``C``.

    Directions with singular value ``<= tol`` are kept; if fewer than
    ``min_count`` qualify, the smallest singular directions are used anyway.
    """
    C = np.asarray(C, dtype=complex)
    n = C.shape[1]
    sigma, V = jacobi_svd(_realify(C))
    order = np.argsort(sigma, kind="stable")
    keep_real = [i for i in order if sigma[i] <= tol]
    want = max(len(keep_real) // 2, min_count)
    candidates = list(order)
    basis: list[np.ndarray] = []
    for i in candidates:
        if len(basis) >= want:
            break
        z = V[:n, i] + 1j * V[n:, i]
        for b in basis:
            z = z - (b.conj() @ z) * b
        nz = _norm2(z)
        if nz > 1e-6:
            basis.append(z / nz)
    if not basis:
        return np.zeros((n, 0), dtype=complex)
    return np.column_stack(basis)


# ---------------------------------------------------------------------------
# eigenvalues (Householder-Hessenberg + shifted QR)


def _phase(z) -> complex:
    """z/|z| (1 for z = 0); subnormal z is rescaled first, since complex division overflows there."""
    z = complex(z)
    if z == 0:
        return 1.0 + 0j
    if abs(z) < np.finfo(float).tiny:
        z *= 2.0 ** 600
    return z / abs(z)


def hessenberg(A: np.ndarray) -> np.ndarray:
    """Upper Hessenberg matrix unitarily similar to ``A`` (Householder reflections)."""
    H = np.array(A, dtype=complex, copy=True)
    n = H.shape[0]
    for k in range(n - 2):
        x = H[k + 1:, k].copy()
        tail = _norm2(x[1:])
        if tail == 0.0:
            continue
        norm_x = _norm2(x)
        phase = _phase(x[0])
        v = x.copy()
        v[0] += phase * norm_x
        v /= _norm2(v)
        H[k + 1:, :] -= 2.0 * np.outer(v, v.conj() @ H[k + 1:, :])
        H[:, k + 1:] -= 2.0 * np.outer(H[:, k + 1:] @ v, v.conj())
        H[k + 2:, k] = 0.0
    return H


def _givens(a: complex, b: complex):
    r = math.hypot(abs(a), abs(b))
    if r == 0.0:
        return 1.0, 0j
    if a == 0:
        return 0.0, complex(np.conj(b) / r)
    return abs(a) / r, complex(_phase(a) * np.conj(b) / r)


def qr_eigenvalues(A: np.ndarray, max_iter_per_value: int = 60) -> np.ndarray:
    """All eigenvalues of a square matrix by shifted QR on its Hessenberg form."""
    A = np.asarray(A)
    n = A.shape[0]
    size = float(np.abs(A).max()) if A.size else 0.0
    if size == 0.0:
        return np.zeros(n, dtype=complex)
    # work at unit scale: tiny or huge entries otherwise under/overflow in the shift
    H = hessenberg(A / size)
    eps = np.finfo(float).eps
    floor = eps * float(np.abs(H).sum())
    values = np.zeros(n, dtype=complex)
    hi = n - 1
    iters = 0
    while hi >= 0:
        if hi == 0:
            values[0] = H[0, 0]
            break
        lo = hi
        while lo > 0:
            scale = abs(H[lo, lo]) + abs(H[lo - 1, lo - 1])
            if abs(H[lo, lo - 1]) <= max(eps * scale, floor):
                H[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            values[hi] = H[hi, hi]
            hi -= 1
            iters = 0
            continue
        iters += 1
        if iters > max_iter_per_value:
            raise NoConvergence("QR iteration did not converge")
        a, b = H[hi - 1, hi - 1], H[hi - 1, hi]
        c, d = H[hi, hi - 1], H[hi, hi]
        if iters % 11 == 0:
            mu = d + 0.75 * abs(c) * (1 + 1j)  # exceptional shift
        else:
            tr, det = a + d, a * d - b * c
            disc = np.sqrt(tr * tr / 4 - det)
            l1, l2 = tr / 2 + disc, tr / 2 - disc
            mu = l1 if abs(l1 - d) < abs(l2 - d) else l2
        W = H[lo:hi + 1, lo:hi + 1] - mu * np.eye(hi - lo + 1)
        m = W.shape[0]
        rots = []
        for j in range(m - 1):
            cs, sn = _givens(W[j, j], W[j + 1, j])
            G = np.array([[cs, sn], [-np.conj(sn), cs]], dtype=complex)
            W[j:j + 2, j:] = G @ W[j:j + 2, j:]
            rots.append(G)
        for j, G in enumerate(rots):
            top = min(j + 2, m - 1) + 1
            W[:top, j:j + 2] = W[:top, j:j + 2] @ G.conj().T
        H[lo:hi + 1, lo:hi + 1] = W + mu * np.eye(m)
    return values * size


@dataclass(frozen=True)
class EigenPair:
    value: complex
    right: np.ndarray
    left: np.ndarray


@dataclass(frozen=True)
class EigenDecomposition:
    eigenvalues: np.ndarray
    eigenpairs: list
    spectral_radius: float
    perron_right: np.ndarray | None = None
    perron_left: np.ndarray | None = None
    max_residual: float = 0.0
    clusters: list = field(default_factory=list)


def _cluster_values(values: np.ndarray, tol: float) -> list[list[int]]:
    n = len(values)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(values[i] - values[j]) <= tol:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values(), key=lambda g: (-abs(np.mean(values[g])), g[0]))


def _nonnegative_vector(basis: np.ndarray, M: np.ndarray, rho: float, side: str) -> np.ndarray:
    """A nonnegative eigenvector for ρ inside ``basis``, falling back to power iteration."""
    if basis.shape[1] == 1:
        v = basis[:, 0]
        k = int(np.argmax(np.abs(v)))
        v = (v * np.conj(v[k]) / abs(v[k])).real
        if v.min() >= -1e-8 * np.abs(v).max():
            v = np.maximum(v, 0.0)
            return v / v.sum()
    A = M if side == "right" else M.T
    x = np.ones(A.shape[0]) / A.shape[0]
    shift = rho if rho > 0 else 1.0
    for _ in range(20000):
        y = (A @ x + shift * x)
        y /= y.sum()
        if np.abs(y - x).sum() < 1e-15:
            x = y
            break
        x = y
    return x


def eigen_decompose(M) -> EigenDecomposition:
    """Eigenvalues, right/left eigenvectors, spectral radius and Perron vectors.

    Eigenvalues come from shifted QR.  Numerically coincident eigenvalues
    (for instance a Jordan block that QR splits into a small cloud) are
    grouped, and the eigenvectors of each group are read off as the
    numerical null spaces of ``M - μI`` and ``Mᵀ - μI`` at the group mean.
    """
    M = to_float(np.atleast_2d(M))
    if M.shape[0] != M.shape[1]:
        raise NotSquare(f"matrix is {M.shape[0]}x{M.shape[1]}")
    d = M.shape[0]
    scale = entry_norm(M) or 1.0
    values = qr_eigenvalues(M)
    clusters = _cluster_values(values, 1e-4 * scale)
    null_tol = 1e-10 * scale
    pairs: list[EigenPair] = []
    max_res = 0.0

    def add_pairs(mu, members):
        nonlocal max_res
        R = null_space(M - mu * np.eye(d), null_tol)
        if R.shape[1] == 0:
            return False
        L = null_space(M.T - mu * np.eye(d), null_tol, min_count=R.shape[1])
        for i in range(R.shape[1]):
            r = R[:, i]
            l = L[:, min(i, L.shape[1] - 1)]
            res = np.abs(M @ r - mu * r).sum() / (scale * np.abs(r).sum())
            max_res = max(max_res, float(res))
            pairs.append(EigenPair(complex(mu), r, l))
        return True

    for group in clusters:
        mu = complex(np.mean(values[group]))
        if abs(mu.imag) <= 1e-12 * scale:
            mu = complex(mu.real, 0.0)
        if not add_pairs(mu, group):
            for i in group:
                mu_i = complex(values[i])
                R = null_space(M - mu_i * np.eye(d), null_tol, min_count=1)
                L = null_space(M.T - mu_i * np.eye(d), null_tol, min_count=1)
                r = R[:, 0]
                res = np.abs(M @ r - mu_i * r).sum() / (scale * np.abs(r).sum())
                max_res = max(max_res, float(res))
                pairs.append(EigenPair(mu_i, r, L[:, 0]))
    rho = float(np.max(np.abs(values))) if d else 0.0
    perron_right = perron_left = None
    if np.all(M >= 0):
        best = min(pairs, key=lambda p: abs(p.value - rho))
        mu = best.value
        R = np.column_stack([p.right for p in pairs if abs(p.value - mu) <= 1e-12 * scale])
        L = np.column_stack([p.left for p in pairs if abs(p.value - mu) <= 1e-12 * scale])
        perron_right = _nonnegative_vector(R, M, rho, "right")
        perron_left = _nonnegative_vector(L, M, rho, "left")
    return EigenDecomposition(values, pairs, rho, perron_right, perron_left, max_res,
                              [list(g) for g in clusters])


def spectral_radius(M) -> float:
    M = to_float(np.atleast_2d(M))
    return float(np.max(np.abs(qr_eigenvalues(M))))


def distinct_eigenvalues(M) -> list[complex]:
    M = to_float(np.atleast_2d(M))
    scale = entry_norm(M) or 1.0
    values = qr_eigenvalues(M)
    out = []
    for g in _cluster_values(values, 1e-4 * scale):
        mu = complex(np.mean(values[g]))
        if abs(mu.imag) <= 1e-12 * scale:
            mu = complex(mu.real, 0.0)
        out.append(mu)
    return out


def common_left_eigenvector(*mats, tol: float = 1e-8) -> tuple[bool, np.ndarray | None]:
    """Search for a row vector r ≠ 0 that is a left eigenvector of every given matrix.

    For each choice of eigenvalues μ_k (one per matrix) the stacked matrix
    [M_1ᵀ−μ_1 I; M_2ᵀ−μ_2 I; ...] is tested for a numerical kernel: smallest
    singular value at most ``tol`` times the summed entry norms.  Adding
    rows can only raise the smallest singular value, so partial stacks that
    already fail are pruned.
    """
    mats = [to_float(M) for M in mats]
    if not mats:
        raise InputError("need at least one matrix")
    d = mats[0].shape[0]
    scale = sum(entry_norm(M) for M in mats) or 1.0
    I = np.eye(d)
    spectra = [distinct_eigenvalues(M) for M in mats]

    def search(k, stacked):
        if k == len(mats):
            return null_space(stacked, tol * scale, min_count=1)[:, 0]
        for mu in spectra[k]:
            block = mats[k].T - mu * I
            trial = block if stacked is None else np.vstack([stacked, block])
            if complex_singular_values(trial)[-1] <= tol * scale:
                found = search(k + 1, trial)
                if found is not None:
                    return found
        return None

    witness = search(0, None)
    return witness is not None, witness


# ---------------------------------------------------------------------------
# column-ratio functionals


@dataclass(frozen=True)
class ShapeFunctionals:
    Lambda: object
    lambda_small: object
    row_supports: list


def shape_functionals(M) -> ShapeFunctionals:
    """Column-ratio functional Λ and complement-mass functional λ of a nonnegative matrix.

    Λ is the largest ratio m_ij / m_i'j over columns j and rows with
    m_i'j ≠ 0 (so it is always finite).  λ is the largest ratio between the
    mass row i' puts outside the support J of row i and the mass row i puts
    on J, taken over rows i with nonempty support.  Exact input gives
    Fraction results.
    """
    M = np.atleast_2d(M)
    exact = is_exact(M)
    if exact:
        M = np.vectorize(Fraction, otypes=[object])(M)   # plain ints would divide to floats
    mask = support_mask(M, 0.0 if not exact else None)
    if not mask.any():
        raise ZeroMatrix("shape functionals of the zero matrix")
    if any(x < 0 for x in M.flat):
        raise InputError("shape functionals need a nonnegative matrix")
    rows, cols = M.shape
    Lam = Fraction(0) if exact else 0.0
    for j in range(cols):
        nz = [M[i, j] for i in range(rows) if mask[i, j]]
        if nz:
            Lam = max(Lam, max(nz) / min(nz))
    supports = [[j for j in range(cols) if mask[i, j]] for i in range(rows)]
    lam = Fraction(0) if exact else 0.0
    for i in range(rows):
        J = supports[i]
        if not J:
            continue
        inside = sum(M[i, j] for j in J)
        outside_cols = [j for j in range(cols) if j not in J]
        for i2 in range(rows):
            num = sum((M[i2, j] for j in outside_cols), Fraction(0) if exact else 0.0)
            lam = max(lam, num / inside)
    return ShapeFunctionals(Lam, lam, supports)
