"""Dense and banded symmetric kernels.

Dense matrices are plain C-ordered (row-major) ``numpy`` arrays. Banded SPD
matrices keep only the lower band in LAPACK "lower" layout: ``band[d, j]``
holds ``M[j + d, j]``.

The symmetric eigensolver is written out here (Householder reduction to
tridiagonal form followed by implicit-shift QL/QR) so that every spectral claim
in the package rests on code we control; ``scipy.linalg.eigh`` is only used
by the tests as an oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import DimensionMismatch, NoConvergence, NotPositiveDefinite, NotSymmetric

SYMMETRY_RTOL = 1e-12
EIG_SYMMETRY_RTOL = 1e-10
QL_MAX_SWEEPS = 30

__all__ = [
    "BandedSpdMatrix",
    "CholeskyFactor",
    "Spectrum",
    "banded_cholesky",
    "banded_solve",
    "check_symmetric",
    "cholesky",
    "factorize",
    "gen_eigs",
    "is_psd",
    "seeded_rng",
    "solve_with_factor",
    "substream",
    "sym_eigs",
    "to_dense",
]


def to_dense(M) -> np.ndarray:
    if sp.issparse(M):
        return M.toarray()
    if isinstance(M, BandedSpdMatrix):
        return M.to_dense()
    return np.asarray(M, dtype=float)


def check_symmetric(M, rtol=SYMMETRY_RTOL):
    """Raise ``NotSymmetric`` unless ``||M - M^T||_F <= rtol * ||M||_F``."""
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {M.shape}")
    if sp.issparse(M):
        asym = sp.linalg.norm(M - M.T)
        scale = sp.linalg.norm(M)
    else:
        asym = np.linalg.norm(M - M.T)
        scale = np.linalg.norm(M)
    if asym > rtol * scale:
        raise NotSymmetric(f"relative asymmetry {asym / scale:.3e} exceeds {rtol:.1e}")


# ---------------------------------------------------------------------------
# Banded storage


@dataclass(frozen=True)
class BandedSpdMatrix:
    """Symmetric matrix stored by its lower band (``band.shape == (u + 1, n)``)."""

    band: np.ndarray

    def __post_init__(self):
        if self.band.ndim != 2 or self.band.shape[1] < 1:
            raise DimensionMismatch("band storage must be (bandwidth + 1, n) with n >= 1")

    @property
    def n(self):
        return self.band.shape[1]

    @property
    def bandwidth(self):
        return self.band.shape[0] - 1

    @property
    def shape(self):
        return (self.n, self.n)

    @classmethod
    def from_matrix(cls, M, bandwidth=None):
        if isinstance(M, BandedSpdMatrix):
            return M
        if sp.issparse(M):
            C = M.tocoo()
            if bandwidth is None:
                bandwidth = int(np.max(np.abs(C.row - C.col))) if C.nnz else 0
            n = M.shape[0]
            band = np.zeros((bandwidth + 1, n))
            low = C.row >= C.col
            d = C.row[low] - C.col[low]
            if d.size and d.max() > bandwidth:
                raise DimensionMismatch("matrix has entries outside the requested band")
            np.add.at(band, (d, C.col[low]), C.data[low])
            return cls(band)
        A = np.asarray(M, dtype=float)
        n = A.shape[0]
        if bandwidth is None:
            rows, cols = np.nonzero(A)
            bandwidth = int(np.max(np.abs(rows - cols))) if rows.size else 0
        band = np.zeros((bandwidth + 1, n))
        for d in range(bandwidth + 1):
            band[d, : n - d] = np.diagonal(A, -d)
        return cls(band)

    def to_dense(self):
        n, u = self.n, self.bandwidth
        A = np.zeros((n, n))
        for d in range(u + 1):
            idx = np.arange(n - d)
            A[idx + d, idx] = self.band[d, : n - d]
            A[idx, idx + d] = self.band[d, : n - d]
        return A

    def __matmul__(self, v):
        v = np.asarray(v, dtype=float)
        out = self.band[0] * v if v.ndim == 1 else self.band[0][:, None] * v
        for d in range(1, self.bandwidth + 1):
            b = self.band[d, : self.n - d]
            if v.ndim == 1:
                out[d:] += b * v[:-d]
                out[:-d] += b * v[d:]
            else:
                out[d:] += b[:, None] * v[:-d]
                out[:-d] += b[:, None] * v[d:]
        return out


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower Cholesky factor, dense (n x n) or banded (LAPACK lower band)."""

    lower: np.ndarray
    banded: bool = False

    @property
    def n(self):
        return self.lower.shape[1] if self.banded else self.lower.shape[0]

    def to_dense(self):
        if not self.banded:
            return self.lower
        n, u = self.n, self.lower.shape[0] - 1
        L = np.zeros((n, n))
        for d in range(u + 1):
            idx = np.arange(n - d)
            L[idx + d, idx] = self.lower[d, : n - d]
        return L

    def solve(self, v):
        return solve_with_factor(self, v)

    def __call__(self, v):
        return solve_with_factor(self, v)


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues sorted ascending."""

    eigenvalues: np.ndarray

    def __len__(self):
        return len(self.eigenvalues)

    def __iter__(self):
        return iter(self.eigenvalues)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.eigenvalues, dtype=dtype)

    @property
    def min(self):
        return float(self.eigenvalues[0])

    @property
    def max(self):
        return float(self.eigenvalues[-1])


# ---------------------------------------------------------------------------
# Factorizations


def cholesky(M) -> CholeskyFactor:
    """Dense Cholesky factorization ``M = L L^T``.

    Raises ``NotPositiveDefinite`` when a pivot is non-positive and
    ``NotSymmetric`` if ``M`` is not symmetric to 1e-12 relative.
    """
    A = to_dense(M)
    check_symmetric(A)
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    if not np.all(np.isfinite(L)):
        raise NotPositiveDefinite("non-finite Cholesky factor")
    return CholeskyFactor(L)


def banded_cholesky(M) -> CholeskyFactor:
    B = BandedSpdMatrix.from_matrix(M)
    try:
        Lb = sla.cholesky_banded(B.band, lower=True, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    return CholeskyFactor(Lb, banded=True)


def solve_with_factor(F: CholeskyFactor, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape[0] != F.n:
        raise DimensionMismatch(f"factor has dimension {F.n}, right-hand side {v.shape[0]}")
    if F.banded:
        return sla.cho_solve_banded((F.lower, True), v, check_finite=False)
    return sla.cho_solve((F.lower, True), v, check_finite=False)


banded_solve = solve_with_factor


def factorize(M) -> CholeskyFactor:
    """Cholesky of ``M``, banded when ``M`` is sparse or already banded."""
    if sp.issparse(M) or isinstance(M, BandedSpdMatrix):
        return banded_cholesky(M)
    return cholesky(M)


def is_psd(M, rel_shift=1e-12) -> bool:
    """Semi-definiteness test by Cholesky of ``M + eps I``, ``eps = rel_shift * ||M||_F``."""
    if sp.issparse(M):
        scale = sp.linalg.norm(M)
        if scale == 0.0:
            return True
        shifted = (M + rel_shift * scale * sp.identity(M.shape[0])).tocsr()
    else:
        A = to_dense(M)
        scale = np.linalg.norm(A)
        if scale == 0.0:
            return True
        shifted = A + rel_shift * scale * np.eye(A.shape[0])
    try:
        factorize(shifted)
    except NotPositiveDefinite:
        return False
    return True


# ---------------------------------------------------------------------------
# Eigenvalues


def _tridiagonalize(A):
    """Householder reduction; returns diagonal ``d`` and off-diagonal ``e``.

    ``e[i]`` couples rows i and i+1; ``e[n-1] = 0``.
    """
    a = np.array(A, dtype=float, copy=True)
    n = a.shape[0]
    d = np.zeros(n)
    e = np.zeros(n)
    for k in range(n - 2):
        x = a[k + 1 :, k]
        alpha = math.sqrt(float(x @ x))
        d[k] = a[k, k]
        if alpha == 0.0:
            continue
        if x[0] > 0:
            alpha = -alpha
        v = x.copy()
        v[0] -= alpha
        vv = float(v @ v)
        e[k] = alpha
        sub = a[k + 1 :, k + 1 :]
        p = (sub @ v) * (2.0 / vv)
        q = p - (float(v @ p) / vv) * v
        sub -= np.outer(v, q)
        sub -= np.outer(q, v)
    if n >= 2:
        d[n - 2] = a[n - 2, n - 2]
        e[n - 2] = a[n - 1, n - 2]
    d[n - 1] = a[n - 1, n - 1]
    return d, e


def _tridiagonal_ql(d, e, max_sweeps=QL_MAX_SWEEPS):
    """Eigenvalues of a symmetric tridiagonal matrix by implicit QL with Wilkinson shift.

    Each unreduced block is oriented so that its smaller-magnitude end is
    deflated first (QL or, on the reversed block, QR), which keeps graded
    matrices with large clusters within the sweep cap.
    """
    d = [float(x) for x in d]
    e = [float(x) for x in e]
    n = len(d)
    eps = np.finfo(float).eps
    for l in range(n):
        sweeps = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= eps * dd:
                    break
                m += 1
            if m == l:
                break
            if sweeps == max_sweeps:
                raise NoConvergence(f"QL did not converge for eigenvalue {l} in {max_sweeps} sweeps")
            sweeps += 1
            if abs(d[m]) < abs(d[l]):
                # chase the smaller end: reversing the block turns QL into QR
                d[l:m + 1] = d[l:m + 1][::-1]
                e[l:m] = e[l:m][::-1]
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            i = m - 1
            deflated = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    deflated = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                i -= 1
            if deflated:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return np.sort(np.array(d))


def sym_eigs(M) -> Spectrum:
    """All eigenvalues of a symmetric dense matrix, ascending."""
    A = to_dense(M)
    check_symmetric(A, EIG_SYMMETRY_RTOL)
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    A = 0.5 * (A + A.T)
    if A.shape[0] == 1:
        return Spectrum(A[0].copy())
    d, e = _tridiagonalize(A)
    return Spectrum(_tridiagonal_ql(d, e))


def gen_eigs(A, P) -> Spectrum:
    """Eigenvalues of ``P^{-1} A`` for symmetric ``A`` and SPD ``P``.

    Uses ``P = L L^T`` and the congruent symmetric matrix ``L^{-1} A L^{-T}``.
    """
    A = to_dense(A)
    P = to_dense(P)
    if A.shape != P.shape:
        raise DimensionMismatch(f"shapes differ: {A.shape} vs {P.shape}")
    L = cholesky(P).lower
    Y = sla.solve_triangular(L, A, lower=True, check_finite=False)
    X = sla.solve_triangular(L, Y.T, lower=True, check_finite=False)
    return sym_eigs(0.5 * (X + X.T))


# ---------------------------------------------------------------------------
# Random numbers


def seeded_rng(seed) -> np.random.Generator:
    """PCG64 generator; ``.random()`` draws uniform [0, 1) deterministically per seed."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed) & (2**64 - 1))))


def substream(seed, *key) -> np.random.Generator:
    """Independent child stream identified by ``(seed, *key)``, e.g. ``(seed, k, trial)``."""
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=tuple(int(x) for x in key))
    return np.random.Generator(np.random.PCG64(ss))
