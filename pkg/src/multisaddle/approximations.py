"""Inexact block operators for the PDE problems.

Chebyshev semi-iteration
------------------------
``ChebyshevOp`` runs ``m`` steps of Chebyshev acceleration of the Jacobi
splitting ``M = D - (D - M)`` with ``D = diag(M)``, from a zero start, given an
interval ``[lo, hi]`` containing the spectrum of ``D^{-1} M``. With
``theta = (hi + lo) / 2``, ``delta = (hi - lo) / 2``, ``sigma = theta / delta``::

    x_0 = 0,  r_0 = v,  rho_0 = 1 / sigma,  d_0 = D^{-1} r_0 / theta
    x_{i+1} = x_i + d_i
    r_{i+1} = r_i - M d_i
    rho_{i+1} = 1 / (2 sigma - rho_i)
    d_{i+1} = rho_{i+1} rho_i d_i + (2 rho_{i+1} / delta) D^{-1} r_{i+1}

``x_m = p_{m-1}(D^{-1} M) D^{-1} v`` for a fixed polynomial that is positive
on ``[lo, hi]``, so the operator is symmetric positive definite. One step is
``D^{-1} v / theta``, a scaled Jacobi (diagonal) approximation.

Matching-strategy Schur approximations
--------------------------------------
``MatchingSchurOp`` applies the inverse of ``(F M^{-1} F) / sqrt(2)``,
``F = M + sqrt(gamma) K``, as ``sqrt(2) F^{-1} M F^{-1} v``. Its relative
spectrum against ``M + gamma K M^{-1} K`` lies in ``[1/sqrt(2), sqrt(2)]``.
All ``F`` solves are banded Cholesky.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch
from .fem import mass_spectral_bounds, restrict_to_inactive
from .linalg import CholeskyFactor, factorize, solve_with_factor

SQRT2 = math.sqrt(2.0)


def _check_len(n, v):
    if v.shape[0] != n:
        raise DimensionMismatch(f"operator has dimension {n}, vector {v.shape[0]}")


@dataclass
class ChebyshevOp:
    """``m``-step Chebyshev semi-iteration approximating ``M^{-1}``."""

    M: object
    m: int = 5
    bounds: tuple = field(default_factory=lambda: mass_spectral_bounds("P1"))

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("need at least one Chebyshev step")
        lo, hi = self.bounds
        if not 0 < lo <= hi:
            raise ValueError(f"invalid spectral bounds {self.bounds}")
        self.n = self.M.shape[0]
        diag = self.M.diagonal() if sp.issparse(self.M) else np.diagonal(self.M)
        self.inv_diag = 1.0 / np.asarray(diag, dtype=float)

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        _check_len(self.n, v)
        lo, hi = self.bounds
        theta = 0.5 * (hi + lo)
        delta = 0.5 * (hi - lo)
        scale = self.inv_diag if v.ndim == 1 else self.inv_diag[:, None]
        d = scale * v / theta
        x = d.copy()
        if self.m == 1 or delta == 0.0:
            return x
        sigma = theta / delta
        rho = 1.0 / sigma
        r = v - self.M @ d
        for _ in range(1, self.m):
            rho_new = 1.0 / (2.0 * sigma - rho)
            d = rho_new * rho * d + (2.0 * rho_new / delta) * (scale * r)
            rho = rho_new
            x = x + d
            r = r - self.M @ d
        return x


def chebyshev_apply(op: ChebyshevOp, v):
    return op(v)


@dataclass
class DirectInverse:
    """Exact ``(scale * A)^{-1}`` by (banded) Cholesky."""

    A: object
    scale: float = 1.0

    def __post_init__(self):
        self.factor: CholeskyFactor = factorize(self.A)
        self.n = self.A.shape[0]

    def __call__(self, v):
        return solve_with_factor(self.factor, v) / self.scale


@dataclass
class ScaledOp:
    op: object
    scale: float

    def __post_init__(self):
        self.n = self.op.n

    def __call__(self, v):
        return self.scale * self.op(v)


@dataclass
class MatchingSchurOp:
    """Inverse of ``(M + sqrt(gamma) K) M^{-1} (M + sqrt(gamma) K) / sqrt(2)``."""

    M: object
    K: object
    gamma: float

    def __post_init__(self):
        if not self.gamma >= 0:
            raise ValueError("gamma must be non-negative")
        self.n = self.M.shape[0]
        self.F = (self.M + math.sqrt(self.gamma) * self.K)
        if sp.issparse(self.F):
            self.F = self.F.tocsr()
        self.factor = factorize(self.F)

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        _check_len(self.n, v)
        z = solve_with_factor(self.factor, v)
        return SQRT2 * solve_with_factor(self.factor, self.M @ z)

    def forward_matrix(self):
        """Dense ``Shat`` itself, for spectral checks."""
        F = self.F.toarray() if sp.issparse(self.F) else np.asarray(self.F)
        M = self.M.toarray() if sp.issparse(self.M) else np.asarray(self.M)
        S = F @ np.linalg.solve(M, F) / SQRT2
        return 0.5 * (S + S.T)


def matching_s2_apply(op: MatchingSchurOp, v):
    return op(v)


def matching_s4_op(M, K, active, gamma):
    """Matching operator on the inactive-node restrictions ``M^(i,i)``, ``K^(i,i)``."""
    _, M_ii, K_ii = restrict_to_inactive(M, K, active)
    return MatchingSchurOp(M_ii, K_ii, gamma)


def matching_s4_apply(op: MatchingSchurOp, v):
    return op(v)


@dataclass
class S3HatOp:
    """``Minv [M + gamma K Minv K] Minv`` with ``Minv`` any SPD approximation of ``M^{-1}``.

    Applied as an explicit product: ``Minv`` is used three times per call.
    """

    Minv: object
    M: object
    K: object
    gamma: float

    def __post_init__(self):
        self.n = self.M.shape[0]

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        _check_len(self.n, v)
        z = self.Minv(v)
        w = self.M @ z + self.gamma * (self.K @ self.Minv(self.K @ z))
        return self.Minv(w)


def s3hat_apply(op: S3HatOp, v):
    return op(v)


@dataclass
class LMinvLOp:
    """Inverse of ``alpha L M^{-1} L``: ``L^{-1} M L^{-1} v / alpha`` with direct ``L`` solves."""

    L: object
    M: object
    alpha: float

    def __post_init__(self):
        self.n = self.L.shape[0]
        self.factor = factorize(self.L)

    def __call__(self, v):
        z = solve_with_factor(self.factor, np.asarray(v, dtype=float))
        return solve_with_factor(self.factor, self.M @ z) / self.alpha
