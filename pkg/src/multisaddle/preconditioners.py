"""Block diagonal, factorized and block lower-triangular preconditioners.

Every preconditioner is assembled from per-block *inverse* operators
``A0hat^{-1}, S1hat^{-1}, ..., Skhat^{-1}`` (a ``BlockApproxSet``). The
factorized preconditioner ``P_k = P_L P_D^{-1} P_U`` is applied as

1. forward substitution with ``P_L`` (one use of every block operator), then
2. backward substitution with the unit-triangular ``P_D^{-1} P_U`` (one more
   use of blocks ``0..k-1``, none of block ``k``).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionMismatch, NonPositiveFactor
from .linalg import CholeskyFactor, solve_with_factor
from .saddle import BlockSaddleSystem, SchurChain, block_diagonal, lower_factor


class BlockInverse:
    """Apply-inverse operator for one diagonal block, counting its uses."""

    def __init__(self, apply: Callable[[np.ndarray], np.ndarray], n: int, spd=True, name=""):
        self._apply = apply
        self.n = n
        self.spd = spd
        self.name = name
        self.calls = 0

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        if v.shape[0] != self.n:
            raise DimensionMismatch(f"{self.name or 'block'} expects length {self.n}, got {v.shape[0]}")
        self.calls += 1
        return self._apply(v)

    def __repr__(self):
        return f"BlockInverse({self.name!r}, n={self.n}, calls={self.calls})"

    @classmethod
    def from_factor(cls, factor: CholeskyFactor, scale=1.0, name=""):
        if scale == 1.0:
            return cls(lambda v: solve_with_factor(factor, v), factor.n, name=name)
        return cls(lambda v: solve_with_factor(factor, v) / scale, factor.n, name=name)

    @classmethod
    def identity(cls, n, name=""):
        return cls(lambda v: v.copy(), n, name=name)


class BlockApproxSet(Sequence):
    """The k+1 block inverse operators, block 0 approximating ``A_0^{-1}``."""

    def __init__(self, ops: Sequence[BlockInverse]):
        self.ops = list(ops)

    def __getitem__(self, j):
        return self.ops[j]

    def __len__(self):
        return len(self.ops)

    @property
    def k(self):
        return len(self.ops) - 1

    @property
    def sizes(self):
        return tuple(op.n for op in self.ops)

    @property
    def spd(self):
        return all(op.spd for op in self.ops)

    @property
    def counts(self):
        return [op.calls for op in self.ops]

    def reset_counters(self):
        for op in self.ops:
            op.calls = 0


def ideal_blocks(chain: SchurChain) -> BlockApproxSet:
    return BlockApproxSet(BlockInverse.from_factor(F, name=f"S{j}")
                          for j, F in enumerate(chain.factors))


def scaled_blocks(chain: SchurChain, factors) -> BlockApproxSet:
    """Operators applying ``(c_j S_j)^{-1}``."""
    factors = [float(c) for c in factors]
    if len(factors) != len(chain.factors):
        raise DimensionMismatch(f"need {len(chain.factors)} factors, got {len(factors)}")
    if any(not c > 0 for c in factors):
        raise NonPositiveFactor(f"scaling factors must be positive: {factors}")
    return BlockApproxSet(BlockInverse.from_factor(F, scale=c, name=f"S{j}")
                          for j, (F, c) in enumerate(zip(chain.factors, factors)))


def _check(approx: BlockApproxSet, v, system=None):
    v = np.asarray(v, dtype=float)
    if system is not None and tuple(system.sizes) != approx.sizes:
        raise DimensionMismatch(f"block sizes {approx.sizes} do not match system {system.sizes}")
    if v.shape[0] != sum(approx.sizes):
        raise DimensionMismatch(f"vector length {v.shape[0]} != {sum(approx.sizes)}")
    off = np.concatenate([[0], np.cumsum(approx.sizes)]).astype(int)
    return [v[off[j]:off[j + 1]] for j in range(len(approx))]


def apply_pd_inverse(approx: BlockApproxSet, v):
    parts = _check(approx, v)
    return np.concatenate([op(x) for op, x in zip(approx, parts)])


def _forward(approx, system, parts):
    y = [approx[0](parts[0])]
    for j in range(1, len(approx)):
        r = parts[j] - system.B[j - 1] @ y[j - 1]
        z = approx[j](r)
        y.append(-z if j % 2 else z)
    return y


def apply_pl_inverse(approx: BlockApproxSet, system: BlockSaddleSystem, v):
    return np.concatenate(_forward(approx, system, _check(approx, v, system)))


def apply_pk_inverse(approx: BlockApproxSet, system: BlockSaddleSystem, v):
    y = _forward(approx, system, _check(approx, v, system))
    k = len(approx) - 1
    x = [None] * (k + 1)
    x[k] = -y[k] if k % 2 else y[k]
    for j in range(k - 1, -1, -1):
        r = y[j] - approx[j](system.B[j].T @ x[j + 1])
        x[j] = -r if j % 2 else r
    return np.concatenate(x)


class PreconditionerKind(enum.Enum):
    BLOCK_DIAGONAL = "PD"
    FACTORIZED = "Pk"
    BLOCK_LOWER_TRIANGULAR = "PL"

    @property
    def spd(self):
        return self is not PreconditionerKind.BLOCK_LOWER_TRIANGULAR


@dataclass
class Preconditioner:
    """Callable ``v -> P^{-1} v`` for one of the three block preconditioners."""

    kind: PreconditionerKind
    approx: BlockApproxSet
    system: BlockSaddleSystem

    def __post_init__(self):
        self.kind = PreconditionerKind(self.kind)
        if tuple(self.system.sizes) != self.approx.sizes:
            raise DimensionMismatch("block approximations do not match the system's block sizes")

    @property
    def spd(self):
        return self.kind.spd and self.approx.spd

    def __call__(self, v):
        if self.kind is PreconditionerKind.BLOCK_DIAGONAL:
            return apply_pd_inverse(self.approx, v)
        if self.kind is PreconditionerKind.FACTORIZED:
            return apply_pk_inverse(self.approx, self.system, v)
        return apply_pl_inverse(self.approx, self.system, v)


# ---------------------------------------------------------------------------
# Dense forward forms, for spectra and oracles at desk scale


def dense_pd(system, blocks):
    return block_diagonal(system, blocks)


def dense_pl(system, blocks):
    return lower_factor(system, blocks)


def dense_pk(system, blocks):
    """``P_L P_D^{-1} P_U`` from the (forward) diagonal blocks, e.g. ``chain.S`` or ``c_j S_j``."""
    PL = lower_factor(system, blocks)
    off = system.offsets
    W = PL.T.copy()
    for j, blk in enumerate(blocks):
        rows = slice(off[j], off[j + 1])
        W[rows] = np.linalg.solve(np.asarray(blk, dtype=float), W[rows])
    P = PL @ W
    return 0.5 * (P + P.T)


def operator_matrix(op, n):
    """Dense matrix of a linear operator by applying it to the identity columns."""
    return np.column_stack([op(e) for e in np.eye(n)])


def spd_probe(op, n, probes=100, rng=None, sym_tol=1e-10):
    """Statistical SPD check of a matrix-free operator.

    Returns ``(symmetric, positive)``: symmetry is ``|<u, Av> - <Au, v>|``
    relative to ``|u||Av| + |Au||v|`` below ``sym_tol`` for every probe pair;
    positivity is ``<v, Av> > 0`` for every probe.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    symmetric = positive = True
    for _ in range(probes):
        u = rng.standard_normal(n)
        v = rng.standard_normal(n)
        Au, Av = op(u), op(v)
        gap = abs(u @ Av - Au @ v)
        scale = np.linalg.norm(u) * np.linalg.norm(Av) + np.linalg.norm(Au) * np.linalg.norm(v)
        if gap > sym_tol * scale:
            symmetric = False
        if not v @ Av > 0:
            positive = False
    return symmetric, positive
