"""Block-tridiagonal multiple saddle-point systems and their Schur chains.

A system with k+1 diagonal blocks ``A_0..A_k`` and coupling blocks
``B_1..B_k`` (``B_j`` is ``n_j x n_{j-1}``) is::

    [ A_0  B_1^T                  ]
    [ B_1  -A_1   B_2^T           ]
    [      B_2    A_2   ...       ]
    [             ...   (-1)^k A_k]

Blocks may be dense arrays or ``scipy.sparse`` matrices.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch, NotPositiveDefinite, SchurNotSpd
from .linalg import CholeskyFactor, cholesky, factorize, is_psd, solve_with_factor, to_dense
from .mmio import read_matrix, write_matrix


def _sign(j):
    return -1.0 if j % 2 else 1.0


@dataclass(frozen=True)
class BlockSaddleSystem:
    """The blocks defining a multiple saddle-point matrix.

    Parameters
    ----------
    A : sequence of k+1 symmetric blocks; ``A[0]`` SPD, the rest PSD.
    B : sequence of k coupling blocks; ``B[j-1]`` is the block ``B_j``.
    validate : check dimensions and (semi-)definiteness on construction.
    """

    A: tuple
    B: tuple
    validate: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "A", tuple(self.A))
        object.__setattr__(self, "B", tuple(self.B))
        if len(self.A) < 2 or len(self.B) != len(self.A) - 1:
            raise DimensionMismatch("need k >= 1, with k+1 diagonal and k coupling blocks")
        sizes = [a.shape[0] for a in self.A]
        for j, a in enumerate(self.A):
            if a.shape != (sizes[j], sizes[j]):
                raise DimensionMismatch(f"A_{j} is not square: {a.shape}")
        for j, b in enumerate(self.B, start=1):
            if b.shape != (sizes[j], sizes[j - 1]):
                raise DimensionMismatch(
                    f"B_{j} has shape {b.shape}, expected {(sizes[j], sizes[j - 1])}")
        if self.validate:
            try:
                factorize(self.A[0])
            except NotPositiveDefinite:
                raise NotPositiveDefinite("A_0 is not positive definite") from None
            for j in range(1, len(self.A)):
                if not is_psd(self.A[j]):
                    raise NotPositiveDefinite(f"A_{j} is not positive semi-definite")

    @property
    def k(self):
        return len(self.B)

    @property
    def sizes(self):
        return tuple(a.shape[0] for a in self.A)

    @property
    def offsets(self):
        return tuple(np.concatenate([[0], np.cumsum(self.sizes)]).astype(int))

    @property
    def dim(self):
        return int(sum(self.sizes))

    def split(self, v):
        off = self.offsets
        return [v[off[j]:off[j + 1]] for j in range(self.k + 1)]

    def matvec(self, v):
        v = np.asarray(v, dtype=float)
        if v.shape[0] != self.dim:
            raise DimensionMismatch(f"vector length {v.shape[0]} != system dimension {self.dim}")
        x = self.split(v)
        out = []
        for j in range(self.k + 1):
            y = _sign(j) * (self.A[j] @ x[j])
            if j > 0:
                y = y + self.B[j - 1] @ x[j - 1]
            if j < self.k:
                y = y + self.B[j].T @ x[j + 1]
            out.append(np.asarray(y).ravel())
        return np.concatenate(out)

    __matmul__ = matvec


def assemble_full(system: BlockSaddleSystem, sparse=None):
    """The full symmetric matrix. Dense unless any block is sparse (or ``sparse=True``)."""
    if sparse is None:
        sparse = any(sp.issparse(m) for m in system.A + system.B)
    k = system.k
    if sparse:
        grid = [[None] * (k + 1) for _ in range(k + 1)]
        for j in range(k + 1):
            grid[j][j] = _sign(j) * sp.csr_matrix(system.A[j])
        for j in range(1, k + 1):
            Bj = sp.csr_matrix(system.B[j - 1])
            grid[j][j - 1] = Bj
            grid[j - 1][j] = Bj.T
        return sp.bmat(grid, format="csr")
    off = system.offsets
    full = np.zeros((system.dim, system.dim))
    for j in range(k + 1):
        full[off[j]:off[j + 1], off[j]:off[j + 1]] = _sign(j) * to_dense(system.A[j])
    for j in range(1, k + 1):
        Bj = to_dense(system.B[j - 1])
        full[off[j]:off[j + 1], off[j - 1]:off[j]] = Bj
        full[off[j - 1]:off[j], off[j]:off[j + 1]] = Bj.T
    return full


@dataclass(frozen=True)
class SchurChain:
    """``S[0] = A_0`` followed by the Schur complements ``S_1..S_k`` (dense) and their factors."""

    S: tuple
    factors: tuple

    @property
    def k(self):
        return len(self.S) - 1

    @property
    def sizes(self):
        return tuple(s.shape[0] for s in self.S)


def schur_chain(system: BlockSaddleSystem) -> SchurChain:
    """Dense chain ``S_j = A_j + B_j S_{j-1}^{-1} B_j^T`` with ``S_0 = A_0``.

    Raises ``SchurNotSpd(j)`` if some ``S_j`` fails to factorize.
    """
    S0 = to_dense(system.A[0])
    S = [S0]
    factors = [cholesky(S0)]
    for j in range(1, system.k + 1):
        Bj = to_dense(system.B[j - 1])
        Sj = to_dense(system.A[j]) + Bj @ solve_with_factor(factors[-1], Bj.T)
        Sj = 0.5 * (Sj + Sj.T)
        try:
            Fj = cholesky(Sj)
        except NotPositiveDefinite:
            raise SchurNotSpd(j) from None
        S.append(Sj)
        factors.append(Fj)
    return SchurChain(tuple(S), tuple(factors))


def signature_counts(system_or_sizes):
    """Numbers of +1 and -1 eigenvalues of the ideally preconditioned matrix."""
    sizes = getattr(system_or_sizes, "sizes", system_or_sizes)
    plus = sum(n for j, n in enumerate(sizes) if j % 2 == 0)
    minus = sum(n for j, n in enumerate(sizes) if j % 2 == 1)
    return int(plus), int(minus)


def lower_factor(system: BlockSaddleSystem, blocks):
    """Dense block lower-triangular matrix with diagonal ``(-1)^j blocks[j]`` and sub-diagonal ``B_j``."""
    off = system.offsets
    PL = np.zeros((system.dim, system.dim))
    for j, blk in enumerate(blocks):
        PL[off[j]:off[j + 1], off[j]:off[j + 1]] = _sign(j) * to_dense(blk)
        if j > 0:
            PL[off[j]:off[j + 1], off[j - 1]:off[j]] = to_dense(system.B[j - 1])
    return PL


def block_diagonal(system: BlockSaddleSystem, blocks, signed=False):
    off = system.offsets
    D = np.zeros((system.dim, system.dim))
    for j, blk in enumerate(blocks):
        s = _sign(j) if signed else 1.0
        D[off[j]:off[j + 1], off[j]:off[j + 1]] = s * to_dense(blk)
    return D


def reconstruct_from_factorization(system: BlockSaddleSystem, chain: SchurChain | None = None):
    """Relative Frobenius residual of ``A_k - P_L Pbar_D^{-1} P_U``.

    ``Pbar_D`` carries the signed blocks ``(-1)^j S_j``.
    """
    if chain is None:
        chain = schur_chain(system)
    PL = lower_factor(system, chain.S)
    off = system.offsets
    # Pbar_D^{-1} P_U, one block row at a time
    W = PL.T.copy()
    for j, F in enumerate(chain.factors):
        rows = slice(off[j], off[j + 1])
        W[rows] = _sign(j) * solve_with_factor(F, W[rows])
    full = assemble_full(system, sparse=False)
    return float(np.linalg.norm(full - PL @ W) / np.linalg.norm(full))


# ---------------------------------------------------------------------------
# Serialization: a directory of MatrixMarket files plus manifest.json


def save_system(system: BlockSaddleSystem, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = {"A": [], "B": []}
    for j, a in enumerate(system.A):
        name = f"A{j}.mtx"
        write_matrix(directory / name, a, symmetric=True)
        files["A"].append(name)
    for j, b in enumerate(system.B, start=1):
        name = f"B{j}.mtx"
        write_matrix(directory / name, b, symmetric=False)
        files["B"].append(name)
    manifest = {"k": system.k, "sizes": list(system.sizes), "files": files}
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return directory


def load_system(directory, validate=True) -> BlockSaddleSystem:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    A = [read_matrix(directory / name) for name in manifest["files"]["A"]]
    B = [read_matrix(directory / name) for name in manifest["files"]["B"]]
    system = BlockSaddleSystem(A, B, validate=validate)
    if system.k != manifest["k"] or list(system.sizes) != manifest["sizes"]:
        raise DimensionMismatch("manifest does not match the stored blocks")
    return system
