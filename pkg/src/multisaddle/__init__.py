"""Preconditioners and solvers for multiple saddle-point systems.

Block-tridiagonal symmetric systems with alternating-sign diagonal blocks,
their Schur complement chains, the block diagonal preconditioner ``P_D``,
the factorized SPD preconditioner ``P_k = P_L P_D^{-1} P_U`` and
preconditioned MINRES, plus P1 finite element test problems.
"""

from .errors import (
    Breakdown,
    DegenerateTriangle,
    DimensionMismatch,
    EmptyInactiveSet,
    MaxIterations,
    NoConvergence,
    NonPositiveFactor,
    NotPositiveDefinite,
    NotSymmetric,
    SchurNotSpd,
    UnsupportedElement,
)
from .linalg import (
    BandedSpdMatrix,
    CholeskyFactor,
    Spectrum,
    banded_cholesky,
    banded_solve,
    cholesky,
    gen_eigs,
    seeded_rng,
    solve_with_factor,
    substream,
    sym_eigs,
)
from .minres import MinresResult, minres_solve
from .preconditioners import (
    BlockApproxSet,
    BlockInverse,
    Preconditioner,
    PreconditionerKind,
    apply_pd_inverse,
    apply_pk_inverse,
    apply_pl_inverse,
    ideal_blocks,
    scaled_blocks,
)
from .saddle import (
    BlockSaddleSystem,
    SchurChain,
    assemble_full,
    load_system,
    reconstruct_from_factorization,
    save_system,
    schur_chain,
    signature_counts,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
