"""The double and quadruple saddle-point systems from PDE-constrained optimization.

Double problem (unit square, boundary observation), unknowns ``(f, p, u)``::

    [ alpha M   M   0 ] [f]   [   0   ]
    [    M      0   L ] [p] = [   0   ]
    [    0      L   Q ] [u]   [ Q uhat]

``uhat`` solves the forward problem ``L u = -M f*`` for the control
``f* = 4x(1-x) + y``, so ``b`` is the KKT right-hand side of the tracking
functional.

Quadruple problem (unit disc, state constraints with a lifted state),
unknowns ``(f, p, u, ptilde, utilde_inactive)``, with blocks

    A_0 = (alpha+lam) M,  A_1 = lam/(1+rho lam) L,  A_2 = M + lam L,
    A_3 = lam/(1+rho lam) M,  A_4 = lam M_ii,
    B_1 = B_3 = -M,  B_2 = K,  B_4 = M_i:

The right-hand side is ``A_4 w`` for interpolated smooth fields ``w`` (known
exact solution).
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .approximations import (
    ChebyshevOp,
    DirectInverse,
    LMinvLOp,
    MatchingSchurOp,
    S3HatOp,
    ScaledOp,
    matching_s4_op,
)
from .fem import (
    FemOperators,
    TriMesh,
    active_set_disc,
    assemble,
    disc_mesh,
    interpolate,
    restrict_to_inactive,
    structured_square_mesh,
)
from .linalg import factorize, solve_with_factor
from .minres import minres_solve
from .preconditioners import BlockApproxSet, BlockInverse, Preconditioner, PreconditionerKind
from .saddle import BlockSaddleSystem, assemble_full

RHO_DEFAULT = 1e-5
# Double-problem runs default to the backward-error test. It is not scale
# invariant and stops after one step on the quadruple problem at tiny alpha
# and lambda, so the quadruple runs keep the relative rule.
DOUBLE_STOPPING = "backward"


@dataclass
class SaddleProblem:
    system: BlockSaddleSystem
    rhs: np.ndarray
    mesh: TriMesh
    ops: FemOperators
    params: dict
    active: np.ndarray | None = None
    exact_solution: np.ndarray | None = None

    @property
    def dof(self):
        return self.system.dim

    def __iter__(self):
        # allows ``system, rhs = build_...(...)``
        return iter((self.system, self.rhs))


def true_control(x, y):
    return 4.0 * x * (1.0 - x) + y


def build_double_saddle(h, alpha) -> SaddleProblem:
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    mesh = structured_square_mesh(h)
    ops = assemble(mesh)
    M, L, Q = ops.M, ops.L, ops.Q
    n = mesh.n_vertices
    system = BlockSaddleSystem([alpha * M, sp.csr_matrix((n, n)), Q], [M, L])
    f_true = interpolate(mesh, true_control)
    u_hat = solve_with_factor(factorize(L), -(M @ f_true))
    rhs = np.concatenate([np.zeros(n), np.zeros(n), Q @ u_hat])
    return SaddleProblem(system, rhs, mesh, ops, {"h": h, "alpha": alpha})


def desired_state_disc(x, y):
    return 1.0 - x**2 - y**2


def build_quadruple_saddle(h, alpha, lam, rho=RHO_DEFAULT, active_radius=0.5) -> SaddleProblem:
    if not (alpha > 0 and lam > 0 and rho > 0):
        raise ValueError("alpha, lambda and rho must be positive")
    mesh = disc_mesh(h)
    ops = assemble(mesh)
    M, K, L = ops.M, ops.K, ops.L
    active = active_set_disc(mesh, active_radius)
    M_i, M_ii, _ = restrict_to_inactive(M, K, active)
    c = lam / (1.0 + rho * lam)
    A = [(alpha + lam) * M, c * L, (M + lam * L).tocsr(), c * M, lam * M_ii]
    B = [-M, K, -M, M_i]
    system = BlockSaddleSystem(A, B)
    u_hat = interpolate(mesh, desired_state_disc)
    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    fields = [np.full_like(x, 4.0), x * y, u_hat, x, u_hat[~active]]
    w = np.concatenate(fields)
    rhs = system.matvec(w)
    params = {"h": h, "alpha": alpha, "lambda": lam, "rho": rho}
    return SaddleProblem(system, rhs, mesh, ops, params, active=active, exact_solution=w)


# ---------------------------------------------------------------------------
# Block approximation sets


def _mass_inverse(M, cheb_m):
    """Chebyshev(m) approximation of ``M^{-1}``, or exact when ``cheb_m`` is None."""
    return DirectInverse(M) if cheb_m is None else ChebyshevOp(M, cheb_m)


def double_blocks(problem: SaddleProblem, cheb_m=5) -> BlockApproxSet:
    """``A0hat = alpha Mhat``, ``S1hat = Mhat / alpha``, ``S2hat = alpha L M^{-1} L``."""
    alpha = problem.params["alpha"]
    M, L = problem.ops.M, problem.ops.L
    minv = _mass_inverse(M, cheb_m)
    n = M.shape[0]
    return BlockApproxSet([
        BlockInverse(ScaledOp(minv, 1.0 / alpha), n, name="A0hat"),
        BlockInverse(ScaledOp(minv, alpha), n, name="S1hat"),
        BlockInverse(LMinvLOp(L, M, alpha), n, name="S2hat"),
    ])


def quadruple_blocks(problem: SaddleProblem, cheb_m=5) -> BlockApproxSet:
    alpha, lam, rho = (problem.params[k] for k in ("alpha", "lambda", "rho"))
    M, K, L = problem.ops.M, problem.ops.K, problem.ops.L
    gamma = alpha + lam
    minv = _mass_inverse(M, cheb_m)
    S1 = (lam / (1.0 + rho * lam) * L + M / gamma).tocsr()
    s4 = matching_s4_op(M, K, problem.active, gamma)
    n = M.shape[0]
    return BlockApproxSet([
        BlockInverse(ScaledOp(minv, 1.0 / gamma), n, name="A0hat"),
        BlockInverse(DirectInverse(S1), n, name="S1hat"),
        BlockInverse(MatchingSchurOp(M, K, gamma), n, name="S2hat"),
        BlockInverse(S3HatOp(minv, M, K, gamma), n, name="S3hat"),
        BlockInverse(s4, s4.n, name="S4hat"),
    ])


def solve_problem(problem: SaddleProblem, blocks: BlockApproxSet, kind, tol=1e-10, maxit=None,
                  stopping="relative"):
    """MINRES on the assembled sparse system; returns ``(result, seconds)``."""
    A = assemble_full(problem.system, sparse=True)
    precond = Preconditioner(PreconditionerKind(kind), blocks, problem.system)
    start = time.process_time()
    result = minres_solve(A, precond, problem.rhs, tol=tol, maxit=maxit, stopping=stopping)
    return result, time.process_time() - start


KINDS = (PreconditionerKind.BLOCK_DIAGONAL, PreconditionerKind.FACTORIZED)


def run_double(h_list, alpha_list, cheb_m=5, tol=1e-10, maxit=None, stopping=DOUBLE_STOPPING):
    """Rows ``(h, alpha, dof, preconditioner, iterations, converged, seconds)``."""
    rows = []
    for h in h_list:
        for alpha in alpha_list:
            problem = build_double_saddle(h, alpha)
            for kind in KINDS:
                res, secs = solve_problem(problem, double_blocks(problem, cheb_m), kind, tol, maxit,
                                          stopping)
                rows.append((h, alpha, problem.dof, kind.value, res.iterations, res.converged, secs))
    return rows


def run_cheb_sweep(h_list, m_list=(1, 2, 3, 4, 5, 7, 10, 20), alpha=1e-2, tol=1e-10, maxit=None,
                   stopping=DOUBLE_STOPPING):
    """Rows ``(h, m, preconditioner, iterations, converged)`` at fixed ``alpha``."""
    rows = []
    for h in h_list:
        problem = build_double_saddle(h, alpha)
        for m in m_list:
            for kind in KINDS:
                res, _ = solve_problem(problem, double_blocks(problem, m), kind, tol, maxit, stopping)
                rows.append((h, m, kind.value, res.iterations, res.converged))
    return rows


def run_quadruple(h_list, alpha_list, lambda_list, rho=RHO_DEFAULT, cheb_m=5, tol=1e-10, maxit=None,
                  stopping="relative"):
    """Rows ``(h, lambda, alpha, dof, preconditioner, iterations, converged, seconds)``."""
    rows = []
    for h in h_list:
        for lam in lambda_list:
            for alpha in alpha_list:
                problem = build_quadruple_saddle(h, alpha, lam, rho)
                for kind in KINDS:
                    blocks = quadruple_blocks(problem, cheb_m)
                    res, secs = solve_problem(problem, blocks, kind, tol, maxit, stopping)
                    rows.append((h, lam, alpha, problem.dof, kind.value, res.iterations,
                                 res.converged, secs))
    return rows
