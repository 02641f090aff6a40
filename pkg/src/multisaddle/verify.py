"""Quick invariant suite behind the ``verify`` subcommand.

Each check returns ``(passed, detail)``; ``run_all`` collects them in a
fixed order. Sizes are kept small so the whole suite runs in seconds.
"""

from __future__ import annotations

import math
import tempfile
from pathlib import Path

import numpy as np

from .approximations import ChebyshevOp, MatchingSchurOp
from .fem import assemble, disc_mesh, structured_square_mesh
from .linalg import gen_eigs, to_dense
from .minres import minres_solve
from .preconditioners import (
    Preconditioner,
    PreconditionerKind,
    ideal_blocks,
    scaled_blocks,
    spd_probe,
)
from .random_experiments import (
    RandomRecipe,
    eig_experiment,
    ideal_pk_spectrum_error,
    in_pd_bounds,
    pl_unit_spectrum_error,
    random_system,
)
from .saddle import assemble_full, load_system, reconstruct_from_factorization, save_system, schur_chain

TOL = 1e-8


def _systems(ks, trials, seed=0):
    for k in ks:
        for t in range(trials):
            yield k, random_system(RandomRecipe(k, seed), trial=t)


def check_two_eigenvalues():
    worst = max(ideal_pk_spectrum_error(s) for _, s in _systems((1, 2, 3, 5), 3))
    return worst <= TOL, f"max |mu - (+-1)| = {worst:.2e}"


def check_two_iterations():
    its = []
    for _, s in _systems((1, 2, 3), 3):
        chain = schur_chain(s)
        b = np.ones(s.dim)
        P = Preconditioner(PreconditionerKind.FACTORIZED, ideal_blocks(chain), s)
        its.append(minres_solve(assemble_full(s), P, b, tol=1e-10).iterations)
    return max(its) <= 3, f"max iterations {max(its)}"


def check_pd_bounds():
    bad = 0
    for k in (1, 2, 3):
        mu = [r[3] for r in eig_experiment(k, trials=3, seed=0)]
        bad += int(np.count_nonzero(~in_pd_bounds(mu, k, TOL)))
    return bad == 0, f"{bad} eigenvalues outside the intervals"


def check_factorization():
    worst = max(reconstruct_from_factorization(s) for _, s in _systems((1, 3, 5), 2))
    return worst <= 1e-10, f"relative residual {worst:.2e}"


def check_unit_spectrum():
    errs = [pl_unit_spectrum_error(s) for _, s in _systems((1, 2, 4), 2)]
    eig_err = max(e for e, _ in errs)
    lower = max(r for _, r in errs)
    return eig_err <= TOL and lower <= TOL, f"max |mu - 1| = {eig_err:.2e}, below-diagonal {lower:.1e}"


def check_use_counts():
    s = random_system(RandomRecipe(3, 0))
    blocks = ideal_blocks(schur_chain(s))
    Preconditioner(PreconditionerKind.FACTORIZED, blocks, s)(np.ones(s.dim))
    pk = blocks.counts
    blocks.reset_counters()
    Preconditioner(PreconditionerKind.BLOCK_DIAGONAL, blocks, s)(np.ones(s.dim))
    pd = blocks.counts
    ok = list(pk) == [2, 2, 2, 1] and list(pd) == [1, 1, 1, 1]
    return ok, f"P_k {list(pk)}, P_D {list(pd)}"


def check_fem():
    ops = assemble(structured_square_mesh(2.0**-3))
    errs = (abs(ops.M.sum() - 1.0), float(np.abs(ops.K @ np.ones(ops.K.shape[0])).max()),
            abs(ops.Q.sum() - 4.0))
    dof = 3 * assemble(structured_square_mesh(2.0**-4)).M.shape[0]
    return max(errs) <= 1e-12 and dof == 867, f"errors {max(errs):.1e}, double DoF {dof}"


def check_chebyshev_spd():
    M = assemble(structured_square_mesh(2.0**-3)).M
    sym, pos = spd_probe(ChebyshevOp(M, 5), M.shape[0], probes=20)
    return sym and pos, f"symmetric={sym}, positive={pos}"


def check_matching_bound():
    ops = assemble(disc_mesh(2.0**-3))
    M, K = ops.M.toarray(), ops.K.toarray()
    gamma = 1e-6 + 1e-8
    S = M + gamma * K @ np.linalg.solve(M, K)
    mu = gen_eigs(0.5 * (S + S.T), MatchingSchurOp(ops.M, ops.K, gamma).forward_matrix())
    ok = mu.min >= 1 / math.sqrt(2) - TOL and mu.max <= math.sqrt(2) + TOL
    return ok, f"[{mu.min:.6f}, {mu.max:.6f}]"


def check_perturbed_minres():
    s = random_system(RandomRecipe(2, 0))
    chain = schur_chain(s)
    blocks = scaled_blocks(chain, [0.8, 1.2, 0.9])
    P = Preconditioner(PreconditionerKind.FACTORIZED, blocks, s)
    b = np.ones(s.dim)
    res = minres_solve(assemble_full(s), P, b, tol=1e-10)
    true_rel = np.linalg.norm(b - assemble_full(s) @ res.solution) / np.linalg.norm(b)
    return res.converged and true_rel < 1e-6, f"{res.iterations} iterations, residual {true_rel:.1e}"


def check_io_roundtrip():
    s = random_system(RandomRecipe(2, 0))
    with tempfile.TemporaryDirectory() as tmp:
        save_system(s, Path(tmp))
        t = load_system(Path(tmp))
    same = np.array_equal(to_dense(assemble_full(s)), to_dense(assemble_full(t)))
    return same, "bit-exact" if same else "mismatch"


CHECKS = {
    "two-eigenvalues": check_two_eigenvalues,
    "two-iterations": check_two_iterations,
    "pd-bounds": check_pd_bounds,
    "factorization": check_factorization,
    "unit-spectrum": check_unit_spectrum,
    "use-counts": check_use_counts,
    "fem": check_fem,
    "chebyshev-spd": check_chebyshev_spd,
    "matching-bound": check_matching_bound,
    "perturbed-minres": check_perturbed_minres,
    "io-roundtrip": check_io_roundtrip,
}


def run_all():
    """List of ``(name, passed, detail)``; exceptions count as failures."""
    out = []
    for name, check in CHECKS.items():
        try:
            passed, detail = check()
        except Exception as exc:  # report, keep going
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        out.append((name, bool(passed), detail))
    return out
