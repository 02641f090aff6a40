"""Randomly generated multiple saddle-point systems and the experiments run on them.

Recipe (per block j): ``n_j = trunc(20 + 10 u)``; ``A_j`` is the symmetric
part of a uniform [0, 1) matrix shifted by ``|lambda_min|`` times the
identity (``1.01 |lambda_min|`` for ``A_0``); ``B_j`` is uniform [0, 1).
Inexact preconditioners scale ``A_0`` and each ``S_j`` by ``1 + m (2u - 1)``
with magnitude ``m = 0.3``.

Every trial draws from its own substream keyed by ``(seed, k, trial)``, so
results do not depend on execution order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import gen_eigs, substream, sym_eigs
from .minres import minres_solve
from .preconditioners import (
    Preconditioner,
    PreconditionerKind,
    dense_pd,
    dense_pk,
    dense_pl,
    scaled_blocks,
)
from .saddle import BlockSaddleSystem, assemble_full, schur_chain, signature_counts

PD = PreconditionerKind.BLOCK_DIAGONAL
PK = PreconditionerKind.FACTORIZED


def _two_cos(num, den):
    return 2.0 * math.cos(num * math.pi / den)


# Exact eigenvalue intervals for P_D^{-1} A_k: (neg_lo, neg_hi, pos_lo, pos_hi)
PD_BOUNDS = {
    1: (-_two_cos(1, 3), _two_cos(3, 5), _two_cos(1, 3), _two_cos(1, 5)),
    2: (-_two_cos(1, 5), _two_cos(3, 5), _two_cos(3, 7), _two_cos(1, 7)),
    3: (-_two_cos(1, 7), _two_cos(5, 9), _two_cos(3, 7), _two_cos(1, 9)),
}

# Average MINRES iterations over 100 random problems, per k: (P_D, P_k)
REFERENCE_ITERATIONS = {
    1: (29.0, 8.74), 2: (44.6, 15.2), 3: (51.2, 21.2), 4: (58.4, 23.6),
    5: (62.6, 27.7), 10: (75.6, 35.4), 15: (81.2, 39.4), 20: (86.5, 43.5),
}


@dataclass(frozen=True)
class RandomRecipe:
    k: int
    seed: int = 0
    dim_base: int = 20
    dim_spread: int = 10
    perturbation: float = 0.3

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.perturbation < 0 or self.perturbation >= 1:
            raise ValueError("perturbation magnitude must lie in [0, 1)")


def random_dimension(rng, recipe: RandomRecipe):
    return int(math.trunc(recipe.dim_base + recipe.dim_spread * rng.random()))


def random_psd_block(rng, n, shift_factor=1.0):
    R = rng.random((n, n))
    H = 0.5 * (R + R.T)
    lam_min = sym_eigs(H).min
    shift = shift_factor * abs(lam_min) if lam_min < 0 else 0.0
    return H + shift * np.eye(n)


def random_system(recipe: RandomRecipe, rng=None, trial=0) -> BlockSaddleSystem:
    """One random system; ``rng`` defaults to the substream ``(seed, k, trial)``."""
    if rng is None:
        rng = substream(recipe.seed, recipe.k, trial)
    sizes = [random_dimension(rng, recipe) for _ in range(recipe.k + 1)]
    A = [random_psd_block(rng, sizes[0], 1.01)]
    A += [random_psd_block(rng, n) for n in sizes[1:]]
    B = [rng.random((sizes[j], sizes[j - 1])) for j in range(1, recipe.k + 1)]
    return BlockSaddleSystem(A, B)


def perturbation_factors(rng, count, magnitude=0.3):
    return 1.0 + magnitude * (2.0 * rng.random(count) - 1.0)


def perturbed_blocks(chain, seed_or_rng, magnitude=0.3):
    """Scaled exact blocks with factors uniform in ``[1 - magnitude, 1 + magnitude]``."""
    rng = seed_or_rng if isinstance(seed_or_rng, np.random.Generator) else substream(seed_or_rng)
    factors = perturbation_factors(rng, chain.k + 1, magnitude)
    return scaled_blocks(chain, factors), factors


def _trial(recipe, trial):
    rng = substream(recipe.seed, recipe.k, trial)
    system = random_system(recipe, rng)
    chain = schur_chain(system)
    factors = perturbation_factors(rng, recipe.k + 1, recipe.perturbation)
    return system, chain, factors


def eig_experiment(k, trials=100, perturbed=False, seed=0, magnitude=0.3):
    """Spectra of the preconditioned random matrices.

    Returns rows ``(k, trial, preconditioner, eigenvalue)`` with preconditioner
    one of ``PD`` (exact), or ``PDhat`` and ``Pkhat`` when ``perturbed``.
    """
    recipe = RandomRecipe(k, seed, perturbation=magnitude)
    rows = []
    for t in range(trials):
        system, chain, factors = _trial(recipe, t)
        full = assemble_full(system)
        if perturbed:
            blocks = [c * S for c, S in zip(factors, chain.S)]
            spectra = {"PDhat": gen_eigs(full, dense_pd(system, blocks)),
                       "Pkhat": gen_eigs(full, dense_pk(system, blocks))}
        else:
            spectra = {"PD": gen_eigs(full, dense_pd(system, chain.S))}
        for name, spec in spectra.items():
            rows.extend((k, t, name, float(mu)) for mu in spec)
    rows.sort(key=lambda r: (r[0], r[1], r[2], r[3]))
    return rows


def in_pd_bounds(eigenvalues, k, slack=1e-8):
    """Boolean mask: eigenvalue inside the exact interval pair for ``k`` (1..3)."""
    a, b, c, d = PD_BOUNDS[k]
    mu = np.asarray(eigenvalues)
    return ((mu >= a - slack) & (mu <= b + slack)) | ((mu >= c - slack) & (mu <= d + slack))


def iteration_trial(k, trial, seed=0, magnitude=0.3, tol=1e-10, maxit=None, stopping="relative"):
    """MINRES iteration counts for ``PDhat`` and ``Pkhat`` on one random problem."""
    recipe = RandomRecipe(k, seed, perturbation=magnitude)
    system, chain, factors = _trial(recipe, trial)
    rng = substream(seed, k, trial, 1)
    w = rng.random(system.dim)
    b = system.matvec(w)
    full = assemble_full(system)
    out = {}
    for kind in (PD, PK):
        precond = Preconditioner(kind, scaled_blocks(chain, factors), system)
        res = minres_solve(full, precond, b, tol=tol, maxit=maxit, stopping=stopping)
        out[kind.value] = (res.iterations, res.converged)
    return system.dim, out


def iteration_experiment(k_list, trials=100, seed=0, magnitude=0.3, tol=1e-10, maxit=None,
                         stopping="relative", pool=None):
    """Per-trial rows ``(k, preconditioner, trial, iterations, dof)`` and per-k means.

    Returns ``(rows, means)`` where ``means[k] = (mean_PD, mean_Pk, mean_dof)``.
    """
    tasks = [(k, t) for k in k_list for t in range(trials)]
    run = map if pool is None else pool.map
    args = [(k, t, seed, magnitude, tol, maxit, stopping) for k, t in tasks]
    results = list(run(_iteration_task, args))
    rows = []
    for (k, t), (dof, out) in zip(tasks, results):
        for name, (its, _conv) in out.items():
            rows.append((k, name + "hat", t, its, dof))
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    means = {}
    for k in k_list:
        sel = [r for r in rows if r[0] == k]
        pd = [r[3] for r in sel if r[1] == "PDhat"]
        pk = [r[3] for r in sel if r[1] == "Pkhat"]
        dof = [r[4] for r in sel if r[1] == "PDhat"]
        means[k] = (float(np.mean(pd)), float(np.mean(pk)), float(np.mean(dof)))
    return rows, means


def _iteration_task(args):
    return iteration_trial(*args)


def closed_form_zero_a_values(k):
    """``{2 cos((2i+1) pi / (2j+3)) : j = 0..k, i = 0..j}``, sorted."""
    vals = {_two_cos(2 * i + 1, 2 * j + 3) for j in range(k + 1) for i in range(j + 1)}
    return np.array(sorted(vals))


def zero_a_system(rng, k, sizes):
    """Random system with ``A_1 = ... = A_k = 0``; ``sizes`` must be non-increasing."""
    recipe_a0 = random_psd_block(rng, sizes[0], 1.01)
    A = [recipe_a0] + [np.zeros((n, n)) for n in sizes[1:]]
    B = [rng.random((sizes[j], sizes[j - 1])) for j in range(1, k + 1)]
    return BlockSaddleSystem(A, B)


def zero_A_spectrum_check(k, trials=10, seed=0, equal_sizes=True):
    """Largest distance from a computed eigenvalue of ``P_D^{-1} A_k`` to the closed-form set.

    With ``A_1..A_k = 0`` each Schur complement needs ``n_j <= n_{j-1}``, so
    block sizes are either all equal or drawn and sorted non-increasing.
    """
    targets = closed_form_zero_a_values(k)
    worst = 0.0
    for t in range(trials):
        rng = substream(seed, k, t, 2)
        if equal_sizes:
            n = int(20 + 10 * rng.random())
            sizes = [n] * (k + 1)
        else:
            sizes = sorted((int(20 + 10 * rng.random()) for _ in range(k + 1)), reverse=True)
        system = zero_a_system(rng, k, sizes)
        chain = schur_chain(system)
        mu = np.asarray(gen_eigs(assemble_full(system), dense_pd(system, chain.S)))
        dist = np.min(np.abs(mu[:, None] - targets[None, :]), axis=1)
        worst = max(worst, float(dist.max()))
    return worst


def ideal_pk_spectrum_error(system, chain=None):
    """Max distance of ``eig(P_k^{-1} A_k)`` from the predicted ``{+1, -1}`` multiset."""
    chain = schur_chain(system) if chain is None else chain
    mu = np.asarray(gen_eigs(assemble_full(system), dense_pk(system, chain.S)))
    plus, minus = signature_counts(system)
    expected = np.concatenate([-np.ones(minus), np.ones(plus)])
    return float(np.max(np.abs(mu - expected)))


def pl_unit_spectrum_error(system, chain=None):
    """Eigenvalue error of ``P_L^{-1} A_k`` against the single eigenvalue 1.

    ``P_L^{-1} A_k`` is block upper triangular with identity diagonal blocks
    and a nonzero nilpotent part, so a generic nonsymmetric eigensolver only
    resolves its eigenvalues to about ``eps**(1/m)``. Instead the spectrum is
    taken as the union of the diagonal-block spectra. Returns
    ``(eig_error, lower_residual)``: the largest ``|mu - 1|`` over those
    blocks, and the relative size of the computed part below the block
    diagonal (zero in exact arithmetic).
    """
    chain = schur_chain(system) if chain is None else chain
    T = np.linalg.solve(dense_pl(system, chain.S), assemble_full(system))
    off = system.offsets
    eig_err = 0.0
    lower = np.zeros_like(T)
    for j in range(system.k + 1):
        blk = slice(off[j], off[j + 1])
        mu = np.linalg.eigvals(T[blk, blk])
        eig_err = max(eig_err, float(np.max(np.abs(mu - 1.0))))
        lower[off[j + 1]:, blk] = T[off[j + 1]:, blk]
    return eig_err, float(np.linalg.norm(lower) / np.linalg.norm(T))
