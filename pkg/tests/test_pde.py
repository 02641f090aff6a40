import numpy as np
import pytest
import scipy.sparse as sp

from multisaddle.errors import EmptyInactiveSet
from multisaddle.fem import interpolate
from multisaddle.linalg import is_psd
from multisaddle.minres import minres_solve
from multisaddle.pde import (
    KINDS,
    build_double_saddle,
    build_quadruple_saddle,
    double_blocks,
    quadruple_blocks,
    run_cheb_sweep,
    run_double,
    run_quadruple,
    solve_problem,
    true_control,
)
from multisaddle.preconditioners import (
    Preconditioner,
    PreconditionerKind,
    apply_pk_inverse,
    ideal_blocks,
    spd_probe,
)
from multisaddle.saddle import assemble_full, schur_chain


@pytest.fixture(scope="module")
def double3():
    return build_double_saddle(2.0**-3, 1e-2)


@pytest.fixture(scope="module")
def quad3():
    return build_quadruple_saddle(2.0**-3, 1e-6, 1e-8)


class TestDouble:
    def test_dof(self):
        assert build_double_saddle(2.0**-4, 1.0).dof == 867

    def test_unpacks(self, double3):
        system, rhs = double3
        assert system.k == 2 and rhs.shape == (system.dim,)

    def test_symmetric(self, double3):
        A = assemble_full(double3.system)
        assert abs(A - A.T).max() == 0

    def test_schur_chain_matches_formulas(self, double3):
        alpha = 1e-2
        M, L, Q = (x.toarray() for x in (double3.ops.M, double3.ops.L, double3.ops.Q))
        chain = schur_chain(double3.system)
        np.testing.assert_allclose(chain.S[1], M / alpha, rtol=1e-10, atol=1e-10 * np.abs(M).max() / alpha)
        S2 = Q + alpha * L @ np.linalg.solve(M, L)
        assert np.abs(chain.S[2] - S2).max() <= 1e-10 * np.abs(S2).max()

    def test_rhs_from_forward_problem(self, double3):
        ops, n = double3.ops, double3.mesh.n_vertices
        f = interpolate(double3.mesh, true_control)
        u_hat = sp.linalg.spsolve(ops.L.tocsc(), -(ops.M @ f))
        np.testing.assert_allclose(double3.rhs[2 * n:], ops.Q @ u_hat, rtol=1e-10, atol=1e-14)
        assert not np.any(double3.rhs[: 2 * n])

    @pytest.mark.parametrize("h", [2.0**-3, 2.0**-4])
    def test_ideal_factorized_converges_fast(self, h):
        p = build_double_saddle(h, 1e-2)
        chain = schur_chain(p.system)
        P = Preconditioner(PreconditionerKind.FACTORIZED, ideal_blocks(chain), p.system)
        res = minres_solve(assemble_full(p.system), P, p.rhs, tol=1e-10)
        assert res.converged and res.iterations <= 3

    def test_blocks(self, double3):
        blocks = double_blocks(double3)
        assert [b.name for b in blocks] == ["A0hat", "S1hat", "S2hat"]
        for b in blocks:
            sym, pos = spd_probe(b, b.n, probes=20, sym_tol=1e-9)
            assert sym and pos

    def test_exact_mass_option(self, double3):
        v = np.random.default_rng(0).standard_normal(double3.mesh.n_vertices)
        M = double3.ops.M.toarray()
        got = double_blocks(double3, cheb_m=None)[0](v)
        np.testing.assert_allclose(got, np.linalg.solve(1e-2 * M, v), rtol=1e-10)

    def test_invalid_alpha(self):
        with pytest.raises(ValueError):
            build_double_saddle(0.25, 0.0)

    def test_frozen_iterations(self):
        # regression pins for h = 2^-4, alpha = 1e-2, Chebyshev(5)
        p = build_double_saddle(2.0**-4, 1e-2)
        got = {}
        for kind in KINDS:
            for rule in ("relative", "backward"):
                res, _ = solve_problem(p, double_blocks(p), kind, stopping=rule)
                got[kind.value, rule] = res.iterations
        assert got == {("PD", "relative"): 33, ("PD", "backward"): 22,
                       ("Pk", "relative"): 14, ("Pk", "backward"): 10}


class TestQuadruple:
    def test_symmetric_and_signs(self, quad3):
        A = assemble_full(quad3.system)
        assert abs(A - A.T).max() == 0
        off = quad3.system.offsets
        signs = [np.sign(A[off[j], off[j]]) for j in range(5)]
        assert signs == [1, -1, 1, -1, 1]

    def test_sizes(self, quad3):
        n = quad3.mesh.n_vertices
        n_inactive = int(np.sum(~quad3.active))
        assert quad3.system.sizes == (n, n, n, n, n_inactive)

    def test_first_schur_complement(self, quad3):
        alpha, lam, rho = 1e-6, 1e-8, 1e-5
        M, L = quad3.ops.M.toarray(), quad3.ops.L.toarray()
        S1 = schur_chain(quad3.system).S[1]
        ref = lam / (1 + rho * lam) * L + M / (alpha + lam)
        assert np.abs(S1 - ref).max() <= 1e-10 * np.abs(ref).max()

    @pytest.mark.parametrize("alpha", [1e-6, 1e-8, 1e-10])
    @pytest.mark.parametrize("lam", [1e-6, 1e-8, 1e-10])
    def test_chain_spd(self, alpha, lam):
        p = build_quadruple_saddle(2.0**-3, alpha, lam)
        chain = schur_chain(p.system)
        assert chain.k == 4

    def test_exact_solution(self, quad3):
        r = quad3.system @ quad3.exact_solution - quad3.rhs
        assert np.abs(r).max() == 0

    def test_blocks_psd(self, quad3):
        assert all(is_psd(a) for a in quad3.system.A[1:])

    def test_blocks_and_counts(self, quad3):
        blocks = quadruple_blocks(quad3)
        assert [b.name for b in blocks] == ["A0hat", "S1hat", "S2hat", "S3hat", "S4hat"]
        apply_pk_inverse(blocks, quad3.system, np.ones(quad3.dof))
        assert blocks.counts == [2, 2, 2, 2, 1]

    def test_factorized_spd(self, quad3):
        blocks = quadruple_blocks(quad3)
        sym, pos = spd_probe(lambda v: apply_pk_inverse(blocks, quad3.system, v), quad3.dof,
                             probes=20, sym_tol=1e-8)
        assert sym and pos

    def test_empty_inactive(self):
        with pytest.raises(EmptyInactiveSet):
            build_quadruple_saddle(0.25, 1e-6, 1e-8, active_radius=2.0)

    def test_invalid(self):
        with pytest.raises(ValueError):
            build_quadruple_saddle(0.25, 1e-6, 0.0)


class TestRunners:
    def test_double_rows(self):
        rows = run_double([0.25], [1.0])
        assert [r[3] for r in rows] == ["PD", "Pk"]
        assert all(r[5] for r in rows) and rows[0][2] == 75

    def test_cheb_rows(self):
        rows = run_cheb_sweep([0.25], [1, 5])
        assert [(r[1], r[2]) for r in rows] == [(1, "PD"), (1, "Pk"), (5, "PD"), (5, "Pk")]

    def test_quadruple_rows(self):
        rows = run_quadruple([0.25], [1e-6], [1e-8])
        assert len(rows) == 2 and all(r[6] for r in rows)
        assert rows[1][5] <= rows[0][5]
