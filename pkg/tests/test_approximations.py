import math

import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse as sp

from multisaddle.approximations import (
    ChebyshevOp,
    DirectInverse,
    LMinvLOp,
    MatchingSchurOp,
    S3HatOp,
    ScaledOp,
    chebyshev_apply,
    matching_s2_apply,
    matching_s4_apply,
    matching_s4_op,
    s3hat_apply,
)
from multisaddle.errors import DimensionMismatch, EmptyInactiveSet, UnsupportedElement
from multisaddle.fem import active_set_disc, assemble, disc_mesh, mass_spectral_bounds, structured_square_mesh
from multisaddle.preconditioners import operator_matrix, spd_probe

SQRT2 = math.sqrt(2.0)


@pytest.fixture(scope="module")
def square4():
    return assemble(structured_square_mesh(2.0**-4))


@pytest.fixture(scope="module")
def disc4():
    mesh = disc_mesh(2.0**-4)
    return mesh, assemble(mesh)


def rand(n, seed=0):
    return np.random.default_rng(seed).standard_normal(n)


class TestChebyshev:
    def test_diagonal_exact(self):
        M = sp.diags([1.0, 2.0, 4.0]).tocsr()
        v = np.array([1.0, 1.0, 1.0])
        for m in (1, 3, 7):
            np.testing.assert_allclose(ChebyshevOp(M, m, bounds=(1.0, 1.0))(v), [1.0, 0.5, 0.25])

    def test_one_step_is_scaled_jacobi(self, square4):
        M = square4.M
        v = rand(M.shape[0])
        ref = v / M.diagonal() / 1.25
        np.testing.assert_allclose(chebyshev_apply(ChebyshevOp(M, 1), v), ref, rtol=1e-15)

    def test_error_decreases(self, square4):
        M = square4.M
        n = M.shape[0]
        V = np.random.default_rng(1).standard_normal((n, 50))
        exact = sla.solve(M.toarray(), V)
        errs = []
        for m in range(1, 21):
            E = ChebyshevOp(M, m)(V) - exact
            errs.append(np.max(np.linalg.norm(M @ E, axis=0) / np.linalg.norm(V, axis=0)))
        assert all(b <= a * (1 + 1e-12) for a, b in zip(errs, errs[1:]))
        assert errs[-1] < 1e-8

    def test_spd(self, square4):
        op = ChebyshevOp(square4.M, 5)
        sym, pos = spd_probe(op, op.n, probes=100, sym_tol=1e-9)
        assert sym and pos

    def test_block_vectors(self, square4):
        op = ChebyshevOp(square4.M, 4)
        V = np.random.default_rng(2).standard_normal((op.n, 3))
        np.testing.assert_allclose(op(V)[:, 1], op(V[:, 1]), rtol=1e-14)

    def test_invalid(self, square4):
        with pytest.raises(ValueError):
            ChebyshevOp(square4.M, 0)
        with pytest.raises(ValueError):
            ChebyshevOp(square4.M, 3, bounds=(0.0, 2.0))
        with pytest.raises(DimensionMismatch):
            ChebyshevOp(square4.M, 3)(np.ones(3))


class TestMassBounds:
    def test_p1(self):
        assert mass_spectral_bounds("P1") == (0.5, 2.0)

    def test_unsupported(self):
        with pytest.raises(UnsupportedElement):
            mass_spectral_bounds("P2")

    @pytest.mark.parametrize("h", [2.0**-4, 2.0**-5])
    def test_containment(self, h):
        M = assemble(structured_square_mesh(h)).M.toarray()
        d = 1.0 / np.sqrt(np.diag(M))
        mu = np.linalg.eigvalsh(d[:, None] * M * d[None, :])
        assert mu.min() >= 0.5 - 1e-12 and mu.max() <= 2.0 + 1e-12

    def test_disc_containment(self, disc4):
        M = disc4[1].M.toarray()
        d = 1.0 / np.sqrt(np.diag(M))
        mu = np.linalg.eigvalsh(d[:, None] * M * d[None, :])
        assert mu.min() >= 0.5 - 1e-12 and mu.max() <= 2.0 + 1e-12

    def test_one_by_one(self):
        lo, hi = mass_spectral_bounds("P1")
        assert lo <= 1.0 <= hi


class TestMatching:
    def test_zero_stiffness(self, square4):
        M = square4.M
        v = rand(M.shape[0])
        got = matching_s2_apply(MatchingSchurOp(M, 0 * square4.K, 1e-2), v)
        np.testing.assert_allclose(got, SQRT2 * sla.solve(M.toarray(), v), rtol=1e-10)

    @pytest.mark.parametrize("alpha,lam", [(1e-6, 1e-8), (1e-8, 1e-10)])
    def test_bound_disc(self, disc4, alpha, lam):
        _, ops = disc4
        gamma = alpha + lam
        M, K = ops.M.toarray(), ops.K.toarray()
        S = M + gamma * K @ np.linalg.solve(M, K)
        Shat = MatchingSchurOp(ops.M, ops.K, gamma).forward_matrix()
        mu = sla.eigh(0.5 * (S + S.T), Shat, eigvals_only=True)
        assert mu.min() >= 1 / SQRT2 - 1e-8 and mu.max() <= SQRT2 + 1e-8

    def test_small_parameter_limit(self, square4):
        # the gap to sqrt(2) shrinks like sqrt(gamma)
        M, K = square4.M.toarray(), square4.K.toarray()
        gaps = []
        for gamma in (1e-8, 1e-10, 1e-12, 1e-16):
            S = M + gamma * K @ np.linalg.solve(M, K)
            Shat = MatchingSchurOp(square4.M, square4.K, gamma).forward_matrix()
            mu = sla.eigh(0.5 * (S + S.T), Shat, eigvals_only=True)
            gaps.append(np.abs(mu - SQRT2).max())
        assert all(b < a for a, b in zip(gaps, gaps[1:]))
        assert gaps[2] < 3e-2 and gaps[3] < 3e-4

    def test_apply_matches_forward(self, square4):
        op = MatchingSchurOp(square4.M, square4.K, 1e-3)
        v = rand(op.n, 3)
        np.testing.assert_allclose(op.forward_matrix() @ op(v), v, rtol=1e-8, atol=1e-10)

    def test_negative_gamma(self, square4):
        with pytest.raises(ValueError):
            MatchingSchurOp(square4.M, square4.K, -1.0)


class TestS3Hat:
    def test_zero_stiffness_exact_mass(self, square4):
        M = square4.M
        op = S3HatOp(DirectInverse(M), M, 0 * square4.K, 1e-2)
        v = rand(M.shape[0])
        np.testing.assert_allclose(s3hat_apply(op, v), sla.solve(M.toarray(), v), rtol=1e-10)

    def test_zero_gamma(self, square4):
        M = square4.M
        op = S3HatOp(DirectInverse(M), M, square4.K, 0.0)
        v = rand(M.shape[0])
        np.testing.assert_allclose(op(v), sla.solve(M.toarray(), v), rtol=1e-10)

    def test_formula(self, square4):
        M, K = square4.M.toarray(), square4.K.toarray()
        Minv = np.linalg.inv(M)
        ref = Minv @ (M + 1e-2 * K @ Minv @ K) @ Minv
        got = operator_matrix(S3HatOp(DirectInverse(square4.M), square4.M, square4.K, 1e-2), M.shape[0])
        assert np.abs(got - ref).max() <= 1e-9 * np.abs(ref).max()

    def test_symmetric_with_chebyshev(self, square4):
        op = S3HatOp(ChebyshevOp(square4.M, 5), square4.M, square4.K, 1e-2)
        sym, pos = spd_probe(op, op.n, probes=100, sym_tol=1e-9)
        assert sym and pos

    def test_three_mass_applications(self, square4):
        calls = []

        def minv(v):
            calls.append(1)
            return v

        S3HatOp(minv, square4.M, square4.K, 1e-2)(np.ones(square4.M.shape[0]))
        assert len(calls) == 3


class TestMatchingInactive:
    def test_all_inactive_equals_full(self, disc4):
        _, ops = disc4
        n = ops.M.shape[0]
        v = rand(n)
        full = MatchingSchurOp(ops.M, ops.K, 1e-4)(v)
        restricted = matching_s4_apply(matching_s4_op(ops.M, ops.K, np.zeros(n, bool), 1e-4), v)
        np.testing.assert_allclose(restricted, full, rtol=1e-12)

    def test_zero_stiffness(self, disc4):
        mesh, ops = disc4
        active = active_set_disc(mesh)
        op = matching_s4_op(ops.M, 0 * ops.K, active, 1e-4)
        v = rand(op.n)
        M_ii = ops.M.toarray()[np.ix_(~active, ~active)]
        np.testing.assert_allclose(op(v), SQRT2 * np.linalg.solve(M_ii, v), rtol=1e-10)

    def test_spd_probe(self, disc4):
        mesh, ops = disc4
        op = matching_s4_op(ops.M, ops.K, active_set_disc(mesh), 1e-6 + 1e-8)
        sym, pos = spd_probe(op, op.n, probes=100, sym_tol=1e-9)
        assert sym and pos

    def test_empty_inactive(self, disc4):
        _, ops = disc4
        with pytest.raises(EmptyInactiveSet):
            matching_s4_op(ops.M, ops.K, np.ones(ops.M.shape[0], bool), 1e-4)


class TestDirect:
    def test_lminvl(self, square4):
        M, L = square4.M.toarray(), square4.L.toarray()
        alpha = 1e-2
        v = rand(M.shape[0])
        ref = np.linalg.solve(alpha * L @ np.linalg.solve(M, L), v)
        got = LMinvLOp(square4.L, square4.M, alpha)(v)
        assert np.linalg.norm(got - ref) <= 1e-9 * np.linalg.norm(ref)

    def test_scaled(self, square4):
        M = square4.M
        v = rand(M.shape[0])
        np.testing.assert_allclose(ScaledOp(DirectInverse(M), 3.0)(v), DirectInverse(M, 1 / 3.0)(v),
                                   rtol=1e-13)
