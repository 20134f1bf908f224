import numpy as np
import pytest
import scipy.linalg as spla
import scipy.sparse as sps

from uadi.errors import (
    DimensionMismatch,
    NonHermitianRHS,
    SingularShiftedMatrix,
    SpectraOverlap,
)
from uadi.linalg import (
    FactorizationCache,
    gram_norm2,
    shifted_solve,
    small_eig,
    solve_small_lyapunov,
    solve_small_sylvester,
)


class TestShiftedSolve:
    def test_scalar(self):
        x = shifted_solve(np.array([[-1.0]]), np.array([[1.0]]), -1.0, [[1.0]])
        assert x[0, 0] == pytest.approx(-0.5)

    def test_singular_shift(self):
        with pytest.raises(SingularShiftedMatrix):
            shifted_solve(np.array([[-2.0]]), np.array([[1.0]]), 2.0, [[4.0]])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            shifted_solve(np.eye(3), np.eye(2), -1.0, np.ones((3, 1)))
        with pytest.raises(DimensionMismatch):
            shifted_solve(-np.eye(3), np.eye(3), -1.0, np.ones((2, 1)))

    def test_random_sparse_residual(self, rng):
        n = 50
        A = sps.random(n, n, density=0.2, random_state=7).tocsc()
        A = A - sps.eye(n) * (abs(A).sum() / n + 1.0)
        E = sps.eye(n, format="csc") + 0.01 * sps.random(n, n, density=0.1, random_state=8)
        rhs = rng.standard_normal((n, 2))
        for shift in (-0.3, -1.0 + 2.0j):
            X = shifted_solve(A, E, shift, rhs)
            res = (A + shift * E) @ X - rhs
            assert np.linalg.norm(res) / np.linalg.norm(rhs) <= 1e-10

    def test_cache_reuses_factorizations(self):
        A = sps.csc_matrix(-np.eye(4))
        E = sps.eye(4, format="csc")
        cache = FactorizationCache(A, E)
        cache.solve(-1.0, np.ones((4, 1)))
        cache.solve(-1.0, np.ones((4, 2)))
        cache.solve(-2.0, np.ones((4, 1)))
        assert cache.factor_count == 2


class TestSmallSylvester:
    def test_scalar(self):
        x = solve_small_sylvester([[-2.0]], [[1.0]], [[3.0]])
        assert x[0, 0] == pytest.approx(1.0)

    def test_spectra_overlap(self):
        with pytest.raises(SpectraOverlap):
            solve_small_sylvester([[-1.0]], [[-1.0]], [[1.0]])

    def test_residual_substitution(self, rng):
        F = rng.standard_normal((8, 8))
        F -= (np.max(spla.eigvals(F).real) + 0.5) * np.eye(8)
        G = rng.standard_normal((5, 5))
        G += (0.5 - np.min(spla.eigvals(G).real)) * np.eye(5)
        H = rng.standard_normal((8, 5))
        X = solve_small_sylvester(F, G, H)
        res = F @ X - X @ G + H
        scale = (spla.norm(F) + spla.norm(G)) * spla.norm(X) + spla.norm(H)
        assert spla.norm(res) <= 1e-11 * scale

    def test_many_random_instances(self, rng):
        for k in range(1000):
            p, q = rng.integers(1, 5), rng.integers(1, 5)
            F = rng.standard_normal((p, p)) - 2.0 * np.eye(p)
            G = rng.standard_normal((q, q)) + 2.0 * np.eye(q)
            if np.min(np.abs(spla.eigvals(F)[:, None] - spla.eigvals(G)[None, :])) < 1e-6:
                continue
            H = rng.standard_normal((p, q))
            X = solve_small_sylvester(F, G, H)
            res = F @ X - X @ G + H
            scale = (spla.norm(F) + spla.norm(G)) * max(spla.norm(X), 1e-300) + spla.norm(H)
            assert spla.norm(res) <= 1e-11 * scale


class TestSmallLyapunov:
    def test_scalar(self):
        assert solve_small_lyapunov([[-1.0]], [[2.0]])[0, 0] == pytest.approx(1.0)
        assert solve_small_lyapunov([[-1.0]], [[0.0]])[0, 0] == 0.0

    def test_positive_definite(self, rng):
        F = rng.standard_normal((4, 4))
        F -= (np.max(spla.eigvals(F).real) + 0.5) * np.eye(4)
        X = solve_small_lyapunov(F, np.eye(4))
        assert np.min(spla.eigvalsh(X)) > 0
        res = F.T @ X + X @ F + np.eye(4)
        assert spla.norm(res) <= 1e-11 * max(spla.norm(X) * spla.norm(F), 1.0)

    def test_hermitian_enforced(self, rng):
        for k in range(1000):
            p = rng.integers(1, 5)
            F = rng.standard_normal((p, p)) - 2.0 * np.eye(p)
            Q0 = rng.standard_normal((p, p))
            Q = Q0 @ Q0.T
            X = solve_small_lyapunov(F, Q)
            assert np.array_equal(X, X.T)
            res = F.T @ X + X @ F + Q
            scale = 2 * spla.norm(F) * max(spla.norm(X), 1e-300) + spla.norm(Q)
            assert spla.norm(res) <= 1e-11 * scale

    def test_rejects_asymmetric_rhs(self):
        with pytest.raises(NonHermitianRHS):
            solve_small_lyapunov(-np.eye(2), np.array([[1.0, 1.0], [0.0, 1.0]]))

    def test_spectra_overlap(self):
        F = np.diag([1.0, -1.0])  # lambda_1 + conj(lambda_2) = 0
        with pytest.raises(SpectraOverlap):
            solve_small_lyapunov(F, np.eye(2))


class TestSmallEig:
    def test_rotation_block(self):
        w, _, _ = small_eig(np.array([[-1.0, 10.0], [-10.0, -1.0]]))
        assert sorted(np.round(w.imag, 8)) == [-10.0, 10.0]
        np.testing.assert_allclose(w.real, [-1.0, -1.0], atol=1e-12)

    def test_identity(self):
        w, _, _ = small_eig(np.eye(2))
        np.testing.assert_allclose(np.sort(w.real), [1.0, 1.0])

    def test_companion_roots(self):
        # companion matrix of (s+1)(s+2)(s+3) = s^3 + 6 s^2 + 11 s + 6
        F = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [-6.0, -11.0, -6.0]])
        w, T, Tl = small_eig(F)
        np.testing.assert_allclose(np.sort(w.real), [-3.0, -2.0, -1.0], atol=1e-12)
        np.testing.assert_allclose(Tl @ T, np.eye(3), atol=1e-12)

    def test_pencil_form(self, rng):
        F = rng.standard_normal((5, 5))
        E = np.eye(5) + 0.1 * rng.standard_normal((5, 5))
        w, T, _ = small_eig(F, E)
        np.testing.assert_allclose(
            np.sort_complex(w), np.sort_complex(spla.eigvals(spla.solve(E, F))),
            atol=1e-10,
        )


class TestGramNorm:
    def test_rank_one(self):
        assert gram_norm2(np.array([[1.0], [0.0]]), np.array([[2.0]])) == pytest.approx(2.0)

    def test_zero(self):
        assert gram_norm2(np.zeros((5, 2))) == 0.0
        assert gram_norm2(np.zeros((5, 0))) == 0.0

    def test_against_dense_norm(self, rng):
        Z = rng.standard_normal((100, 3))
        M = rng.standard_normal((3, 3))
        dense = np.linalg.norm(Z @ M @ Z.T, 2)
        assert gram_norm2(Z, M) == pytest.approx(dense, rel=1e-10)

    def test_two_sided_against_dense(self, rng):
        for n in (10, 60, 200):
            Z = rng.standard_normal((n, 3))
            Z2 = rng.standard_normal((n // 2, 4))
            M = rng.standard_normal((3, 4))
            dense = np.linalg.norm(Z @ M @ Z2.T, 2)
            assert gram_norm2(Z, M, Z2) == pytest.approx(dense, rel=1e-10)

    def test_dimension_check(self):
        with pytest.raises(DimensionMismatch):
            gram_norm2(np.ones((4, 2)), np.ones((3, 2)))
