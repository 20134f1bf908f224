"""Dense/sparse numerical kernels.

Shifted sparse solves with factorization reuse, small dense Sylvester and
Lyapunov solvers (Schur-based, via scipy), small eigendecompositions with
left vectors, and spectral norms of low-rank products evaluated through the
small Gram eigenproblem.
"""

import numpy as np
import scipy.linalg as spla
import scipy.sparse as sps
from scipy.sparse.linalg import splu

from .errors import (
    DimensionMismatch,
    EigFailure,
    NonHermitianRHS,
    SingularShiftedMatrix,
    SpectraOverlap,
)

__all__ = [
    "ShiftedFactorization",
    "FactorizationCache",
    "shifted_solve",
    "solve_small_sylvester",
    "solve_small_lyapunov",
    "small_eig",
    "gram_norm2",
]


def _as_csc(A):
    if sps.issparse(A):
        return A.tocsc()
    return sps.csc_matrix(np.atleast_2d(A))


class ShiftedFactorization:
    """Reusable LU factorization of (A + shift*E).

    Singularity is reported at construction time.  The factorization is
    read-only afterwards and may serve any number of right-hand sides.
    """

    def __init__(self, A, E, shift):
        A = _as_csc(A)
        E = _as_csc(E)
        if A.shape != E.shape or A.shape[0] != A.shape[1]:
            raise DimensionMismatch(
                f"A {A.shape} and E {E.shape} must be square and equal-sized"
            )
        self.n = A.shape[0]
        self.shift = complex(shift)
        M = (A + shift * E).tocsc()
        try:
            self._lu = splu(M)
        except RuntimeError as exc:  # SuperLU signals exact singularity this way
            raise SingularShiftedMatrix(
                f"A + ({shift})*E is singular: {exc}"
            ) from exc
        # SuperLU happily factors some exactly singular matrices into a U with
        # a zero pivot; probe the diagonal of U.
        du = self._lu.U.diagonal()
        if not np.all(np.isfinite(du)) or np.min(np.abs(du)) == 0.0:
            raise SingularShiftedMatrix(f"A + ({shift})*E has a zero pivot")

    def solve(self, rhs):
        rhs = np.atleast_2d(np.asarray(rhs))
        if rhs.shape[0] != self.n:
            raise DimensionMismatch(
                f"rhs has {rhs.shape[0]} rows, expected {self.n}"
            )
        x = self._lu.solve(np.asarray(rhs, dtype=self._lu.U.dtype))
        if not np.all(np.isfinite(x)):
            raise SingularShiftedMatrix(
                f"solve with shift {self.shift} produced non-finite values"
            )
        return x


class FactorizationCache:
    """Cache of ShiftedFactorization keyed by exact complex shift value."""

    def __init__(self, A, E):
        self._A = _as_csc(A)
        self._E = _as_csc(E)
        self._store = {}
        self.factor_count = 0

    def get(self, shift):
        key = complex(shift)
        fac = self._store.get(key)
        if fac is None:
            fac = ShiftedFactorization(self._A, self._E, key)
            self._store[key] = fac
            self.factor_count += 1
        return fac

    def solve(self, shift, rhs):
        return self.get(shift).solve(rhs)


def shifted_solve(A, E, shift, rhs):
    """Solve (A + shift*E) X = rhs for a square sparse pencil."""
    return ShiftedFactorization(A, E, shift).solve(rhs)


def _check_separation(lam_f, lam_g, scale):
    gap = np.min(np.abs(lam_f[:, None] - lam_g[None, :]))
    if gap <= 1e-12 * scale:
        raise SpectraOverlap(
            f"spectra separated by {gap:.3e} <= 1e-12 * {scale:.3e}"
        )


def solve_small_sylvester(F, G, H):
    """Solve F X - X G + H = 0 for dense F (p x p), G (q x q), H (p x q).

    Schur-based (Bartels-Stewart via scipy).  Raises SpectraOverlap when F
    and G share an eigenvalue within 1e-12 of the spectral scale.
    """
    F = np.atleast_2d(np.asarray(F))
    G = np.atleast_2d(np.asarray(G))
    H = np.atleast_2d(np.asarray(H))
    if F.shape[0] != F.shape[1] or G.shape[0] != G.shape[1]:
        raise DimensionMismatch("F and G must be square")
    if H.shape != (F.shape[0], G.shape[0]):
        raise DimensionMismatch(
            f"H has shape {H.shape}, expected {(F.shape[0], G.shape[0])}"
        )
    lam_f = spla.eigvals(F)
    lam_g = spla.eigvals(G)
    scale = max(np.max(np.abs(lam_f), initial=0.0), np.max(np.abs(lam_g), initial=0.0), 1.0)
    _check_separation(lam_f, lam_g, scale)
    # scipy solves A X + X B = Q; here A=F, B=-G, Q=-H.
    try:
        return spla.solve_sylvester(F, -G, -H)
    except np.linalg.LinAlgError as exc:
        raise SpectraOverlap(str(exc)) from exc


def solve_small_lyapunov(F, Q):
    """Solve F* X + X F + Q = 0 for Hermitian Q; returns Hermitian X.

    The result is symmetrized to suppress roundoff drift.
    """
    F = np.atleast_2d(np.asarray(F))
    Q = np.atleast_2d(np.asarray(Q))
    if F.shape[0] != F.shape[1] or Q.shape != F.shape:
        raise DimensionMismatch("F, Q must be square and equal-sized")
    qnorm = spla.norm(Q)
    if qnorm > 0 and spla.norm(Q - Q.conj().T) > 1e-10 * qnorm:
        raise NonHermitianRHS("Q deviates from Hermitian beyond 1e-10 relative")
    lam = spla.eigvals(F)
    scale = max(np.max(np.abs(lam), initial=0.0), 1.0)
    _check_separation(lam.conj(), -lam, 2.0 * scale)
    # scipy solve_continuous_lyapunov(a, q) solves a x + x a^H = q.
    X = spla.solve_continuous_lyapunov(F.conj().T, -Q)
    return 0.5 * (X + X.conj().T)


def small_eig(F, E=None):
    """Eigendecomposition of F (or of the pencil (F, E)).

    Returns (eigenvalues, right_vectors, left_rows) with
    F @ right = right @ diag(w) (pencil form E^{-1} F when E is given) and
    left_rows = inv(right), so that residues are left_rows[l] @ B.
    """
    F = np.atleast_2d(np.asarray(F))
    if E is not None:
        E = np.atleast_2d(np.asarray(E))
        if E.shape != F.shape:
            raise DimensionMismatch("E must match F")
        try:
            F = spla.solve(E, F)
        except spla.LinAlgError as exc:
            raise EigFailure(f"singular E in pencil eig: {exc}") from exc
    try:
        w, T = spla.eig(F)
        Tl = spla.inv(T)
    except (spla.LinAlgError, np.linalg.LinAlgError) as exc:
        raise EigFailure(str(exc)) from exc
    return w, T, Tl


def gram_norm2(Z, M=None, Z2=None):
    """Spectral norm of Z @ M @ Z2* without forming the large product.

    Z2 defaults to Z (the symmetric case) and M to the identity.  Only Gram
    matrices of the thin factors enter, so the cost is governed by the
    factor widths.
    """
    Z = np.atleast_2d(np.asarray(Z))
    if Z2 is None:
        Z2 = Z
    else:
        Z2 = np.atleast_2d(np.asarray(Z2))
    r, r2 = Z.shape[1], Z2.shape[1]
    if M is None:
        if r != r2:
            raise DimensionMismatch("identity middle needs equal factor widths")
        M = np.eye(r)
    else:
        M = np.atleast_2d(np.asarray(M))
        if M.shape != (r, r2):
            raise DimensionMismatch(
                f"middle has shape {M.shape}, expected {(r, r2)}"
            )
    if r == 0 or r2 == 0:
        return 0.0
    G1 = Z.conj().T @ Z
    G2 = Z2.conj().T @ Z2
    # ||Z M Z2*||^2 = lambda_max(M* G1 M G2); the product is similar to a PSD
    # matrix so its eigenvalues are real and nonnegative up to roundoff.
    vals = spla.eigvals(M.conj().T @ G1 @ M @ G2)
    return float(np.sqrt(max(np.max(vals.real, initial=0.0), 0.0)))
