"""Symmetric eigendecomposition via cyclic Jacobi rotations.

The uncertainty-penalty matrices in this library are small (their size
is the uncertainty dimension), so a dependency-free Jacobi sweep is
accurate and fast enough. The factorization convention is
``Q = L.T @ diag(d) @ L`` with the rows of ``L`` the eigenvectors and
``d`` sorted descending, so ``d[0]`` is the largest eigenvalue.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_SYM_TOL = 1e-10
_OFF_TOL = 1e-12
_MAX_SWEEPS = 100


class JacobiConvergenceError(RuntimeError):
    """Raised when the rotation sweeps fail to reach the off-diagonal tolerance."""


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Orthogonal factor and sorted eigenvalues of a symmetric matrix.

    ``L`` is orthogonal with eigenvector rows; ``d`` holds eigenvalues in
    descending order, so ``L.T @ np.diag(d) @ L`` reconstructs the input.
    """

    L: np.ndarray
    d: np.ndarray

    @property
    def m(self) -> int:
        return self.d.shape[0]

    def reconstruct(self) -> np.ndarray:
        return self.L.T @ (self.d[:, None] * self.L)


def eigendecompose(Q: np.ndarray, sym_tol: float = _SYM_TOL) -> SpectralDecomposition:
    """Diagonalize a symmetric matrix with cyclic Jacobi rotations.

    Eigenvalues come back sorted descending (stable sort, so ties keep
    the order in which the sweep produced them). Every eigenvector row
    is canonically oriented: its first component of magnitude above
    1e-12 is made positive. Identical input bytes therefore yield
    identical output bytes.

    Raises ValueError for non-symmetric input and
    JacobiConvergenceError if 100 sweeps do not reach the off-diagonal
    Frobenius tolerance.
    """
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {Q.shape}")
    asym = float(np.max(np.abs(Q - Q.T))) if Q.size else 0.0
    if asym > sym_tol:
        raise ValueError(f"matrix is not symmetric: max|Q - Q.T| = {asym:.3e}")

    m = Q.shape[0]
    A = 0.5 * (Q + Q.T)
    V = np.eye(m)
    if m > 1:
        tol = _OFF_TOL * max(1.0, float(np.linalg.norm(A)))
        for _ in range(_MAX_SWEEPS):
            off = float(np.linalg.norm(A - np.diag(np.diag(A))))
            if off <= tol:
                break
            for p in range(m - 1):
                for q in range(p + 1, m):
                    apq = A[p, q]
                    if apq == 0.0:
                        continue
                    tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                    if tau >= 0.0:
                        t = 1.0 / (tau + math.sqrt(1.0 + tau * tau))
                    else:
                        t = -1.0 / (-tau + math.sqrt(1.0 + tau * tau))
                    c = 1.0 / math.sqrt(1.0 + t * t)
                    s = t * c
                    # A <- J.T A J and V <- V J with the (p, q) rotation
                    Ap, Aq = A[:, p].copy(), A[:, q].copy()
                    A[:, p] = c * Ap - s * Aq
                    A[:, q] = s * Ap + c * Aq
                    Ap, Aq = A[p, :].copy(), A[q, :].copy()
                    A[p, :] = c * Ap - s * Aq
                    A[q, :] = s * Ap + c * Aq
                    A[p, q] = 0.0
                    A[q, p] = 0.0
                    Vp, Vq = V[:, p].copy(), V[:, q].copy()
                    V[:, p] = c * Vp - s * Vq
                    V[:, q] = s * Vp + c * Vq
        else:
            raise JacobiConvergenceError(
                f"Jacobi sweeps did not converge in {_MAX_SWEEPS} iterations"
            )

    d_raw = np.diag(A).copy()
    order = np.argsort(-d_raw, kind="stable")
    d = d_raw[order]
    L = V[:, order].T.copy()
    _orient_rows(L)
    d.flags.writeable = False
    L.flags.writeable = False
    return SpectralDecomposition(L=L, d=d)


def _orient_rows(L: np.ndarray, tol: float = 1e-12) -> None:
    for i in range(L.shape[0]):
        row = L[i]
        for v in row:
            if abs(v) > tol:
                if v < 0.0:
                    row *= -1.0
                break
