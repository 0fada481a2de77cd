"""Dense linear algebra used by the spectral machinery.

Everything here works on small dense ``numpy`` arrays (a few hundred rows at
most).  The symmetric eigensolver is the classical cyclic Jacobi method,
``O(n^3)`` flops per sweep; the sweep kernel is compiled with numba.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

SYMMETRY_TOL = 1e-10
JACOBI_TOL = 1e-14
MAX_SWEEPS = 50


class NotPositiveDefiniteError(ValueError):
    """Raised by :func:`cholesky` when a pivot is not positive."""

    def __init__(self, pivot: int, value: float):
        super().__init__(f"matrix is not positive definite (pivot {pivot}: {value:.3e})")
        self.pivot = pivot
        self.value = value


class ConvergenceError(RuntimeError):
    pass


def asymmetry(a: np.ndarray) -> float:
    """Relative asymmetry ``||A - A^T||_F / ||A||_F`` (0 for the zero matrix)."""
    a = np.asarray(a, dtype=float)
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(a - a.T) / scale)


def _require_symmetric(a: np.ndarray, what: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{what} must be square, got shape {a.shape}")
    rel = asymmetry(a)
    if rel > SYMMETRY_TOL:
        raise ValueError(f"{what} is not symmetric (relative asymmetry {rel:.3e})")
    return 0.5 * (a + a.T)


def cholesky(a: np.ndarray) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == a``.

    Raises
    ------
    NotPositiveDefiniteError
        If a pivot is nonpositive; ``err.pivot`` is the failing row.
    """
    a = _require_symmetric(a)
    n = a.shape[0]
    L = np.zeros_like(a)
    for k in range(n):
        row = L[k, :k]
        d = a[k, k] - row @ row
        if not d > 1e-15 * abs(a[k, k]):
            raise NotPositiveDefiniteError(k, float(d))
        L[k, k] = np.sqrt(d)
        if k + 1 < n:
            L[k + 1:, k] = (a[k + 1:, k] - L[k + 1:, :k] @ row) / L[k, k]
    return L


def solve_lower(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Forward substitution for ``L x = b`` (``b`` may be a matrix)."""
    b = np.asarray(b, dtype=float)
    x = np.zeros_like(b)
    for i in range(L.shape[0]):
        x[i] = (b[i] - L[i, :i] @ x[:i]) / L[i, i]
    return x


def solve_upper(U: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Back substitution for ``U x = b``."""
    b = np.asarray(b, dtype=float)
    x = np.zeros_like(b)
    for i in range(U.shape[0] - 1, -1, -1):
        x[i] = (b[i] - U[i, i + 1:] @ x[i + 1:]) / U[i, i]
    return x


@numba.njit(cache=True)
def _jacobi_sweep(A, V):
    # one cyclic-by-row sweep; A is kept exactly symmetric
    n = A.shape[0]
    for p in range(n - 1):
        for q in range(p + 1, n):
            apq = A[p, q]
            if apq == 0.0:
                continue
            theta = (A[q, q] - A[p, p]) / (2.0 * apq)
            if abs(theta) > 1e150:
                t = 0.5 / theta
            else:
                t = (1.0 if theta >= 0.0 else -1.0) / (abs(theta) + np.sqrt(theta * theta + 1.0))
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            for k in range(n):
                if k == p or k == q:
                    continue
                akp = A[k, p]
                akq = A[k, q]
                A[k, p] = c * akp - s * akq
                A[k, q] = s * akp + c * akq
                A[p, k] = A[k, p]
                A[q, k] = A[k, q]
            A[p, p] -= t * apq
            A[q, q] += t * apq
            A[p, q] = 0.0
            A[q, p] = 0.0
            for k in range(n):
                vkp = V[k, p]
                vkq = V[k, q]
                V[k, p] = c * vkp - s * vkq
                V[k, q] = s * vkp + c * vkq


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    # first component that is not negligible is made positive
    out = vectors.copy()
    for col in range(out.shape[1]):
        v = out[:, col]
        big = np.abs(v) > 1e-12 * np.max(np.abs(v), initial=0.0)
        if big.any() and v[np.argmax(big)] < 0:
            out[:, col] = -v
    return out


def sym_eig(a: np.ndarray, tol: float = JACOBI_TOL, max_sweeps: int = MAX_SWEEPS):
    """Eigen-decomposition of a real symmetric matrix by cyclic Jacobi.

    Returns ``(values, vectors)`` with ascending ``values`` and orthonormal
    eigenvector columns.  Sweeps stop once the off-diagonal Frobenius mass is
    at most ``tol * ||A||_F``; exceeding ``max_sweeps`` raises
    :class:`ConvergenceError`.
    """
    A = _require_symmetric(a, "input").copy()
    n = A.shape[0]
    V = np.eye(n)
    if n == 0:
        return np.zeros(0), V
    scale = np.linalg.norm(A)

    def off_norm():
        return np.linalg.norm(A - np.diag(np.diag(A)))

    sweeps = 0
    while off_norm() > tol * scale:
        if sweeps == max_sweeps:
            raise ConvergenceError(
                f"Jacobi did not converge in {max_sweeps} sweeps "
                f"(off-diagonal {off_norm():.3e}, target {tol * scale:.3e})")
        _jacobi_sweep(A, V)
        sweeps += 1
    values = np.diag(A).copy()
    order = np.argsort(values, kind="stable")
    return values[order], _fix_signs(V[:, order])


@dataclass(frozen=True)
class EigenBasis:
    """Eigenpairs of a symmetric-definite pencil ``(A, M)``.

    ``values`` are ascending; the columns of ``vectors`` are M-orthonormal.
    """

    values: np.ndarray
    vectors: np.ndarray

    def __len__(self):
        return len(self.values)

    def residual(self, a: np.ndarray, m: np.ndarray) -> float:
        r = a @ self.vectors - m @ self.vectors * self.values
        return float(np.linalg.norm(r) / max(np.linalg.norm(a), 1e-300))

    def orthonormality_error(self, m: np.ndarray) -> float:
        g = self.vectors.T @ m @ self.vectors
        return float(np.linalg.norm(g - np.eye(len(self.values))))


def gen_eig(a: np.ndarray, b: np.ndarray) -> EigenBasis:
    """Solve ``A x = lam B x`` for symmetric ``A`` and SPD ``B``.

    Reduces to the standard problem ``L^-1 A L^-T`` with ``B = L L^T``.  The
    returned eigenvalues are Rayleigh quotients of the back-transformed
    vectors in the original pencil: the reduced matrix carries absolute
    errors of order ``eps * max|lam|``, which the quotients avoid for the
    small end of the spectrum.
    """
    L = cholesky(b)
    a = np.asarray(a, dtype=float)
    half = solve_lower(L, a)
    c = solve_lower(L, half.T)
    _, q = sym_eig(c)
    vectors = solve_upper(L.T, q)
    num = np.einsum("ij,ij->j", vectors, a @ vectors)
    den = np.einsum("ij,ij->j", vectors, b @ vectors)
    values = num / den
    order = np.argsort(values, kind="stable")
    return EigenBasis(values=values[order], vectors=_fix_signs(vectors[:, order]))


def power_fit(t, y):
    """Least-squares fit of ``y ~ prefactor * t**alpha`` in log-log space.

    Returns ``(alpha, prefactor)``.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise ValueError("t and y must be 1-d arrays of equal length")
    if np.any(t <= 0) or np.any(y <= 0):
        raise ValueError("power_fit needs strictly positive data")
    if len(np.unique(t)) < 2:
        raise ValueError("power_fit needs at least two distinct t values")
    lt, ly = np.log(t), np.log(y)
    design = np.column_stack([lt, np.ones_like(lt)])
    (alpha, intercept), *_ = np.linalg.lstsq(design, ly, rcond=None)
    return float(alpha), float(np.exp(intercept))
