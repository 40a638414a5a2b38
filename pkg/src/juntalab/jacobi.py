"""Cyclic Jacobi eigendecomposition for complex Hermitian matrices.

Deterministic: the sweep order is fixed (row-cyclic over p < q), every
rotation is a closed-form 2x2 unitary, and no randomized pivoting is used,
so identical inputs give bitwise-identical outputs. Intended for the dense
desk-scale matrices in this package (dimension a few hundred at most).
"""

from __future__ import annotations

import math

import numpy as np


class JacobiConvergenceError(RuntimeError):
    """Raised when the off-diagonal mass fails to fall below tolerance."""


def _offdiag_norm(a: np.ndarray) -> float:
    off = a - np.diag(np.diag(a))
    return float(np.linalg.norm(off))


def eigh_hermitian(matrix, tol: float = 1e-12, max_sweeps: int = 60):
    """Eigenvalues and eigenvectors of a Hermitian matrix by cyclic Jacobi.

    Returns (w, v) with eigenvalues ``w`` ascending and unit eigenvectors in
    the columns of ``v``, so ``matrix = v @ diag(w) @ v.conj().T``.

    Raises JacobiConvergenceError if the off-diagonal Frobenius norm is still
    above ``tol * max(1, ||matrix||_F)`` after ``max_sweeps`` sweeps.
    """
    a = np.array(matrix, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    dim = a.shape[0]
    scale = float(np.linalg.norm(a))
    if float(np.max(np.abs(a - a.conj().T))) > 1e-8 * max(1.0, scale):
        raise ValueError("matrix is not Hermitian")
    if dim == 1:
        return np.array([a[0, 0].real]), np.eye(1, dtype=np.complex128)

    v = np.eye(dim, dtype=np.complex128)
    target = tol * max(1.0, scale)
    # Rotations with |a_pq| below this cannot move the off-diagonal norm
    # past the target even if all dim^2 of them fired at once.
    skip = target / (4.0 * dim)

    converged = _offdiag_norm(a) <= target
    for _ in range(max_sweeps):
        if converged:
            break
        for p in range(dim - 1):
            for q in range(p + 1, dim):
                apq = a[p, q]
                m = abs(apq)
                if m <= skip:
                    continue
                phase = apq / m
                ph_conj = np.conj(phase)
                tau = (a[q, q].real - a[p, p].real) / (2.0 * m)
                if tau >= 0.0:
                    t = 1.0 / (tau + math.sqrt(tau * tau + 1.0))
                else:
                    t = -1.0 / (-tau + math.sqrt(tau * tau + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                # G = diag(1, conj(phase)) . [[c, s], [-s, c]] zeroes a[p, q].
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * ph_conj * col_q
                a[:, q] = s * col_p + c * ph_conj * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * phase * row_q
                a[q, :] = s * row_p + c * phase * row_q
                a[p, q] = 0.0
                a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                vec_p = v[:, p].copy()
                vec_q = v[:, q].copy()
                v[:, p] = c * vec_p - s * ph_conj * vec_q
                v[:, q] = s * vec_p + c * ph_conj * vec_q
        converged = _offdiag_norm(a) <= target
    if not converged:
        raise JacobiConvergenceError(
            f"off-diagonal norm {_offdiag_norm(a):.3e} above {target:.3e} "
            f"after {max_sweeps} sweeps"
        )

    w = np.diag(a).real.copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def eigvalsh_hermitian(matrix, tol: float = 1e-12, max_sweeps: int = 60) -> np.ndarray:
    """Eigenvalues only; same contract as eigh_hermitian."""
    w, _ = eigh_hermitian(matrix, tol=tol, max_sweeps=max_sweeps)
    return w
