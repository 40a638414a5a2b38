"""Cyclic Jacobi eigensolver against the LAPACK reference."""

import numpy as np
import pytest

from juntalab.jacobi import JacobiConvergenceError, eigh_hermitian, eigvalsh_hermitian


def random_hermitian(dim, rng):
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return (g + g.conj().T) / 2


@pytest.mark.parametrize("dim", [1, 2, 3, 5, 16, 64])
def test_matches_lapack(dim):
    rng = np.random.default_rng(dim)
    mat = random_hermitian(dim, rng)
    w, v = eigh_hermitian(mat)
    assert np.max(np.abs(np.sort(w) - np.linalg.eigvalsh(mat))) < 1e-10
    assert np.max(np.abs(v @ np.diag(w) @ v.conj().T - mat)) < 1e-10
    assert np.max(np.abs(v.conj().T @ v - np.eye(dim))) < 1e-12


def test_eigenvalues_ascending():
    rng = np.random.default_rng(8)
    w = eigvalsh_hermitian(random_hermitian(10, rng))
    assert np.all(np.diff(w) >= 0)


def test_diagonal_is_immediate():
    w, v = eigh_hermitian(np.diag([3.0, -1.0, 2.0]))
    assert np.array_equal(w, [-1.0, 2.0, 3.0])
    assert np.max(np.abs(np.abs(v) - np.eye(3)[:, [1, 2, 0]])) == 0.0


def test_real_symmetric_input():
    rng = np.random.default_rng(4)
    g = rng.standard_normal((12, 12))
    mat = (g + g.T) / 2
    w, _ = eigh_hermitian(mat)
    assert np.max(np.abs(np.sort(w) - np.linalg.eigvalsh(mat))) < 1e-10


def test_deterministic():
    rng = np.random.default_rng(9)
    mat = random_hermitian(20, rng)
    w1, v1 = eigh_hermitian(mat)
    w2, v2 = eigh_hermitian(mat)
    assert np.array_equal(w1, w2) and np.array_equal(v1, v2)


def test_convergence_error():
    rng = np.random.default_rng(3)
    with pytest.raises(JacobiConvergenceError):
        eigh_hermitian(random_hermitian(8, rng), max_sweeps=0)


def test_rejects_non_hermitian():
    with pytest.raises(ValueError):
        eigh_hermitian(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_rejects_non_square():
    with pytest.raises(ValueError):
        eigh_hermitian(np.ones((2, 3)))
