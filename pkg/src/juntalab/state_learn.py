"""Junta-state learning from single-copy Pauli measurements, plus the
low-arity learner for Choi states of shallow Toffoli/single-qubit circuits.

Pipeline: estimate every Pauli coefficient of support size at most k from
shadow samples, zero the ones at or below the cutoff ``eps / (2 * 2^n * 2^k)``,
pin the identity coefficient to its forced value 2^-n, and rebuild the
matrix. The sample count ``c * 12^k * ln((3n)^k / delta) / eps^2`` targets a
per-coefficient accuracy of ``eps / (4 * 2^k * 2^n)``, which bounds the total
squared coefficient error by ``2 eps^2 / 2^(2n)`` whenever the true spectrum
is concentrated on some k qubits; by Cauchy-Schwarz the trace-norm error is
then at most sqrt(2) * eps.

Access model: a ``StateAccess`` hands out one measurement outcome per fresh
copy of the hidden state. Basis words are drawn by the learner from its own
chunk-keyed streams, so a run is a pure function of (access, parameters,
basis_seed).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .jacobi import eigh_hermitian
from .qstate import (
    DensityMatrix,
    PauliSpectrum,
    PauliString,
    pauli_reconstruct,
)
from .shadows import (
    CHUNK,
    PauliBasisString,
    _BornCache,
    _chunk_rng,
    _low_degree_supports,
    estimates_for_supports,
    sample_outcomes,
)

DEFAULT_C = 8.0


class StateAccess(Protocol):
    """Copy-consuming measurement oracle for a hidden state."""

    n: int

    @property
    def copies_used(self) -> int: ...

    def measure(self, basis: PauliBasisString) -> tuple[int, ...]: ...

    def measure_chunk(self, basis_codes: np.ndarray) -> np.ndarray: ...


class AccessExhaustedError(RuntimeError):
    """The copy budget of a StateAccess ran out."""


class SimulatedStateAccess:
    """StateAccess backed by the Born-rule simulator.

    Outcome randomness for the i-th measure call comes from an RNG keyed
    (seed, i), independent of the basis words requested. An optional
    ``max_copies`` budget makes the oracle exhaustible.
    """

    def __init__(self, rho: DensityMatrix, seed: int, max_copies: int | None = None) -> None:
        if seed < 0:
            raise ValueError("seed must be a nonnegative integer")
        self._cache = _BornCache(rho)
        self.n = self._cache.n
        self._seed = int(seed)
        self._calls = 0
        self._copies = 0
        self._max_copies = max_copies

    @property
    def copies_used(self) -> int:
        return self._copies

    def measure_chunk(self, basis_codes: np.ndarray) -> np.ndarray:
        codes = np.ascontiguousarray(basis_codes, dtype=np.uint8)
        if self._max_copies is not None and self._copies + codes.shape[0] > self._max_copies:
            raise AccessExhaustedError(
                f"budget of {self._max_copies} copies cannot cover "
                f"{codes.shape[0]} more measurements"
            )
        rng = np.random.default_rng([self._seed, self._calls])
        self._calls += 1
        self._copies += codes.shape[0]
        return sample_outcomes(self._cache, codes, rng.random(codes.shape[0]))

    def measure(self, basis: PauliBasisString) -> tuple[int, ...]:
        row = np.array([basis.codes], dtype=np.uint8)
        return tuple(int(v) for v in self.measure_chunk(row)[0])


@dataclass
class LearnedState:
    """Thresholded spectrum, its matrix, a PSD projection, and copy accounting.

    ``matrix`` carries the squared-coefficient guarantee but need not be
    positive; ``psd_projected`` is the physically valid rendering.
    """

    spectrum: PauliSpectrum
    matrix: np.ndarray
    psd_projected: DensityMatrix
    copies_used: int
    junta_arity: int | None = None


def junta_state_sample_count(n: int, k: int, eps: float, delta: float, c: float = DEFAULT_C) -> int:
    """ceil(c * 12^k * ln((3n)^k / delta) / eps^2)."""
    if not (0 < delta < 1 and eps > 0 and 0 <= k <= n and c > 0):
        raise ValueError("invalid sample-count parameters")
    log_term = k * math.log(3 * n) - math.log(delta)
    return max(1, math.ceil(c * 12**k * log_term / eps**2))


def coefficient_accuracy_target(n: int, k: int, eps: float) -> float:
    """Per-coefficient accuracy the sample count is sized for."""
    return eps / (4.0 * 2**k * 2**n)


def pauli_threshold_cutoff(n: int, k: int, eps: float) -> float:
    """Coefficients with magnitude at or below this are zeroed."""
    return eps / (2.0 * 2**n * 2**k)


def threshold_pauli(estimates, k: int, eps: float, n: int) -> PauliSpectrum:
    """Three-case rule: drop |supp| > k, drop |estimate| <= cutoff, keep rest.

    The identity coefficient is pinned to 2^-n (forced by unit trace) rather
    than estimated, which can only reduce the error.
    """
    cutoff = pauli_threshold_cutoff(n, k, eps)
    kept: dict[PauliString, float] = {}
    for pauli, value in estimates.items():
        if pauli.weight == 0 or pauli.weight > k:
            continue
        if abs(value) <= cutoff:
            continue
        kept[pauli] = float(value)
    kept[PauliString.identity(n)] = 1.0 / (1 << n)
    return PauliSpectrum(n, kept)


def psd_project(matrix) -> DensityMatrix:
    """Clip negative eigenvalues to zero and renormalize the trace to 1."""
    w, v = eigh_hermitian(np.asarray(matrix, dtype=np.complex128))
    clipped = np.clip(w, 0.0, None)
    total = float(clipped.sum())
    if total <= 0.0:
        raise ValueError("projection annihilated the matrix (no positive eigenvalues)")
    return DensityMatrix((v * (clipped / total)) @ v.conj().T)


def _collect_through_access(access: StateAccess, T: int, basis_seed: int):
    n = access.n
    codes_all = np.empty((T, n), dtype=np.uint8)
    outs_all = np.empty((T, n), dtype=np.int8)
    done = 0
    chunk_index = 0
    while done < T:
        size = min(CHUNK, T - done)
        rng = _chunk_rng(basis_seed, chunk_index)
        codes = rng.integers(1, 4, size=(size, n), dtype=np.uint8)
        codes_all[done : done + size] = codes
        outs_all[done : done + size] = access.measure_chunk(codes)
        done += size
        chunk_index += 1
    return codes_all, outs_all


def learn_junta_state(
    access: StateAccess,
    k: int,
    eps: float,
    delta: float,
    c: float = DEFAULT_C,
    basis_seed: int = 0,
) -> LearnedState:
    """Shadow-estimate, threshold, and rebuild a state concentrated on k qubits."""
    n = access.n
    if not 0 <= k <= n:
        raise ValueError("k out of range")
    T = junta_state_sample_count(n, k, eps, delta, c)
    codes, outs = _collect_through_access(access, T, basis_seed)
    estimates = estimates_for_supports(codes, outs, n, _low_degree_supports(n, k))
    spectrum = threshold_pauli(estimates, k, eps, n)
    matrix = pauli_reconstruct(spectrum)
    return LearnedState(
        spectrum=spectrum,
        matrix=matrix,
        psd_projected=psd_project(matrix),
        copies_used=T,
    )


def qac0_junta_arity(s: int, d: int, a: int, eps: float) -> int:
    """Junta arity bound for the Choi state of a size-s, depth-d circuit with
    a ancilla qubits: ceil(log2(s^2 * 2^(a+1) / eps)^d), floored at zero.

    A circuit with no multi-qubit gates still couples the output register to
    itself, so s is floored at 1.
    """
    if d < 0 or a < 0 or s < 0 or eps <= 0:
        raise ValueError("invalid circuit parameters")
    s_eff = max(int(s), 1)
    base = math.log2(s_eff**2 * 2 ** (a + 1) / eps)
    return math.ceil(max(0.0, base) ** d)


def learn_qac0_choi(
    access: StateAccess,
    s: int,
    d: int,
    a: int,
    eps: float,
    delta: float,
    c: float = DEFAULT_C,
    basis_seed: int = 0,
) -> LearnedState:
    """Learn the Choi state of a shallow circuit in the dimension-scaled
    Frobenius metric: with n input qubits the access yields (n+1)-qubit
    copies, and the target is 2^n ||rho - rho'||_F^2 <= eps.

    Delegates to learn_junta_state with error sqrt(eps): the squared-
    coefficient guarantee 2 (sqrt(eps))^2 / 2^(2(n+1)) converts exactly to
    the stated figure of merit.
    """
    m = access.n
    k = qac0_junta_arity(s, d, a, eps)
    if k > m:
        warnings.warn(
            f"junta arity bound {k} exceeds the {m} state qubits; clamping "
            "(the bound is vacuous at these parameters)",
            stacklevel=2,
        )
        k = m
    result = learn_junta_state(access, k, math.sqrt(eps), delta, c, basis_seed)
    result.junta_arity = k
    return result
