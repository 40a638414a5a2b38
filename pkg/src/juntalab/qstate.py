"""Dense density-matrix core: Pauli expansions, distances, and junta states.

Qubit ordering: qubit 1 is the most significant tensor factor everywhere, so
the computational-basis index of a product state is the qubits' bit string
read left to right. Pauli strings use codes I=0, X=1, Y=2, Z=3; the packed
integer form of a string is its base-4 reading with qubit 1 as the most
significant digit, which is also the flat index into dense (4,)*n tensors.

Distance convention: ``trace_distance`` is the full trace norm of the
difference, with no 1/2 factor. Much of the literature halves it; callers
comparing against other sources must account for the factor themselves.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np

from .hypercube import Distribution
from .jacobi import eigvalsh_hermitian

MAX_STATE_QUBITS = 12
MAX_EXPAND_QUBITS = 10
MAX_PROXY_QUBITS = 8

PAULI_I = np.eye(2, dtype=np.complex128)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
PAULI_BY_CODE = (PAULI_I, PAULI_X, PAULI_Y, PAULI_Z)
PAULI_CHARS = "IXYZ"

_HERM_TOL = 1e-10
_TRACE_TOL = 1e-10
_PSD_FLOOR = 1e-9


def _qubit_count(dim: int) -> int:
    n = dim.bit_length() - 1
    if dim <= 0 or 1 << n != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return n


def as_matrix(obj) -> np.ndarray:
    """Coerce a DensityMatrix, ChoiState-like wrapper, or array to an ndarray."""
    if isinstance(obj, DensityMatrix):
        return obj.entries
    inner = getattr(obj, "state", None)
    if isinstance(inner, DensityMatrix):
        return inner.entries
    return np.asarray(obj, dtype=np.complex128)


@dataclass(frozen=True)
class PauliString:
    """A Pauli word on n qubits, packed two bits per qubit (base-4 digits)."""

    n: int
    packed: int

    def __post_init__(self) -> None:
        if self.n < 0 or not 0 <= self.packed < 4**self.n:
            raise ValueError("packed Pauli string out of range")

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls(n, 0)

    @classmethod
    def from_codes(cls, codes: Sequence[int]) -> "PauliString":
        packed = 0
        for code in codes:
            if not 0 <= code <= 3:
                raise ValueError("Pauli codes must be 0..3")
            packed = packed * 4 + code
        return cls(len(codes), packed)

    @classmethod
    def from_str(cls, text: str) -> "PauliString":
        try:
            return cls.from_codes([PAULI_CHARS.index(ch) for ch in text])
        except ValueError as exc:
            raise ValueError(f"invalid Pauli string {text!r}") from exc

    @property
    def codes(self) -> tuple[int, ...]:
        out = []
        packed = self.packed
        for _ in range(self.n):
            out.append(packed & 3)
            packed >>= 2
        return tuple(reversed(out))

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(i for i, code in enumerate(self.codes, start=1) if code)

    @property
    def weight(self) -> int:
        return len(self.support)

    def __str__(self) -> str:
        return "".join(PAULI_CHARS[c] for c in self.codes)

    def __index__(self) -> int:
        return self.packed


class PauliSpectrum:
    """Sparse real Pauli coefficients of a Hermitian matrix; zeros are dropped."""

    __slots__ = ("n", "_coeffs")

    def __init__(self, n: int, coeffs: Mapping[PauliString, float]) -> None:
        clean: dict[PauliString, float] = {}
        for pauli, value in coeffs.items():
            if pauli.n != n:
                raise ValueError("Pauli string length mismatch")
            value = float(value)
            if value != 0.0:
                clean[pauli] = value
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "_coeffs", clean)

    def __setattr__(self, name, value):
        raise AttributeError("PauliSpectrum is immutable")

    def coefficient(self, pauli: PauliString) -> float:
        return self._coeffs.get(pauli, 0.0)

    def items(self) -> Iterator[tuple[PauliString, float]]:
        return iter(sorted(self._coeffs.items(), key=lambda kv: kv[0].packed))

    def strings(self) -> tuple[PauliString, ...]:
        return tuple(sorted(self._coeffs, key=lambda p: p.packed))

    def __len__(self) -> int:
        return len(self._coeffs)

    def max_weight(self) -> int:
        return max((p.weight for p in self._coeffs), default=0)

    def to_tensor(self) -> np.ndarray:
        tensor = np.zeros((4,) * self.n)
        flat = tensor.reshape(-1)
        for pauli, value in self._coeffs.items():
            flat[pauli.packed] = value
        return tensor


class DensityMatrix:
    """A 2^n x 2^n Hermitian, trace-1, (near-)PSD matrix.

    Construction enforces Hermiticity and unit trace to 1e-10 and positive
    semidefiniteness down to eigenvalues of -1e-9, which accommodates
    thresholded spectral reconstructions; ``validate`` runs the strict
    eigenvalue check when needed.
    """

    __slots__ = ("n", "entries")

    def __init__(self, entries) -> None:
        mat = np.array(entries, dtype=np.complex128)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError("density matrix must be square")
        n = _qubit_count(mat.shape[0])
        if n > MAX_STATE_QUBITS:
            raise ValueError(f"states capped at {MAX_STATE_QUBITS} qubits")
        if float(np.max(np.abs(mat - mat.conj().T))) > _HERM_TOL:
            raise ValueError("matrix is not Hermitian within 1e-10")
        trace = complex(np.trace(mat))
        if abs(trace - 1.0) > _TRACE_TOL:
            raise ValueError(f"trace {trace} is not 1 within 1e-10")
        herm = (mat + mat.conj().T) / 2.0
        shift = (_PSD_FLOOR + 1e-12) * np.eye(mat.shape[0])
        try:
            np.linalg.cholesky(herm + shift)
        except np.linalg.LinAlgError:
            raise ValueError(f"matrix has an eigenvalue below -{_PSD_FLOOR}") from None
        mat.flags.writeable = False
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "entries", mat)

    def __setattr__(self, name, value):
        raise AttributeError("DensityMatrix is immutable")

    @classmethod
    def maximally_mixed(cls, n: int) -> "DensityMatrix":
        dim = 1 << n
        return cls(np.eye(dim) / dim)

    @classmethod
    def from_diagonal(cls, diagonal) -> "DensityMatrix":
        return cls(np.diag(np.asarray(diagonal, dtype=np.complex128)))

    @classmethod
    def pure(cls, amplitudes) -> "DensityMatrix":
        vec = np.asarray(amplitudes, dtype=np.complex128)
        vec = vec / np.linalg.norm(vec)
        return cls(np.outer(vec, vec.conj()))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def min_eigenvalue(self) -> float:
        return float(eigvalsh_hermitian(self.entries)[0])

    def validate(self) -> dict:
        """Strict diagnostic: Hermiticity defect, trace defect, min eigenvalue."""
        mat = self.entries
        return {
            "hermiticity_defect": float(np.max(np.abs(mat - mat.conj().T))),
            "trace_defect": abs(complex(np.trace(mat)) - 1.0),
            "min_eigenvalue": self.min_eigenvalue(),
        }


def pauli_matrix(pauli: PauliString) -> np.ndarray:
    """Kronecker product of the single-qubit generators, qubit 1 leftmost."""
    if pauli.n > MAX_STATE_QUBITS:
        raise ValueError(f"pauli_matrix capped at {MAX_STATE_QUBITS} qubits")
    out = np.ones((1, 1), dtype=np.complex128)
    for code in pauli.codes:
        out = np.kron(out, PAULI_BY_CODE[code])
    return out


def pauli_tensor(mat) -> np.ndarray:
    """All 4^n Pauli coefficients of a Hermitian matrix as a real (4,)*n tensor.

    Per-qubit butterfly, O(n 4^n); entry [p1, ..., pn] is Tr[P M] / 2^n.
    """
    m = as_matrix(mat)
    n = _qubit_count(m.shape[0])
    t = m.reshape((2,) * (2 * n)) if n else m.reshape(())
    for q in range(n):
        u = np.moveaxis(t, (q, n), (0, 1))
        comp = np.stack(
            [
                (u[0, 0] + u[1, 1]) * 0.5,
                (u[0, 1] + u[1, 0]) * 0.5,
                1j * (u[0, 1] - u[1, 0]) * 0.5,
                (u[0, 0] - u[1, 1]) * 0.5,
            ]
        )
        t = np.moveaxis(comp, 0, q)
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    imag_defect = float(np.max(np.abs(t.imag))) if n else float(abs(t.imag))
    if imag_defect > 1e-9 * scale:
        raise ValueError("matrix is not Hermitian: complex Pauli coefficients")
    return np.ascontiguousarray(t.real)


def pauli_tensor_to_matrix(tensor) -> np.ndarray:
    """Inverse of pauli_tensor: rebuild the 2^n x 2^n matrix."""
    t = np.asarray(tensor, dtype=np.complex128)
    n = t.ndim
    for q in reversed(range(n)):
        u = np.moveaxis(t, q, 0)
        comp = np.stack(
            [
                np.stack([u[0] + u[3], u[1] - 1j * u[2]]),
                np.stack([u[1] + 1j * u[2], u[0] - u[3]]),
            ]
        )
        t = np.moveaxis(comp, (0, 1), (q, n))
    return t.reshape(1 << n, 1 << n)


def pauli_expand(mat, drop_tol: float = 0.0) -> PauliSpectrum:
    """Sparse Pauli spectrum M^(P) = Tr[P M] / 2^n over all 4^n strings."""
    m = as_matrix(mat)
    n = _qubit_count(m.shape[0])
    if n > MAX_EXPAND_QUBITS:
        raise ValueError(f"full expansion capped at {MAX_EXPAND_QUBITS} qubits")
    flat = pauli_tensor(m).reshape(-1)
    coeffs = {
        PauliString(n, int(idx)): float(val)
        for idx, val in enumerate(flat)
        if abs(val) > drop_tol
    }
    return PauliSpectrum(n, coeffs)


def pauli_reconstruct(spec: PauliSpectrum) -> np.ndarray:
    """Sum of coeff * P over the spectrum, as a dense matrix."""
    return pauli_tensor_to_matrix(spec.to_tensor())


def trace_distance(a, b) -> float:
    """Full trace norm of the difference (no 1/2 factor), via Jacobi eigenvalues."""
    delta = as_matrix(a) - as_matrix(b)
    if delta.shape[0] != delta.shape[1] or as_matrix(a).shape != as_matrix(b).shape:
        raise ValueError("dimension mismatch")
    if delta.shape == (1, 1):
        return float(abs(delta[0, 0]))
    return float(np.sum(np.abs(eigvalsh_hermitian(delta))))


def frobenius_distance(a, b) -> float:
    """sqrt(Tr[(a-b)^2]) for Hermitian inputs."""
    ma, mb = as_matrix(a), as_matrix(b)
    if ma.shape != mb.shape:
        raise ValueError("dimension mismatch")
    return float(np.linalg.norm(ma - mb))


def partial_trace(rho, keep) -> DensityMatrix:
    """Reduced state on the 1-indexed qubits in ``keep``; empty keep gives dim 1."""
    mat = as_matrix(rho)
    n = _qubit_count(mat.shape[0])
    keep = sorted(set(int(q) for q in keep))
    if any(q < 1 or q > n for q in keep):
        raise ValueError("keep set outside qubit range")
    if len(keep) == n:
        return DensityMatrix(mat)
    tensor = mat.reshape((2,) * (2 * n))
    remaining = list(range(1, n + 1))
    for q in range(n, 0, -1):
        if q in keep:
            continue
        j = remaining.index(q)
        m = len(remaining)
        tensor = np.trace(tensor, axis1=j, axis2=m + j)
        remaining.remove(q)
    dim = 1 << len(remaining)
    return DensityMatrix(tensor.reshape(dim, dim) if dim > 1 else tensor.reshape(1, 1))


def permute_qubits(mat, current_order: Sequence[int]) -> np.ndarray:
    """Rearrange tensor factors so labels in ``current_order`` end up sorted."""
    m = np.asarray(mat, dtype=np.complex128)
    n = len(current_order)
    if m.shape != (1 << n, 1 << n):
        raise ValueError("matrix size does not match qubit count")
    position = {q: j for j, q in enumerate(current_order)}
    src = [position[q] for q in sorted(current_order)]
    axes = src + [n + j for j in src]
    return m.reshape((2,) * (2 * n)).transpose(axes).reshape(1 << n, 1 << n)


@dataclass(frozen=True)
class JuntaStateDescriptor:
    """A k-junta state: a state on the qubits K, maximally mixed elsewhere."""

    variables: tuple[int, ...]
    rho_k: DensityMatrix
    n: int

    def __post_init__(self) -> None:
        k = len(self.variables)
        if len(set(self.variables)) != k:
            raise ValueError("duplicate qubits in junta set")
        if k > self.n or any(q < 1 or q > self.n for q in self.variables):
            raise ValueError("junta set outside qubit range")
        if self.rho_k.n != k:
            raise ValueError("junta block size does not match |K|")


def embed_junta(desc: JuntaStateDescriptor) -> DensityMatrix:
    """rho_K tensor I / 2^(n-k) on the complement, in natural qubit order."""
    k = len(desc.variables)
    rest = 1 << (desc.n - k)
    mat = np.kron(desc.rho_k.entries, np.eye(rest) / rest)
    order = list(desc.variables) + [q for q in range(1, desc.n + 1) if q not in desc.variables]
    return DensityMatrix(permute_qubits(mat, order))


def embed_on(rho_k: DensityMatrix, variables, n: int) -> DensityMatrix:
    """Convenience wrapper building the descriptor and embedding it."""
    return embed_junta(JuntaStateDescriptor(tuple(sorted(int(q) for q in variables)), rho_k, n))


def proxy_distance(rho, k: int) -> tuple[tuple[int, ...], float]:
    """min over |K| = k of || rho - rho_K (x) I/2^(n-k) ||_tr with its argmin.

    Exhaustive over the C(n, k) subsets; ties break to the lexicographically
    first subset.
    """
    mat = as_matrix(rho)
    n = _qubit_count(mat.shape[0])
    if n > MAX_PROXY_QUBITS:
        raise ValueError(f"proxy distance capped at {MAX_PROXY_QUBITS} qubits")
    if not 0 <= k <= n:
        raise ValueError("k out of range")
    best_set: tuple[int, ...] | None = None
    best = math.inf
    for subset in itertools.combinations(range(1, n + 1), k):
        reduced = partial_trace(mat, subset)
        candidate = embed_on(reduced, subset, n)
        dist = trace_distance(mat, candidate)
        if dist < best:
            best = dist
            best_set = subset
    assert best_set is not None
    return best_set, best


def distribution_to_state(p: Distribution) -> DensityMatrix:
    """Diagonal embedding of a distribution; point masks index the diagonal."""
    if p.n > MAX_EXPAND_QUBITS:
        raise ValueError(f"diagonal embedding capped at {MAX_EXPAND_QUBITS} qubits")
    return DensityMatrix.from_diagonal(p.values)


def rho_eps(eps: float) -> DensityMatrix:
    """The single-qubit state (I + eps Z) / 2 = diag(1+eps, 1-eps) / 2."""
    if not 0.0 < eps < 0.5:
        raise ValueError("eps must be in (0, 1/2)")
    return DensityMatrix.from_diagonal([(1.0 + eps) / 2.0, (1.0 - eps) / 2.0])


def rho_eps_family(n: int, eps: float) -> list[DensityMatrix]:
    """n single-qubit-junta states: rho_eps on qubit i, maximally mixed elsewhere."""
    block = rho_eps(eps)
    return [embed_on(block, (i,), n) for i in range(1, n + 1)]


def random_density_matrix(n: int, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    """Wishart-style random mixed state of the given rank (full rank by default)."""
    dim = 1 << n
    rank = dim if rank is None else int(rank)
    if not 1 <= rank <= dim:
        raise ValueError("rank out of range")
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    mat = g @ g.conj().T
    return DensityMatrix(mat / np.trace(mat).real)


def save_state(state: DensityMatrix, path) -> None:
    mat = state.entries
    payload = {"n": state.n, "re": mat.real.tolist(), "im": mat.imag.tolist()}
    Path(path).write_text(json.dumps(payload))


def load_state(path) -> DensityMatrix:
    payload = json.loads(Path(path).read_text())
    mat = np.array(payload["re"], dtype=np.float64) + 1j * np.array(payload["im"], dtype=np.float64)
    state = DensityMatrix(mat)
    if state.n != int(payload["n"]):
        raise ValueError("state file qubit count does not match matrix size")
    return state


def save_pauli_spectrum(spec: PauliSpectrum, path) -> None:
    payload = {
        "n": spec.n,
        "paulis": [{"string": str(p), "coeff": float(c)} for p, c in spec.items()],
    }
    Path(path).write_text(json.dumps(payload))


def load_pauli_spectrum(path) -> PauliSpectrum:
    payload = json.loads(Path(path).read_text())
    n = int(payload["n"])
    coeffs = {
        PauliString.from_str(entry["string"]): float(entry["coeff"])
        for entry in payload["paulis"]
    }
    return PauliSpectrum(n, coeffs)
