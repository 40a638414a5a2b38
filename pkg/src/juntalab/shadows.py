"""Single-copy Pauli-basis measurement simulation and coefficient estimation.

Measurement model: pick a basis word Q in {X,Y,Z}^n, rotate each qubit into
the computational basis with the eigenbasis of Q_i, and Born-sample the
diagonal. Eigenbasis phases are fixed once: X uses (|0> +/- |1>)/sqrt(2) and
Y uses (|0> +/- i|1>)/sqrt(2); only the +/-1 eigenvalue labeling matters for
the estimators.

The coefficient estimator for a Pauli word P averages
``3^|supp P| / 2^n * prod_{i in supp P} x_i [P_i == Q_i]`` over samples. It
is unbiased for Tr[P rho]/2^n and its single-sample second moment is
``3^|supp P| / 4^n``.

Determinism: sample streams are carved into fixed-size chunks and chunk ``c``
draws from an RNG keyed ``(seed, c)``, so a shadow set is a pure function of
``(state, T, seed)`` no matter how chunks are scheduled. Inside a chunk all
summand accumulation is integer-exact, so estimates cannot drift between
runs or reduction orders.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .qstate import PauliString, as_matrix, _qubit_count

MAX_MEASURE_QUBITS = 10
CHUNK = 4096

_BASIS_CHARS = "XYZ"

_SQ2 = 1.0 / math.sqrt(2.0)
# Columns are the +1 and -1 eigenvectors, in that order.
_EIGENBASIS = {
    1: np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=np.complex128),
    2: np.array([[_SQ2, _SQ2], [1j * _SQ2, -1j * _SQ2]], dtype=np.complex128),
    3: np.eye(2, dtype=np.complex128),
}


class InvalidStateError(ValueError):
    """Measurement diagonal fell below the PSD tolerance."""


@dataclass(frozen=True)
class PauliBasisString:
    """A full measurement basis word over {X, Y, Z}; identities not allowed."""

    codes: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.codes or any(code not in (1, 2, 3) for code in self.codes):
            raise ValueError("basis codes must be 1 (X), 2 (Y), or 3 (Z)")

    @classmethod
    def from_str(cls, text: str) -> "PauliBasisString":
        try:
            return cls(tuple(_BASIS_CHARS.index(ch) + 1 for ch in text))
        except ValueError as exc:
            raise ValueError(f"invalid basis string {text!r}") from exc

    @property
    def n(self) -> int:
        return len(self.codes)

    def __str__(self) -> str:
        return "".join(_BASIS_CHARS[c - 1] for c in self.codes)


@dataclass(frozen=True)
class ShadowSample:
    basis: PauliBasisString
    outcomes: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.outcomes) != self.basis.n:
            raise ValueError("outcome length does not match basis length")
        if any(x not in (-1, 1) for x in self.outcomes):
            raise ValueError("outcomes must be +/-1")


class ShadowSet:
    """T basis words and outcomes, stored columnar for fast estimation."""

    __slots__ = ("n", "basis_codes", "outcomes", "seed")

    def __init__(self, n: int, basis_codes, outcomes, seed: int | None = None) -> None:
        codes = np.ascontiguousarray(basis_codes, dtype=np.uint8)
        outs = np.ascontiguousarray(outcomes, dtype=np.int8)
        if codes.ndim != 2 or codes.shape[1] != n or codes.shape != outs.shape:
            raise ValueError("basis/outcome arrays must both be (T, n)")
        if codes.shape[0] == 0:
            raise ValueError("a shadow set must hold at least one sample")
        if codes.min() < 1 or codes.max() > 3:
            raise ValueError("basis codes must be 1..3")
        if np.any(np.abs(outs) != 1):
            raise ValueError("outcomes must be +/-1")
        codes.flags.writeable = False
        outs.flags.writeable = False
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "basis_codes", codes)
        object.__setattr__(self, "outcomes", outs)
        object.__setattr__(self, "seed", seed)

    def __setattr__(self, name, value):
        raise AttributeError("ShadowSet is immutable")

    @property
    def T(self) -> int:
        return self.basis_codes.shape[0]

    def samples(self) -> Iterator[ShadowSample]:
        for row in range(self.T):
            yield ShadowSample(
                PauliBasisString(tuple(int(c) for c in self.basis_codes[row])),
                tuple(int(x) for x in self.outcomes[row]),
            )


def basis_rotation(basis: PauliBasisString) -> np.ndarray:
    """Unitary whose columns are the joint eigenvectors of the basis word."""
    out = np.ones((1, 1), dtype=np.complex128)
    for code in basis.codes:
        out = np.kron(out, _EIGENBASIS[code])
    return out


def born_probabilities(rho, basis: PauliBasisString) -> np.ndarray:
    """Outcome probabilities over the 2^n joint eigenvectors of the basis word."""
    mat = as_matrix(rho)
    n = _qubit_count(mat.shape[0])
    if n != basis.n:
        raise ValueError("basis length does not match state")
    rotation = basis_rotation(basis)
    diag = np.einsum("jb,jk,kb->b", rotation.conj(), mat, rotation).real
    if float(diag.min()) < -1e-9:
        raise InvalidStateError(f"negative outcome probability {diag.min():.3e}")
    diag = np.clip(diag, 0.0, None)
    return diag / diag.sum()


class _BornCache:
    """Per-state cache of cumulative outcome distributions, keyed by basis word."""

    def __init__(self, rho) -> None:
        self.mat = as_matrix(rho)
        self.n = _qubit_count(self.mat.shape[0])
        if self.n > MAX_MEASURE_QUBITS:
            raise ValueError(f"measurement capped at {MAX_MEASURE_QUBITS} qubits")
        self._cums: dict[int, np.ndarray] = {}

    def cumulative(self, key: int, codes_row: np.ndarray) -> np.ndarray:
        cum = self._cums.get(key)
        if cum is None:
            basis = PauliBasisString(tuple(int(c) for c in codes_row))
            cum = np.cumsum(born_probabilities(self.mat, basis))
            self._cums[key] = cum
        return cum


def _basis_keys(codes: np.ndarray) -> np.ndarray:
    keys = np.zeros(codes.shape[0], dtype=np.int64)
    for col in range(codes.shape[1]):
        keys = keys * 3 + (codes[:, col].astype(np.int64) - 1)
    return keys


def _outcome_bits_to_signs(draws: np.ndarray, n: int) -> np.ndarray:
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    bits = (draws[:, None] >> shifts) & 1
    return (1 - 2 * bits).astype(np.int8)


def sample_outcomes(cache: _BornCache, codes: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """Born-sample one outcome row per basis row, using the provided uniforms."""
    count, n = codes.shape
    draws = np.empty(count, dtype=np.int64)
    keys = _basis_keys(codes)
    order = np.argsort(keys, kind="stable")
    sorted_keys = keys[order]
    boundaries = np.flatnonzero(np.diff(sorted_keys)) + 1
    start = 0
    for stop in itertools.chain(boundaries.tolist(), [count]):
        rows = order[start:stop]
        cum = cache.cumulative(int(sorted_keys[start]), codes[rows[0]])
        draws[rows] = np.minimum(
            np.searchsorted(cum, uniforms[rows], side="right"), len(cum) - 1
        )
        start = stop
    return _outcome_bits_to_signs(draws, n)


def measure_in_pauli_basis(rho, basis: PauliBasisString, rng: np.random.Generator) -> tuple[int, ...]:
    """One Born-rule sample of the state in the given product basis."""
    mat = as_matrix(rho)
    n = _qubit_count(mat.shape[0])
    if n > MAX_MEASURE_QUBITS:
        raise ValueError(f"measurement capped at {MAX_MEASURE_QUBITS} qubits")
    cum = np.cumsum(born_probabilities(mat, basis))
    draw = min(int(np.searchsorted(cum, rng.random(), side="right")), len(cum) - 1)
    return tuple(int(v) for v in _outcome_bits_to_signs(np.array([draw]), n)[0])


def _chunk_rng(seed: int, chunk_index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(chunk_index)])


def collect_shadows(rho, T: int, seed: int) -> ShadowSet:
    """T i.i.d. shadow samples: uniform basis words and Born-sampled outcomes.

    Chunk ``c`` of 4096 samples is drawn from an RNG keyed ``(seed, c)``, so
    the result is bitwise reproducible at any scheduling granularity.
    """
    if T < 1:
        raise ValueError("need at least one sample")
    if seed < 0:
        raise ValueError("seed must be a nonnegative integer")
    cache = _BornCache(rho)
    n = cache.n
    codes_all = np.empty((T, n), dtype=np.uint8)
    outs_all = np.empty((T, n), dtype=np.int8)
    done = 0
    chunk_index = 0
    while done < T:
        size = min(CHUNK, T - done)
        rng = _chunk_rng(seed, chunk_index)
        codes = rng.integers(1, 4, size=(size, n), dtype=np.uint8)
        uniforms = rng.random(size)
        codes_all[done : done + size] = codes
        outs_all[done : done + size] = sample_outcomes(cache, codes, uniforms)
        done += size
        chunk_index += 1
    return ShadowSet(n, codes_all, outs_all, seed)


def _support_totals(basis_codes: np.ndarray, outcomes: np.ndarray, cols: Sequence[int]) -> np.ndarray:
    """For one support set, summed outcome products per basis assignment.

    Entry ``a`` (base-3 over the support, first column most significant) is
    sum_s prod_i x_i^s [Q_i^s == a_i]. Sums of +/-1 stay integer-exact.
    """
    count = basis_codes.shape[0]
    j = len(cols)
    if j == 0:
        return np.array([float(count)])
    key = np.zeros(count, dtype=np.int64)
    weight = np.ones(count, dtype=np.int64)
    for col in cols:
        key = key * 3 + (basis_codes[:, col].astype(np.int64) - 1)
        weight = weight * outcomes[:, col]
    return np.bincount(key, weights=weight.astype(np.float64), minlength=3**j)


def estimates_for_supports(
    basis_codes: np.ndarray,
    outcomes: np.ndarray,
    n: int,
    supports: Iterable[Sequence[int]],
) -> dict[PauliString, float]:
    """Coefficient estimates for every Pauli word over the given support sets.

    ``supports`` lists 0-based column tuples; all 3^|supp| words per support
    are produced in one grouped pass over the samples.
    """
    T = basis_codes.shape[0]
    dim_scale = (1 << n) * T
    results: dict[PauliString, float] = {}
    for cols in supports:
        j = len(cols)
        totals = _support_totals(basis_codes, outcomes, cols)
        factor = 3**j
        for assignment in range(3**j):
            codes = [0] * n
            rem = assignment
            for col in reversed(cols):
                codes[col] = rem % 3 + 1
                rem //= 3
            value = (factor * int(round(totals[assignment]))) / dim_scale
            results[PauliString.from_codes(codes)] = value
    return results


def _low_degree_supports(n: int, k: int) -> Iterator[tuple[int, ...]]:
    for j in range(k + 1):
        yield from itertools.combinations(range(n), j)


def estimate_lowdeg(shadows: ShadowSet, k: int) -> dict[PauliString, float]:
    """Estimates for every Pauli word with support size at most k, in one pass."""
    if not 0 <= k <= shadows.n:
        raise ValueError("k out of range")
    return estimates_for_supports(
        shadows.basis_codes, shadows.outcomes, shadows.n, _low_degree_supports(shadows.n, k)
    )


def estimate_coefficient(shadows: ShadowSet, pauli: PauliString) -> float:
    """Single-coefficient estimate; exactly 2^-n for the identity word."""
    if pauli.n != shadows.n:
        raise ValueError("Pauli word length does not match shadow set")
    cols = [q - 1 for q in pauli.support]
    if not cols:
        return 1.0 / (1 << shadows.n)
    codes = np.array([pauli.codes[c] for c in cols], dtype=np.uint8)
    matches = np.all(shadows.basis_codes[:, cols] == codes, axis=1)
    weight = np.ones(shadows.T, dtype=np.int64)
    for col in cols:
        weight = weight * shadows.outcomes[:, col]
    total = int(np.sum(np.where(matches, weight, 0)))
    return (3 ** len(cols) * total) / ((1 << shadows.n) * shadows.T)


def shadow_sample_count(n: int, k: int, eps_coeff: float, delta: float, c: float = 8.0) -> int:
    """Samples for per-coefficient absolute accuracy eps_coeff on all |supp| <= k.

    ceil(c * 3^k * ln((3n)^k / delta) / (2^(2n) * eps_coeff^2)); the 2^(2n)
    cancels the natural 2^-n scale of the coefficients.
    """
    if not (0 < delta < 1 and eps_coeff > 0 and 0 <= k <= n and c > 0):
        raise ValueError("invalid sample-count parameters")
    log_term = k * math.log(3 * n) - math.log(delta)
    return max(1, math.ceil(c * 3**k * log_term / (4**n * eps_coeff**2)))


def dump_shadows(shadows: ShadowSet, path) -> None:
    """JSON-lines dump: a header record, then one record per sample."""
    lines = [json.dumps({"n": shadows.n, "T": shadows.T, "seed": shadows.seed})]
    for row in range(shadows.T):
        basis = "".join(_BASIS_CHARS[c - 1] for c in shadows.basis_codes[row])
        lines.append(json.dumps({"Q": basis, "x": [int(v) for v in shadows.outcomes[row]]}))
    Path(path).write_text("\n".join(lines) + "\n")


def load_shadows(path) -> ShadowSet:
    lines = Path(path).read_text().splitlines()
    header = json.loads(lines[0])
    n, T = int(header["n"]), int(header["T"])
    codes = np.empty((T, n), dtype=np.uint8)
    outs = np.empty((T, n), dtype=np.int8)
    for row, line in enumerate(lines[1 : T + 1]):
        record = json.loads(line)
        codes[row] = [_BASIS_CHARS.index(ch) + 1 for ch in record["Q"]]
        outs[row] = record["x"]
    seed = header.get("seed")
    return ShadowSet(n, codes, outs, None if seed is None else int(seed))
