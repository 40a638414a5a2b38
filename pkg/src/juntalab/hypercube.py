"""Boolean-cube functions, Walsh transforms, and distribution distances.

Encoding conventions, fixed here and used by every other module:

* Variables (and later qubits) are 1-indexed, ``i in [n]``.
* A point ``x in {-1,+1}^n`` is stored as an ``n``-bit mask with bit
  ``n - i`` set iff ``x_i == -1``; variable 1 is the most significant bit.
  The mask doubles as the index into dense value arrays, so the all-``+1``
  point sits at index 0.
* A subset ``S of [n]`` uses the same bit layout.

Dense vectors are used for functions and sparse integer-keyed maps for
spectra; ``n`` is capped at 24 so a dense vector never exceeds 2^24 entries.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Mapping

import numpy as np

MAX_VARS = 24

_SUM_TOL = 1e-12


def _check_nvars(n: int) -> None:
    if not 1 <= n <= MAX_VARS:
        raise ValueError(f"variable count must be in [1, {MAX_VARS}], got {n}")


def variables_to_mask(variables, n: int) -> int:
    """Pack a collection of 1-indexed variables into a subset mask."""
    mask = 0
    for i in variables:
        if not 1 <= i <= n:
            raise ValueError(f"variable {i} outside [1, {n}]")
        mask |= 1 << (n - i)
    return mask


def mask_to_variables(mask: int, n: int) -> tuple[int, ...]:
    """Unpack a subset mask into a sorted tuple of 1-indexed variables."""
    return tuple(i for i in range(1, n + 1) if mask >> (n - i) & 1)


@dataclass(frozen=True)
class CubePoint:
    """A point of {-1,+1}^n, stored as a bit mask (bit set <=> coordinate -1)."""

    n: int
    bits: int

    def __post_init__(self) -> None:
        _check_nvars(self.n)
        if not 0 <= self.bits < 1 << self.n:
            raise ValueError("point mask out of range for n variables")

    @classmethod
    def from_signs(cls, signs) -> "CubePoint":
        n = len(signs)
        bits = 0
        for i, s in enumerate(signs, start=1):
            if s == -1:
                bits |= 1 << (n - i)
            elif s != 1:
                raise ValueError("coordinates must be +1 or -1")
        return cls(n, bits)

    @property
    def signs(self) -> tuple[int, ...]:
        return tuple(-1 if self.bits >> (self.n - i) & 1 else 1 for i in range(1, self.n + 1))

    def __index__(self) -> int:
        return self.bits


@dataclass(frozen=True)
class SubsetMask:
    """A subset S of [n], stored in the same bit layout as CubePoint."""

    n: int
    mask: int

    def __post_init__(self) -> None:
        _check_nvars(self.n)
        if not 0 <= self.mask < 1 << self.n:
            raise ValueError("subset mask out of range for n variables")

    @classmethod
    def from_variables(cls, variables, n: int) -> "SubsetMask":
        return cls(n, variables_to_mask(variables, n))

    @property
    def variables(self) -> tuple[int, ...]:
        return mask_to_variables(self.mask, self.n)

    @property
    def size(self) -> int:
        return self.mask.bit_count()

    def __index__(self) -> int:
        return self.mask


class RealCubeFunction:
    """A dense real-valued function on {-1,+1}^n, indexed by point mask."""

    __slots__ = ("n", "values")

    def __init__(self, n: int, values) -> None:
        _check_nvars(n)
        arr = np.array(values, dtype=np.float64)
        if arr.shape != (1 << n,):
            raise ValueError(f"expected {1 << n} values for n={n}, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("function values must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "values", arr)

    def __setattr__(self, name, value):
        raise AttributeError("RealCubeFunction is immutable")

    def value_at(self, point: CubePoint | int) -> float:
        return float(self.values[int(point.__index__() if hasattr(point, "__index__") else point)])

    @classmethod
    def constant(cls, n: int, value: float) -> "RealCubeFunction":
        return cls(n, np.full(1 << n, float(value)))


class FourierSpectrum:
    """Sparse map from subset mask to real coefficient; zero entries are dropped."""

    __slots__ = ("n", "_coeffs")

    def __init__(self, n: int, coeffs: Mapping[int, float]) -> None:
        _check_nvars(n)
        clean: dict[int, float] = {}
        for mask, value in coeffs.items():
            mask = int(mask.__index__() if hasattr(mask, "__index__") else mask)
            if not 0 <= mask < 1 << n:
                raise ValueError("coefficient mask out of range")
            value = float(value)
            if value != 0.0:
                clean[mask] = value
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "_coeffs", clean)

    def __setattr__(self, name, value):
        raise AttributeError("FourierSpectrum is immutable")

    def coefficient(self, subset: SubsetMask | int) -> float:
        return self._coeffs.get(int(subset.__index__() if hasattr(subset, "__index__") else subset), 0.0)

    def items(self) -> Iterator[tuple[int, float]]:
        return iter(sorted(self._coeffs.items()))

    def masks(self) -> tuple[int, ...]:
        return tuple(sorted(self._coeffs))

    def __len__(self) -> int:
        return len(self._coeffs)

    def __eq__(self, other) -> bool:
        return isinstance(other, FourierSpectrum) and self.n == other.n and self._coeffs == other._coeffs

    def __repr__(self) -> str:
        return f"FourierSpectrum(n={self.n}, terms={len(self._coeffs)})"


class Distribution:
    """A probability distribution on {-1,+1}^n: nonnegative values summing to 1.

    The constructor renormalizes sums within 1e-12 of 1 and rejects anything
    further off, so drift cannot accumulate silently.
    """

    __slots__ = ("function",)

    def __init__(self, function: RealCubeFunction) -> None:
        values = function.values
        if np.any(values < 0.0):
            raise ValueError("distribution values must be nonnegative")
        total = float(values.sum())
        if abs(total - 1.0) > _SUM_TOL:
            raise ValueError(f"distribution values sum to {total}, outside 1 +/- {_SUM_TOL}")
        if total != 1.0:
            function = RealCubeFunction(function.n, values / total)
        object.__setattr__(self, "function", function)

    def __setattr__(self, name, value):
        raise AttributeError("Distribution is immutable")

    @classmethod
    def from_values(cls, n: int, values) -> "Distribution":
        return cls(RealCubeFunction(n, values))

    @classmethod
    def uniform(cls, n: int) -> "Distribution":
        return cls(RealCubeFunction.constant(n, 2.0 ** -n))

    @property
    def n(self) -> int:
        return self.function.n

    @property
    def values(self) -> np.ndarray:
        return self.function.values


def eval_character(subset: SubsetMask, point: CubePoint) -> float:
    """chi_S(x) = prod_{i in S} x_i, computed as a parity of the mask overlap."""
    if subset.n != point.n:
        raise ValueError(f"subset over {subset.n} variables, point over {point.n}")
    return -1.0 if (subset.mask & point.bits).bit_count() & 1 else 1.0


def walsh_hadamard(values) -> np.ndarray:
    """Unnormalized Walsh-Hadamard transform W[s] = sum_x (-1)^{|s & x|} v[x].

    In-place butterfly over bit positions, O(n 2^n); self-inverse up to 2^n.
    """
    v = np.array(values, dtype=np.float64)
    size = v.size
    if size & (size - 1) or size == 0:
        raise ValueError("input length must be a power of two")
    h = 1
    while h < size:
        v = v.reshape(-1, 2 * h)
        top = v[:, :h].copy()
        v[:, :h] = top + v[:, h:]
        v[:, h:] = top - v[:, h:]
        h *= 2
    return v.reshape(size)


def fourier_transform(f: RealCubeFunction) -> FourierSpectrum:
    """Coefficients c(S) = E_x[f(x) chi_S(x)] for every S, via the fast transform."""
    coeffs = walsh_hadamard(f.values) / float(1 << f.n)
    return FourierSpectrum(f.n, {int(mask): float(c) for mask, c in enumerate(coeffs) if c != 0.0})


def spectrum_to_dense(spec: FourierSpectrum) -> np.ndarray:
    dense = np.zeros(1 << spec.n)
    for mask, value in spec.items():
        dense[mask] = value
    return dense


def inverse_transform(spec: FourierSpectrum) -> RealCubeFunction:
    """Evaluate f(x) = sum_S c(S) chi_S(x) on the whole cube."""
    return RealCubeFunction(spec.n, walsh_hadamard(spectrum_to_dense(spec)))


def tv_distance(p: Distribution, q: Distribution) -> float:
    """Total variation distance, half the l1 distance; always in [0, 1]."""
    if p.n != q.n:
        raise ValueError(f"distributions over {p.n} and {q.n} variables")
    return 0.5 * float(np.abs(p.values - q.values).sum())


def degree(spec: FourierSpectrum) -> int:
    """Largest |S| carrying a nonzero coefficient; 0 for empty or constant spectra."""
    return max((mask.bit_count() for mask, _ in spec.items()), default=0)


def support_size(spec: FourierSpectrum) -> int:
    """Number of nonzero coefficients."""
    return len(spec)


def save_distribution(dist: Distribution, path) -> None:
    payload = {"n": dist.n, "values": [float(v) for v in dist.values]}
    Path(path).write_text(json.dumps(payload))


def load_distribution(path) -> Distribution:
    payload = json.loads(Path(path).read_text())
    return Distribution.from_values(int(payload["n"]), payload["values"])
