"""Learning junta distributions from samples and bounded sparse low-degree
functions from labeled examples.

Junta learner: for every subset S of at most k variables, estimate the
coefficient ``p'(S) = (1 / (2^n T)) sum_s chi_S(x^s)``, zero everything with
magnitude at or below ``eps / (2 * 2^n * sqrt(2^k))``, read the relevant
variables off the surviving supports, and round the rebuilt function to a
proper distribution by clipping negatives on the junta block and dividing by
``C = 2^(n-k) * sum p''|_K``. At the stated sample count the thresholded
coefficients land within the analysis window with high probability, giving
total variation error O(eps).

Coefficients are handled internally at the scale ``q = 2^n p`` (the density
relative to uniform) so nothing underflows at large n; the public API speaks
the mean-of-characters convention, i.e. q / 2^n.

Estimating all low-degree coefficients at once runs a single Walsh transform
over the empirical histogram, which reproduces the per-subset empirical
means exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .hypercube import (
    Distribution,
    FourierSpectrum,
    RealCubeFunction,
    SubsetMask,
    mask_to_variables,
    variables_to_mask,
    walsh_hadamard,
)

DEFAULT_C = 8.0


@dataclass(frozen=True)
class SampleSet:
    """Point masks drawn i.i.d. from an unknown distribution."""

    n: int
    points: np.ndarray

    def __post_init__(self) -> None:
        pts = np.ascontiguousarray(self.points, dtype=np.int64)
        if pts.ndim != 1 or pts.size == 0:
            raise ValueError("a sample set must hold at least one point")
        if pts.min() < 0 or pts.max() >= 1 << self.n:
            raise ValueError("sample mask out of range")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @property
    def size(self) -> int:
        return int(self.points.size)


@dataclass(frozen=True)
class LearnerConfig:
    k: int
    eps: float
    delta: float
    c: float = DEFAULT_C

    def __post_init__(self) -> None:
        if not (0.0 < self.eps < 1.0 and 0.0 < self.delta < 1.0 and self.k >= 0 and self.c > 0.0):
            raise ValueError("invalid learner configuration")


class DistributionSampler(Protocol):
    """Sample oracle for an unknown distribution on the cube."""

    n: int

    def draw(self, count: int) -> SampleSet: ...


class SimulatedSampler:
    """Sampler backed by a known Distribution; call i draws from an RNG keyed
    (seed, i), so runs replay exactly."""

    def __init__(self, dist: Distribution, seed: int) -> None:
        if seed < 0:
            raise ValueError("seed must be a nonnegative integer")
        self.n = dist.n
        self._cumulative = np.cumsum(dist.values)
        self._seed = int(seed)
        self._calls = 0

    def draw(self, count: int) -> SampleSet:
        rng = np.random.default_rng([self._seed, self._calls])
        self._calls += 1
        uniforms = rng.random(count)
        points = np.minimum(
            np.searchsorted(self._cumulative, uniforms, side="right"),
            (1 << self.n) - 1,
        )
        return SampleSet(self.n, points)


def sample_count_dist(n: int, k: int, eps: float, delta: float, c: float = DEFAULT_C) -> int:
    """ceil(c * 2^k * max(k, 1) * ln(n / delta) / eps^2)."""
    if not (0 < delta < 1 and 0 < eps < 1 and 0 <= k <= n and c > 0):
        raise ValueError("invalid sample-count parameters")
    return max(1, math.ceil(c * 2**k * max(k, 1) * math.log(n / delta) / eps**2))


def empirical_coefficient(samples: SampleSet, subset: SubsetMask | int) -> float:
    """p'(S) = (1 / (2^n T)) sum_s chi_S(x^s); unbiased for the true p(S).

    The empty set always evaluates to exactly 2^-n.
    """
    mask = int(subset.__index__() if hasattr(subset, "__index__") else subset)
    if not 0 <= mask < 1 << samples.n:
        raise ValueError("subset mask out of range")
    overlap = samples.points & mask
    parity = np.zeros_like(overlap)
    while overlap.max(initial=0) > 0:
        parity ^= overlap & 1
        overlap >>= 1
    total = int(samples.size - 2 * int(parity.sum()))
    return total / ((1 << samples.n) * samples.size)


def empirical_relative_spectrum(samples: SampleSet, k: int) -> FourierSpectrum:
    """Coefficients of the density relative to uniform, q = 2^n p, for every
    |S| <= k: q(S) = (1/T) sum_s chi_S(x^s). One Walsh transform over the
    sample histogram; the sums are integer-exact. This is the internal
    working scale -- it keeps magnitudes O(1) at any n."""
    n = samples.n
    if not 0 <= k <= n:
        raise ValueError("k out of range")
    histogram = np.bincount(samples.points, minlength=1 << n).astype(np.float64)
    transformed = walsh_hadamard(histogram) / samples.size
    coeffs = {
        mask: float(transformed[mask])
        for mask in range(1 << n)
        if mask.bit_count() <= k
    }
    return FourierSpectrum(n, coeffs)


def empirical_low_degree_spectrum(samples: SampleSet, k: int) -> FourierSpectrum:
    """All |S| <= k coefficients in the mean-of-characters convention; equal
    to the relative-scale spectrum divided by 2^n (an exact float scaling),
    and to empirical_coefficient subset by subset."""
    relative = empirical_relative_spectrum(samples, k)
    scale = float(1 << samples.n)
    return FourierSpectrum(
        samples.n, {mask: value / scale for mask, value in relative.items()}
    )


def dist_threshold_cutoff(n: int, k: int, eps: float) -> float:
    """Coefficients with magnitude at or below this are zeroed."""
    return eps / (2.0 * 2**n * math.sqrt(2**k))


def threshold_spectrum(raw: FourierSpectrum, tau: float) -> FourierSpectrum:
    """Zero coefficients with |value| <= tau; everything else is untouched."""
    if tau < 0:
        raise ValueError("threshold must be nonnegative")
    return FourierSpectrum(
        raw.n, {mask: value for mask, value in raw.items() if abs(value) > tau}
    )


def select_junta_variables(spectrum: FourierSpectrum, k: int) -> tuple[int, ...]:
    """Union of surviving supports; if noise pushed it past k variables, keep
    the k largest by their share of squared coefficient mass."""
    union: set[int] = set()
    energy: dict[int, float] = {}
    for mask, value in spectrum.items():
        for var in mask_to_variables(mask, spectrum.n):
            union.add(var)
            energy[var] = energy.get(var, 0.0) + value * value
    if len(union) <= k:
        return tuple(sorted(union))
    ranked = sorted(union, key=lambda var: (-energy[var], var))
    return tuple(sorted(ranked[:k]))


def round_to_distribution(
    spectrum: FourierSpectrum, variables: tuple[int, ...]
) -> Distribution:
    """Clip the junta block's negatives and renormalize: the rebuilt function
    restricted to the junta variables is evaluated on its 2^|K| points,
    negatives go to zero, and the result is divided by
    C = 2^(n-|K|) * sum of the clipped block."""
    n = spectrum.n
    k = len(variables)
    block = np.zeros(1 << k)
    for mask, value in spectrum.items():
        vars_of_mask = mask_to_variables(mask, n)
        if any(v not in variables for v in vars_of_mask):
            continue
        local = variables_to_mask(
            [variables.index(v) + 1 for v in vars_of_mask], k
        ) if k else 0
        block[local] += value
    block = walsh_hadamard(block) if k else block
    block = np.clip(block, 0.0, None)
    normalizer = float(2 ** (n - k) * block.sum())
    if normalizer <= 0.0:
        # Unreachable through the learner (the empty set always survives with
        # positive weight), but adversarial spectra land on uniform.
        return Distribution.uniform(n)
    # Broadcast the junta block over the irrelevant variables.
    shape = [1] * n
    for var in variables:
        shape[var - 1] = 2
    dense = np.broadcast_to(block.reshape(shape) / normalizer, (2,) * n)
    return Distribution(RealCubeFunction(n, dense.reshape(-1).copy()))


@dataclass
class DistLearnResult:
    distribution: Distribution
    sample_count: int
    surviving: FourierSpectrum
    junta_variables: tuple[int, ...]


def learn_junta_from_spectrum(
    raw: FourierSpectrum, cfg: LearnerConfig, sample_count: int = 0
) -> DistLearnResult:
    """Threshold, variable selection, and rounding on precomputed coefficients
    (mean-of-characters convention).

    Injecting exact coefficients here makes the pipeline the identity on
    k-junta distributions; the sampling learner feeds it estimates. The work
    happens at the relative scale q = 2^n p; rescaling by the exact power of
    two changes no comparison, and the rounding normalizer divides the scale
    back out.
    """
    n = raw.n
    scale = float(1 << n)
    relative = FourierSpectrum(n, {mask: value * scale for mask, value in raw.items()})
    tau_relative = dist_threshold_cutoff(n, cfg.k, cfg.eps) * scale
    surviving = threshold_spectrum(relative, tau_relative)
    variables = select_junta_variables(surviving, cfg.k)
    restricted = FourierSpectrum(
        n,
        {
            mask: value
            for mask, value in surviving.items()
            if all(v in variables for v in mask_to_variables(mask, n))
        },
    )
    return DistLearnResult(
        distribution=round_to_distribution(restricted, variables),
        sample_count=sample_count,
        surviving=FourierSpectrum(
            n, {mask: value / scale for mask, value in restricted.items()}
        ),
        junta_variables=variables,
    )


def learn_junta_distribution(sampler: DistributionSampler, cfg: LearnerConfig) -> DistLearnResult:
    """Draw the prescribed number of samples and run the full pipeline."""
    n = sampler.n
    if cfg.k > n:
        raise ValueError("k exceeds the sampler's variable count")
    T = sample_count_dist(n, cfg.k, cfg.eps, cfg.delta, cfg.c)
    samples = sampler.draw(T)
    raw = empirical_low_degree_spectrum(samples, cfg.k)
    return learn_junta_from_spectrum(raw, cfg, sample_count=T)


class ExampleOracle(Protocol):
    """Labeled-example oracle: uniform points with function values."""

    n: int

    def draw(self, count: int) -> tuple[np.ndarray, np.ndarray]: ...


class SimulatedExampleOracle:
    """Uniform examples (x, f(x)) from a known function, chunk-keyed RNG."""

    def __init__(self, f: RealCubeFunction, seed: int) -> None:
        if seed < 0:
            raise ValueError("seed must be a nonnegative integer")
        self.n = f.n
        self._values = f.values
        self._seed = int(seed)
        self._calls = 0

    def draw(self, count: int) -> tuple[np.ndarray, np.ndarray]:
        rng = np.random.default_rng([self._seed, self._calls])
        self._calls += 1
        points = rng.integers(0, 1 << self.n, size=count)
        return points, self._values[points]


def sample_count_sparse(n: int, m: int, deg: int, eps: float, delta: float, c: float = DEFAULT_C) -> int:
    """ceil(c * m * ln(n^deg / delta) / eps) examples for a spectrum
    eps-concentrated on m sets of degree at most deg."""
    if not (0 < delta < 1 and eps > 0 and m >= 1 and 0 <= deg <= n and c > 0):
        raise ValueError("invalid sample-count parameters")
    log_term = deg * math.log(n) - math.log(delta) if n > 1 else -math.log(delta)
    return max(1, math.ceil(c * m * log_term / eps))


def learn_sparse_lowdeg_function(
    oracle: ExampleOracle,
    m: int,
    deg: int,
    eps: float,
    delta: float,
    c: float = DEFAULT_C,
) -> FourierSpectrum:
    """Estimate all degree <= deg coefficients to accuracy sqrt(eps / 4m) and
    zero the ones at or below that same level; for a [-1, 1]-valued function
    whose spectrum is eps-concentrated on m low-degree sets the output g
    satisfies sum_S |f(S) - g(S)|^2 = O(eps) with probability 1 - delta."""
    n = oracle.n
    T = sample_count_sparse(n, m, deg, eps, delta, c)
    points, values = oracle.draw(T)
    weights = np.bincount(points, weights=values, minlength=1 << n)
    estimates = walsh_hadamard(weights) / T
    cutoff = math.sqrt(eps / (4.0 * m))
    coeffs = {
        mask: float(estimates[mask])
        for mask in range(1 << n)
        if mask.bit_count() <= deg and abs(estimates[mask]) > cutoff
    }
    return FourierSpectrum(n, coeffs)


def random_junta_distribution(
    n: int, k: int, rng: np.random.Generator, dirichlet_scale: float = 1.0
) -> tuple[Distribution, tuple[int, ...]]:
    """A planted k-junta: Dirichlet weights on a random k-variable block,
    uniform on the rest. Returns the distribution and its relevant variables."""
    variables = tuple(sorted(int(v) + 1 for v in rng.choice(n, size=k, replace=False)))
    block = rng.dirichlet([dirichlet_scale] * (1 << k)) if k else np.array([1.0])
    shape = [1] * n
    for var in variables:
        shape[var - 1] = 2
    dense = np.broadcast_to(block.reshape(shape), (2,) * n).reshape(-1)
    return (
        Distribution(RealCubeFunction(n, dense / dense.sum())),
        variables,
    )
