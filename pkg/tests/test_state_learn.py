"""Junta-state learner, PSD projection, and the Choi-state learner."""

import math

import numpy as np
import pytest

from juntalab.jacobi import eigh_hermitian
from juntalab.qstate import (
    DensityMatrix,
    PauliString,
    embed_on,
    frobenius_distance,
    random_density_matrix,
    trace_distance,
)
from juntalab.qac0 import Qac0Circuit, ToffoliGate, choi_state_with_ancilla
from juntalab.state_learn import (
    LearnedState,
    SimulatedStateAccess,
    coefficient_accuracy_target,
    junta_state_sample_count,
    learn_junta_state,
    learn_qac0_choi,
    pauli_threshold_cutoff,
    psd_project,
    qac0_junta_arity,
    threshold_pauli,
)


def threshold_by_cases(estimates, k, eps, n):
    """Direct reimplementation of the three-case rule, as an oracle."""
    cutoff = eps / (2 * 2**n * math.sqrt(4**k))
    out = {}
    for pauli, value in estimates.items():
        if pauli.weight > k:
            continue
        if pauli.weight == 0:
            continue
        if abs(value) <= cutoff:
            continue
        out[pauli] = value
    out[PauliString.identity(n)] = 2.0**-n
    return out


class TestThresholdPauli:
    def test_all_below_keeps_only_identity(self):
        n, k, eps = 3, 1, 0.2
        cutoff = pauli_threshold_cutoff(n, k, eps)
        estimates = {
            PauliString.from_str("IIZ"): cutoff / 2,
            PauliString.from_str("XII"): -cutoff / 2,
            PauliString.identity(3): 2.0**-3,
        }
        spec = threshold_pauli(estimates, k, eps, n)
        assert spec.strings() == (PauliString.identity(3),)
        assert spec.coefficient(PauliString.identity(3)) == 2.0**-3

    def test_boundary_value_is_zeroed(self):
        n, k, eps = 2, 1, 0.3
        cutoff = pauli_threshold_cutoff(n, k, eps)
        spec = threshold_pauli({PauliString.from_str("IZ"): cutoff}, k, eps, n)
        assert spec.coefficient(PauliString.from_str("IZ")) == 0.0

    def test_matches_case_oracle(self):
        rng = np.random.default_rng(7)
        n, k, eps = 3, 1, 0.25
        estimates = {
            PauliString(n, packed): float(rng.standard_normal() * 0.02)
            for packed in range(4**n)
        }
        spec = threshold_pauli(estimates, k, eps, n)
        want = threshold_by_cases(estimates, k, eps, n)
        assert dict(spec.items()) == want

    def test_never_keeps_high_weight(self):
        estimates = {PauliString.from_str("XYZ"): 0.5}
        spec = threshold_pauli(estimates, 2, 0.1, 3)
        assert spec.max_weight() == 0


class TestPsdProject:
    def test_psd_input_unchanged(self):
        rho = random_density_matrix(2, np.random.default_rng(3))
        projected = psd_project(rho.entries)
        assert np.max(np.abs(projected.entries - rho.entries)) <= 1e-12

    def test_single_clip(self):
        projected = psd_project(np.diag([1.1, -0.1]))
        assert np.max(np.abs(projected.entries - np.diag([1.0, 0.0]))) <= 1e-12

    def test_projection_at_most_doubles_frobenius_error(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            truth = random_density_matrix(2, rng)
            noise = rng.standard_normal((4, 4)) * 0.03
            noise = (noise + noise.T) / 2
            noise -= np.eye(4) * np.trace(noise) / 4
            perturbed = truth.entries + noise
            raw = frobenius_distance(perturbed, truth)
            projected = frobenius_distance(psd_project(perturbed), truth)
            assert projected <= 2.0 * raw + 1e-12

    def test_no_positive_part_raises(self):
        with pytest.raises(ValueError):
            psd_project(np.diag([-1.0, -0.5]))


class TestSampleCount:
    def test_frozen_arithmetic(self):
        want = math.ceil(8 * 144 * (2 * math.log(18) - math.log(0.1)) / 0.25**2)
        assert junta_state_sample_count(6, 2, 0.25, 0.1, 8.0) == want

    def test_accuracy_target(self):
        assert coefficient_accuracy_target(6, 2, 0.25) == 0.25 / (4 * 4 * 64)


class TestLearnJuntaState:
    def test_maximally_mixed_exact(self):
        truth = DensityMatrix.maximally_mixed(3)
        access = SimulatedStateAccess(truth, seed=1)
        result = learn_junta_state(access, 1, 0.3, 0.1, basis_seed=2)
        assert np.array_equal(result.matrix, truth.entries)
        assert result.spectrum.strings() == (PauliString.identity(3),)

    def test_planted_junta_within_bound(self):
        rng = np.random.default_rng(11)
        truth = embed_on(random_density_matrix(1, rng), (3,), 4)
        for seed in (0, 1):
            access = SimulatedStateAccess(truth, seed=seed)
            result = learn_junta_state(access, 1, 0.25, 0.1, basis_seed=seed + 10)
            assert trace_distance(result.psd_projected, truth) <= math.sqrt(2) * 0.25
            assert result.copies_used == access.copies_used
            assert result.copies_used == junta_state_sample_count(4, 1, 0.25, 0.1)

    def test_spectrum_weight_capped(self):
        truth = random_density_matrix(3, np.random.default_rng(13))
        access = SimulatedStateAccess(truth, seed=4)
        result = learn_junta_state(access, 1, 0.4, 0.2, basis_seed=5)
        assert result.spectrum.max_weight() <= 1

    def test_deterministic_given_seeds(self):
        truth = embed_on(random_density_matrix(1, np.random.default_rng(2)), (1,), 3)
        runs = [
            learn_junta_state(SimulatedStateAccess(truth, seed=9), 1, 0.3, 0.1, basis_seed=8)
            for _ in range(2)
        ]
        assert np.array_equal(runs[0].matrix, runs[1].matrix)


class TestSimulatedAccess:
    def test_copy_counter(self):
        truth = DensityMatrix.maximally_mixed(2)
        access = SimulatedStateAccess(truth, seed=0)
        from juntalab.shadows import PauliBasisString

        access.measure(PauliBasisString.from_str("XZ"))
        access.measure_chunk(np.array([[1, 2], [3, 3]], dtype=np.uint8))
        assert access.copies_used == 3

    def test_outcomes_are_signs(self):
        truth = random_density_matrix(2, np.random.default_rng(1))
        access = SimulatedStateAccess(truth, seed=3)
        out = access.measure_chunk(np.ones((5, 2), dtype=np.uint8))
        assert set(np.unique(out)).issubset({-1, 1})

    def test_exhaustion_propagates(self):
        from juntalab.state_learn import AccessExhaustedError

        truth = DensityMatrix.maximally_mixed(2)
        access = SimulatedStateAccess(truth, seed=0, max_copies=10)
        with pytest.raises(AccessExhaustedError):
            learn_junta_state(access, 1, 0.3, 0.1)


class TestSquaredCoefficientGuarantee:
    def test_never_worse_than_claimed_on_separated_juntas(self):
        # exact junta with all nonzero coefficients above 2x the cutoff: the
        # total squared coefficient error stays within 2 eps^2 / 2^(2n) at the
        # prescribed copy count, in at least 9 of 10 seeds
        from juntalab.qstate import PauliSpectrum, pauli_reconstruct, pauli_tensor

        n, k, eps, delta = 4, 1, 0.25, 0.1
        cutoff = eps / (2.0 * 2**n * 2**k)
        floor = 2.5 * cutoff * 2 ** (n - k)
        rng = np.random.default_rng(23)
        coeffs = {PauliString.identity(1): 0.5}
        for packed in (1, 2, 3):
            coeffs[PauliString(1, packed)] = float(rng.choice([-1, 1])) * float(
                rng.uniform(floor, 1.5 * floor)
            )
        block = DensityMatrix(pauli_reconstruct(PauliSpectrum(1, coeffs)))
        truth = embed_on(block, (2,), n)
        exact = pauli_tensor(truth).reshape(-1)
        budget = 2.0 * eps**2 / 2 ** (2 * n)
        hits = 0
        for seed in range(10):
            access = SimulatedStateAccess(truth, seed=800 + seed)
            result = learn_junta_state(access, k, eps, delta, basis_seed=seed)
            learned = np.zeros_like(exact)
            for pauli, value in result.spectrum.items():
                learned[pauli.packed] = value
            if float(((learned - exact) ** 2).sum()) <= budget:
                hits += 1
        assert hits >= 9


class TestQac0Arity:
    def test_formula_values(self):
        # log2(1 * 2^1 / 0.25) = 3, depth 1
        assert qac0_junta_arity(1, 1, 0, 0.25) == 3
        # log2(4 * 4 / 0.5) = 5, depth 2 -> 25
        assert qac0_junta_arity(2, 2, 1, 0.5) == 25
        # s floored at 1: log2(2 / 0.5) = 2, depth 2 -> 4
        assert qac0_junta_arity(0, 2, 0, 0.5) == 4

    def test_negative_log_floors_at_zero(self):
        assert qac0_junta_arity(1, 1, 0, 3.9) == 0

    def test_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            qac0_junta_arity(1, -1, 0, 0.1)


class TestLearnQac0Choi:
    def test_identity_function_circuit(self):
        # one Toffoli copying the input into the output; arity bound clamps to
        # the 2 available qubits
        circuit = Qac0Circuit(1, 0, ((ToffoliGate((1,), 2),),))
        truth = choi_state_with_ancilla(circuit)
        access = SimulatedStateAccess(truth.state, seed=6)
        with pytest.warns(UserWarning, match="clamping"):
            result = learn_qac0_choi(access, circuit.size, circuit.depth, 0, 0.25, 0.1, basis_seed=7)
        assert result.junta_arity == 2
        merit = 2 ** circuit.n * frobenius_distance(truth.state, result.matrix) ** 2
        assert merit <= 0.25
        assert trace_distance(result.psd_projected, truth.state) <= 0.6

    def test_degenerate_arity_zero_gives_maximally_mixed(self):
        circuit = Qac0Circuit(1, 0, ((ToffoliGate((1,), 2),),))
        truth = choi_state_with_ancilla(circuit)
        access = SimulatedStateAccess(truth.state, seed=8)
        result = learn_qac0_choi(access, 1, 1, 0, 3.9, 0.1, basis_seed=9)
        assert result.junta_arity == 0
        mixed = DensityMatrix.maximally_mixed(2)
        assert np.array_equal(result.matrix, mixed.entries)
        merit = 2 ** circuit.n * frobenius_distance(truth.state, result.matrix) ** 2
        exact = 2 ** circuit.n * frobenius_distance(truth.state, mixed) ** 2
        assert merit == exact

    def test_result_type(self):
        circuit = Qac0Circuit(1, 0, ((ToffoliGate((1,), 2),),))
        truth = choi_state_with_ancilla(circuit)
        access = SimulatedStateAccess(truth.state, seed=10)
        result = learn_qac0_choi(access, 1, 1, 0, 2.0, 0.2, basis_seed=11)
        assert isinstance(result, LearnedState)
        assert result.copies_used == access.copies_used

    def test_single_toffoli_merit_bound(self):
        # two-input conjunction circuit: the dimension-scaled Frobenius merit
        # lands under eps at the prescribed copy count in >= 9 of 10 seeds
        eps = 0.5
        circuit = Qac0Circuit(2, 0, ((ToffoliGate((1, 2), 3),),))
        truth = choi_state_with_ancilla(circuit)
        hits = 0
        copies = None
        for seed in range(10):
            access = SimulatedStateAccess(truth.state, seed=500 + seed)
            result = learn_qac0_choi(
                access, circuit.size, circuit.depth, 0, eps, 0.1, basis_seed=seed
            )
            assert result.junta_arity == 2
            copies = result.copies_used
            merit = 2 ** circuit.n * frobenius_distance(truth.state, result.matrix) ** 2
            if merit <= eps:
                hits += 1
        assert copies == junta_state_sample_count(3, 2, math.sqrt(eps), 0.1)
        assert hits >= 9


class TestPsdSpectrumConsistency:
    def test_reconstruction_matches_spectrum(self):
        truth = embed_on(random_density_matrix(1, np.random.default_rng(17)), (2,), 3)
        access = SimulatedStateAccess(truth, seed=12)
        result = learn_junta_state(access, 1, 0.3, 0.1, basis_seed=13)
        rebuilt = np.zeros_like(result.matrix)
        from juntalab.qstate import pauli_matrix

        for pauli, value in result.spectrum.items():
            rebuilt = rebuilt + value * pauli_matrix(pauli)
        assert np.max(np.abs(rebuilt - result.matrix)) <= 1e-10

    def test_projection_eigenvalues_nonnegative(self):
        truth = embed_on(random_density_matrix(1, np.random.default_rng(19)), (1,), 3)
        access = SimulatedStateAccess(truth, seed=14)
        result = learn_junta_state(access, 1, 0.3, 0.1, basis_seed=15)
        w, _ = eigh_hermitian(result.psd_projected.entries)
        assert w.min() >= -1e-12
