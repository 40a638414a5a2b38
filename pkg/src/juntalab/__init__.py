"""Spectral learning lab: junta distributions, junta quantum states,
classical shadows, and Choi-state analysis of shallow Toffoli circuits."""

from .hypercube import (
    CubePoint,
    Distribution,
    FourierSpectrum,
    RealCubeFunction,
    SubsetMask,
    degree,
    eval_character,
    fourier_transform,
    inverse_transform,
    support_size,
    tv_distance,
)
from .qstate import (
    DensityMatrix,
    JuntaStateDescriptor,
    PauliSpectrum,
    PauliString,
    distribution_to_state,
    embed_junta,
    embed_on,
    frobenius_distance,
    partial_trace,
    pauli_expand,
    pauli_matrix,
    pauli_reconstruct,
    proxy_distance,
    rho_eps,
    rho_eps_family,
    trace_distance,
)
from .shadows import (
    PauliBasisString,
    ShadowSample,
    ShadowSet,
    collect_shadows,
    estimate_coefficient,
    estimate_lowdeg,
    measure_in_pauli_basis,
    shadow_sample_count,
)
from .dist_learn import (
    LearnerConfig,
    SampleSet,
    empirical_coefficient,
    learn_junta_distribution,
    learn_sparse_lowdeg_function,
    sample_count_dist,
    threshold_spectrum,
)
from .state_learn import (
    LearnedState,
    SimulatedStateAccess,
    learn_junta_state,
    learn_qac0_choi,
    psd_project,
    threshold_pauli,
)
from .state_test import (
    FrobeniusCertifier,
    OracleCertifier,
    TestVerdict,
    certify_frobenius,
    local_tomography,
    test_junta,
)
from .qac0 import (
    ChoiState,
    Qac0Circuit,
    SingleQubitGate,
    ToffoliGate,
    address_function,
    boolean_distance_to_junta,
    choi_of_boolean_function,
    choi_state_full,
    choi_state_with_ancilla,
    circuit_unitary,
    concentration_search,
    fnorm_agreement_identity,
    light_cone,
    remove_long_toffolis,
)

__version__ = "0.1.0"
