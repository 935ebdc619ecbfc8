"""Simulation and certification toolkit for a multiplexed photon-memory
entangled source: count-level Monte Carlo, dimension witness, entanglement
of formation bound, Bell-parameter tests, and pair tomography."""

from .errors import ComputationError, QcertError, ValidationError
from .linalg import (
    DensityOperator,
    PairRestriction,
    Projector,
    StateVector,
    density_from_ket,
    fidelity_to_pure,
    joint_probability,
    matrix_element,
    outcome_probabilities,
    restrict_to_pair,
    tensor,
)
from .source import (
    SourceConfig,
    fit_noise_to_visibility,
    ideal_state,
    mean_pair_visibility,
    noisy_state,
)
from .bases import (
    MeasurementBasis,
    RfToneProgram,
    cglmp_basis,
    joint_probability_table,
    k_basis,
    ket_from_tone_program,
    mode_vector,
    mub_pair_basis,
    pair_basis,
    rf_tone_program,
    x_basis,
)
from .counting import (
    CoincidenceTable,
    CorrectedCount,
    CountingParams,
    CountRecord,
    bootstrap_table,
    load_table,
    save_table,
    setting_means,
    simulate_setting,
    subtract_accidentals,
    with_accidental_noise,
)
from .certify import (
    CglmpResult,
    CurvePoint,
    EofResult,
    WitnessResult,
    cglmp,
    cglmp_weights,
    eof_bound,
    violation_curve,
    visibility_from_counts,
    witness,
    witness_bound,
)
from .tomo import TomoResult, project_to_physical, reconstruct, reconstruct_exact, tomo_settings
from .pipeline import SimulationConfig, preset, run_simulation

__version__ = "0.1.0"
