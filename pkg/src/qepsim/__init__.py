"""Nudged ground-state response training for parameterized quantum systems."""

__version__ = "0.1.0"

from .eigensolver import (
    ConvergenceError,
    DegenerateGroundState,
    GroundStateResult,
    equilibration_count,
    exact_susceptibility,
    ground_expectation,
    ground_state,
    reset_equilibration_count,
)
from .hamiltonian import (
    ParameterizedHamiltonian,
    Role,
    SensorArchitecture,
    Term,
    build_cluster_ising,
    build_sensor_system,
)
from .measurement import (
    INFINITE_SHOTS,
    OutcomeCombo,
    ShotModel,
    many_queries_accuracy,
    noisy_expectation,
    outcome_projector,
    single_shot,
    single_shot_accuracy,
)
from .pauli import PauliString, expectation, pauli_sum, realize
from .qep import (
    GradientEstimate,
    NudgeScheme,
    exact_loss_gradient,
    gradient_overlap,
    mse_error_signal,
    onsager_audit,
    parameter_shift_oracle,
    qep_gradient,
)
from .training import (
    AdamState,
    PhaseLabel,
    PhasePoint,
    Trajectory,
    adam_step,
    explore_phase,
    optimize_sensitivity,
    overlap_sweep,
    phase_label,
    sample_phase_point,
    train_supervised,
)
