"""Identification and equivalence calculus for discrete-time MIMO
input/output models: exact simulation, cross-order equivalence testing and
order reduction, regularized recursive least squares, excitation
diagnostics, and closed-form convergence targets for overparameterized
fits."""

__version__ = "0.1.0"

from .errors import NumericalError, ValidationError
from .model_core import (
    IOModel,
    Trajectory,
    TransitionPair,
    output_transition,
    simulate,
    transition_pair,
    verify_trajectory,
)
from .equivalence import (
    ConsolidatedCoeffs,
    EquivalenceCertificate,
    LiftMatrix,
    ReducibilityReport,
    ReductionResult,
    build_lift_matrix,
    consolidate,
    is_equivalent,
    lift_once,
    reduce_once,
    reducibility_check,
    trivial_embed,
)
from .rls import (
    RegressorSample,
    RlsState,
    batch_solve,
    build_regressor,
    cost,
    initial_state,
    regressor_matrix,
    residual,
    rls_step,
    run_rls,
)
from .excitation import (
    ExcitationReport,
    GramLimit,
    build_reduced_regressor,
    estimate_gram_limit,
    excitation_report,
    lift_identity_check,
    reduced_regressor_matrix,
)
from .convergence import (
    ConvergenceTrace,
    ProjectedLimit,
    equivalence_via_theta,
    lift_true,
    predict_correct_order_asymptote,
    predict_overparam_asymptote,
    projected_limit,
    run_tracked_identification,
    theta_equivalence_residual,
)
from .inputs import InputSpec, generate_input, parse_input_spec
from .experiment import ExperimentConfig, RunManifest, load_config, run_experiment

__all__ = [name for name in dir() if not name.startswith("_")]
