"""Stability and mode-deformation analysis of two-rate DAE integration schemes."""

__version__ = "0.1.0"

from ._linalg import NumericalError, SingularMatrixError
from .dae_core import (
    Dims,
    Event,
    LinearDae,
    ModelError,
    NonlinearModel,
    Partition,
    PartitionedLinearDae,
    apply_partition,
    builtin_model,
    linearize,
    load_model,
    load_partition,
    reassemble,
    reduce_state_matrix,
    save_model,
    save_partition,
)
from .modal import (
    ModeSet,
    ParticipationMatrices,
    eig_reduced,
    participation,
    participation_algebraic,
    participation_states,
    pf_partition,
)
from .multirate import (
    ErrorSeries,
    ResidualSeries,
    Trajectory,
    run_multirate,
    run_reference,
    trajectory_error,
    verify_pencil_consistency,
)
from .pencil import (
    DeformationReport,
    MethodParams,
    PencilPair,
    PencilSpectrum,
    SchemeSpec,
    analyze,
    assemble_pencil,
    deformation_report,
    factorization_cost,
    method_params,
    single_rate_pencil,
    solve_pencil,
    sweep_hf,
    sweep_r,
)

__all__ = [
    "__version__",
    "NumericalError",
    "SingularMatrixError",
    "Dims",
    "Event",
    "LinearDae",
    "ModelError",
    "NonlinearModel",
    "Partition",
    "PartitionedLinearDae",
    "apply_partition",
    "builtin_model",
    "linearize",
    "load_model",
    "load_partition",
    "reassemble",
    "reduce_state_matrix",
    "save_model",
    "save_partition",
    "ModeSet",
    "ParticipationMatrices",
    "eig_reduced",
    "participation",
    "participation_algebraic",
    "participation_states",
    "pf_partition",
    "ErrorSeries",
    "ResidualSeries",
    "Trajectory",
    "run_multirate",
    "run_reference",
    "trajectory_error",
    "verify_pencil_consistency",
    "DeformationReport",
    "MethodParams",
    "PencilPair",
    "PencilSpectrum",
    "SchemeSpec",
    "analyze",
    "assemble_pencil",
    "deformation_report",
    "factorization_cost",
    "method_params",
    "single_rate_pencil",
    "solve_pencil",
    "sweep_hf",
    "sweep_r",
]
