"""Simulation and certification toolkit for interconnected port-Hamiltonian
systems with event-triggered communication over a delayed channel."""

from .core import (
    ClosedLoopModel,
    PhSubsystem,
    assemble_interconnection,
    make_pendulum_controller,
    make_pendulum_model,
    make_pendulum_plant,
    make_subsystem,
    output_y1,
    pendulum_hessian_bounds,
)
from .engine import CvxpyEngine, EngineResult, FeasibilityEngine
from .errors import (
    AntisymmetryViolation,
    ConfigError,
    DimensionMismatch,
    DissipationViolation,
    EquilibriumViolation,
    GradientMismatch,
    InsufficientHistory,
    NoFeasiblePoint,
    NonConstantMatrices,
    NonFiniteState,
    SolverFailure,
    StepMismatch,
    ToolkitError,
)
from .lmi import (
    Certificate,
    LmiConstraint,
    LmiInstance,
    build_theta,
    build_xi,
    certify_linear,
    certify_polytopic,
    default_epsilon,
    hessian_vertices,
    sigma_max,
    verify_witness,
)
from .lyapunov import (
    HistoryBuffer,
    VdotSeries,
    eval_V,
    lyapunov_series,
    vdot_along_trace,
    wirtinger_gap,
)
from .sim import SimTrace, performance_indices, simulate, trace_to_csv
from .trigger import (
    TransmissionLog,
    TriggerDelayConfig,
    check_trigger,
    events_to_csv,
    held_value,
    sample_delay,
)
from .config import Scenario, build_model, derive_seed, load_scenario

__version__ = "0.1.0"

__all__ = [
    "AntisymmetryViolation",
    "Certificate",
    "ClosedLoopModel",
    "ConfigError",
    "CvxpyEngine",
    "DimensionMismatch",
    "DissipationViolation",
    "EngineResult",
    "EquilibriumViolation",
    "FeasibilityEngine",
    "GradientMismatch",
    "HistoryBuffer",
    "InsufficientHistory",
    "LmiConstraint",
    "LmiInstance",
    "NoFeasiblePoint",
    "NonConstantMatrices",
    "NonFiniteState",
    "PhSubsystem",
    "Scenario",
    "SimTrace",
    "SolverFailure",
    "StepMismatch",
    "ToolkitError",
    "TransmissionLog",
    "TriggerDelayConfig",
    "VdotSeries",
    "assemble_interconnection",
    "build_model",
    "build_theta",
    "build_xi",
    "certify_linear",
    "certify_polytopic",
    "check_trigger",
    "default_epsilon",
    "derive_seed",
    "eval_V",
    "events_to_csv",
    "held_value",
    "hessian_vertices",
    "load_scenario",
    "lyapunov_series",
    "make_pendulum_controller",
    "make_pendulum_model",
    "make_pendulum_plant",
    "make_subsystem",
    "output_y1",
    "pendulum_hessian_bounds",
    "performance_indices",
    "sample_delay",
    "sigma_max",
    "simulate",
    "trace_to_csv",
    "verify_witness",
    "vdot_along_trace",
    "wirtinger_gap",
]
