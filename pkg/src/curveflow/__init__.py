"""Length-preserving curvature flow of convex plane curves.

A spectral simulator and verification laboratory for the flow with
normal speed F(kappa) - lambda(t), where lambda(t) is the instantaneous
average of F over the tangent angle.  Curves are carried as support
functions on a uniform tangent-angle grid; differentiation is by FFT and
time stepping by classical RK4 under a parabolic CFL bound.
"""

__version__ = "0.1.0"

from .errors import (
    ClosingConditionViolated,
    ConvexityLost,
    CurveFlowError,
    EvalDomain,
    InsufficientData,
    InvalidGeometry,
    InvalidMonitorParams,
    InvalidParams,
    NotConvex,
    NumericalBlowup,
)
from .geometry import (
    AngleGrid,
    CurveState,
    GeometricSummary,
    area,
    bonnesen_bounds,
    closing_defect,
    curvature_from_support,
    first_harmonic_amplitude,
    integrate,
    isoperimetric_ratio,
    length,
    reconstruct_curve,
    spectral_derivative,
    steiner_normalize,
    summarize,
    support_from_curvature,
    validate_state,
)
from .speeds import (
    BUILTIN_KINDS,
    ConditionReport,
    SpeedFunction,
    blowup_inverse,
    blowup_linear,
    check_conditions,
    finite_difference_check,
    make_builtin,
)
from .analysis import (
    CSV_COLUMNS,
    DecayFit,
    DiagnosticsRecord,
    FlowBaseline,
    andrews_slack,
    barrier_f,
    diagnostics,
    fit_decay_rate,
    linearized_rates,
    monitor_phi,
    monitor_psi,
    phi_ceiling,
    protection_constants,
    read_diagnostics_csv,
    wirtinger_gap,
    write_diagnostics_csv,
)
from .flow import (
    FlowConfig,
    RunOutcome,
    StepResult,
    TrajectoryLog,
    average_speed,
    cfl_dt,
    rhs_F_monitor,
    rhs_curvature,
    rhs_support,
    run,
    step,
)
from .cli import ExperimentConfig, build_initial, make_speed

__all__ = [
    "__version__",
    # errors
    "CurveFlowError",
    "InvalidParams",
    "InvalidGeometry",
    "NotConvex",
    "ConvexityLost",
    "ClosingConditionViolated",
    "NumericalBlowup",
    "EvalDomain",
    "InvalidMonitorParams",
    "InsufficientData",
    # geometry
    "AngleGrid",
    "CurveState",
    "GeometricSummary",
    "integrate",
    "spectral_derivative",
    "curvature_from_support",
    "support_from_curvature",
    "closing_defect",
    "length",
    "area",
    "isoperimetric_ratio",
    "bonnesen_bounds",
    "steiner_normalize",
    "first_harmonic_amplitude",
    "reconstruct_curve",
    "summarize",
    "validate_state",
    # speeds
    "SpeedFunction",
    "ConditionReport",
    "BUILTIN_KINDS",
    "make_builtin",
    "blowup_inverse",
    "blowup_linear",
    "check_conditions",
    "finite_difference_check",
    # analysis
    "CSV_COLUMNS",
    "DiagnosticsRecord",
    "FlowBaseline",
    "DecayFit",
    "barrier_f",
    "protection_constants",
    "monitor_phi",
    "monitor_psi",
    "wirtinger_gap",
    "andrews_slack",
    "diagnostics",
    "linearized_rates",
    "fit_decay_rate",
    "phi_ceiling",
    "write_diagnostics_csv",
    "read_diagnostics_csv",
    # flow
    "FlowConfig",
    "StepResult",
    "RunOutcome",
    "TrajectoryLog",
    "average_speed",
    "cfl_dt",
    "rhs_support",
    "rhs_curvature",
    "rhs_F_monitor",
    "step",
    "run",
    # cli
    "ExperimentConfig",
    "build_initial",
    "make_speed",
]
