"""Planning toolkit for sterile-male mosquito release programmes.

Models an egg/male/female population under releases of sterilizing
males, with a positivity-preserving integrator, exact steady-state and
critical-release computations, certified extinction-basin membership,
and analytic plus simulated basin-entrance times — the quantities needed
to size, pace, and budget a suppression programme.
"""

from __future__ import annotations

from sitdyn._backend import BACKEND, COMPILED
from sitdyn.config import (
    ConfigError,
    NumericsConfig,
    RunConfig,
    ScheduleConfig,
    SweepSpec,
    SWEEP_TABLE_IDS,
    list_presets,
    load_config,
)
from sitdyn.dynamics import (
    DEFAULT_MAX_STEPS,
    NsfdScheme,
    StepOverflowError,
    StopReason,
    Trajectory,
    nsfd_scheme,
    reference_integrate,
    simulate,
)
from sitdyn.entrance import (
    AnalyticBoundContext,
    BoundNotApplicableError,
    EntranceReport,
    EntryCeiling,
    NeverEnteredError,
    bound_components,
    bound_context,
    entrance_time_controlled,
    entry_time_ceiling,
    entry_time_floor,
    entry_time_simulated,
    two_step_feasible,
)
from sitdyn.equilibria import (
    CriticalRelease,
    EquilibriumBounds,
    NoPositiveEquilibriumError,
    Stability,
    SteadyState,
    SteadyStateSet,
    classify_stability,
    critical_release_level,
    equilibrium_bounds,
    steady_states,
)
from sitdyn.params import (
    Aggregates,
    BioParams,
    CalibrationInfeasibleError,
    InvalidParameterError,
    ModelParams,
    Order,
    aggregates,
    calibrate_capacity,
    compare,
    derive_model_params,
)
from sitdyn.releases import (
    ConstantRelease,
    ImpulsiveRelease,
    PeriodicRelease,
    ReleaseSchedule,
    SterileEnvelope,
    ThresholdNotMetError,
    UnaidedCollapseError,
    Verdict,
    amount_for_effort,
    extinction_threshold_check,
    min_release_count,
    release_envelope,
    sufficiency_scale,
    sufficient_impulse,
    sufficient_period,
)
from sitdyn.separatrix import (
    BisectionStalledError,
    CloudFormatError,
    Fate,
    FateKind,
    FingerprintMismatchError,
    SeparatrixCloud,
    build_cloud,
    cloud_fingerprint,
    fate,
    get_or_build_cloud,
    load_cloud,
    ray_bisection,
    save_cloud,
)
from sitdyn.sweeps import run_sweep, sweep_table

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "BACKEND",
    "COMPILED",
    # parameters
    "BioParams",
    "ModelParams",
    "Aggregates",
    "Order",
    "InvalidParameterError",
    "CalibrationInfeasibleError",
    "aggregates",
    "calibrate_capacity",
    "compare",
    "derive_model_params",
    # dynamics
    "NsfdScheme",
    "Trajectory",
    "StopReason",
    "StepOverflowError",
    "DEFAULT_MAX_STEPS",
    "nsfd_scheme",
    "reference_integrate",
    "simulate",
    # equilibria
    "Stability",
    "SteadyState",
    "SteadyStateSet",
    "CriticalRelease",
    "EquilibriumBounds",
    "NoPositiveEquilibriumError",
    "classify_stability",
    "critical_release_level",
    "equilibrium_bounds",
    "steady_states",
    # releases
    "ReleaseSchedule",
    "ConstantRelease",
    "PeriodicRelease",
    "ImpulsiveRelease",
    "SterileEnvelope",
    "Verdict",
    "UnaidedCollapseError",
    "ThresholdNotMetError",
    "amount_for_effort",
    "extinction_threshold_check",
    "min_release_count",
    "release_envelope",
    "sufficiency_scale",
    "sufficient_impulse",
    "sufficient_period",
    # separatrix
    "Fate",
    "FateKind",
    "SeparatrixCloud",
    "BisectionStalledError",
    "CloudFormatError",
    "FingerprintMismatchError",
    "build_cloud",
    "cloud_fingerprint",
    "fate",
    "get_or_build_cloud",
    "load_cloud",
    "ray_bisection",
    "save_cloud",
    # entrance
    "AnalyticBoundContext",
    "EntryCeiling",
    "EntranceReport",
    "NeverEnteredError",
    "BoundNotApplicableError",
    "bound_components",
    "bound_context",
    "entrance_time_controlled",
    "entry_time_ceiling",
    "entry_time_floor",
    "entry_time_simulated",
    "two_step_feasible",
    # configuration and sweeps
    "ConfigError",
    "NumericsConfig",
    "RunConfig",
    "ScheduleConfig",
    "SweepSpec",
    "SWEEP_TABLE_IDS",
    "list_presets",
    "load_config",
    "run_sweep",
    "sweep_table",
]
