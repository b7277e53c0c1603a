"""Sleep/wake cycle model: coupled slow, fast and REM dynamics with analysis tools."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    BehavioralState, Marker, ModelParameters, StateVector, apply_orexin_knockout,
    classify_state, eval_epsilon, fast_rhs, full_rhs, rem_rhs, slow_rhs,
)
from .params import (  # noqa: E402
    CoefficientTable, SearchConstraints, default_parameters, published_parameters,
    search_coefficients, validate,
)
from .integrator import (  # noqa: E402
    EventKind, PerturbationEvent, SimulationConfig, Trajectory, default_initial_state,
    resume, rk4_step, simulate,
)
from .analysis import (  # noqa: E402
    FixedPoint, Stability, StabilityReport, ad_nullcline, eigenvalues,
    epsilon_stability_sweep, find_fixed_point, gaba_nullcline, jacobian_full,
    jacobian_slow, stability_report, subsystem_steady_state,
)
from .experiments import (  # noqa: E402
    BoutReport, DriftReport, TransitionEvent, analyze_trajectory, bout_durations,
    count_rem_bouts, detect_transitions, estimate_periods, phase_drift, replay_schedule,
    run_orexin_knockout, sleep_camp_schedule,
)
