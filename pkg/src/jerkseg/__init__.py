"""Time-optimal jerk segments for a slider on an elastically mounted base."""
from .errors import (
    JerkSegError,
    NumericalError,
    PlanningFailed,
    UnsupportedStructure,
    ValidationError,
)
from .model import (
    DerivedParams,
    JerkProfile,
    KinematicLimits,
    SampledTrajectory,
    StateVector,
    SystemParams,
    base_response,
    derive_params,
    sample_trajectory,
    slider_response,
)
from .planner import JerkSegment, detect_overshoot, plan_segment, verify_segment
from .switching import SwitchingStructure, solve_structure

__version__ = "0.1.0"

__all__ = [
    "DerivedParams",
    "JerkProfile",
    "JerkSegError",
    "JerkSegment",
    "KinematicLimits",
    "NumericalError",
    "PlanningFailed",
    "SampledTrajectory",
    "StateVector",
    "SwitchingStructure",
    "SystemParams",
    "UnsupportedStructure",
    "ValidationError",
    "base_response",
    "derive_params",
    "detect_overshoot",
    "plan_segment",
    "sample_trajectory",
    "slider_response",
    "solve_structure",
    "verify_segment",
]
