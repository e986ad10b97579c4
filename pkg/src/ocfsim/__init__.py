"""Simulation lab for online one-class collaborative filtering."""

from .algorithm import (
    AlgoParams,
    AlgoState,
    RunTrace,
    StepType,
    estimate_p_hat,
    exploit,
    init_state,
    nearest_neighbors,
    preference_explore,
    run,
    similarity_explore,
    step_type,
)
from .bounds import (
    BoundsInput,
    BoundsReport,
    bounds_report,
    low_feedback_ceiling,
    recommended_params,
    reward_lower_bound,
    t_start,
)
from .model import (
    Environment,
    ModelParams,
    PreferenceMatrix,
    check_separation,
    generate_model,
    sample_response,
)

__all__ = [
    "AlgoParams", "AlgoState", "RunTrace", "StepType", "estimate_p_hat",
    "exploit", "init_state", "nearest_neighbors", "preference_explore", "run",
    "similarity_explore", "step_type", "BoundsInput", "BoundsReport",
    "bounds_report", "low_feedback_ceiling", "recommended_params",
    "reward_lower_bound", "t_start", "Environment", "ModelParams",
    "PreferenceMatrix", "check_separation", "generate_model",
    "sample_response",
]

__version__ = "0.1.0"
