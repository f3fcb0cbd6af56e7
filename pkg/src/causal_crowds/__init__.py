"""Counterfactual crowd simulation, causal trajectory annotation, and
causally-aware forecasting metrics."""

from .sim import (
    FOLLOWER,
    GOAL_SEEKING,
    OrcaLine,
    Scene,
    SimConfig,
    compute_orca_line,
    rollout,
    solve_lp2,
    solve_lp3,
    visible_neighbors,
)
from .counterfactual import (
    CausalAnnotation,
    CausalThresholds,
    Category,
    annotate_scene,
    causal_effect,
    joint_removal_effect,
    simulate_pair,
)
from .scenarios import Split, SplitSpec, generate_split
from .metrics import evaluate_split

__all__ = [
    "FOLLOWER",
    "GOAL_SEEKING",
    "OrcaLine",
    "Scene",
    "SimConfig",
    "compute_orca_line",
    "rollout",
    "solve_lp2",
    "solve_lp3",
    "visible_neighbors",
    "CausalAnnotation",
    "CausalThresholds",
    "Category",
    "annotate_scene",
    "causal_effect",
    "joint_removal_effect",
    "simulate_pair",
    "Split",
    "SplitSpec",
    "generate_split",
    "evaluate_split",
]

__version__ = "0.1.0"
