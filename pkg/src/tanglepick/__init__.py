"""Graspability-index planning and spread-and-pick for tangle-prone granular piles."""

from .depth_scene import DepthFormatError, DepthMap, SceneConfig, load_depth_map, save_depth_map
from .gripper import GripperSpec, rasterize_footprints, sweep_orientations
from .grasp_planner import GraspPlan, convolve, plan_from_masks, plan_grasp
from .mass_model import FitError, MassModel, TrialRecord, fit, invert, picking_error
from .pile_sim import PickParams, PileConfig, PileState, generate_pile, render_depth, simulate_pick

__version__ = "0.1.0"

__all__ = [
    "DepthFormatError",
    "DepthMap",
    "FitError",
    "GraspPlan",
    "GripperSpec",
    "MassModel",
    "PickParams",
    "PileConfig",
    "PileState",
    "SceneConfig",
    "TrialRecord",
    "convolve",
    "fit",
    "generate_pile",
    "invert",
    "load_depth_map",
    "picking_error",
    "plan_from_masks",
    "plan_grasp",
    "rasterize_footprints",
    "render_depth",
    "save_depth_map",
    "simulate_pick",
    "sweep_orientations",
]
