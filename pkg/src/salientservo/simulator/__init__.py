"""Deterministic eye-in-hand world: pinhole camera on an N-DOF carrier
over a 3D scene of primitive objects, rendering synthetic saliency masks."""

from .camera import BehindCamera, CameraModel, CameraPose, project, rotation_rpy
from .rig import DofSpec, Rig, default_rig
from .world import NotVisible, PlacedObject, SceneObject, empty_mask, intersect_ray, render_mask
from .scenario import (
    Scenario,
    SchemaError,
    StagePlan,
    SuccessSpec,
    TaskContext,
    bundled_scenario_names,
    evaluate_stage_success,
    load_bundled_scenario,
    load_scenario,
)
from .session import Frame, SimSession

__all__ = [
    "BehindCamera",
    "CameraModel",
    "CameraPose",
    "DofSpec",
    "Frame",
    "NotVisible",
    "PlacedObject",
    "Rig",
    "Scenario",
    "SceneObject",
    "SchemaError",
    "SimSession",
    "StagePlan",
    "SuccessSpec",
    "TaskContext",
    "bundled_scenario_names",
    "default_rig",
    "empty_mask",
    "evaluate_stage_success",
    "intersect_ray",
    "load_bundled_scenario",
    "load_scenario",
    "project",
    "render_mask",
    "rotation_rpy",
]
