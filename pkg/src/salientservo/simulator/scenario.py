"""Scenario documents: task definitions the simulator executes.

A scenario is a YAML tree naming the camera, rig, scene objects, the
seeded initial-configuration distribution, and an ordered list of stages.
Each stage holds a constraint plan (kinds plus pairing policy), a world-
frame success predicate, and an optional attach/detach effect applied
when it completes.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import yaml

from ..geometry import ConstraintKind
from ..saliency import ConstraintSpec, PairingMode, PairingPolicy
from .camera import CameraModel
from .rig import DOF_NAMES, DofSpec, Rig
from .world import SceneObject

KIND_CODES = {k.value: k for k in ConstraintKind}


class SchemaError(ValueError):
    """Scenario document failed validation; carries the offending path."""

    def __init__(self, message: str, path: str = "$"):
        self.path = path
        super().__init__(f"{path}: {message}")


class TaskContext(Enum):
    REACH_AND_GRASP = "reach_and_grasp"
    PICK_AND_PLACE = "pick_and_place"
    PULL_OPEN = "pull_open"
    GRASP_AND_POUR = "grasp_and_pour"


@dataclass(frozen=True)
class SuccessSpec:
    """World-frame stage predicate.

    ``tip_near``: the named object's center lies within ``tol`` meters of
    the gripper-tip viewing ray (lateral alignment; image servoing does
    not command approach depth). ``over``: horizontal distance between
    object and target centers is within ``tol``. ``displaced``: the object
    moved at least ``min_dist`` from its initial position, optionally
    projected on ``axis``.
    """

    kind: str
    object_id: str
    target_id: str | None = None
    tol: float = 0.01
    min_dist: float = 0.0
    axis: tuple[float, float, float] | None = None


@dataclass(frozen=True)
class StagePlan:
    """One servoing stage: constraint plan plus completion handling."""

    name: str
    mode: PairingMode
    prompts: tuple[str, ...]
    kinds: tuple[ConstraintKind, ...]
    success: SuccessSpec
    attach: str | None = None
    detach: str | None = None

    def constraint_specs(self, camera: CameraModel) -> list[ConstraintSpec]:
        if self.mode is PairingMode.OBJECT_GRIPPER:
            policy = PairingPolicy.object_gripper(self.prompts[0], camera.width, camera.height)
        else:
            policy = PairingPolicy.object_object(
                self.prompts[0], self.prompts[1], camera.width, camera.height
            )
        return [ConstraintSpec(kind=k, policy=policy) for k in self.kinds]


@dataclass(frozen=True)
class Scenario:
    name: str
    context: TaskContext
    camera: CameraModel
    rig: Rig
    objects: tuple[SceneObject, ...]
    q_nominal: tuple[float, ...]
    q_offsets: tuple[tuple[float, float], ...]
    stages: tuple[StagePlan, ...]
    annotation_plane: tuple[str, float] = ("z", 0.0)

    def draw_initial_q(self, rng: np.random.Generator) -> np.ndarray:
        lo = np.array([o[0] for o in self.q_offsets])
        hi = np.array([o[1] for o in self.q_offsets])
        return np.asarray(self.q_nominal) + rng.uniform(lo, hi)

    def object_by_id(self, object_id: str) -> SceneObject:
        for obj in self.objects:
            if obj.id == object_id:
                return obj
        raise KeyError(object_id)


SUCCESS_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["type", "object"],
    "properties": {
        "type": {"enum": ["tip_near", "over", "displaced"]},
        "object": {"type": "string", "minLength": 1},
        "target": {"type": "string", "minLength": 1},
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "min_dist": {"type": "number", "exclusiveMinimum": 0},
        "axis": {"type": "array", "items": {"type": "number"},
                 "minItems": 3, "maxItems": 3},
    },
}

STAGE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "mode", "prompts", "constraints", "success"],
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "mode": {"enum": [m.value for m in PairingMode]},
        "prompts": {"type": "array", "items": {"type": "string", "minLength": 1},
                    "minItems": 1, "maxItems": 2},
        "constraints": {"type": "array", "items": {"enum": list(KIND_CODES)},
                        "minItems": 1},
        "success": SUCCESS_SCHEMA,
        "on_success": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "attach": {"type": "string", "minLength": 1},
                "detach": {"type": "string", "minLength": 1},
            },
        },
    },
}

SCENARIO_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "context", "camera", "rig", "objects", "initial_q", "stages"],
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "context": {"enum": [c.value for c in TaskContext]},
        "camera": {
            "type": "object",
            "additionalProperties": False,
            "required": ["width", "height", "fx", "fy", "cx", "cy"],
            "properties": {
                "width": {"type": "integer", "minimum": 1},
                "height": {"type": "integer", "minimum": 1},
                "fx": {"type": "number", "exclusiveMinimum": 0},
                "fy": {"type": "number", "exclusiveMinimum": 0},
                "cx": {"type": "number", "minimum": 0},
                "cy": {"type": "number", "minimum": 0},
            },
        },
        "rig": {
            "type": "object",
            "additionalProperties": False,
            "required": ["mount", "position", "dof", "limits"],
            "properties": {
                "mount": {"enum": ["topdown", "frontal"]},
                "position": {"type": "array", "items": {"type": "number"},
                             "minItems": 3, "maxItems": 3},
                "rpy": {"type": "array", "items": {"type": "number"},
                        "minItems": 3, "maxItems": 3},
                "dof": {"type": "array", "items": {"enum": list(DOF_NAMES)},
                        "minItems": 1, "uniqueItems": True},
                "limits": {
                    "type": "object",
                    "additionalProperties": {
                        "type": "array", "items": {"type": "number"},
                        "minItems": 2, "maxItems": 2,
                    },
                },
                "tool_depth": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "objects": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["id", "shape", "position", "extent"],
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "shape": {"enum": ["ellipsoid", "box", "segment"]},
                    "position": {"type": "array", "items": {"type": "number"},
                                 "minItems": 3, "maxItems": 3},
                    "extent": {"type": "array", "items": {"type": "number"},
                               "minItems": 3, "maxItems": 3},
                    "rpy": {"type": "array", "items": {"type": "number"},
                            "minItems": 3, "maxItems": 3},
                    "tags": {"type": "array", "items": {"type": "string"}},
                },
            },
        },
        "initial_q": {
            "type": "object",
            "additionalProperties": False,
            "required": ["nominal", "offsets"],
            "properties": {
                "nominal": {"type": "array", "items": {"type": "number"}},
                "offsets": {
                    "type": "array",
                    "items": {"type": "array", "items": {"type": "number"},
                              "minItems": 2, "maxItems": 2},
                },
            },
        },
        "annotation_plane": {
            "type": "object",
            "additionalProperties": False,
            "required": ["axis", "value"],
            "properties": {
                "axis": {"enum": ["x", "y", "z"]},
                "value": {"type": "number"},
            },
        },
        "stages": {"type": "array", "minItems": 1, "items": STAGE_SCHEMA},
    },
}


def _json_path(error: jsonschema.ValidationError) -> str:
    return "$" + "".join(
        f"[{p}]" if isinstance(p, int) else f".{p}" for p in error.absolute_path
    )


def load_scenario(source: str | Path | dict) -> Scenario:
    """Parse and validate a scenario document.

    Accepts a YAML file path or an already-parsed mapping. Unknown fields
    are rejected.

    Raises:
        SchemaError: structural or referential problems, with the path to
            the offending field.
    """
    if isinstance(source, dict):
        doc = source
    else:
        path = Path(source)
        if not path.exists():
            raise FileNotFoundError(f"scenario not found: {path}")
        try:
            doc = yaml.safe_load(path.read_text())
        except yaml.YAMLError as exc:
            raise SchemaError(f"not valid YAML: {exc}") from exc

    validator = jsonschema.Draft202012Validator(SCENARIO_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        first = errors[0]
        raise SchemaError(first.message, _json_path(first))

    camera = CameraModel(
        fx=float(doc["camera"]["fx"]), fy=float(doc["camera"]["fy"]),
        cx=float(doc["camera"]["cx"]), cy=float(doc["camera"]["cy"]),
        width=int(doc["camera"]["width"]), height=int(doc["camera"]["height"]),
    )

    rig_doc = doc["rig"]
    limits = rig_doc["limits"]
    dofs = []
    for name in rig_doc["dof"]:
        if name not in limits:
            raise SchemaError(f"no limits for DOF {name!r}", "$.rig.limits")
        lo, hi = limits[name]
        dofs.append(DofSpec(name, (float(lo), float(hi))))
    for name in limits:
        if name not in rig_doc["dof"]:
            raise SchemaError(f"limits given for unknown DOF {name!r}", "$.rig.limits")
    rig = Rig(
        mount=rig_doc["mount"],
        base_position=tuple(float(v) for v in rig_doc["position"]),
        dofs=tuple(dofs),
        base_rpy=tuple(float(v) for v in rig_doc.get("rpy", (0.0, 0.0, 0.0))),
        tool_depth=float(rig_doc.get("tool_depth", 0.45)),
    )

    objects = []
    seen_ids = set()
    for i, obj_doc in enumerate(doc["objects"]):
        if obj_doc["id"] in seen_ids:
            raise SchemaError(f"duplicate object id {obj_doc['id']!r}", f"$.objects[{i}].id")
        seen_ids.add(obj_doc["id"])
        objects.append(SceneObject(
            id=obj_doc["id"],
            shape=obj_doc["shape"],
            position=tuple(float(v) for v in obj_doc["position"]),
            extent=tuple(float(v) for v in obj_doc["extent"]),
            rpy=tuple(float(v) for v in obj_doc.get("rpy", (0.0, 0.0, 0.0))),
            prompt_tags=tuple(obj_doc.get("tags", ())),
        ))

    nominal = doc["initial_q"]["nominal"]
    offsets = doc["initial_q"]["offsets"]
    if len(nominal) != len(dofs):
        raise SchemaError(
            f"nominal q has {len(nominal)} entries for {len(dofs)} DOF",
            "$.initial_q.nominal",
        )
    if len(offsets) != len(dofs):
        raise SchemaError(
            f"offsets have {len(offsets)} entries for {len(dofs)} DOF",
            "$.initial_q.offsets",
        )

    def resolve_prompt(prompt, where):
        if not any(o.matches(prompt) for o in objects):
            raise SchemaError(f"prompt {prompt!r} matches no object", where)

    def resolve_id(object_id, where):
        if object_id not in seen_ids:
            raise SchemaError(f"unknown object id {object_id!r}", where)

    stages = []
    for i, stage_doc in enumerate(doc["stages"]):
        mode = PairingMode(stage_doc["mode"])
        prompts = tuple(stage_doc["prompts"])
        expected = 1 if mode is PairingMode.OBJECT_GRIPPER else 2
        if len(prompts) != expected:
            raise SchemaError(
                f"{mode.value} stage needs {expected} prompt(s), got {len(prompts)}",
                f"$.stages[{i}].prompts",
            )
        for prompt in prompts:
            resolve_prompt(prompt, f"$.stages[{i}].prompts")
        success_doc = stage_doc["success"]
        resolve_id(success_doc["object"], f"$.stages[{i}].success.object")
        if "target" in success_doc:
            resolve_id(success_doc["target"], f"$.stages[{i}].success.target")
        if success_doc["type"] == "over" and "target" not in success_doc:
            raise SchemaError("'over' needs a target", f"$.stages[{i}].success")
        if success_doc["type"] == "displaced" and "min_dist" not in success_doc:
            raise SchemaError("'displaced' needs min_dist", f"$.stages[{i}].success")
        on_success = stage_doc.get("on_success", {})
        for key in ("attach", "detach"):
            if key in on_success:
                resolve_id(on_success[key], f"$.stages[{i}].on_success.{key}")
        success = SuccessSpec(
            kind=success_doc["type"],
            object_id=success_doc["object"],
            target_id=success_doc.get("target"),
            tol=float(success_doc.get("tol", 0.01)),
            min_dist=float(success_doc.get("min_dist", 0.0)),
            axis=tuple(success_doc["axis"]) if "axis" in success_doc else None,
        )
        stages.append(StagePlan(
            name=stage_doc["name"],
            mode=mode,
            prompts=prompts,
            kinds=tuple(KIND_CODES[c] for c in stage_doc["constraints"]),
            success=success,
            attach=on_success.get("attach"),
            detach=on_success.get("detach"),
        ))

    plane_doc = doc.get("annotation_plane", {"axis": "z", "value": 0.0})
    return Scenario(
        name=doc["name"],
        context=TaskContext(doc["context"]),
        camera=camera,
        rig=rig,
        objects=tuple(objects),
        q_nominal=tuple(float(v) for v in nominal),
        q_offsets=tuple((float(lo), float(hi)) for lo, hi in offsets),
        stages=tuple(stages),
        annotation_plane=(plane_doc["axis"], float(plane_doc["value"])),
    )


def evaluate_stage_success(session, stage: StagePlan) -> bool:
    """Check a stage's world-frame predicate on the live session."""
    success = stage.success
    obj_pos, _ = session.object_pose(success.object_id)
    if success.kind == "tip_near":
        origin, direction = session.tool_ray()
        rel = obj_pos - origin
        along = float(rel @ direction)
        if along <= 0:
            return False
        lateral = rel - along * direction
        return float(np.linalg.norm(lateral)) <= success.tol
    if success.kind == "over":
        target_pos, _ = session.object_pose(success.target_id)
        return float(np.linalg.norm((obj_pos - target_pos)[:2])) <= success.tol
    displacement = obj_pos - session.initial_position(success.object_id)
    if success.axis is not None:
        axis = np.asarray(success.axis, dtype=float)
        axis /= np.linalg.norm(axis)
        return float(displacement @ axis) >= success.min_dist
    return float(np.linalg.norm(displacement)) >= success.min_dist


def _bundled_dir():
    return resources.files("salientservo.scenarios")


def bundled_scenario_names() -> list[str]:
    """Names of the scenario fixtures shipped with the package."""
    return sorted(
        p.name[:-5] for p in _bundled_dir().iterdir() if p.name.endswith(".yaml")
    )


def load_bundled_scenario(name: str) -> Scenario:
    entry = _bundled_dir() / f"{name}.yaml"
    if not entry.is_file():
        raise FileNotFoundError(f"no bundled scenario named {name!r}")
    return load_scenario(yaml.safe_load(entry.read_text()))
