"""Live eye-in-hand session: camera state, frames, anchors, attachments.

A session is single-writer: exactly one caller advances it. It renders
synthetic masks for the active stage's prompts, projects annotation
anchors, and resolves object poses (objects attached after a grasp stage
move rigidly with the camera, so they appear static in the image).
Identical seed and motion sequence reproduce identical frames.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geometry import HomoPoint
from ..saliency import SaliencyMap
from .camera import BehindCamera, CameraModel, CameraPose, project
from .scenario import Scenario, StagePlan
from .world import NotVisible, PlacedObject, empty_mask, intersect_ray, render_mask

PLANE_AXES = {"x": 0, "y": 1, "z": 2}


@dataclass(frozen=True)
class Frame:
    """One observation: masks for active prompts plus debug projections."""

    step: int
    q: np.ndarray
    masks: dict[str, SaliencyMap]
    anchors: dict[str, HomoPoint]
    projections: dict[str, HomoPoint]
    clamped: bool = False


@dataclass
class _Attachment:
    rotation_rel: np.ndarray  # camera-frame rotation of the object
    position_rel: np.ndarray  # camera-frame position of the object


class SimSession:
    """Deterministic simulated episode over one scenario."""

    def __init__(self, scenario: Scenario, seed: int = 0):
        self.scenario = scenario
        self.seed = seed
        rng = np.random.default_rng(seed)
        self._q, _ = scenario.rig.clamp(scenario.draw_initial_q(rng))
        self._step = 0
        self._stage_idx = 0
        self._attachments: dict[str, _Attachment] = {}
        self._released: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        self._anchors: dict[str, tuple[str | None, np.ndarray]] = {}
        self._anchor_seq = 0
        self._extra_prompts: list[str] = []
        self._initial_positions = {o.id: o.center.copy() for o in scenario.objects}
        self._frame: Frame | None = None
        self._last_clamped = False

    # -- plant interface ---------------------------------------------------

    @property
    def q(self) -> np.ndarray:
        return self._q.copy()

    @property
    def dof(self) -> int:
        return self.scenario.rig.dof

    @property
    def camera(self) -> CameraModel:
        return self.scenario.camera

    @property
    def step_count(self) -> int:
        return self._step

    def pose(self) -> CameraPose:
        return self.scenario.rig.pose(self._q)

    def observe(self) -> Frame:
        if self._frame is None:
            self._frame = self._render()
        return self._frame

    def apply(self, dq: np.ndarray) -> Frame:
        """Advance one motion step; q is clamped at the rig limits."""
        target = self._q + np.asarray(dq, dtype=float)
        self._q, self._last_clamped = self.scenario.rig.clamp(target)
        self._step += 1
        self._frame = self._render()
        return self._frame

    def set_q(self, q: np.ndarray) -> Frame:
        """Reposition without advancing the step counter (probing)."""
        self._q, self._last_clamped = self.scenario.rig.clamp(np.asarray(q, dtype=float))
        self._frame = self._render()
        return self._frame

    # -- stages and attachments ---------------------------------------------

    @property
    def stage_index(self) -> int:
        return self._stage_idx

    @property
    def current_stage(self) -> StagePlan:
        return self.scenario.stages[self._stage_idx]

    @property
    def finished(self) -> bool:
        return self._stage_idx >= len(self.scenario.stages)

    def advance_stage(self) -> None:
        stage = self.current_stage
        if stage.attach:
            self.attach(stage.attach)
        if stage.detach:
            self.detach(stage.detach)
        self._stage_idx += 1
        self._frame = None

    def attach(self, object_id: str) -> None:
        """Fix an object rigidly to the camera at its current relative pose."""
        position, rotation = self.object_pose(object_id)
        pose = self.pose()
        self._attachments[object_id] = _Attachment(
            rotation_rel=pose.rotation.T @ rotation,
            position_rel=pose.to_camera(position),
        )
        self._frame = None

    def detach(self, object_id: str) -> None:
        """Release an attachment; the object stays where it was let go."""
        if object_id in self._attachments:
            position, rotation = self.object_pose(object_id)
            del self._attachments[object_id]
            self._released[object_id] = (position, rotation)
        self._frame = None

    def object_pose(self, object_id: str) -> tuple[np.ndarray, np.ndarray]:
        """Current world position and rotation of an object."""
        attachment = self._attachments.get(object_id)
        if attachment is not None:
            pose = self.pose()
            return (
                pose.to_world(attachment.position_rel),
                pose.rotation @ attachment.rotation_rel,
            )
        if object_id in self._released:
            return self._released[object_id]
        obj = self.scenario.object_by_id(object_id)
        return obj.center.copy(), obj.rotation

    def initial_position(self, object_id: str) -> np.ndarray:
        return self._initial_positions[object_id].copy()

    def placed_objects(self) -> list[PlacedObject]:
        placed = []
        for obj in self.scenario.objects:
            position, rotation = self.object_pose(obj.id)
            placed.append(PlacedObject(
                id=obj.id, shape=obj.shape, extent=obj.extent,
                prompt_tags=obj.prompt_tags, center=position, rotation=rotation,
            ))
        return placed

    def tool_ray(self) -> tuple[np.ndarray, np.ndarray]:
        return self.scenario.rig.tool_ray(self.camera, self.pose())

    def tool_tip(self) -> np.ndarray:
        return self.scenario.rig.tool_tip(self.camera, self.pose())

    # -- annotations ---------------------------------------------------------

    def add_anchor(self, u: float, v: float) -> str:
        """Anchor the pixel (u, v) to the world and return its id.

        The viewing ray is cast against scene objects; if nothing is hit
        it lands on the scenario's annotation plane. Anchors on attached
        objects move with them.
        """
        pose = self.pose()
        direction = pose.ray_through_pixel(self.camera, u, v)
        hit = intersect_ray(self.placed_objects(), pose.position, direction)
        if hit is not None:
            t, placed = hit
            world = pose.position + t * direction
            local = placed.rotation.T @ (world - placed.center)
            anchor = (placed.id, local)
        else:
            axis_idx = PLANE_AXES[self.scenario.annotation_plane[0]]
            value = self.scenario.annotation_plane[1]
            denom = direction[axis_idx]
            if abs(denom) < 1e-9:
                raise ValueError("viewing ray parallel to the annotation plane")
            t = (value - pose.position[axis_idx]) / denom
            if t <= 0:
                raise ValueError("annotation plane behind the camera")
            anchor = (None, pose.position + t * direction)
        anchor_id = f"a{self._anchor_seq}"
        self._anchor_seq += 1
        self._anchors[anchor_id] = anchor
        self._frame = None
        return anchor_id

    def add_prompt(self, prompt: str) -> None:
        """Render a mask for this prompt in addition to the stage's plan."""
        if not any(o.matches(prompt) for o in self.scenario.objects):
            raise KeyError(f"prompt {prompt!r} matches no object")
        if prompt not in self._extra_prompts:
            self._extra_prompts.append(prompt)
            self._frame = None

    def anchor_world(self, anchor_id: str) -> np.ndarray:
        object_id, payload = self._anchors[anchor_id]
        if object_id is None:
            return payload.copy()
        position, rotation = self.object_pose(object_id)
        return position + rotation @ payload

    # -- rendering -----------------------------------------------------------

    def active_prompts(self) -> list[str]:
        prompts = []
        if not self.finished:
            prompts.extend(self.current_stage.prompts)
        for extra in self._extra_prompts:
            if extra not in prompts:
                prompts.append(extra)
        return prompts

    def render_prompt(self, prompt: str, placed=None) -> SaliencyMap:
        """Combined mask of all objects matching a prompt; empty if unseen."""
        placed = placed if placed is not None else self.placed_objects()
        values = None
        for obj in placed:
            if not obj.matches(prompt):
                continue
            try:
                mask = render_mask(self.camera, self.pose(), obj)
            except NotVisible:
                continue
            values = mask.values if values is None else np.maximum(values, mask.values)
        if values is None:
            return empty_mask(self.camera)
        return SaliencyMap(values)

    def compose_view(self) -> SaliencyMap:
        """Grayscale composite of every object, for display and debugging."""
        values = np.zeros((self.camera.height, self.camera.width))
        pose = self.pose()
        for obj in self.placed_objects():
            try:
                mask = render_mask(self.camera, pose, obj)
            except NotVisible:
                continue
            values = np.maximum(values, mask.values)
        return SaliencyMap(values)

    def _render(self) -> Frame:
        pose = self.pose()
        placed = self.placed_objects()
        masks = {p: self.render_prompt(p, placed) for p in self.active_prompts()}
        anchors = {}
        for anchor_id in self._anchors:
            try:
                anchors[anchor_id] = project(self.camera, pose, self.anchor_world(anchor_id))
            except BehindCamera:
                continue
        projections = {}
        for obj in placed:
            try:
                projections[obj.id] = project(self.camera, pose, obj.center)
            except BehindCamera:
                continue
        return Frame(
            step=self._step,
            q=self.q,
            masks=masks,
            anchors=anchors,
            projections=projections,
            clamped=self._last_clamped,
        )
