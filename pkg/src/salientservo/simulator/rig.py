"""Carrier rig: maps generalized coordinates to an eye-in-hand camera pose.

Translational DOFs offset the camera in the world frame; rotational DOFs
apply a world-frame yaw-pitch-roll on top of the mount orientation.
Default rig: x, y, z translation plus yaw.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .camera import CameraModel, CameraPose, rotation_rpy

DOF_NAMES = ("tx", "ty", "tz", "ryaw", "rpitch", "rroll")

# Camera axes in the world frame, per mount, columns (x_cam, y_cam, z_cam).
# Top-down looks along -z (down at the table); frontal looks along +y.
MOUNTS = {
    "topdown": np.array([[1.0, 0.0, 0.0],
                         [0.0, -1.0, 0.0],
                         [0.0, 0.0, -1.0]]),
    "frontal": np.array([[1.0, 0.0, 0.0],
                         [0.0, 0.0, 1.0],
                         [0.0, -1.0, 0.0]]),
}


@dataclass(frozen=True)
class DofSpec:
    """One degree of freedom: its kind and motion limits."""

    name: str
    limits: tuple[float, float]

    def __post_init__(self):
        if self.name not in DOF_NAMES:
            raise ValueError(f"unknown DOF {self.name!r}; expected one of {DOF_NAMES}")
        if not self.limits[0] < self.limits[1]:
            raise ValueError(f"bad limits for {self.name}: {self.limits}")


@dataclass(frozen=True)
class Rig:
    """Camera carrier with a smooth q -> pose map."""

    mount: str
    base_position: tuple[float, float, float]
    dofs: tuple[DofSpec, ...]
    base_rpy: tuple[float, float, float] = (0.0, 0.0, 0.0)
    tool_depth: float = 0.45  # camera-frame depth of the gripper tip, meters

    def __post_init__(self):
        if self.mount not in MOUNTS:
            raise ValueError(f"unknown mount {self.mount!r}")
        if not self.dofs:
            raise ValueError("rig needs at least one DOF")
        names = [d.name for d in self.dofs]
        if len(set(names)) != len(names):
            raise ValueError("duplicate DOF names")
        if self.tool_depth <= 0:
            raise ValueError("tool_depth must be positive")

    @property
    def dof(self) -> int:
        return len(self.dofs)

    def clamp(self, q: np.ndarray) -> tuple[np.ndarray, bool]:
        """Clamp q to the configured limits; flags whether anything clipped."""
        q = np.asarray(q, dtype=float)
        lo = np.array([d.limits[0] for d in self.dofs])
        hi = np.array([d.limits[1] for d in self.dofs])
        clamped = np.clip(q, lo, hi)
        return clamped, bool(np.any(clamped != q))

    def pose(self, q: np.ndarray) -> CameraPose:
        q = np.asarray(q, dtype=float)
        if q.shape != (self.dof,):
            raise ValueError(f"expected {self.dof} coordinates, got shape {q.shape}")
        offsets = dict(zip((d.name for d in self.dofs), q))
        position = np.asarray(self.base_position, dtype=float) + np.array([
            offsets.get("tx", 0.0), offsets.get("ty", 0.0), offsets.get("tz", 0.0)
        ])
        roll = self.base_rpy[0] + offsets.get("rroll", 0.0)
        pitch = self.base_rpy[1] + offsets.get("rpitch", 0.0)
        yaw = self.base_rpy[2] + offsets.get("ryaw", 0.0)
        rotation = rotation_rpy(roll, pitch, yaw) @ MOUNTS[self.mount]
        return CameraPose(rotation=rotation, position=position)

    def tool_ray(self, camera: CameraModel, pose: CameraPose) -> tuple[np.ndarray, np.ndarray]:
        """World-frame origin and direction of the gripper-tip viewing ray.

        The tip sits on the ray through the heuristic static image point
        (W/2, 4H/5) at ``tool_depth``.
        """
        u = camera.width / 2.0
        v = 4.0 * camera.height / 5.0
        direction = pose.ray_through_pixel(camera, u, v)
        return pose.position.copy(), direction

    def tool_tip(self, camera: CameraModel, pose: CameraPose) -> np.ndarray:
        """World position of the gripper tip."""
        origin, direction = self.tool_ray(camera, pose)
        d_cam = np.array([
            (camera.width / 2.0 - camera.cx) / camera.fx,
            (4.0 * camera.height / 5.0 - camera.cy) / camera.fy,
            1.0,
        ])
        # Scale so the camera-frame depth equals tool_depth.
        t = self.tool_depth * np.linalg.norm(d_cam)
        return origin + t * direction


def default_rig(mount: str = "topdown",
                base_position: tuple[float, float, float] = (0.0, 0.0, 0.5),
                tool_depth: float = 0.45) -> Rig:
    """4-DOF rig: x, y, z translation plus yaw."""
    span = {"tx": 0.6, "ty": 0.6, "tz": 0.4, "ryaw": np.pi}
    dofs = tuple(DofSpec(name, (-span[name], span[name])) for name in ("tx", "ty", "tz", "ryaw"))
    return Rig(mount=mount, base_position=base_position, dofs=dofs, tool_depth=tool_depth)
