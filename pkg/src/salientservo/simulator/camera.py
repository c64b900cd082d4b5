"""Pinhole camera model and pose math.

Camera frame follows the usual computer-vision convention: x right,
y down, z forward along the optical axis. A pose stores the camera-to-
world rotation and the camera origin in world coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import HomoPoint

Z_MIN = 0.01  # meters; anything nearer counts as behind the camera


class BehindCamera(ValueError):
    """Point has insufficient depth in front of the camera."""


@dataclass(frozen=True)
class CameraModel:
    """Intrinsics: focal lengths and principal point in pixels."""

    fx: float = 500.0
    fy: float = 500.0
    cx: float = 320.0
    cy: float = 240.0
    width: int = 640
    height: int = 480

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")


def rotation_rpy(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Rotation matrix from yaw-pitch-roll applied in fixed order Rz*Ry*Rx."""
    cr, sr = np.cos(roll), np.sin(roll)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cy, sy = np.cos(yaw), np.sin(yaw)
    rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
    ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
    rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]])
    return rz @ ry @ rx


@dataclass(frozen=True)
class CameraPose:
    """Camera-to-world rotation plus camera origin in the world frame."""

    rotation: np.ndarray
    position: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float))
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))

    def to_camera(self, world_points: np.ndarray) -> np.ndarray:
        """Map world points (..., 3) into the camera frame."""
        pts = np.asarray(world_points, dtype=float)
        return (pts - self.position) @ self.rotation

    def to_world(self, camera_points: np.ndarray) -> np.ndarray:
        pts = np.asarray(camera_points, dtype=float)
        return pts @ self.rotation.T + self.position

    def ray_through_pixel(self, camera: CameraModel, u: float, v: float) -> np.ndarray:
        """Unit world-frame direction of the viewing ray through pixel (u, v)."""
        d = np.array([(u - camera.cx) / camera.fx, (v - camera.cy) / camera.fy, 1.0])
        d = self.rotation @ d
        return d / np.linalg.norm(d)


def project(camera: CameraModel, pose: CameraPose, world_point) -> HomoPoint:
    """Pinhole projection of a world point to a normalized image point.

    Raises:
        BehindCamera: if the point's camera-frame depth is at most Z_MIN.
    """
    pc = pose.to_camera(np.asarray(world_point, dtype=float))
    z = pc[2]
    if z <= Z_MIN:
        raise BehindCamera(f"depth {z:.4f} m behind the near plane")
    u = camera.fx * pc[0] / z + camera.cx
    v = camera.fy * pc[1] / z + camera.cy
    return HomoPoint(float(u), float(v), 1.0)


def projection_jacobian(camera: CameraModel, camera_point: np.ndarray) -> np.ndarray:
    """2x3 derivative of pixel coordinates w.r.t. camera-frame position."""
    x, y, z = camera_point
    return np.array([
        [camera.fx / z, 0.0, -camera.fx * x / z**2],
        [0.0, camera.fy / z, -camera.fy * y / z**2],
    ])
