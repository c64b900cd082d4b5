"""Scene primitives and synthetic saliency-mask rendering.

Masks stand in for a segmentation model's output: value 1 inside the
projected silhouette, Gaussian falloff (sigma = 2 px) at the boundary,
hard zero beyond 6 sigma. Silhouettes are built from projected centers
and axes (ellipsoids), projected-corner convex hulls (boxes), or thick
projected segments (markers); anything outside the image is clipped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from ..saliency import SaliencyMap
from .camera import CameraModel, CameraPose, Z_MIN, project, projection_jacobian, rotation_rpy

EDGE_SIGMA = 2.0
FALLOFF_CUTOFF = 6.0  # in sigmas; beyond this the mask is exactly zero

SHAPES = ("ellipsoid", "box", "segment")


class NotVisible(ValueError):
    """Object silhouette is entirely outside the field of view."""


@dataclass(frozen=True)
class SceneObject:
    """A primitive in the world: ellipsoid, box, or line-segment marker.

    ``extent`` holds semi-axes (ellipsoid), half-sizes (box), or
    (half-length, half-width, unused) for a segment marker.
    """

    id: str
    shape: str
    position: tuple[float, float, float]
    extent: tuple[float, float, float]
    rpy: tuple[float, float, float] = (0.0, 0.0, 0.0)
    prompt_tags: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.id:
            raise ValueError("object id must be nonempty")
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}; expected one of {SHAPES}")
        needed = 2 if self.shape == "segment" else 3
        if any(e <= 0 for e in self.extent[:needed]):
            raise ValueError(f"extents must be positive, got {self.extent}")

    @property
    def rotation(self) -> np.ndarray:
        return rotation_rpy(*self.rpy)

    @property
    def center(self) -> np.ndarray:
        return np.asarray(self.position, dtype=float)

    def matches(self, prompt: str) -> bool:
        return prompt in self.prompt_tags or prompt == self.id


def _clip_window(camera: CameraModel, u_lo, u_hi, v_lo, v_hi):
    """Integer pixel window intersected with the image, cutoff margin added.

    Raises NotVisible when the window misses the image entirely.
    """
    margin = FALLOFF_CUTOFF * EDGE_SIGMA + 1.0
    u0 = max(int(np.floor(u_lo - margin)), 0)
    u1 = min(int(np.ceil(u_hi + margin)) + 1, camera.width)
    v0 = max(int(np.floor(v_lo - margin)), 0)
    v1 = min(int(np.ceil(v_hi + margin)) + 1, camera.height)
    if u0 >= u1 or v0 >= v1:
        raise NotVisible("silhouette window outside the image")
    return u0, u1, v0, v1


def _window_grid(u0, u1, v0, v1):
    return np.meshgrid(np.arange(u0, u1, dtype=float), np.arange(v0, v1, dtype=float))


def _paste(camera: CameraModel, window, sub: np.ndarray) -> np.ndarray:
    u0, u1, v0, v1 = window
    full = np.zeros((camera.height, camera.width))
    full[v0:v1, u0:u1] = sub
    return full


def _falloff(distance_outside: np.ndarray) -> np.ndarray:
    """1 inside, Gaussian shoulder outside, exact zero beyond the cutoff."""
    values = np.zeros_like(distance_outside)
    inside = distance_outside <= 0.0
    values[inside] = 1.0
    band = (~inside) & (distance_outside < FALLOFF_CUTOFF * EDGE_SIGMA)
    values[band] = np.exp(-0.5 * (distance_outside[band] / EDGE_SIGMA) ** 2)
    return values


def _render_ellipsoid(camera, pose, obj) -> np.ndarray:
    center_cam = pose.to_camera(obj.center)
    if center_cam[2] <= Z_MIN:
        raise NotVisible(f"{obj.id}: center behind camera")
    u0 = camera.fx * center_cam[0] / center_cam[2] + camera.cx
    v0 = camera.fy * center_cam[1] / center_cam[2] + camera.cy
    jac = projection_jacobian(camera, center_cam)
    # World-frame semi-axis vectors, rotated into the camera frame.
    axes_world = obj.rotation * np.asarray(obj.extent, dtype=float)
    axes_cam = pose.rotation.T @ axes_world
    axes_img = jac @ axes_cam  # 2x3: projected axis vectors
    shape = axes_img @ axes_img.T + 1e-9 * np.eye(2)
    shape_inv = np.linalg.inv(shape)

    r_max = float(np.sqrt(np.linalg.eigvalsh(shape)[-1]))
    window = _clip_window(camera, u0 - r_max, u0 + r_max, v0 - r_max, v0 + r_max)
    uu, vv = _window_grid(*window)
    du = uu - u0
    dv = vv - v0
    r_sq = (shape_inv[0, 0] * du**2 + 2.0 * shape_inv[0, 1] * du * dv
            + shape_inv[1, 1] * dv**2)
    r = np.sqrt(np.maximum(r_sq, 1e-12))
    radial = np.hypot(du, dv)
    # Radial pixel distance to the ellipse boundary.
    distance_outside = np.where(r > 1.0, radial * (1.0 - 1.0 / r), 0.0)
    return _paste(camera, window, _falloff(distance_outside))


def _segment_distance(uu, vv, p_a, p_b) -> np.ndarray:
    """Pixelwise distance to the 2D segment a-b."""
    d = p_b - p_a
    len_sq = float(d @ d)
    if len_sq < 1e-12:
        return np.hypot(uu - p_a[0], vv - p_a[1])
    t = ((uu - p_a[0]) * d[0] + (vv - p_a[1]) * d[1]) / len_sq
    t = np.clip(t, 0.0, 1.0)
    return np.hypot(uu - (p_a[0] + t * d[0]), vv - (p_a[1] + t * d[1]))


def _render_box(camera, pose, obj) -> np.ndarray:
    half = np.asarray(obj.extent, dtype=float)
    signs = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)])
    corners_world = obj.center + (signs * half) @ obj.rotation.T
    corners_cam = pose.to_camera(corners_world)
    front = corners_cam[:, 2] > Z_MIN
    if front.sum() < 3:
        raise NotVisible(f"{obj.id}: box behind camera")
    pts = corners_cam[front]
    u = camera.fx * pts[:, 0] / pts[:, 2] + camera.cx
    v = camera.fy * pts[:, 1] / pts[:, 2] + camera.cy
    try:
        hull = ConvexHull(np.column_stack([u, v]))
    except QhullError as exc:
        raise NotVisible(f"{obj.id}: degenerate silhouette") from exc
    verts = np.column_stack([u, v])[hull.vertices]  # counterclockwise

    window = _clip_window(camera, u.min(), u.max(), v.min(), v.max())
    uu, vv = _window_grid(*window)
    inside = np.ones_like(uu, dtype=bool)
    min_dist = np.full_like(uu, np.inf)
    n = len(verts)
    for k in range(n):
        a = verts[k]
        b = verts[(k + 1) % n]
        cross = (b[0] - a[0]) * (vv - a[1]) - (b[1] - a[1]) * (uu - a[0])
        inside &= cross >= 0.0
        min_dist = np.minimum(min_dist, _segment_distance(uu, vv, a, b))
    distance_outside = np.where(inside, 0.0, min_dist)
    return _paste(camera, window, _falloff(distance_outside))


def _render_segment(camera, pose, obj) -> np.ndarray:
    half_len, half_width = obj.extent[0], obj.extent[1]
    axis = obj.rotation[:, 0]  # local x is the segment direction
    ends_world = np.array([obj.center - half_len * axis, obj.center + half_len * axis])
    ends_cam = pose.to_camera(ends_world)
    if np.any(ends_cam[:, 2] <= Z_MIN):
        raise NotVisible(f"{obj.id}: segment endpoint behind camera")
    p_a = np.array([camera.fx * ends_cam[0, 0] / ends_cam[0, 2] + camera.cx,
                    camera.fy * ends_cam[0, 1] / ends_cam[0, 2] + camera.cy])
    p_b = np.array([camera.fx * ends_cam[1, 0] / ends_cam[1, 2] + camera.cx,
                    camera.fy * ends_cam[1, 1] / ends_cam[1, 2] + camera.cy])
    z_mid = 0.5 * (ends_cam[0, 2] + ends_cam[1, 2])
    width_px = camera.fx * half_width / z_mid

    window = _clip_window(
        camera,
        min(p_a[0], p_b[0]) - width_px, max(p_a[0], p_b[0]) + width_px,
        min(p_a[1], p_b[1]) - width_px, max(p_a[1], p_b[1]) + width_px,
    )
    uu, vv = _window_grid(*window)
    distance_outside = np.maximum(_segment_distance(uu, vv, p_a, p_b) - width_px, 0.0)
    return _paste(camera, window, _falloff(distance_outside))


def render_mask(camera: CameraModel, pose: CameraPose, obj: SceneObject) -> SaliencyMap:
    """Render one object's synthetic saliency mask for the given view.

    Raises:
        NotVisible: if the silhouette misses the image entirely or the
            object is behind the camera; callers typically substitute an
            all-zero mask, which downstream reports as an empty mask.
    """
    if obj.shape == "ellipsoid":
        values = _render_ellipsoid(camera, pose, obj)
    elif obj.shape == "box":
        values = _render_box(camera, pose, obj)
    else:
        values = _render_segment(camera, pose, obj)
    if not np.any(values > 0.5):
        raise NotVisible(f"{obj.id}: silhouette outside the field of view")
    return SaliencyMap(values)


def empty_mask(camera: CameraModel) -> SaliencyMap:
    return SaliencyMap(np.zeros((camera.height, camera.width)))


def _ray_ellipsoid(origin, direction, obj) -> float | None:
    rot = obj.rotation
    ext = np.asarray(obj.extent, dtype=float)
    o = (rot.T @ (origin - obj.center)) / ext
    d = (rot.T @ direction) / ext
    a = d @ d
    b = 2.0 * (o @ d)
    c = o @ o - 1.0
    disc = b * b - 4 * a * c
    if disc < 0:
        return None
    root = np.sqrt(disc)
    for t in sorted(((-b - root) / (2 * a), (-b + root) / (2 * a))):
        if t > Z_MIN:
            return float(t)
    return None


def _ray_box(origin, direction, center, rotation, half) -> float | None:
    o = rotation.T @ (origin - center)
    d = rotation.T @ direction
    t_near, t_far = -np.inf, np.inf
    for k in range(3):
        if abs(d[k]) < 1e-12:
            if abs(o[k]) > half[k]:
                return None
            continue
        t1 = (-half[k] - o[k]) / d[k]
        t2 = (half[k] - o[k]) / d[k]
        t_near = max(t_near, min(t1, t2))
        t_far = min(t_far, max(t1, t2))
    if t_near > t_far or t_far < Z_MIN:
        return None
    t = t_near if t_near > Z_MIN else t_far
    return float(t)


def intersect_ray(objects, origin: np.ndarray, direction: np.ndarray):
    """Nearest ray hit over the scene; returns (t, object) or None.

    Segment markers are treated as thin boxes of their half-width.
    """
    best = None
    for obj in objects:
        half = np.asarray(obj.extent, dtype=float)
        if obj.shape == "ellipsoid":
            t = _ray_ellipsoid(origin, direction, obj)
        elif obj.shape == "box":
            t = _ray_box(origin, direction, obj.center, obj.rotation, half)
        else:
            thin = np.array([half[0], half[1], half[1]])
            t = _ray_box(origin, direction, obj.center, obj.rotation, thin)
        if t is not None and (best is None or t < best[0]):
            best = (t, obj)
    return best


@dataclass(frozen=True)
class PlacedObject:
    """A scene object with its world pose resolved (attachments applied)."""

    id: str
    shape: str
    extent: tuple[float, float, float]
    prompt_tags: tuple[str, ...]
    center: np.ndarray
    rotation: np.ndarray

    def matches(self, prompt: str) -> bool:
        return prompt in self.prompt_tags or prompt == self.id
