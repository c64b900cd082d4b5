"""Turn per-pixel saliency maps into geometric constraint features.

A saliency map is a W x H grid of probabilities. Its probability-weighted
image moments give a target point (centroid) and a principal-axis line;
heuristic static features complete the pairing on the gripper side. Two
pairing policies exist: object-gripper (one map, static counterpart) and
object-object (two maps, carried object frozen, target refreshed).
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .geometry import (
    ConstraintKind,
    HomoLine,
    HomoPoint,
    evaluate_constraint,
    line_through_points,
    normalize_line,
)

DEFAULT_THRESHOLD = 0.5
MIN_MASS = 10.0
ISOTROPY_RATIO = 1.1


class EmptyMask(ValueError):
    """Mask carries too little probability mass to extract features."""


class PolicyMismatch(ValueError):
    """Mask count does not match the pairing policy mode."""


class UnsupportedFormat(ValueError):
    """Mask file is not 8-bit grayscale PNG or PGM."""


class MalformedFile(ValueError):
    """Mask file could not be parsed."""


@dataclass(frozen=True)
class SaliencyMap:
    """Row-major grid of per-pixel probabilities in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"saliency map must be a 2-d grid, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("saliency map contains non-finite values")
        if v.min() < 0.0 or v.max() > 1.0:
            raise ValueError("saliency values must lie in [0, 1]")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def mass(self) -> float:
        return float(self.values.sum())


@dataclass(frozen=True)
class ExtractedFeatures:
    """Constraint features read off a saliency map by weighted PCA."""

    centroid: HomoPoint
    axis_line: HomoLine
    axis_endpoints: tuple[HomoPoint, HomoPoint]
    mass: float
    anisotropy: float
    isotropic: bool


class PairingMode(Enum):
    OBJECT_GRIPPER = "object_gripper"
    OBJECT_OBJECT = "object_object"


def heuristic_static_point(width: int, height: int) -> HomoPoint:
    """Image location where the gripper tip appears: (W/2, 4H/5)."""
    return HomoPoint(width / 2.0, 4.0 * height / 5.0, 1.0)


def mid_image_vertical_line(width: int) -> HomoLine:
    """Vertical line through the mid-image center: x = W/2."""
    return normalize_line(HomoLine(1.0, 0.0, -width / 2.0))


@dataclass(frozen=True)
class PairingPolicy:
    """How masks and static heuristics pair up into constraint features.

    Object-gripper mode pairs one mask with the heuristic static point or
    the vertical mid-image line. Object-object mode pairs two masks; the
    carried object's features are computed once and frozen, the target's
    are refreshed every control step.
    """

    mode: PairingMode
    prompts: tuple[str, ...]
    static_point: HomoPoint
    static_line: HomoLine
    static_line_points: tuple[HomoPoint, HomoPoint]

    def __post_init__(self):
        expected = 1 if self.mode is PairingMode.OBJECT_GRIPPER else 2
        if len(self.prompts) != expected:
            raise PolicyMismatch(
                f"{self.mode.value} needs {expected} prompt(s), got {len(self.prompts)}"
            )

    @classmethod
    def object_gripper(cls, prompt: str, width: int, height: int) -> "PairingPolicy":
        return cls._build(PairingMode.OBJECT_GRIPPER, (prompt,), width, height)

    @classmethod
    def object_object(cls, carried: str, target: str, width: int, height: int) -> "PairingPolicy":
        return cls._build(PairingMode.OBJECT_OBJECT, (carried, target), width, height)

    @classmethod
    def _build(cls, mode, prompts, width, height):
        anchor = heuristic_static_point(width, height)
        center = HomoPoint(width / 2.0, height / 2.0, 1.0)
        return cls(
            mode=mode,
            prompts=prompts,
            static_point=anchor,
            static_line=mid_image_vertical_line(width),
            static_line_points=(center, anchor),
        )


@dataclass(frozen=True)
class AnnotatedFeatures:
    """User-annotated constraint features (the manual HRI path).

    ``fixed_points`` stay put in the image (the gripper side, which appears
    static from an eye-in-hand camera); ``anchor_ids`` name world-anchored
    target features a session re-projects every frame.
    """

    fixed_points: tuple[HomoPoint, ...]
    anchor_ids: tuple[str, ...]


@dataclass(frozen=True)
class ConstraintSpec:
    """One constraint of a task: a kind bound to its feature source."""

    kind: ConstraintKind
    policy: PairingPolicy | None = None
    annotation: AnnotatedFeatures | None = None

    def __post_init__(self):
        if (self.policy is None) == (self.annotation is None):
            raise ValueError("constraint needs exactly one of policy or annotation")
        if self.annotation is not None:
            fixed, anchored = _ANNOTATION_ARITY[self.kind]
            if len(self.annotation.fixed_points) != fixed:
                raise ValueError(
                    f"{self.kind.value} needs {fixed} fixed point(s), "
                    f"got {len(self.annotation.fixed_points)}"
                )
            if len(self.annotation.anchor_ids) != anchored:
                raise ValueError(
                    f"{self.kind.value} needs {anchored} anchor(s), "
                    f"got {len(self.annotation.anchor_ids)}"
                )


# (fixed gripper-side points, world-anchored target features) per kind.
_ANNOTATION_ARITY = {
    ConstraintKind.POINT_TO_POINT: (1, 1),
    ConstraintKind.POINT_TO_LINE: (1, 2),
    ConstraintKind.LINE_TO_LINE: (2, 2),
    ConstraintKind.PARALLEL_LINES: (2, 2),
}


@dataclass(frozen=True)
class BoundFeatures:
    """Concrete features for one constraint, ready for error evaluation."""

    kind: ConstraintKind
    f1: HomoPoint | None = None
    f2: HomoPoint | None = None
    f12: HomoLine | None = None
    f34: HomoLine | None = None
    carried: ExtractedFeatures | None = field(default=None, compare=False)
    target: ExtractedFeatures | None = field(default=None, compare=False)

    def evaluate(self) -> np.ndarray:
        return evaluate_constraint(self.kind, f1=self.f1, f2=self.f2, f12=self.f12, f34=self.f34)


def threshold_mask(saliency: SaliencyMap, tau: float) -> SaliencyMap:
    """Zero out values below tau; keep surviving probabilities as-is."""
    if not 0.0 < tau < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {tau}")
    return SaliencyMap(np.where(saliency.values < tau, 0.0, saliency.values))


def pca_extract(saliency: SaliencyMap, min_mass: float = MIN_MASS) -> ExtractedFeatures:
    """Extract centroid and principal-axis line by probability-weighted PCA.

    The centroid is the weighted mean pixel position and the axis is the
    eigenvector of the larger eigenvalue of the 2x2 weighted covariance.
    A near-isotropic blob (eigenvalue ratio < 1.1) has no meaningful axis;
    the line then falls back to the vertical through the centroid and the
    result is flagged ``isotropic``.

    Raises:
        EmptyMask: if total probability mass is at or below ``min_mass``.
    """
    v = saliency.values
    mass = float(v.sum())
    if mass <= min_mass:
        raise EmptyMask(f"mask mass {mass:.3f} at or below floor {min_mass}")

    xs = np.arange(saliency.width, dtype=float)
    ys = np.arange(saliency.height, dtype=float)
    col_mass = v.sum(axis=0)
    row_mass = v.sum(axis=1)
    cx = float(col_mass @ xs) / mass
    cy = float(row_mass @ ys) / mass

    dx = xs - cx
    dy = ys - cy
    cov_xx = float(col_mass @ (dx * dx)) / mass
    cov_yy = float(row_mass @ (dy * dy)) / mass
    cov_xy = float(dy @ v @ dx) / mass

    eigvals, eigvecs = np.linalg.eigh(np.array([[cov_xx, cov_xy], [cov_xy, cov_yy]]))
    lam_min = max(float(eigvals[0]), 0.0)
    lam_max = max(float(eigvals[1]), 0.0)
    anisotropy = lam_max / lam_min if lam_min > 1e-12 else np.inf
    if lam_max <= 1e-12:
        anisotropy = 1.0

    isotropic = anisotropy < ISOTROPY_RATIO
    if isotropic:
        direction = np.array([0.0, 1.0])
    else:
        direction = eigvecs[:, 1]

    centroid = HomoPoint(cx, cy, 1.0)
    # Normal of the axis line is the direction rotated by 90 degrees.
    axis_line = normalize_line(
        HomoLine(direction[1], -direction[0], -(direction[1] * cx - direction[0] * cy))
    )
    half = 2.0 * np.sqrt(lam_max)
    endpoints = (
        HomoPoint(cx - half * direction[0], cy - half * direction[1], 1.0),
        HomoPoint(cx + half * direction[0], cy + half * direction[1], 1.0),
    )
    return ExtractedFeatures(
        centroid=centroid,
        axis_line=axis_line,
        axis_endpoints=endpoints,
        mass=mass,
        anisotropy=anisotropy,
        isotropic=isotropic,
    )


def features_for_constraint(
    kind: ConstraintKind,
    policy: PairingPolicy,
    masks: list[SaliencyMap] | tuple[SaliencyMap, ...],
    carried: ExtractedFeatures | None = None,
    tau: float = DEFAULT_THRESHOLD,
) -> BoundFeatures:
    """Bind a constraint's features from masks plus the policy's statics.

    In object-object mode the carried object's features may be passed in
    (the frozen ones from the first frame); otherwise they are computed
    from the first mask. The target's features always come from the last
    mask, so calling this every step refreshes them.

    Raises:
        PolicyMismatch: if the mask count does not match the policy mode.
        EmptyMask: propagated from extraction.
    """
    expected = 1 if policy.mode is PairingMode.OBJECT_GRIPPER else 2
    if len(masks) != expected:
        raise PolicyMismatch(
            f"{policy.mode.value} expects {expected} mask(s), got {len(masks)}"
        )

    if policy.mode is PairingMode.OBJECT_GRIPPER:
        target = pca_extract(threshold_mask(masks[0], tau))
        if kind is ConstraintKind.POINT_TO_POINT:
            return BoundFeatures(kind, f1=policy.static_point, f2=target.centroid, target=target)
        if kind is ConstraintKind.POINT_TO_LINE:
            return BoundFeatures(kind, f1=policy.static_point, f34=target.axis_line, target=target)
        if kind is ConstraintKind.LINE_TO_LINE:
            p1, p2 = policy.static_line_points
            return BoundFeatures(kind, f1=p1, f2=p2, f34=target.axis_line, target=target)
        return BoundFeatures(kind, f12=policy.static_line, f34=target.axis_line, target=target)

    if carried is None:
        carried = pca_extract(threshold_mask(masks[0], tau))
    target = pca_extract(threshold_mask(masks[1], tau))
    if kind is ConstraintKind.POINT_TO_POINT:
        return BoundFeatures(kind, f1=carried.centroid, f2=target.centroid,
                             carried=carried, target=target)
    if kind is ConstraintKind.POINT_TO_LINE:
        return BoundFeatures(kind, f1=carried.centroid, f34=target.axis_line,
                             carried=carried, target=target)
    if kind is ConstraintKind.LINE_TO_LINE:
        p1, p2 = carried.axis_endpoints
        return BoundFeatures(kind, f1=p1, f2=p2, f34=target.axis_line,
                             carried=carried, target=target)
    return BoundFeatures(kind, f12=carried.axis_line, f34=target.axis_line,
                         carried=carried, target=target)


# Anisotropy bands for the rule-based constraint proposer.
ELONGATED_RATIO = 1.1     # below this the blob has no usable axis
HANDLE_RATIO = 20.0       # above this the region reads as a bar or handle


def propose_constraint_kinds(features: ExtractedFeatures) -> tuple[ConstraintKind, ...]:
    """Rule-based default for picking a constraint plan from mask shape.

    Stands in for an external constraint proposer: compact blobs get a
    point-to-point plan, moderately elongated regions add a point-to-line
    alignment, and bar/handle-like regions pair parallel-lines with
    point-to-point. Any callable with this signature can replace it.
    """
    if features.isotropic or features.anisotropy < ELONGATED_RATIO:
        return (ConstraintKind.POINT_TO_POINT,)
    if features.anisotropy >= HANDLE_RATIO:
        return (ConstraintKind.PARALLEL_LINES, ConstraintKind.POINT_TO_POINT)
    return (ConstraintKind.POINT_TO_LINE, ConstraintKind.POINT_TO_POINT)


def load_mask(source: str | Path | bytes) -> SaliencyMap:
    """Load a saliency map from an 8-bit grayscale PNG or PGM file.

    Pixel value v maps to probability v / 255.

    Raises:
        UnsupportedFormat: for anything but 8-bit grayscale PNG/PGM.
        MalformedFile: for unparseable or truncated files.
    """
    if isinstance(source, bytes):
        fp = io.BytesIO(source)
    else:
        fp = Path(source)
        if not fp.exists():
            raise MalformedFile(f"no such file: {fp}")
    try:
        with Image.open(fp) as im:
            fmt = im.format
            mode = im.mode
            if fmt not in ("PNG", "PPM"):
                raise UnsupportedFormat(f"expected PNG or PGM, got {fmt}")
            if mode != "L":
                raise UnsupportedFormat(f"expected 8-bit grayscale, got mode {mode!r}")
            pixels = np.asarray(im, dtype=float)
    except UnidentifiedImageError as exc:
        raise MalformedFile(f"not a readable image: {exc}") from exc
    except (OSError, SyntaxError, ValueError) as exc:
        if isinstance(exc, (UnsupportedFormat, MalformedFile)):
            raise
        raise MalformedFile(f"failed to decode image: {exc}") from exc
    return SaliencyMap(pixels / 255.0)


def save_mask(saliency: SaliencyMap, path: str | Path) -> None:
    """Write a saliency map as an 8-bit grayscale PGM (P5) or PNG file."""
    path = Path(path)
    pixels = np.round(saliency.values * 255.0).astype(np.uint8)
    if path.suffix.lower() == ".pgm":
        header = f"P5\n{saliency.width} {saliency.height}\n255\n".encode("ascii")
        path.write_bytes(header + pixels.tobytes())
    else:
        Image.fromarray(pixels, mode="L").save(path, format="PNG")
