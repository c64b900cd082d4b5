"""Homogeneous image-plane geometry and constraint error signals.

Points and lines live in the projective image plane as 3-vectors. A line
through two points is their cross product; a point lies on a line when
their dot product vanishes. Four constraint error functions are built on
top of these primitives: point-to-point, point-to-line, line-to-line and
parallel-lines. All values are immutable and all functions are pure.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

# Ideal-point detection floor; double-precision noise at pixel scale.
EPS_W = 1e-9


class GeometryError(ValueError):
    """Base class for degenerate geometric inputs."""


class DegeneratePoint(GeometryError):
    """Point at infinity: homogeneous scale too close to zero."""


class CoincidentPoints(GeometryError):
    """Two points that do not span a line."""


class DegenerateLine(GeometryError):
    """Line whose (a, b) part vanishes; has no finite direction."""


@dataclass(frozen=True)
class HomoPoint:
    """Homogeneous image-plane point (x, y, w), coordinates in pixels."""

    x: float
    y: float
    w: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.x) and np.isfinite(self.y) and np.isfinite(self.w)):
            raise ValueError("point components must be finite")
        if self.x == 0.0 and self.y == 0.0 and self.w == 0.0:
            raise ValueError("(0, 0, 0) is not a projective point")

    @property
    def array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.w], dtype=float)

    def normalized(self) -> "HomoPoint":
        return normalize_point(self)


@dataclass(frozen=True)
class HomoLine:
    """Image-plane line a*x + b*y + c*w = 0."""

    a: float
    b: float
    c: float

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b) and np.isfinite(self.c)):
            raise ValueError("line coefficients must be finite")

    @property
    def array(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c], dtype=float)

    def normalized(self) -> "HomoLine":
        return normalize_line(self)

    def direction(self) -> np.ndarray:
        """Unit direction vector of the normalized line."""
        n = self.normalized()
        return np.array([-n.b, n.a])


class ConstraintKind(Enum):
    """The four base geometric constraints with fixed error dimensionality."""

    POINT_TO_POINT = "p2p"
    POINT_TO_LINE = "p2l"
    LINE_TO_LINE = "l2l"
    PARALLEL_LINES = "par"

    @property
    def error_dim(self) -> int:
        return 2 if self is ConstraintKind.POINT_TO_POINT else 1


def normalize_point(p: HomoPoint) -> HomoPoint:
    """Scale a point so its homogeneous component is exactly 1.

    Raises:
        DegeneratePoint: if |w| <= EPS_W (ideal point).
    """
    if abs(p.w) <= EPS_W:
        raise DegeneratePoint(f"point at infinity: w={p.w!r}")
    if p.w == 1.0:
        return p
    return HomoPoint(p.x / p.w, p.y / p.w, 1.0)


def normalize_line(line: HomoLine) -> HomoLine:
    """Scale a line so a^2 + b^2 = 1, with the first nonzero of (a, b) positive.

    The canonical sign makes the point-to-line dot product a signed pixel
    distance with a reproducible orientation.

    Raises:
        DegenerateLine: if (a, b) is (numerically) the zero vector.
    """
    norm = float(np.hypot(line.a, line.b))
    if norm <= 1e-12:
        raise DegenerateLine("line has no finite direction: a = b = 0")
    a, b, c = line.a / norm, line.b / norm, line.c / norm
    lead = a if abs(a) > 1e-12 else b
    if lead < 0.0:
        a, b, c = -a, -b, -c
    return HomoLine(a, b, c)


def line_through_points(p1: HomoPoint, p2: HomoPoint) -> HomoLine:
    """Construct the line through two points as their cross product.

    The result is normalized (unit (a, b), canonical sign).

    Raises:
        CoincidentPoints: if the points are scalar multiples of each other.
    """
    cross = np.cross(p1.array, p2.array)
    scale = max(1.0, float(np.linalg.norm(p1.array)) * float(np.linalg.norm(p2.array)))
    if np.linalg.norm(cross) <= 1e-12 * scale:
        raise CoincidentPoints(f"points {p1} and {p2} do not span a line")
    return normalize_line(HomoLine(*cross))


def point_to_point_error(f1: HomoPoint, f2: HomoPoint) -> np.ndarray:
    """Pixel displacement (x2 - x1, y2 - y1) between two normalized points.

    Zero exactly when the points coincide.
    """
    p1 = normalize_point(f1)
    p2 = normalize_point(f2)
    return np.array([p2.x - p1.x, p2.y - p1.y])


def point_to_line_error(f1: HomoPoint, f34: HomoLine) -> float:
    """Signed pixel distance from a point to a line.

    Zero exactly when the normalized point satisfies the line equation.
    """
    p = normalize_point(f1)
    line = normalize_line(f34)
    return float(p.array @ line.array)


def line_to_line_error(f1: HomoPoint, f2: HomoPoint, f34: HomoLine) -> float:
    """Sum of the signed distances of two points to a line.

    Vanishes when the segment f1-f2 is centered on the line, in particular
    when both points lie on it.
    """
    return point_to_line_error(f1, f34) + point_to_line_error(f2, f34)


def parallel_lines_error(f12: HomoLine, f34: HomoLine) -> float:
    """Sine of the angle between two line directions.

    This is the homogeneous component of the cross product of the two
    normalized lines: a1*b2 - b1*a2. It is bounded by 1 in magnitude,
    antisymmetric, and zero exactly when the lines are parallel.
    """
    l1 = normalize_line(f12)
    l2 = normalize_line(f34)
    return float(l1.a * l2.b - l1.b * l2.a)


def stack_errors(errors: list) -> np.ndarray:
    """Concatenate evaluated constraint errors into one flat error vector.

    Accepts scalars and 1-d arrays; preserves declaration order. An empty
    list yields an empty vector.
    """
    if not errors:
        return np.zeros(0)
    return np.concatenate([np.atleast_1d(np.asarray(e, dtype=float)) for e in errors])


def evaluate_constraint(
    kind: ConstraintKind,
    f1: HomoPoint | None = None,
    f2: HomoPoint | None = None,
    f12: HomoLine | None = None,
    f34: HomoLine | None = None,
) -> np.ndarray:
    """Evaluate one constraint kind on its bound features.

    Returns the error as a 1-d array of length ``kind.error_dim``.

    Raises:
        ValueError: if a feature required by the kind is missing.
    """
    if kind is ConstraintKind.POINT_TO_POINT:
        if f1 is None or f2 is None:
            raise ValueError("point-to-point needs f1 and f2")
        return point_to_point_error(f1, f2)
    if kind is ConstraintKind.POINT_TO_LINE:
        if f1 is None or f34 is None:
            raise ValueError("point-to-line needs f1 and f34")
        return np.array([point_to_line_error(f1, f34)])
    if kind is ConstraintKind.LINE_TO_LINE:
        if f1 is None or f2 is None or f34 is None:
            raise ValueError("line-to-line needs f1, f2 and f34")
        return np.array([line_to_line_error(f1, f2, f34)])
    if kind is ConstraintKind.PARALLEL_LINES:
        if f12 is None or f34 is None:
            raise ValueError("parallel-lines needs f12 and f34")
        return np.array([parallel_lines_error(f12, f34)])
    raise ValueError(f"unknown constraint kind: {kind!r}")
