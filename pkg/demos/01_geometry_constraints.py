"""
Geometric constraints on the image plane
========================================

Points and lines in homogeneous coordinates, and the four constraint
error signals built from them.
"""

import numpy as np

from salientservo.geometry import (
    HomoLine,
    HomoPoint,
    line_through_points,
    line_to_line_error,
    parallel_lines_error,
    point_to_line_error,
    point_to_point_error,
    stack_errors,
)

# Two image points; a line is their cross product.
gripper = HomoPoint(320.0, 384.0)          # heuristic gripper-tip pixel
target = HomoPoint(402.0, 311.0)
print("point-to-point error:", point_to_point_error(gripper, target))

# A line through two points, normalized so the point-line dot product is
# a signed pixel distance.
edge = line_through_points(HomoPoint(100, 100), HomoPoint(500, 140))
print("edge line (a, b, c):", edge.array)
print("signed distance gripper->edge:", point_to_line_error(gripper, edge))

# Line-to-line sums two signed distances; it vanishes when the segment
# straddles the line symmetrically.
print("line-to-line:", line_to_line_error(gripper, target, edge))

# Parallel-lines error is the sine of the angle between directions.
vertical = HomoLine(1.0, 0.0, -320.0)
print("parallelism vertical vs edge:", parallel_lines_error(vertical, edge))
print("parallelism vertical vs itself:", parallel_lines_error(vertical, vertical))

# A task stacks several constraints into one error vector.
stacked = stack_errors([
    point_to_point_error(gripper, target),
    point_to_line_error(gripper, edge),
    parallel_lines_error(vertical, edge),
])
print("stacked error vector:", np.round(stacked, 3))
