"""
From saliency masks to constraint features
===========================================

Weighted PCA over a probability mask gives a target point (centroid) and
a principal-axis line; pairing policies bind them to the static gripper
features.
"""

import numpy as np

from salientservo.geometry import ConstraintKind
from salientservo.saliency import (
    PairingPolicy,
    SaliencyMap,
    features_for_constraint,
    pca_extract,
    threshold_mask,
)

# A synthetic elongated blob, tilted 30 degrees, with soft confidence.
rng = np.random.default_rng(0)
ys, xs = np.mgrid[0:480, 0:640]
theta = np.radians(30)
u = (xs - 400) * np.cos(theta) + (ys - 200) * np.sin(theta)
v = -(xs - 400) * np.sin(theta) + (ys - 200) * np.cos(theta)
inside = (np.abs(u) < 60) & (np.abs(v) < 14)
mask = SaliencyMap(np.where(inside, rng.uniform(0.7, 1.0, inside.shape), 0.0))

feats = pca_extract(threshold_mask(mask, 0.5))
print("mass:", round(feats.mass, 1))
print("centroid:", (round(feats.centroid.x, 2), round(feats.centroid.y, 2)))
direction = feats.axis_line.direction()
print("axis angle (deg):", round(np.degrees(np.arctan2(direction[1], direction[0])) % 180, 2))
print("anisotropy:", round(feats.anisotropy, 1), "isotropic:", feats.isotropic)

# Object-gripper pairing: the mask's features against the static point or
# the vertical mid-image line.
policy = PairingPolicy.object_gripper("target", 640, 480)
for kind in ConstraintKind:
    bound = features_for_constraint(kind, policy, [mask])
    print(f"{kind.value}: error = {np.round(bound.evaluate(), 3)}")
