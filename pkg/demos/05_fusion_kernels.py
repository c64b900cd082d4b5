"""
Masked token-fusion attention and segmentation losses
=====================================================

The attention mask lets every image token see only itself and the text
token; the loss side combines focal and dice terms over five output maps.
"""

import numpy as np

from salientservo.fusion import (
    LossWeights,
    build_attention_mask,
    dice_loss,
    focal_loss,
    masked_attention,
    total_loss,
)

rng = np.random.default_rng(1)

# Mask pattern for 4 image tokens (row/column 0 is the text token).
mask = build_attention_mask(4)
print("attention mask (0 = open, -inf = closed):")
print(np.where(np.isfinite(mask), 0.0, -np.inf))

# With V = identity, the attention output rows are the weight vectors.
q = rng.normal(size=(5, 16))
k = rng.normal(size=(5, 16))
weights = masked_attention(q, k, np.eye(5), mask)
print("\nattention weights (note zeros between image tokens):")
print(np.round(weights, 3))

# Losses on a toy prediction.
gt = np.zeros((16, 16))
gt[4:12, 5:13] = 1.0
pred = np.clip(gt + rng.normal(scale=0.15, size=gt.shape), 0.0, 1.0)
print("\ndice :", round(dice_loss(pred, gt), 4))
print("focal:", round(focal_loss(pred, gt), 4))

sides = [np.clip(gt + rng.normal(scale=0.2, size=gt.shape), 0, 1) for _ in range(4)]
print("total:", round(total_loss(pred, sides, gt, LossWeights()), 4))
