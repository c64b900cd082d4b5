"""
Segmentation metrics over a small mask set
==========================================

Builds prediction/ground-truth pairs in memory and on disk, then scores
them with IoU variants, MAE and max F-measure.
"""

import tempfile
from pathlib import Path

import numpy as np

from salientservo.metrics import (
    EvalPair,
    cumulative_iou,
    evaluate_directories,
    iou,
    max_f_measure,
    mean_iou,
)
from salientservo.saliency import SaliencyMap, save_mask


def box_mask(y0, y1, x0, x1, size=32):
    values = np.zeros((size, size))
    values[y0:y1, x0:x1] = 1.0
    return SaliencyMap(values)


gt = box_mask(8, 24, 8, 24)
good = box_mask(9, 24, 8, 25)      # slightly off
bad = box_mask(0, 8, 0, 8)         # misses entirely

print("IoU good:", round(iou(good, gt), 4), "| IoU bad:", iou(bad, gt))
pairs = [EvalPair(good, gt), EvalPair(bad, gt)]
print("mIoU:", round(mean_iou(pairs), 4), "| cIoU:", round(cumulative_iou(pairs), 4))

soft = SaliencyMap(gt.values * 0.7)  # confident but scaled prediction
print("max-F of scaled prediction:", max_f_measure(soft, gt))

# The same metrics over mask files paired by stem.
with tempfile.TemporaryDirectory() as tmp:
    pred_dir = Path(tmp) / "pred"
    gt_dir = Path(tmp) / "gt"
    pred_dir.mkdir()
    gt_dir.mkdir()
    save_mask(good, pred_dir / "scene_a.png")
    save_mask(gt, gt_dir / "scene_a.png")
    save_mask(bad, pred_dir / "scene_b.pgm")
    save_mask(gt, gt_dir / "scene_b.png")
    report = evaluate_directories(pred_dir, gt_dir)
    print("directory report aggregate:", {k: round(v, 4) for k, v in report["aggregate"].items()})
