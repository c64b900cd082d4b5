"""Segmentation evaluation metrics: IoU variants, MAE, max F-measure.

IoU counts are exact integers so dataset-level aggregation is independent
of evaluation order. Directory evaluation pairs prediction and ground
truth files by filename stem and emits a JSON report.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .saliency import SaliencyMap, load_mask

DEFAULT_TAU = 0.5
DEFAULT_BETA_SQ = 0.3
NUM_THRESHOLDS = 256
REPORT_VERSION = 1

MASK_SUFFIXES = (".png", ".pgm")


class ShapeMismatch(ValueError):
    """Prediction and ground truth differ in shape."""


class EmptyDataset(ValueError):
    """Metric over a dataset needs at least one pair."""


class UnpairedFiles(ValueError):
    """Prediction/ground-truth directories have unmatched stems."""

    def __init__(self, missing_gt, missing_pred):
        self.missing_gt = sorted(missing_gt)
        self.missing_pred = sorted(missing_pred)
        parts = []
        if self.missing_gt:
            parts.append(f"no ground truth for: {', '.join(self.missing_gt)}")
        if self.missing_pred:
            parts.append(f"no prediction for: {', '.join(self.missing_pred)}")
        super().__init__("; ".join(parts))


@dataclass(frozen=True)
class EvalPair:
    """A prediction map with its binary ground truth."""

    pred: SaliencyMap
    gt: SaliencyMap

    def __post_init__(self):
        if self.pred.values.shape != self.gt.values.shape:
            raise ShapeMismatch(
                f"pred {self.pred.values.shape} vs gt {self.gt.values.shape}"
            )
        gv = self.gt.values
        if not np.all((gv == 0.0) | (gv == 1.0)):
            raise ValueError("ground truth must be binary")


def _grids(pred, gt):
    p = np.asarray(getattr(pred, "values", pred), dtype=float)
    g = np.asarray(getattr(gt, "values", gt), dtype=float)
    if p.shape != g.shape:
        raise ShapeMismatch(f"pred {p.shape} vs gt {g.shape}")
    return p, g


def intersection_union(pred, gt, tau: float = DEFAULT_TAU) -> tuple[int, int]:
    """Exact pixel counts of intersection and union at threshold tau."""
    p, g = _grids(pred, gt)
    pb = p >= tau
    gb = g >= 0.5
    return int(np.logical_and(pb, gb).sum()), int(np.logical_or(pb, gb).sum())


def iou(pred, gt, tau: float = DEFAULT_TAU) -> float:
    """Intersection over union; defined as 1 when both masks are empty."""
    if not 0.0 < tau < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {tau}")
    inter, union = intersection_union(pred, gt, tau)
    if union == 0:
        return 1.0
    return inter / union


def mean_iou(pairs, tau: float = DEFAULT_TAU) -> float:
    """Mean of per-pair IoU over a dataset."""
    pairs = list(pairs)
    if not pairs:
        raise EmptyDataset("mean IoU needs at least one pair")
    return float(np.mean([iou(p.pred, p.gt, tau) for p in pairs]))


def cumulative_iou(pairs, tau: float = DEFAULT_TAU) -> float:
    """Dataset IoU: summed intersections over summed unions."""
    pairs = list(pairs)
    if not pairs:
        raise EmptyDataset("cumulative IoU needs at least one pair")
    inter_total = 0
    union_total = 0
    for p in pairs:
        inter, union = intersection_union(p.pred, p.gt, tau)
        inter_total += inter
        union_total += union
    if union_total == 0:
        return 1.0
    return inter_total / union_total


def mae(pred, gt) -> float:
    """Mean absolute per-pixel error."""
    p, g = _grids(pred, gt)
    return float(np.abs(p - g).mean())


def max_f_measure(pred, gt, beta_sq: float = DEFAULT_BETA_SQ,
                  num_thresholds: int = NUM_THRESHOLDS) -> float:
    """Max over a uniform threshold sweep of the weighted F-measure.

    The prediction is binarized strictly above each threshold, so an
    all-zero prediction never scores. F is taken as 0 wherever precision
    or recall is undefined.
    """
    p, g = _grids(pred, gt)
    gb = g >= 0.5
    gt_count = int(gb.sum())
    best = 0.0
    for i in range(num_thresholds):
        t = i / (num_thresholds - 1)
        pb = p > t
        tp = int(np.logical_and(pb, gb).sum())
        if tp == 0:
            continue
        precision = tp / int(pb.sum())
        recall = tp / gt_count
        f = (1 + beta_sq) * precision * recall / (beta_sq * precision + recall)
        best = max(best, f)
    return best


def evaluate_pairs(named_pairs, tau: float = DEFAULT_TAU,
                   beta_sq: float = DEFAULT_BETA_SQ) -> dict:
    """Per-pair metric rows plus dataset aggregates for (name, EvalPair) items."""
    named_pairs = list(named_pairs)
    if not named_pairs:
        raise EmptyDataset("evaluation needs at least one pair")
    rows = []
    pairs = []
    for name, pair in named_pairs:
        pairs.append(pair)
        rows.append({
            "name": name,
            "iou": iou(pair.pred, pair.gt, tau),
            "mae": mae(pair.pred, pair.gt),
            "max_f": max_f_measure(pair.pred, pair.gt, beta_sq),
        })
    aggregate = {
        "miou": mean_iou(pairs, tau),
        "ciou": cumulative_iou(pairs, tau),
        "mae": float(np.mean([r["mae"] for r in rows])),
        "max_f": float(np.mean([r["max_f"] for r in rows])),
    }
    return {
        "format_version": REPORT_VERSION,
        "tau": tau,
        "beta_sq": beta_sq,
        "pairs": rows,
        "aggregate": aggregate,
    }


def pair_directories(pred_dir: str | Path, gt_dir: str | Path) -> list[tuple[str, Path, Path]]:
    """Match mask files in two directories by filename stem.

    Raises:
        UnpairedFiles: listing stems present on only one side.
    """
    def index(d):
        files = {}
        for f in sorted(Path(d).iterdir()):
            if f.suffix.lower() in MASK_SUFFIXES:
                files[f.stem] = f
        return files

    preds = index(pred_dir)
    gts = index(gt_dir)
    missing_gt = set(preds) - set(gts)
    missing_pred = set(gts) - set(preds)
    if missing_gt or missing_pred:
        raise UnpairedFiles(missing_gt, missing_pred)
    if not preds:
        raise EmptyDataset(f"no mask files in {pred_dir}")
    return [(stem, preds[stem], gts[stem]) for stem in sorted(preds)]


def evaluate_directories(pred_dir: str | Path, gt_dir: str | Path,
                         tau: float = DEFAULT_TAU,
                         beta_sq: float = DEFAULT_BETA_SQ) -> dict:
    """Load paired mask files and compute the full metric report."""
    named = []
    for stem, pred_path, gt_path in pair_directories(pred_dir, gt_dir):
        gt = load_mask(gt_path)
        gt = SaliencyMap((gt.values >= 0.5).astype(float))
        named.append((stem, EvalPair(pred=load_mask(pred_path), gt=gt)))
    return evaluate_pairs(named, tau, beta_sq)


def write_report(report: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
