"""Numerical kernels for text-image token fusion and segmentation losses.

Token layout: row 0 is the projected text token, rows 1..L are projected
image tokens. The additive attention mask restricts every image token to
attend only to itself and the text token, which keeps fusion local instead
of mixing image tokens with each other. The loss side provides focal and
dice terms plus their weighted multi-output sum, with analytic gradients
for verification.

These kernels operate on plain dense arrays at toy scale; there is no
network and no training loop here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FOCAL_GAMMA = 2.0
FOCAL_ALPHA = 0.25
DICE_SMOOTH = 1.0
PROB_CLAMP = 1e-7


class ShapeMismatch(ValueError):
    """Prediction and ground truth grids differ in shape."""


@dataclass(frozen=True)
class LossWeights:
    """Weights for the fused output and the four side outputs."""

    fused: float = 1.0
    side: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)

    def __post_init__(self):
        all_w = (self.fused, *self.side)
        if any(w < 0 for w in all_w):
            raise ValueError("loss weights must be nonnegative")
        if not any(w > 0 for w in all_w):
            raise ValueError("at least one loss weight must be positive")


def _grid(x) -> np.ndarray:
    values = getattr(x, "values", x)
    return np.asarray(values, dtype=float)


def _check_shapes(pred: np.ndarray, gt: np.ndarray) -> None:
    if pred.shape != gt.shape:
        raise ShapeMismatch(f"shape {pred.shape} vs {gt.shape}")


def build_attention_mask(num_image_tokens: int) -> np.ndarray:
    """Additive attention mask over text + image tokens.

    Entry (i, j) is 0 when i == j or j is the text column (0), and -inf
    otherwise, so image tokens never attend to each other.
    """
    if num_image_tokens < 1:
        raise ValueError("need at least one image token")
    n = num_image_tokens + 1
    mask = np.full((n, n), -np.inf)
    np.fill_diagonal(mask, 0.0)
    mask[:, 0] = 0.0
    return mask


def masked_attention(
    q: np.ndarray,
    k: np.ndarray,
    v: np.ndarray,
    mask: np.ndarray,
    scale_dim: int | None = None,
) -> np.ndarray:
    """Row-wise softmax attention with an additive {0, -inf} mask.

    The mask is added to the raw logits before the 1/sqrt(D) scaling;
    -inf survives the scaling, so masked positions get exactly zero
    weight. ``scale_dim`` defaults to the embedding width of ``q``.
    """
    q = np.asarray(q, dtype=float)
    k = np.asarray(k, dtype=float)
    v = np.asarray(v, dtype=float)
    if q.shape != k.shape or q.shape[0] != v.shape[0]:
        raise ShapeMismatch(f"q {q.shape}, k {k.shape}, v {v.shape}")
    n = q.shape[0]
    if mask.shape != (n, n):
        raise ShapeMismatch(f"mask {mask.shape} for {n} tokens")
    d = scale_dim if scale_dim is not None else q.shape[1]
    logits = (q @ k.T + mask) / np.sqrt(float(d))
    logits -= logits.max(axis=1, keepdims=True)
    weights = np.exp(logits)
    weights /= weights.sum(axis=1, keepdims=True)
    return weights @ v


def dice_loss(pred, gt, smooth: float = DICE_SMOOTH) -> float:
    """Soft dice loss: 1 - (2*sum(p*g) + s) / (sum(p) + sum(g) + s)."""
    p, g = _grid(pred), _grid(gt)
    _check_shapes(p, g)
    num = 2.0 * float((p * g).sum()) + smooth
    den = float(p.sum()) + float(g.sum()) + smooth
    return 1.0 - num / den


def dice_loss_grad(pred, gt, smooth: float = DICE_SMOOTH) -> np.ndarray:
    """Analytic gradient of ``dice_loss`` with respect to each pred pixel."""
    p, g = _grid(pred), _grid(gt)
    _check_shapes(p, g)
    num = 2.0 * float((p * g).sum()) + smooth
    den = float(p.sum()) + float(g.sum()) + smooth
    return -(2.0 * g * den - num) / den**2


def focal_loss(pred, gt, gamma: float = FOCAL_GAMMA, alpha: float = FOCAL_ALPHA) -> float:
    """Mean focal loss with balance ``alpha`` and focusing ``gamma``.

    Predictions are clamped to [1e-7, 1 - 1e-7] before the logs. Soft
    ground truth is treated as a per-pixel mixture of the two classes.
    """
    p, g = _grid(pred), _grid(gt)
    _check_shapes(p, g)
    p = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    pos = -alpha * g * (1.0 - p) ** gamma * np.log(p)
    neg = -(1.0 - alpha) * (1.0 - g) * p**gamma * np.log(1.0 - p)
    return float((pos + neg).mean())


def focal_loss_grad(pred, gt, gamma: float = FOCAL_GAMMA, alpha: float = FOCAL_ALPHA) -> np.ndarray:
    """Analytic gradient of ``focal_loss``; valid where the clamp is inactive."""
    p, g = _grid(pred), _grid(gt)
    _check_shapes(p, g)
    p = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    if gamma == 0.0:
        dpos = -alpha * g / p
        dneg = (1.0 - alpha) * (1.0 - g) / (1.0 - p)
    else:
        dpos = -alpha * g * (
            -gamma * (1.0 - p) ** (gamma - 1.0) * np.log(p) + (1.0 - p) ** gamma / p
        )
        dneg = -(1.0 - alpha) * (1.0 - g) * (
            gamma * p ** (gamma - 1.0) * np.log(1.0 - p) - p**gamma / (1.0 - p)
        )
    return (dpos + dneg) / p.size


def map_loss(pred, gt, gamma: float = FOCAL_GAMMA, alpha: float = FOCAL_ALPHA,
             smooth: float = DICE_SMOOTH) -> float:
    """Loss for one output map: focal plus dice."""
    return focal_loss(pred, gt, gamma, alpha) + dice_loss(pred, gt, smooth)


def map_loss_grad(pred, gt, gamma: float = FOCAL_GAMMA, alpha: float = FOCAL_ALPHA,
                  smooth: float = DICE_SMOOTH) -> np.ndarray:
    return focal_loss_grad(pred, gt, gamma, alpha) + dice_loss_grad(pred, gt, smooth)


def total_loss(fused, sides, gt, weights: LossWeights = LossWeights(),
               gamma: float = FOCAL_GAMMA, alpha: float = FOCAL_ALPHA,
               smooth: float = DICE_SMOOTH) -> float:
    """Weighted sum of focal+dice over the fused map and four side maps."""
    if len(sides) != 4:
        raise ValueError(f"expected 4 side outputs, got {len(sides)}")
    loss = weights.fused * map_loss(fused, gt, gamma, alpha, smooth)
    for w, side in zip(weights.side, sides):
        loss += w * map_loss(side, gt, gamma, alpha, smooth)
    return loss


def total_loss_grad(fused, sides, gt, weights: LossWeights = LossWeights(),
                    gamma: float = FOCAL_GAMMA, alpha: float = FOCAL_ALPHA,
                    smooth: float = DICE_SMOOTH) -> list[np.ndarray]:
    """Gradients of ``total_loss`` with respect to fused and each side map."""
    if len(sides) != 4:
        raise ValueError(f"expected 4 side outputs, got {len(sides)}")
    grads = [weights.fused * map_loss_grad(fused, gt, gamma, alpha, smooth)]
    for w, side in zip(weights.side, sides):
        grads.append(w * map_loss_grad(side, gt, gamma, alpha, smooth))
    return grads
