"""Training losses (MSE, Dice, PIT height MSE, weighted total) and evaluation
metrics (IOU in 2-D and 3-D, MSE, floor/ceiling resolution)."""
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from echolab.errors import NoInteriorPixels, ShapeMismatch
from echolab.raster import extrude_3d
from echolab.tensor import core
from echolab.tensor.core import Tensor

THRESHOLD = 0.5


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 0.3
    beta: float = 1.0

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("loss weights must be non-negative")


def _check_shapes(pred, target):
    ps = pred.shape
    ts = np.shape(target)
    if tuple(ps) != tuple(ts):
        raise ShapeMismatch(f"prediction {tuple(ps)} vs target {tuple(ts)}")


def _sample_axes(ndim, batched):
    return tuple(range(1 if batched else 0, ndim))


def mse_loss(pred, target):
    """Mean squared error; a Tensor ``pred`` yields a differentiable scalar."""
    _check_shapes(pred, target)
    if isinstance(pred, Tensor):
        t = Tensor(np.asarray(target, dtype=pred.dtype))
        d = pred - t
        return core.mean(d * d)
    d = np.asarray(pred, dtype=np.float64) - np.asarray(target, dtype=np.float64)
    return float(np.mean(d * d))


def dice_loss(pred, target, batched=False):
    """1 - 2 p.t / |p + t|_1, averaged over samples when ``batched``.

    A sample whose prediction and target are both empty scores 0.
    """
    _check_shapes(pred, target)
    if isinstance(pred, Tensor):
        t = np.asarray(target, dtype=pred.dtype)
        axes = _sample_axes(pred.ndim, batched)
        inter = core.sum_(pred * Tensor(t), axis=axes)
        mass = core.sum_(pred + Tensor(t), axis=axes)
        empty = mass.data <= 0
        safe = mass + Tensor(empty.astype(pred.dtype))
        ratio = inter * core.power(safe, -1.0)
        per = 1.0 - 2.0 * ratio
        per = per * Tensor((~empty).astype(pred.dtype))
        return core.mean(per)
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    axes = _sample_axes(p.ndim, batched)
    inter = (p * t).sum(axis=axes)
    mass = np.abs(p + t).sum(axis=axes)
    per = np.where(mass > 0, 1.0 - 2.0 * inter / np.where(mass > 0, mass, 1.0), 0.0)
    return float(np.mean(per))


def iou(pred, target, batched=False):
    """p.t / (|p + t|_1 - p.t) on binary masks or voxel grids; both-empty
    samples count as 1. Averaged over samples when ``batched``."""
    _check_shapes(np.asarray(pred), target)
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    axes = _sample_axes(p.ndim, batched)
    inter = (p * t).sum(axis=axes)
    union = np.abs(p + t).sum(axis=axes) - inter
    per = np.where(union > 0, inter / np.where(union > 0, union, 1.0), 1.0)
    return float(np.mean(per))


def pit_height_loss(pred_h, target_h):
    """Height MSE against the target and its reversal, keeping the smaller.

    Single vectors return (loss, flipped). For a (B, h) Tensor the choice is
    made per sample and the batch-mean loss is differentiable through the
    chosen branch; ``flipped`` is then a boolean array.
    """
    _check_shapes(pred_h, target_h)
    t = np.asarray(target_h)
    if isinstance(pred_h, Tensor):
        batched = pred_h.ndim == 2
        t2 = t if batched else t[None]
        p = pred_h if batched else core.reshape(pred_h, (1, -1))
        straight = Tensor(t2.astype(pred_h.dtype))
        flipped_t = Tensor(t2[:, ::-1].astype(pred_h.dtype))
        d0 = p - straight
        d1 = p - flipped_t
        m0 = core.mean(d0 * d0, axis=1)
        m1 = core.mean(d1 * d1, axis=1)
        flip = m1.data < m0.data
        sel = Tensor(flip.astype(pred_h.dtype))
        per = m0 * (1.0 - sel) + m1 * sel
        loss = core.mean(per)
        return loss, (flip if batched else bool(flip[0]))
    p = np.asarray(pred_h, dtype=np.float64)
    tt = t.astype(np.float64)
    if p.ndim == 2:
        m0 = ((p - tt) ** 2).mean(axis=1)
        m1 = ((p - tt[:, ::-1]) ** 2).mean(axis=1)
        flip = m1 < m0
        return float(np.where(flip, m1, m0).mean()), flip
    m0 = float(np.mean((p - tt) ** 2))
    m1 = float(np.mean((p - tt[::-1]) ** 2))
    return (m1, True) if m1 < m0 else (m0, False)


def combine_losses(mse_lw, dice_lw, mse_h, weights: LossWeights = LossWeights()):
    return mse_lw + weights.alpha * dice_lw + weights.beta * mse_h


def total_loss(pred_lw, pred_h, gt_lw, gt_h, weights: LossWeights = LossWeights(), batched=None):
    """MSE_LW + alpha * Dice_LW + beta * PIT-MSE_H on probabilities.

    ``batched`` defaults to True for (B, b, b) floorplans.
    """
    if batched is None:
        batched = len(pred_lw.shape) == 3
    mse_lw = mse_loss(pred_lw, gt_lw)
    dice = dice_loss(pred_lw, gt_lw, batched=batched)
    mse_h, _ = pit_height_loss(pred_h, gt_h)
    return combine_losses(mse_lw, dice, mse_h, weights)


def resolve_height_orientation(pred_h, threshold=THRESHOLD):
    """Binarize and orient a predicted height vector so the floor is at the
    low-index end: the side of the centre with fewer interior pixels is the
    floor (devices sit nearer the floor). Ties keep the input orientation.

    Returns (oriented binary vector, index of the floor pixel).
    """
    v = (np.asarray(pred_h, dtype=np.float64) >= threshold).astype(np.uint8)
    idx = np.nonzero(v)[0]
    if idx.size == 0:
        raise NoInteriorPixels("height prediction has no interior pixels")
    center = len(v) // 2
    below = int((idx < center).sum())
    above = int((idx > center).sum())
    if above < below:
        v = v[::-1].copy()
        idx = np.nonzero(v)[0]
    return v, int(idx[0])


# ---------------------------------------------------------------------------
# reporting


@dataclass
class MetricReport:
    iou_2d: float
    iou_3d: float
    mse_lw: float
    mse_h: float
    count: int = 0
    by_family: dict = field(default_factory=dict)
    by_visibility: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def _orient_or_empty(prob_h, threshold):
    try:
        return resolve_height_orientation(prob_h, threshold)[0]
    except NoInteriorPixels:
        return np.zeros(len(prob_h), dtype=np.uint8)


def per_sample_metrics(prob_lw, prob_h, gt_lw, gt_h, threshold=THRESHOLD):
    """Dict of arrays (one entry per sample) for 2-D/3-D IOU and both MSEs.

    Floorplan MSE uses probabilities; height MSE is orientation-free (PIT).
    3-D IOU extrudes the binarized floorplan by the floor-resolved height.
    """
    prob_lw = np.asarray(prob_lw, dtype=np.float64)
    prob_h = np.asarray(prob_h, dtype=np.float64)
    n = len(prob_lw)
    out = {k: np.zeros(n) for k in ("iou_2d", "iou_3d", "mse_lw", "mse_h")}
    for i in range(n):
        fp = (prob_lw[i] >= threshold).astype(np.uint8)
        hv = _orient_or_empty(prob_h[i], threshold)
        out["iou_2d"][i] = iou(fp, gt_lw[i])
        out["iou_3d"][i] = iou(extrude_3d(fp, hv).voxels, extrude_3d(gt_lw[i], gt_h[i]).voxels)
        out["mse_lw"][i] = mse_loss(prob_lw[i], gt_lw[i])
        out["mse_h"][i] = pit_height_loss(prob_h[i], gt_h[i])[0]
    return out


def _summary(metrics, mask):
    return {
        "iou_2d": float(metrics["iou_2d"][mask].mean()),
        "iou_3d": float(metrics["iou_3d"][mask].mean()),
        "mse_lw": float(metrics["mse_lw"][mask].mean()),
        "mse_h": float(metrics["mse_h"][mask].mean()),
        "count": int(mask.sum()),
    }


def summarize(metrics, families, los_labels) -> MetricReport:
    families = np.asarray(families)
    los_labels = np.asarray(los_labels)
    n = len(families)
    if n == 0:
        raise ValueError("no samples to summarize")
    overall = _summary(metrics, np.ones(n, dtype=bool))
    by_family = {str(f): _summary(metrics, families == f) for f in sorted(set(families.tolist()))}
    by_vis = {str(v): _summary(metrics, los_labels == v) for v in sorted(set(los_labels.tolist()))}
    return MetricReport(overall["iou_2d"], overall["iou_3d"], overall["mse_lw"], overall["mse_h"], n,
                        by_family, by_vis)
