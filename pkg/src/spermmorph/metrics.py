"""Instance-aware part segmentation metrics: mIoU, part-based AP and PCP.

Instance scores are the mean part IoU over the parts present in either
instance. Predictions are matched greedily in order of decreasing
confidence (ties by instance ID) to the best-scoring unmatched ground
truth, and count as true positives only when that score exceeds the
threshold.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .raster import FOREGROUND_PARTS, InstancePartMask, RasterError

THRESHOLDS = tuple(round(0.1 * k, 1) for k in range(1, 10))


def _check(pred: InstancePartMask, gt: InstancePartMask):
    if pred.shape != gt.shape:
        raise RasterError(f"prediction {pred.shape} and ground truth {gt.shape} dimensions differ")


def miou(pred: InstancePartMask, gt: InstancePartMask) -> tuple[float, dict[int, float]]:
    """Mean IoU over part classes present in either mask, ignoring instances.

    Returns ``(miou, per_part)``. Two masks without any foreground agree
    perfectly and score 1.0.
    """
    _check(pred, gt)
    per = {}
    for c in FOREGROUND_PARTS:
        p = pred.part == c
        g = gt.part == c
        union = int(np.sum(p | g))
        if union:
            per[int(c)] = float(np.sum(p & g)) / union
    if not per:
        return 1.0, per
    return float(np.mean(list(per.values()))), per


def _part_sets(mask: InstancePartMask) -> dict[int, dict[int, np.ndarray]]:
    """instance -> part -> flat pixel indices."""
    out: dict[int, dict[int, np.ndarray]] = {}
    inst = mask.instance.ravel()
    part = mask.part.ravel()
    fg = np.flatnonzero(inst)
    order = np.lexsort((part[fg], inst[fg]))
    fg = fg[order]
    keys = inst[fg] * 16 + part[fg]
    bounds = np.flatnonzero(np.diff(keys)) + 1
    for chunk in np.split(fg, bounds):
        if chunk.size:
            i, c = int(inst[chunk[0]]), int(part[chunk[0]])
            out.setdefault(i, {})[c] = chunk
    return out


def part_iou(a: np.ndarray | None, b: np.ndarray | None) -> float:
    if a is None or b is None:
        return 0.0
    inter = np.intersect1d(a, b, assume_unique=True).size
    return inter / (a.size + b.size - inter)


def instance_score(p: dict[int, np.ndarray], g: dict[int, np.ndarray]) -> float:
    parts = sorted(set(p) | set(g))
    return float(np.mean([part_iou(p.get(c), g.get(c)) for c in parts]))


def score_matrix(pred: InstancePartMask, gt: InstancePartMask):
    """``(pred_ids, gt_ids, scores)`` with ``scores[i, j]`` for pred i vs gt j."""
    _check(pred, gt)
    ps, gs = _part_sets(pred), _part_sets(gt)
    pid, gid = sorted(ps), sorted(gs)
    s = np.zeros((len(pid), len(gid)))
    for i, a in enumerate(pid):
        for j, b in enumerate(gid):
            s[i, j] = instance_score(ps[a], gs[b])
    return pid, gid, s


def _confidence_order(pid, confidences):
    conf = confidences or {}
    return sorted(range(len(pid)), key=lambda i: (-float(conf.get(pid[i], 1.0)), pid[i]))


def match(pid, gid, scores, threshold: float, confidences=None):
    """Greedy matching. Returns ``(order, tp, pairs)``.

    ``order`` lists prediction indices by decreasing confidence, ``tp`` the
    matching outcome in that order, ``pairs`` maps gt index -> pred index.
    """
    order = _confidence_order(pid, confidences)
    free = np.ones(len(gid), dtype=bool)
    tp, pairs = [], {}
    for i in order:
        if not free.any():
            tp.append(False)
            continue
        cand = np.where(free, scores[i], -np.inf)
        j = int(np.argmax(cand))  # first index wins ties: lowest gt ID
        if cand[j] > threshold:
            free[j] = False
            pairs[j] = i
            tp.append(True)
        else:
            tp.append(False)
    return order, tp, pairs


def average_precision(tp, n_gt: int) -> float:
    """All-point interpolated area under the precision-recall curve."""
    if n_gt == 0:
        return 1.0 if len(tp) == 0 else 0.0
    if len(tp) == 0:
        return 0.0
    tp = np.asarray(tp, dtype=np.float64)
    ctp = np.cumsum(tp)
    precision = ctp / np.arange(1, len(tp) + 1)
    recall = ctp / n_gt
    mrec = np.concatenate([[0.0], recall])
    mpre = np.concatenate([precision, [0.0]])
    mpre = np.maximum.accumulate(mpre[::-1])[::-1][:-1]
    return float(np.sum((mrec[1:] - mrec[:-1]) * mpre))


def ap_p(pred: InstancePartMask, gt: InstancePartMask, threshold: float = 0.5,
         confidences: dict[int, float] | None = None, _cache=None) -> float:
    pid, gid, s = _cache or score_matrix(pred, gt)
    _, tp, _ = match(pid, gid, s, threshold, confidences)
    return average_precision(tp, len(gid))


def ap_p_vol(pred: InstancePartMask, gt: InstancePartMask,
             confidences: dict[int, float] | None = None) -> float:
    cache = score_matrix(pred, gt)
    return float(np.mean([ap_p(pred, gt, t, confidences, cache) for t in THRESHOLDS]))


def pcp(pred: InstancePartMask, gt: InstancePartMask, threshold: float = 0.5,
        confidences: dict[int, float] | None = None, unmatched: str = "zero") -> float:
    """Mean fraction of correctly parsed parts per ground-truth instance.

    ``unmatched="zero"`` counts unmatched ground-truth instances as 0;
    ``"exclude"`` leaves them out of the mean.
    """
    if unmatched not in ("zero", "exclude"):
        raise ValueError(f"unknown unmatched policy {unmatched!r}")
    _check(pred, gt)
    ps, gs = _part_sets(pred), _part_sets(gt)
    pid, gid = sorted(ps), sorted(gs)
    if not gid:
        return 1.0 if not pid else 0.0
    s = np.array([[instance_score(ps[a], gs[b]) for b in gid] for a in pid]).reshape(len(pid), len(gid))
    _, _, pairs = match(pid, gid, s, threshold, confidences)
    vals = []
    for j, g in enumerate(gid):
        if j not in pairs:
            if unmatched == "zero":
                vals.append(0.0)
            continue
        p = ps[pid[pairs[j]]]
        parts = gs[g]
        ok = sum(part_iou(p.get(c), parts[c]) > threshold for c in parts)
        vals.append(ok / len(parts))
    return float(np.mean(vals)) if vals else 0.0


@dataclass
class MetricReport:
    miou: float
    ap_p_50: float
    ap_p_vol: float
    pcp_50: float
    per_part_iou: dict[int, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "miou": self.miou,
            "ap_p_50": self.ap_p_50,
            "ap_p_vol": self.ap_p_vol,
            "pcp_50": self.pcp_50,
            "per_part_iou": {str(k): v for k, v in sorted(self.per_part_iou.items())},
        }


def evaluate(pred: InstancePartMask, gt: InstancePartMask,
             confidences: dict[int, float] | None = None, unmatched: str = "zero") -> MetricReport:
    m, per = miou(pred, gt)
    cache = score_matrix(pred, gt)
    return MetricReport(
        miou=m,
        ap_p_50=ap_p(pred, gt, 0.5, confidences, cache),
        ap_p_vol=float(np.mean([ap_p(pred, gt, t, confidences, cache) for t in THRESHOLDS])),
        pcp_50=pcp(pred, gt, 0.5, confidences, unmatched),
        per_part_iou=per,
    )
