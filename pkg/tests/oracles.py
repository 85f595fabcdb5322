"""Brute-force parsing metrics written as plain pixel loops, used as oracles."""
from __future__ import annotations

import numpy as np

from spermmorph.raster import InstancePartMask

PARTS = (1, 2, 3, 4, 5)
THRESHOLDS = [k / 10 for k in range(1, 10)]


def random_mask(rng: np.random.Generator, shape, max_instances=2, max_parts=3) -> InstancePartMask:
    h, w = shape
    ids = sorted(rng.choice(np.arange(1, 6), size=int(rng.integers(0, max_instances + 1)), replace=False))
    parts = rng.choice(PARTS, size=int(rng.integers(1, max_parts + 1)), replace=False)
    part = np.zeros(shape, int)
    inst = np.zeros(shape, int)
    for y in range(h):
        for x in range(w):
            if ids and rng.random() < 0.7:
                inst[y, x] = ids[int(rng.integers(len(ids)))]
                part[y, x] = parts[int(rng.integers(len(parts)))]
    return InstancePartMask(part, inst)


def random_pair(seed: int):
    rng = np.random.default_rng(seed)
    shape = (int(rng.integers(1, 9)), int(rng.integers(1, 9)))
    gt = random_mask(rng, shape)
    if rng.random() < 0.3:
        # perturb the ground truth so that pairs overlap substantially
        part, inst = gt.part.astype(int), gt.instance.astype(int)
        for y in range(shape[0]):
            for x in range(shape[1]):
                if rng.random() < 0.2:
                    part[y, x], inst[y, x] = 0, 0
        pred = InstancePartMask(part, inst)
    else:
        pred = random_mask(rng, shape)
    ids = sorted(set(pred.instance.ravel().tolist()) - {0})
    conf = {i: float(rng.choice([0.2, 0.5, 0.5, 0.9])) for i in ids}
    return pred, gt, conf


def pixels(mask: InstancePartMask):
    h, w = mask.shape
    for y in range(h):
        for x in range(w):
            yield (y, x), int(mask.part[y][x]), int(mask.instance[y][x])


def miou(pred, gt):
    inter = {c: 0 for c in PARTS}
    union = {c: 0 for c in PARTS}
    gt_lab = {p: c for p, c, _ in pixels(gt)}
    for p, c, _ in pixels(pred):
        g = gt_lab[p]
        for k in PARTS:
            if c == k and g == k:
                inter[k] += 1
            if c == k or g == k:
                union[k] += 1
    vals = [inter[k] / union[k] for k in PARTS if union[k]]
    return sum(vals) / len(vals) if vals else 1.0


def instances(mask):
    out = {}
    for p, c, i in pixels(mask):
        if i:
            out.setdefault(i, {}).setdefault(c, set()).add(p)
    return out


def part_iou(a, b):
    if not a or not b:
        return 0.0
    return len(a & b) / len(a | b)


def score(pi, gi):
    parts = set(pi) | set(gi)
    return sum(part_iou(pi.get(c, set()), gi.get(c, set())) for c in parts) / len(parts)


def greedy(pred, gt, threshold, conf):
    P, G = instances(pred), instances(gt)
    order = sorted(P, key=lambda i: (-conf.get(i, 1.0), i))
    free = sorted(G)
    tp, pairs = [], {}
    for i in order:
        best, best_s = None, None
        for j in free:
            s = score(P[i], G[j])
            if best_s is None or s > best_s:
                best, best_s = j, s
        if best is not None and best_s > threshold:
            free.remove(best)
            pairs[best] = i
            tp.append(1)
        else:
            tp.append(0)
    return P, G, tp, pairs


def ap(pred, gt, threshold, conf):
    P, G, tp, _ = greedy(pred, gt, threshold, conf)
    if not G:
        return 1.0 if not P else 0.0
    prec = []
    hits = 0
    for k, t in enumerate(tp):
        hits += t
        prec.append(hits / (k + 1))
    # every true positive adds 1/|G| recall at the best precision reachable from there on
    return sum(max(prec[k:]) for k, t in enumerate(tp) if t) / len(G)


def ap_vol(pred, gt, conf):
    return sum(ap(pred, gt, t, conf) for t in THRESHOLDS) / len(THRESHOLDS)


def pcp(pred, gt, threshold, conf, unmatched="zero"):
    P, G, _, pairs = greedy(pred, gt, threshold, conf)
    if not G:
        return 1.0 if not P else 0.0
    vals = []
    for j in sorted(G):
        if j not in pairs:
            if unmatched == "zero":
                vals.append(0.0)
            continue
        pi = P[pairs[j]]
        ok = sum(1 for c, px in G[j].items() if part_iou(pi.get(c, set()), px) > threshold)
        vals.append(ok / len(G[j]))
    return sum(vals) / len(vals) if vals else 0.0
