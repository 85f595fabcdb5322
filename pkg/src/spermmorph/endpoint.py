"""Outlier filtering of mislocated centerline ends and gradient-following
endpoint reconstruction with a momentum-smoothed walk direction."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .derivatives import DerivativeFields
from .steger import (
    CenterPoint,
    Centerline,
    EdgePair,
    PointSource,
    _canonical,
    edge_pairs,
)


class UndefinedAngle(ValueError):
    pass


class NoValidCenterPoints(ValueError):
    """Every point of a centerline failed the opposite-edge constraint."""


def cos_alpha(g1, g2) -> float:
    """Normalized dot product of two edge gradients."""
    x1, y1 = float(g1[0]), float(g1[1])
    x2, y2 = float(g2[0]), float(g2[1])
    n1 = math.hypot(x1, y1)
    n2 = math.hypot(x2, y2)
    if n1 == 0.0 or n2 == 0.0:
        raise UndefinedAngle("undefined angle: zero-magnitude gradient")
    c = (x1 * x2 + y1 * y2) / (n1 * n2)
    return max(-1.0, min(1.0, c))


@dataclass(frozen=True)
class EndpointVerdict:
    point: CenterPoint
    cos_alpha: float  # nan when no edge pair was found
    kept: bool
    end: str = "start"
    index: int = 0


def endpoint_verdict(cp, pair: EdgePair | None, threshold: float, end: str, index: int):
    if pair is None:
        return EndpointVerdict(cp, float("nan"), False, end, index)
    try:
        c = cos_alpha(pair.g1, pair.g2)
    except UndefinedAngle:
        return EndpointVerdict(cp, float("nan"), False, end, index)
    return EndpointVerdict(cp, c, abs(c) >= threshold, end, index)


def filter_endpoints(
    line: Centerline,
    fields: DerivativeFields,
    cos_threshold: float = 0.9,
    min_points: int = 10,
    max_halfwidth: float = 8.0,
    edge_threshold: float = 0.005,
    width_model: str = "gaussian",
):
    """Trim mislocated points from both ends of ``line``.

    From each end inward, points are dropped until the first one whose
    edge pair exists and whose edge gradients satisfy
    ``|cos_alpha| >= cos_threshold``. Interior points are never examined.

    Returns ``(trimmed_line, verdicts)``.
    """
    n = len(line)
    if n < min_points:
        raise ValueError(f"centerline has {n} points, fewer than min_points={min_points}")
    pos, nrm = line.positions(), line.normals()
    cache: dict[int, EdgePair | None] = {}

    def pair(i):
        if i not in cache:
            cache[i] = edge_pairs(fields, pos[i : i + 1], nrm[i : i + 1], max_halfwidth,
                                  threshold=edge_threshold, width_model=width_model)[0]
        return cache[i]

    verdicts = []
    first = None
    for i in range(n):
        v = endpoint_verdict(line.points[i], pair(i), cos_threshold, "start", i)
        verdicts.append(v)
        if v.kept:
            first = i
            break
    if first is None:
        raise NoValidCenterPoints("no valid center points")
    last = first
    for i in range(n - 1, first - 1, -1):
        v = endpoint_verdict(line.points[i], pair(i), cos_threshold, "end", i)
        if i != first:
            verdicts.append(v)
        if v.kept:
            last = i
            break
    trimmed = Centerline(line.points[first : last + 1], line.instance, line.closed, list(line.warnings))
    return trimmed, verdicts


# unit steps, counter-clockwise from +x in image axes (y down)
_STEPS = ((1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1))


def candidate_pixels(current, gradient_angle: float):
    """The diagonal and axis neighbours bracketing a gradient direction.

    Octants are ``(k*45, (k+1)*45]`` degrees; the diagonal neighbour is
    returned first.
    """
    if not math.isfinite(gradient_angle):
        raise UndefinedAngle("zero gradient")
    a = gradient_angle % 360.0
    k = (math.ceil(a / 45.0) - 1) % 8
    cx, cy = int(current[0]), int(current[1])
    s1, s2 = _STEPS[k], _STEPS[(k + 1) % 8]
    diag, axis = (s1, s2) if s1[0] and s1[1] else (s2, s1)
    return (cx + diag[0], cy + diag[1]), (cx + axis[0], cy + axis[1])


def momentum_update(g_current, g_next, alpha: float) -> np.ndarray:
    """Exponentially smoothed walk gradient."""
    return alpha * np.asarray(g_current, dtype=np.float64) + (1.0 - alpha) * np.asarray(
        g_next, dtype=np.float64
    )


def ray_distance(point, origin, direction) -> float:
    """Distance from ``point`` to the ray leaving ``origin`` along ``direction``."""
    d = np.asarray(direction, dtype=np.float64)
    d = d / np.hypot(d[0], d[1])
    v = np.asarray(point, dtype=np.float64) - np.asarray(origin, dtype=np.float64)
    along = v @ d
    if along <= 0:
        return float(np.hypot(v[0], v[1]))
    return float(abs(v[0] * d[1] - v[1] * d[0]))


def aligned_angle(g, ref) -> float:
    """Angle in [0, pi/2] between the undirected ``g`` and ``ref``."""
    ng = math.hypot(g[0], g[1])
    nr = math.hypot(ref[0], ref[1])
    if ng == 0.0 or nr == 0.0:
        return math.pi / 2
    c = abs(g[0] * ref[0] + g[1] * ref[1]) / (ng * nr)
    return math.acos(min(1.0, c))


@dataclass
class WalkState:
    current: tuple[int, int]
    momentum_gradient: np.ndarray
    step_count: int = 0


@dataclass
class WalkResult:
    points: list[CenterPoint]
    trace: list[dict] = field(default_factory=list)
    nonterminating: bool = False


def _normal_of(g: np.ndarray) -> tuple[float, float]:
    norm = math.hypot(g[0], g[1])
    nx, ny = _canonical(np.array(-g[1] / norm), np.array(g[0] / norm))
    return float(nx), float(ny)


def reconstruct_endpoint(
    line: Centerline,
    end: str,
    fields: DerivativeFields,
    tail_mask: np.ndarray,
    w1: float = 0.5,
    w2: float = 0.5,
    alpha: float = 0.9,
    max_steps: int = 200,
) -> WalkResult:
    """Extend one end of ``line`` by walking along the image gradient.

    ``end`` is ``"start"``/``"head_end"`` (first point) or
    ``"end"``/``"tail_end"`` (last point). Returned points are ordered
    outward from the line end; the walk stops before the first selected
    pixel outside ``tail_mask``.
    """
    tail_mask = np.asarray(tail_mask, dtype=bool)
    if not tail_mask.any():
        raise ValueError("tail mask is empty")
    if len(line) == 0:
        raise ValueError("empty centerline")
    pos = line.positions()
    if end in ("start", "head_end"):
        pos = pos[::-1]
    elif end not in ("end", "tail_end"):
        raise ValueError(f"unknown end {end!r}")
    p = pos[-1]
    k = min(3, len(pos) - 1)
    outward = p - pos[-1 - k] if k > 0 else np.zeros(2)

    # only the along-line component of the end gradient is kept; the
    # across-line part vanishes on a clean ridge and is noise otherwise
    nx, ny = line.points[-1 if end in ("end", "tail_end") else 0].normal
    tangent = np.array([-ny, nx])
    if tangent @ outward < 0:
        tangent = -tangent
    g = fields.gradient_at(p[0], p[1])
    along = abs(float(g @ tangent))
    if along == 0.0:
        if np.hypot(*outward) == 0.0 and np.hypot(*g) == 0.0:
            raise UndefinedAngle("zero gradient and no line direction at the endpoint")
        mags = [math.hypot(*cp.gradient) for cp in line.points]
        along = float(np.mean(mags)) or 1.0
    g = along * tangent

    h, w = tail_mask.shape
    state = WalkState((int(round(p[0])), int(round(p[1]))), g)
    result = WalkResult([])
    while True:
        gm = state.momentum_gradient
        angle = math.degrees(math.atan2(gm[1], gm[0]))
        cands = candidate_pixels(state.current, angle)
        scores = []
        grads = []
        for q in cands:
            if 0 <= q[0] < w and 0 <= q[1] < h:
                gq = np.array([fields.rx[q[1], q[0]], fields.ry[q[1], q[0]]])
            else:
                gq = np.zeros(2)
            if gq @ gm < 0:
                gq = -gq
            d = ray_distance(q, state.current, gm)
            beta = aligned_angle(gq, gm)
            scores.append(w1 * d + w2 * beta)
            grads.append(gq)
        best = int(np.argmin(scores))
        q = cands[best]
        inside = 0 <= q[0] < w and 0 <= q[1] < h and tail_mask[q[1], q[0]]
        result.trace.append({
            "step": state.step_count,
            "cx": state.current[0],
            "cy": state.current[1],
            "gx": float(gm[0]),
            "gy": float(gm[1]),
            "cand0": cands[0],
            "score0": scores[0],
            "cand1": cands[1],
            "score1": scores[1],
            "selected": best,
            "inside": bool(inside),
        })
        if not inside:
            break
        gnew = momentum_update(gm, grads[best], alpha)
        if np.hypot(*gnew) == 0.0:
            gnew = gm
        result.points.append(
            CenterPoint(
                position=(float(q[0]), float(q[1])),
                normal=_normal_of(gnew),
                gradient=(float(grads[best][0]), float(grads[best][1])),
                second_dir_deriv=float("nan"),
                source=PointSource.RECONSTRUCTED,
            )
        )
        state = WalkState(q, gnew, state.step_count + 1)
        if state.step_count >= max_steps:
            result.nonterminating = True
            break
    return result


def extend_line(line: Centerline, start: WalkResult | None, end: WalkResult | None) -> Centerline:
    pts = list(line.points)
    if start is not None:
        pts = start.points[::-1] + pts
    if end is not None:
        pts = pts + end.points
    warnings = list(line.warnings)
    for r in (start, end):
        if r is not None and r.nonterminating:
            warnings.append("nonterminating_walk")
    return Centerline(pts, line.instance, line.closed, warnings)


def clip_to_mask(line: Centerline, mask: np.ndarray) -> Centerline:
    """Drop points from both ends whose nearest pixel lies outside ``mask``."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape

    def inside(cp):
        x, y = int(round(cp.position[0])), int(round(cp.position[1]))
        return 0 <= x < w and 0 <= y < h and mask[y, x]

    pts = line.points
    i, j = 0, len(pts)
    while i < j and not inside(pts[i]):
        i += 1
    while j > i and not inside(pts[j - 1]):
        j -= 1
    return Centerline(pts[i:j], line.instance, line.closed, list(line.warnings))
