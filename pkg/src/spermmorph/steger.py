"""Sub-pixel ridge points from the Hessian, linking into centerlines, and
edge localization along the ridge normal."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .derivatives import DerivativeFields, bilinear


class NoRidgeDirection(ValueError):
    pass


class PointSource(str, Enum):
    DETECTED = "detected"
    RECONSTRUCTED = "reconstructed"


@dataclass(frozen=True)
class CenterPoint:
    position: tuple[float, float]
    normal: tuple[float, float]
    gradient: tuple[float, float] = (0.0, 0.0)
    second_dir_deriv: float = 0.0
    width: float | None = None
    source: PointSource = PointSource.DETECTED

    @property
    def xy(self) -> np.ndarray:
        return np.asarray(self.position, dtype=np.float64)

    @property
    def n(self) -> np.ndarray:
        return np.asarray(self.normal, dtype=np.float64)


@dataclass
class Centerline:
    points: list[CenterPoint]
    instance: int = 0
    closed: bool = False
    warnings: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.points)

    def positions(self) -> np.ndarray:
        return np.array([p.position for p in self.points], dtype=np.float64).reshape(-1, 2)

    def normals(self) -> np.ndarray:
        return np.array([p.normal for p in self.points], dtype=np.float64).reshape(-1, 2)

    def reversed(self) -> "Centerline":
        return Centerline(self.points[::-1], self.instance, self.closed, list(self.warnings))


@dataclass(frozen=True)
class EdgePair:
    """Edge points on both sides of a center point along its normal.

    ``e1`` lies on the ``+normal`` side. ``d1``/``d2`` are the
    profile-corrected center-to-edge distances that ``e1``/``e2`` are
    placed at; ``raw1``/``raw2`` are the uncorrected gradient-maximum
    offsets.
    """

    e1: tuple[float, float]
    e2: tuple[float, float]
    g1: tuple[float, float]
    g2: tuple[float, float]
    d1: float
    d2: float
    raw1: float
    raw2: float

    @property
    def width(self) -> float:
        return self.d1 + self.d2


# --------------------------------------------------------------------------
# Hessian analysis


def _canonical(nx: np.ndarray, ny: np.ndarray):
    flip = (ny < 0) | ((ny == 0) & (nx < 0))
    return np.where(flip, -nx, nx), np.where(flip, -ny, ny)


def hessian_eigen(rxx, rxy, ryy):
    """Vectorized dominant eigenpair of ``[[rxx, rxy], [rxy, ryy]]``.

    Returns ``(nx, ny, lam)``: the unit eigenvector of the eigenvalue with
    the largest magnitude (negative one on ties), sign-canonicalized so
    that ``ny > 0`` or ``ny == 0 and nx > 0``.
    """
    rxx = np.asarray(rxx, dtype=np.float64)
    rxy = np.asarray(rxy, dtype=np.float64)
    ryy = np.asarray(ryy, dtype=np.float64)
    mean = 0.5 * (rxx + ryy)
    rad = np.hypot(0.5 * (rxx - ryy), rxy)
    l_hi = mean + rad
    l_lo = mean - rad
    lam = np.where(np.abs(l_hi) > np.abs(l_lo), l_hi, l_lo)
    # two algebraically equivalent eigenvectors; take the better conditioned
    ax, ay = rxy, lam - rxx
    bx, by = lam - ryy, rxy
    na = np.hypot(ax, ay)
    nb = np.hypot(bx, by)
    use_a = na >= nb
    vx = np.where(use_a, ax, bx)
    vy = np.where(use_a, ay, by)
    norm = np.maximum(na, nb)
    iso = norm <= 1e-300
    with np.errstate(invalid="ignore", divide="ignore"):
        nx = np.where(iso, 1.0, vx / np.where(iso, 1.0, norm))
        ny = np.where(iso, 0.0, vy / np.where(iso, 1.0, norm))
    nx, ny = _canonical(nx, ny)
    return nx, ny, lam


def hessian_normal(fields: DerivativeFields, pixel, tol: float = 1e-12):
    """Unit normal and dominant eigenvalue of the Hessian at an integer pixel."""
    x, y = int(pixel[0]), int(pixel[1])
    h, w = fields.shape
    if not (0 <= x < w and 0 <= y < h):
        raise IndexError(f"pixel ({x}, {y}) outside {w}x{h} field")
    return hessian_normal_from(fields.rxx[y, x], fields.rxy[y, x], fields.ryy[y, x], tol)


def hessian_normal_from(rxx: float, rxy: float, ryy: float, tol: float = 1e-12):
    nx, ny, lam = hessian_eigen(rxx, rxy, ryy)
    if abs(float(lam)) < tol:
        raise NoRidgeDirection("no ridge direction (degenerate Hessian)")
    return (float(nx), float(ny)), float(lam)


# --------------------------------------------------------------------------
# Candidate detection


def subpixel_center(
    fields: DerivativeFields, pixel, strength_threshold: float = 0.01
) -> CenterPoint | None:
    x, y = int(pixel[0]), int(pixel[1])
    try:
        (nx, ny), lam = hessian_normal(fields, (x, y))
    except NoRidgeDirection:
        return None
    rx, ry = float(fields.rx[y, x]), float(fields.ry[y, x])
    if not lam < -strength_threshold:
        return None
    t = -(rx * nx + ry * ny) / lam
    if abs(t * nx) > 0.5 or abs(t * ny) > 0.5:
        return None
    return CenterPoint(
        position=(x + t * nx, y + t * ny),
        normal=(nx, ny),
        gradient=(rx, ry),
        second_dir_deriv=lam,
    )


@dataclass(frozen=True)
class Candidates:
    """Accepted ridge pixels in array form (one row per pixel)."""

    pixel: np.ndarray  # (N, 2) int, (x, y)
    position: np.ndarray  # (N, 2)
    normal: np.ndarray  # (N, 2)
    gradient: np.ndarray  # (N, 2)
    eigenvalue: np.ndarray  # (N,)

    def __len__(self) -> int:
        return len(self.eigenvalue)

    def point(self, i: int) -> CenterPoint:
        return CenterPoint(
            position=(float(self.position[i, 0]), float(self.position[i, 1])),
            normal=(float(self.normal[i, 0]), float(self.normal[i, 1])),
            gradient=(float(self.gradient[i, 0]), float(self.gradient[i, 1])),
            second_dir_deriv=float(self.eigenvalue[i]),
        )

    def subset(self, keep: np.ndarray) -> "Candidates":
        return Candidates(
            self.pixel[keep], self.position[keep], self.normal[keep],
            self.gradient[keep], self.eigenvalue[keep],
        )


def detect_candidates(
    fields: DerivativeFields,
    mask: np.ndarray | None = None,
    strength_threshold: float = 0.01,
    border: int = 0,
    slack: float = 0.15,
) -> Candidates:
    """All pixels whose sub-pixel ridge center falls inside the pixel.

    ``mask`` (already dilated by the caller when gating) restricts which
    pixels are examined; ``border`` excludes a frame of that width.

    A ridge running along a pixel boundary can have its center pushed just
    outside both neighbouring pixels by noise, leaving a gap. A center up
    to ``slack`` beyond its pixel is therefore also accepted when the pixel
    it falls in produced no center of its own.
    """
    h, w = fields.shape
    region = np.ones((h, w), dtype=bool) if mask is None else np.asarray(mask, dtype=bool).copy()
    if border > 0:
        region[:border, :] = False
        region[-border:, :] = False
        region[:, :border] = False
        region[:, -border:] = False
    ys, xs = np.nonzero(region)
    rxx, rxy, ryy = fields.rxx[ys, xs], fields.rxy[ys, xs], fields.ryy[ys, xs]
    rx, ry = fields.rx[ys, xs], fields.ry[ys, xs]
    nx, ny, lam = hessian_eigen(rxx, rxy, ryy)
    strong = lam < -strength_threshold
    t = np.zeros_like(lam)
    t[strong] = -(rx[strong] * nx[strong] + ry[strong] * ny[strong]) / lam[strong]
    ok = strong & (np.abs(t * nx) <= 0.5) & (np.abs(t * ny) <= 0.5)
    if slack > 0:
        lim = 0.5 + slack
        near = strong & ~ok & (np.abs(t * nx) <= lim) & (np.abs(t * ny) <= lim)
        if near.any():
            owned = np.zeros((h, w), dtype=bool)
            owned[ys[ok], xs[ok]] = True
            ox = np.clip(np.rint(xs[near] + t[near] * nx[near]).astype(np.intp), 0, w - 1)
            oy = np.clip(np.rint(ys[near] + t[near] * ny[near]).astype(np.intp), 0, h - 1)
            idx = np.flatnonzero(near)
            ok[idx[~owned[oy, ox]]] = True
    xs, ys, nx, ny, t, lam, rx, ry = (a[ok] for a in (xs, ys, nx, ny, t, lam, rx, ry))
    return Candidates(
        pixel=np.stack([xs, ys], axis=1),
        position=np.stack([xs + t * nx, ys + t * ny], axis=1),
        normal=np.stack([nx, ny], axis=1),
        gradient=np.stack([rx, ry], axis=1),
        eigenvalue=lam,
    )


def gate_mask(mask: np.ndarray, margin: int) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)
    if margin <= 0:
        return mask
    return ndimage.binary_dilation(mask, structure=np.ones((3, 3), bool), iterations=margin)


# --------------------------------------------------------------------------
# Linking


def _undirected_angle(n1: np.ndarray, n2: np.ndarray) -> np.ndarray:
    c = np.abs(n1[..., 0] * n2[..., 0] + n1[..., 1] * n2[..., 1])
    return np.arccos(np.clip(c, 0.0, 1.0))


def link_centerlines(
    candidates: Candidates,
    mask: np.ndarray | None = None,
    r_link: float = 2.0,
    theta_max_deg: float = 45.0,
    gamma: float = 1.0,
    min_points: int = 10,
    instance: int = 0,
) -> list[Centerline]:
    """Greedy chain growth over candidate ridge points.

    Seeds are taken in order of decreasing ridge strength (ties broken by
    ``(y, x)`` of the source pixel). From each chain end the next point is
    the unlinked candidate ahead of the end, within ``r_link`` and
    ``theta_max_deg`` normal change, minimizing ``dist + gamma * dtheta``.
    Once a chain is complete, leftover candidates within half a link radius
    of it are retired so they cannot seed a duplicate chain.
    """
    if mask is not None and len(candidates):
        m = np.asarray(mask, dtype=bool)
        px = candidates.pixel
        candidates = candidates.subset(m[px[:, 1], px[:, 0]])
    n = len(candidates)
    if n == 0:
        return []
    pos = candidates.position
    nrm = candidates.normal
    strength = -candidates.eigenvalue
    order = np.lexsort((candidates.pixel[:, 0], candidates.pixel[:, 1], -strength))
    rank = np.empty(n, dtype=np.intp)
    rank[order] = np.arange(n)
    tree = cKDTree(pos)
    neighbours = tree.query_ball_point(pos, r_link)
    used = np.zeros(n, dtype=bool)
    theta_max = math.radians(theta_max_deg)

    def grow(start: int, direction: np.ndarray) -> list[int]:
        chain = []
        cur, fwd = start, direction
        while True:
            nb = np.array([j for j in neighbours[cur] if not used[j]], dtype=np.intp)
            if nb.size == 0:
                break
            step = pos[nb] - pos[cur]
            ahead = step @ fwd > 1e-9
            nb, step = nb[ahead], step[ahead]
            if nb.size == 0:
                break
            dist = np.hypot(step[:, 0], step[:, 1])
            dth = _undirected_angle(nrm[nb], nrm[cur][None, :])
            ok = dth <= theta_max
            nb, step, dist, dth = nb[ok], step[ok], dist[ok], dth[ok]
            if nb.size == 0:
                break
            cost = dist + gamma * dth
            best = np.lexsort((rank[nb], cost))[0]
            nxt = nb[best]
            tangent = np.array([-nrm[nxt, 1], nrm[nxt, 0]])
            if tangent @ step[best] < 0:
                tangent = -tangent
            used[nxt] = True
            chain.append(int(nxt))
            cur, fwd = nxt, tangent
        return chain

    lines = []
    for seed in order:
        if used[seed]:
            continue
        used[seed] = True
        t = np.array([-nrm[seed, 1], nrm[seed, 0]])
        fwd = grow(seed, t)
        back = grow(seed, -t)
        idx = back[::-1] + [int(seed)] + fwd
        chain_pts = pos[idx]
        for nbrs in tree.query_ball_point(chain_pts, 0.5 * r_link):
            used[nbrs] = True
        if len(idx) >= min_points:
            lines.append(Centerline([candidates.point(i) for i in idx], instance))
    lines.sort(key=lambda c: -len(c))
    return lines


# --------------------------------------------------------------------------
# Edges and width


@lru_cache(maxsize=64)
def _bar_table(sigma: float):
    """Gradient-maximum offset of a smoothed symmetric bar vs its half-width."""
    h = np.linspace(0.0, 12.0 * sigma, 1201)[1:]
    x = np.linspace(0.0, 14.0 * sigma, 5601)
    g = lambda u: np.exp(-0.5 * (u / sigma) ** 2)
    v = np.empty_like(h)
    for i, hh in enumerate(h):
        v[i] = x[np.argmax(g(x - hh) - g(x + hh))]
    v = np.maximum.accumulate(v)
    return v, h


def correct_offset(raw: float, sigma: float, model: str) -> float:
    """Map a gradient-maximum offset to the profile edge it came from."""
    if model == "none":
        return raw
    if model == "gaussian":
        return math.sqrt(max(raw * raw - sigma * sigma, 0.0))
    if model == "bar":
        v, h = _bar_table(float(sigma))
        return float(np.interp(raw, v, h, left=0.0))
    raise ValueError(f"unknown width model {model!r}")


def _first_peak(mag: np.ndarray, threshold: float):
    """Index of the first local maximum holding at least half the side's max."""
    if mag.size < 3:
        return None
    top = mag.max()
    if top < threshold:
        return None
    floor = max(threshold, 0.5 * top)
    for i in range(1, mag.size - 1):
        if mag[i] >= mag[i - 1] and mag[i] > mag[i + 1] and mag[i] >= floor:
            return i
    return None


def edge_pairs(
    fields: DerivativeFields,
    positions: np.ndarray,
    normals: np.ndarray,
    max_halfwidth: float = 8.0,
    step: float = 0.25,
    threshold: float = 0.005,
    width_model: str = "gaussian",
) -> list[EdgePair | None]:
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
    normals = np.asarray(normals, dtype=np.float64).reshape(-1, 2)
    s = np.arange(0, int(round(max_halfwidth / step)) + 2) * step  # one extra for refinement
    out: list[EdgePair | None] = []
    if len(positions) == 0:
        return out
    # samples[k, side, j] along +n (side 0) and -n (side 1)
    signs = np.array([1.0, -1.0])
    px = positions[:, None, None, 0] + signs[None, :, None] * s[None, None, :] * normals[:, None, None, 0]
    py = positions[:, None, None, 1] + signs[None, :, None] * s[None, None, :] * normals[:, None, None, 1]
    # cubic sampling: bilinear magnitudes peak on pixel nodes and bias the offsets
    gx = ndimage.map_coordinates(fields.rx, [py.ravel(), px.ravel()], order=3, mode="nearest")
    gy = ndimage.map_coordinates(fields.ry, [py.ravel(), px.ravel()], order=3, mode="nearest")
    mag = np.hypot(gx, gy).reshape(px.shape)
    limit = int(round(max_halfwidth / step)) + 1
    for k in range(len(positions)):
        offs = []
        for side in (0, 1):
            m = mag[k, side, : limit + 1]
            i = _first_peak(m, threshold)
            if i is None or i >= limit:
                break
            denom = m[i - 1] - 2 * m[i] + m[i + 1]
            delta = 0.5 * (m[i - 1] - m[i + 1]) / denom if denom != 0 else 0.0
            offs.append(s[i] + float(np.clip(delta, -0.5, 0.5)) * step)
        if len(offs) < 2:
            out.append(None)
            continue
        p, nv = positions[k], normals[k]
        d1 = correct_offset(offs[0], fields.sigma, width_model)
        d2 = correct_offset(offs[1], fields.sigma, width_model)
        e1 = p + d1 * nv
        e2 = p - d2 * nv
        g = fields.gradient_at([e1[0], e2[0]], [e1[1], e2[1]])
        out.append(
            EdgePair(
                e1=(float(e1[0]), float(e1[1])),
                e2=(float(e2[0]), float(e2[1])),
                g1=(float(g[0, 0]), float(g[0, 1])),
                g2=(float(g[1, 0]), float(g[1, 1])),
                d1=d1, d2=d2, raw1=offs[0], raw2=offs[1],
            )
        )
    return out


def edge_pair(
    fields: DerivativeFields,
    cp: CenterPoint,
    max_halfwidth: float = 8.0,
    threshold: float = 0.005,
    width_model: str = "gaussian",
) -> EdgePair | None:
    return edge_pairs(
        fields, np.array([cp.position]), np.array([cp.normal]),
        max_halfwidth=max_halfwidth, threshold=threshold, width_model=width_model,
    )[0]


def with_widths(line: Centerline, pairs: list[EdgePair | None]) -> Centerline:
    pts = [
        replace(p, width=None if e is None else e.width) for p, e in zip(line.points, pairs)
    ]
    return Centerline(pts, line.instance, line.closed, list(line.warnings))
