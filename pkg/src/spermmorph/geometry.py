"""Shape fits on binary masks: direct least-squares ellipse and minimum-area
rotated rectangle, both computed from boundary edge midpoints."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import ConvexHull, QhullError


class FitDegenerate(ValueError):
    pass


def boundary_points(mask: np.ndarray) -> np.ndarray:
    """Midpoints of all pixel edges separating the mask from its outside.

    These trace the true pixel-area outline, so fits see the region's
    extent rather than the pixel centers one half-pixel inside it.
    Returns ``(N, 2)`` array of ``(x, y)``.
    """
    m = np.pad(np.asarray(mask, dtype=bool), 1)
    pts = []
    # horizontal neighbours -> vertical edge at x + 0.5
    diff = m[:, 1:] != m[:, :-1]
    ys, xs = np.nonzero(diff)
    pts.append(np.stack([xs - 0.5, ys - 1.0], axis=1))
    diff = m[1:, :] != m[:-1, :]
    ys, xs = np.nonzero(diff)
    pts.append(np.stack([xs - 1.0, ys - 0.5], axis=1))
    return np.concatenate(pts).astype(np.float64)


@dataclass(frozen=True)
class EllipseFit:
    center: tuple[float, float]
    semi_major: float  # px
    semi_minor: float  # px
    angle: float  # major-axis orientation, degrees in [0, 180)

    def length(self, um_per_px: float = 1.0) -> float:
        return 2.0 * self.semi_major * um_per_px

    def width(self, um_per_px: float = 1.0) -> float:
        return 2.0 * self.semi_minor * um_per_px

    @property
    def ellipticity(self) -> float:
        return self.semi_major / self.semi_minor


def fit_ellipse_points(points: np.ndarray) -> EllipseFit:
    """Direct least-squares ellipse through 2-D points (Halir-Flusser form)."""
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) < 6:
        raise FitDegenerate(f"need at least 6 boundary points, got {len(pts)}")
    mu = pts.mean(axis=0)
    scale = float(np.sqrt(((pts - mu) ** 2).sum(axis=1).mean()))
    if scale == 0.0:
        raise FitDegenerate("all boundary points coincide")
    x, y = ((pts - mu) / scale).T
    d1 = np.stack([x * x, x * y, y * y], axis=1)
    d2 = np.stack([x, y, np.ones_like(x)], axis=1)
    s1, s2, s3 = d1.T @ d1, d1.T @ d2, d2.T @ d2
    if np.linalg.cond(s3) > 1e12:
        raise FitDegenerate("collinear boundary points")
    t = -np.linalg.solve(s3, s2.T)
    m = s1 + s2 @ t
    m = np.array([m[2] / 2.0, -m[1], m[0] / 2.0])
    w, v = np.linalg.eig(m)
    v = np.real(v)
    cond = 4.0 * v[0] * v[2] - v[1] ** 2
    ok = np.flatnonzero(cond > 0)
    if ok.size == 0:
        raise FitDegenerate("no elliptical solution")
    a1 = v[:, ok[0]]
    A, B, C = a1
    D, E, F = t @ a1
    det = 4.0 * A * C - B * B
    xc = (B * E - 2.0 * C * D) / det
    yc = (B * D - 2.0 * A * E) / det
    f0 = A * xc * xc + B * xc * yc + C * yc * yc + D * xc + E * yc + F
    lam, vec = np.linalg.eigh(np.array([[A, B / 2.0], [B / 2.0, C]]))
    with np.errstate(divide="ignore", invalid="ignore"):
        axes = -f0 / lam
    if not np.all(axes > 0) or not np.all(np.isfinite(axes)):
        raise FitDegenerate("fitted conic is not a real ellipse")
    semi = np.sqrt(axes) * scale
    major = int(np.argmax(semi))
    ux, uy = vec[:, major]
    angle = math.degrees(math.atan2(uy, ux)) % 180.0
    if angle >= 180.0 - 1e-12:
        angle = 0.0
    return EllipseFit(
        center=(float(xc * scale + mu[0]), float(yc * scale + mu[1])),
        semi_major=float(semi[major]),
        semi_minor=float(semi[1 - major]),
        angle=angle,
    )


def fit_ellipse(mask: np.ndarray) -> EllipseFit:
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise FitDegenerate("empty mask")
    return fit_ellipse_points(boundary_points(mask))


@dataclass(frozen=True)
class RectangleFit:
    center: tuple[float, float]
    long_side: float  # px
    short_side: float  # px
    angle: float  # long-side orientation, degrees in [0, 180)
    degenerate: bool = False

    def length(self, um_per_px: float = 1.0) -> float:
        return self.long_side * um_per_px

    def width(self, um_per_px: float = 1.0) -> float:
        return self.short_side * um_per_px


def min_area_rectangle(points: np.ndarray) -> RectangleFit:
    """Rotating-calipers minimum-area bounding rectangle of a point set.

    Candidate orientations are the hull edge directions. Among equal
    areas (within 1e-9 relative) the smallest resulting angle wins.
    """
    pts = np.asarray(points, dtype=np.float64)
    try:
        hull = pts[ConvexHull(pts).vertices]
    except (QhullError, ValueError) as exc:
        raise FitDegenerate("points do not span an area") from exc
    edges = np.roll(hull, -1, axis=0) - hull
    theta = np.arctan2(edges[:, 1], edges[:, 0]) % (math.pi / 2)
    theta = np.unique(np.round(theta, 12))
    best = None
    for th in theta:
        u = np.array([math.cos(th), math.sin(th)])
        v = np.array([-u[1], u[0]])
        pu, pv = hull @ u, hull @ v
        eu, ev = pu.max() - pu.min(), pv.max() - pv.min()
        area = eu * ev
        cu, cv = 0.5 * (pu.max() + pu.min()), 0.5 * (pv.max() + pv.min())
        centre = cu * u + cv * v
        if eu >= ev:
            ang, long_, short = math.degrees(th), eu, ev
        else:
            ang, long_, short = (math.degrees(th) + 90.0), ev, eu
        ang = round(ang % 180.0, 9) % 180.0  # drop float noise from arctan2
        key = (area, ang)
        if best is None or area < best[0][0] * (1 - 1e-9) or (
            abs(area - best[0][0]) <= 1e-9 * best[0][0] and ang < best[0][1]
        ):
            best = (key, RectangleFit((float(centre[0]), float(centre[1])), float(long_), float(short), ang))
    return best[1]


def _bracket_box(inside: np.ndarray, ring: np.ndarray, theta: float):
    """Box along ``theta`` whose sides bisect inside and outside pixel centres.

    A side of the true region lies between the outermost inside centre and
    the nearest outside centre beyond it (taken within the inside extent of
    the other axis); the midpoint of that bracket is the estimate.
    """
    u = np.array([math.cos(theta), math.sin(theta)])
    v = np.array([-u[1], u[0]])
    iu, iv, ru, rv = inside @ u, inside @ v, ring @ u, ring @ v
    eps = 1e-9  # projections tie exactly on diagonals; resolve ties the same way at any rotation
    bounds = []
    for a, b, ra, rb in ((iu, iv, ru, rv), (iv, iu, rv, ru)):
        lo_in, hi_in = a.min(), a.max()
        near = ra[(rb >= b.min() - eps) & (rb <= b.max() + eps)]
        above = near[near > hi_in + eps]
        below = near[near < lo_in - eps]
        hi = 0.5 * (hi_in + above.min()) if above.size else hi_in + 0.5
        lo = 0.5 * (lo_in + below.max()) if below.size else lo_in - 0.5
        bounds.append((lo, hi))
    (u0, u1), (v0, v1) = bounds
    centre = 0.5 * (u0 + u1) * u + 0.5 * (v0 + v1) * v
    return u1 - u0, v1 - v0, centre


def fit_rectangle(mask: np.ndarray) -> RectangleFit:
    """Minimum-area rotated rectangle of a pixel region.

    The orientation is that of the minimum-area rectangle around the pixel
    centres; side positions then bisect the inside and outside pixel
    centres, which avoids the half-pixel outward bias a staircase outline
    has on tilted edges.
    """
    mask = np.asarray(mask, dtype=bool)
    n = int(mask.sum())
    if n == 0:
        raise FitDegenerate("empty mask")
    if n == 1:
        y, x = np.argwhere(mask)[0]
        return RectangleFit((float(x), float(y)), 0.0, 0.0, 0.0, degenerate=True)
    padded = np.pad(mask, 1)
    ring_m = ndimage.binary_dilation(padded, structure=np.ones((3, 3), bool)) & ~padded
    inside = np.argwhere(padded)[:, ::-1].astype(np.float64) - 1.0
    ring = np.argwhere(ring_m)[:, ::-1].astype(np.float64) - 1.0
    try:
        seed = min_area_rectangle(inside)
    except FitDegenerate:  # a one-pixel-thick run of pixels
        seed = min_area_rectangle(boundary_points(mask))
    th = math.radians(seed.angle)
    eu, ev, centre = _bracket_box(inside, ring, th)
    if eu >= ev:
        ang, long_, short = seed.angle, eu, ev
    else:
        ang, long_, short = (seed.angle + 90.0) % 180.0, ev, eu
    return RectangleFit((float(centre[0]), float(centre[1])), float(long_), float(short), ang)


def axis_angle(a: float, b: float) -> float:
    """Acute angle in [0, 90] between two undirected axes given in degrees."""
    if not (math.isfinite(a) and math.isfinite(b)):
        raise FitDegenerate("axis angle is not finite")
    d = abs(a - b) % 180.0
    return min(d, 180.0 - d)
