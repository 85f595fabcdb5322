"""Synthetic curvilinear and sperm phantoms with analytic ground truth."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import erf

from .raster import (
    InstancePartMask,
    PartLabel,
    ScalarImage,
    connected_components,
    save_image,
    save_mask,
)

DENSE_STEP = 0.05
MIN_TAIL_CURVATURE = 0.003  # rad/px, random phantoms only


class PhantomError(ValueError):
    pass


@dataclass(frozen=True)
class Junction:
    """Bright straight bar crossing a curve endpoint.

    The bar's centerline passes through the endpoint when ``shift`` is 0;
    a positive ``shift`` moves the bar beyond the end along the curve
    tangent (``shift = width / 2`` makes its near edge touch the end).
    """

    end: str = "end"  # "start" or "end"
    angle_deg: float = 90.0  # bar direction relative to the curve tangent
    length: float = 40.0
    width: float = 6.0
    amplitude: float = 0.8
    offset: float = 0.0  # shift of the bar centre along its own axis
    shift: float = 0.0


@dataclass(frozen=True)
class CurveSpec:
    """Curve geometry plus cross-section.

    ``control`` depends on ``kind``:

    * ``straight``: ``[[x0, y0], [x1, y1]]``
    * ``arc``: ``[cx, cy, radius, start_angle_deg, sweep_deg]``
    * ``spline``: four cubic Bezier control points ``[[x, y], ...]``

    ``width`` is ``(start, end)`` in pixels, linear taper in arc length.
    For the gaussian profile the profile sigma is half the local width.
    """

    kind: str
    control: tuple
    width: tuple[float, float] = (4.0, 4.0)
    profile: str = "gaussian"
    amplitude: float = 0.7
    edge_sigma: float = 0.5
    junction: Junction | None = None

    def __post_init__(self):
        if self.kind not in ("straight", "arc", "spline"):
            raise PhantomError(f"unknown curve kind {self.kind!r}")
        if self.profile not in ("gaussian", "smoothed_step"):
            raise PhantomError(f"unknown profile {self.profile!r}")
        if min(self.width) <= 0:
            raise PhantomError("widths must be positive")
        if not np.all(np.isfinite(np.asarray(self.control, dtype=float).ravel())):
            raise PhantomError("non-finite curve geometry")


@dataclass
class GroundTruth:
    length: float
    mean_width: float
    mean_abs_curvature: float
    angle_max: float
    endpoints: tuple[tuple[float, float], tuple[float, float]]
    samples: np.ndarray = field(repr=False)
    curvature: np.ndarray = field(repr=False)
    widths: np.ndarray = field(repr=False)

    def to_dict(self, include_samples: bool = False) -> dict:
        d = {
            "length": self.length,
            "mean_width": self.mean_width,
            "mean_abs_curvature": self.mean_abs_curvature,
            "angle_max": self.angle_max,
            "endpoints": [list(p) for p in self.endpoints],
        }
        if include_samples:
            d["samples"] = self.samples.tolist()
        return d


# --------------------------------------------------------------------------
# Geometry


def _resample(points: np.ndarray, step: float) -> np.ndarray:
    seg = np.hypot(*np.diff(points, axis=0).T)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    n = max(int(math.ceil(s[-1] / step)), 1)
    t = np.linspace(0.0, s[-1], n + 1)
    return np.stack([np.interp(t, s, points[:, 0]), np.interp(t, s, points[:, 1])], axis=1)


def _bezier(ctrl: np.ndarray, t: np.ndarray, d: int = 0) -> np.ndarray:
    p0, p1, p2, p3 = ctrl
    t = t[:, None]
    if d == 0:
        return (1 - t) ** 3 * p0 + 3 * (1 - t) ** 2 * t * p1 + 3 * (1 - t) * t**2 * p2 + t**3 * p3
    if d == 1:
        return 3 * (1 - t) ** 2 * (p1 - p0) + 6 * (1 - t) * t * (p2 - p1) + 3 * t**2 * (p3 - p2)
    return 6 * (1 - t) * (p2 - 2 * p1 + p0) + 6 * t * (p3 - 2 * p2 + p1)


def curve_geometry(spec: CurveSpec):
    """Dense arc-length samples, signed curvature per sample, total length."""
    c = spec.control
    if spec.kind == "straight":
        p0, p1 = np.asarray(c, dtype=float)
        length = float(np.hypot(*(p1 - p0)))
        n = max(int(math.ceil(length / DENSE_STEP)), 1)
        t = np.linspace(0.0, 1.0, n + 1)[:, None]
        pts = p0 + t * (p1 - p0)
        return pts, np.zeros(len(pts)), length
    if spec.kind == "arc":
        cx, cy, r, a0, sweep = (float(v) for v in c)
        length = abs(math.radians(sweep)) * r
        n = max(int(math.ceil(length / DENSE_STEP)), 1)
        phi = np.radians(a0) + np.linspace(0.0, math.radians(sweep), n + 1)
        pts = np.stack([cx + r * np.cos(phi), cy + r * np.sin(phi)], axis=1)
        k = math.copysign(1.0 / r, sweep)
        return pts, np.full(len(pts), k), length
    ctrl = np.asarray(c, dtype=float)
    t = np.linspace(0.0, 1.0, 20001)
    raw = _bezier(ctrl, t)
    d1 = _bezier(ctrl, t, 1)
    d2 = _bezier(ctrl, t, 2)
    kraw = (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) / np.hypot(d1[:, 0], d1[:, 1]) ** 3
    seg = np.hypot(*np.diff(raw, axis=0).T)
    s_raw = np.concatenate([[0.0], np.cumsum(seg)])
    pts = _resample(raw, DENSE_STEP)
    seg2 = np.hypot(*np.diff(pts, axis=0).T)
    s = np.concatenate([[0.0], np.cumsum(seg2)])
    k = np.interp(s * (s_raw[-1] / s[-1]), s_raw, kraw)
    return pts, k, float(s_raw[-1])


def windowed_angle_max(samples: np.ndarray, curvature: np.ndarray, window: float) -> float:
    """Largest tangent (= normal) rotation over a centred arc-length window, degrees."""
    seg = np.hypot(*np.diff(samples, axis=0).T)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    theta = np.concatenate([[0.0], np.cumsum(0.5 * (curvature[1:] + curvature[:-1]) * seg)])
    lo = np.clip(s - window / 2, 0, s[-1])
    hi = np.clip(s + window / 2, 0, s[-1])
    dth = np.interp(hi, s, theta) - np.interp(lo, s, theta)
    return float(np.degrees(np.max(np.abs(dth))))


def _ground_truth(spec: CurveSpec, window: float = 10.0) -> GroundTruth:
    pts, k, length = curve_geometry(spec)
    frac = np.linspace(0.0, 1.0, len(pts))
    widths = spec.width[0] + (spec.width[1] - spec.width[0]) * frac
    return GroundTruth(
        length=length,
        mean_width=0.5 * (spec.width[0] + spec.width[1]),
        mean_abs_curvature=float(np.mean(np.abs(k))),
        angle_max=windowed_angle_max(pts, k, window),
        endpoints=(tuple(map(float, pts[0])), tuple(map(float, pts[-1]))),
        samples=pts,
        curvature=k,
        widths=widths,
    )


# --------------------------------------------------------------------------
# Rendering


def _profile(d: np.ndarray, w: np.ndarray, kind: str, amplitude: float, edge_sigma: float):
    if kind == "gaussian":
        sig = 0.5 * w
        return amplitude * np.exp(-0.5 * (d / sig) ** 2)
    h = 0.5 * w
    return amplitude * 0.5 * (1.0 + erf((h - d) / (math.sqrt(2.0) * edge_sigma)))


def _grid(shape, bbox):
    h, w = shape
    x0, y0, x1, y1 = bbox
    x0, y0 = max(int(math.floor(x0)), 0), max(int(math.floor(y0)), 0)
    x1, y1 = min(int(math.ceil(x1)), w - 1), min(int(math.ceil(y1)), h - 1)
    if x1 < x0 or y1 < y0:
        return None
    ys, xs = np.mgrid[y0 : y1 + 1, x0 : x1 + 1]
    return xs.ravel(), ys.ravel()


def _ribbon(shape, samples, widths, kind, amplitude, edge_sigma, reach):
    """Rasterize a ribbon around dense samples.

    Returns ``(xs, ys, intensity, inside)`` for pixels of the bounding box
    where ``inside`` marks pixels within half the local width whose square
    still reaches a flat end, so the pixel holding each end point is kept.
    """
    lo = samples.min(axis=0) - reach
    hi = samples.max(axis=0) + reach
    g = _grid(shape, (lo[0], lo[1], hi[0], hi[1]))
    if g is None:
        return None
    xs, ys = g
    pix = np.stack([xs, ys], axis=1).astype(np.float64)
    d, j = cKDTree(samples).query(pix, distance_upper_bound=reach)
    near = np.isfinite(d)
    xs, ys, pix, d, j = xs[near], ys[near], pix[near], d[near], j[near]
    w = widths[j]
    val = _profile(d, w, kind, amplitude, edge_sigma)
    inside = d <= 0.5 * w
    for end, nb in ((0, 1), (len(samples) - 1, len(samples) - 2)):
        out_dir = samples[end] - samples[nb]
        out_dir /= np.hypot(*out_dir)
        at_end = j == end
        proj = (pix[at_end] - samples[end]) @ out_dir
        reach_px = 0.5 * (abs(out_dir[0]) + abs(out_dir[1]))
        sel = np.flatnonzero(at_end)
        inside[sel[proj > reach_px + 1e-9]] = False
    return xs, ys, val, inside


def _check_canvas(points: np.ndarray, canvas, margin: float):
    w, h = canvas
    if (points[:, 0].min() < margin or points[:, 1].min() < margin
            or points[:, 0].max() > w - 1 - margin or points[:, 1].max() > h - 1 - margin):
        raise PhantomError("curve exits canvas (or violates the border margin)")


def _junction_samples(spec: CurveSpec, gt: GroundTruth) -> np.ndarray:
    j = spec.junction
    pts = gt.samples
    if j.end == "start":
        p, tan = pts[0], pts[0] - pts[min(20, len(pts) - 1)]
    else:
        p, tan = pts[-1], pts[-1] - pts[max(len(pts) - 21, 0)]
    tan = tan / np.hypot(*tan)
    a = math.radians(j.angle_deg)
    axis = np.array([tan[0] * math.cos(a) - tan[1] * math.sin(a),
                     tan[0] * math.sin(a) + tan[1] * math.cos(a)])
    centre = p + j.shift * tan + j.offset * axis
    n = max(int(math.ceil(j.length / DENSE_STEP)), 1)
    t = np.linspace(-0.5 * j.length, 0.5 * j.length, n + 1)[:, None]
    return centre + t * axis


def render_curve(
    spec: CurveSpec,
    canvas: tuple[int, int] = (256, 256),
    noise_sigma: float = 0.0,
    seed: int | None = 0,
    margin: float = 8.0,
    window: float = 10.0,
):
    """Render one curve. Returns ``(ScalarImage, mask, GroundTruth)``.

    ``canvas`` is ``(width, height)``.
    """
    gt = _ground_truth(spec, window)
    _check_canvas(gt.samples, canvas, margin)
    shape = (canvas[1], canvas[0])
    img = np.zeros(shape)
    mask = np.zeros(shape, dtype=bool)
    reach = 4.0 * max(spec.width) + 4.0
    r = _ribbon(shape, gt.samples, gt.widths, spec.profile, spec.amplitude, spec.edge_sigma, reach)
    xs, ys, val, inside = r
    img[ys, xs] = np.maximum(img[ys, xs], val)
    mask[ys[inside], xs[inside]] = True
    if spec.junction is not None:
        _add_bar(img, _junction_samples(spec, gt), spec.junction, spec.profile, spec.edge_sigma)
    img = _add_noise(img, noise_sigma, seed)
    return ScalarImage(img), mask, gt


def _add_bar(img, samples, j: Junction, profile, edge_sigma):
    widths = np.full(len(samples), j.width)
    r = _ribbon(img.shape, samples, widths, profile, j.amplitude, edge_sigma, 4.0 * j.width + 4.0)
    if r is not None:
        xs, ys, val, _ = r
        img[ys, xs] = np.maximum(img[ys, xs], val)


def _add_noise(img: np.ndarray, noise_sigma: float, seed) -> np.ndarray:
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        img = img + rng.normal(0.0, noise_sigma, img.shape)
    return np.clip(img, 0.0, 1.0)


# --------------------------------------------------------------------------
# Sperm phantoms


@dataclass(frozen=True)
class HeadSpec:
    center: tuple[float, float]
    a: float  # semi-major, px
    b: float  # semi-minor, px
    angle_deg: float  # direction from the head centre towards the acrosome
    acrosome_fraction: float = 0.4  # fraction of the major axis, anterior side
    vacuoles: tuple = ()  # ((u, v, radius), ...) in head axes, px
    acrosome_intensity: float = 0.7
    nucleus_intensity: float = 0.85
    vacuole_intensity: float = 0.35


@dataclass(frozen=True)
class MidpieceSpec:
    length: float
    width: float
    angle_deg: float  # direction from head towards tail
    amplitude: float = 0.75


@dataclass
class PhantomTruth:
    head_length: float
    head_width: float
    ellipticity: float
    head_angle: float
    midpiece_length: float
    midpiece_width: float
    midpiece_angle: float
    head_midpiece_angle: float
    vacuole_count: int
    acrosome_px: int
    nucleus_px: int
    vacuole_px: int
    tail: GroundTruth
    instance: int = 1

    def to_dict(self, include_samples: bool = False) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "tail"}
        d["tail"] = self.tail.to_dict(include_samples)
        return d


def midpiece_end(head: HeadSpec, mid: MidpieceSpec):
    """Posterior head vertex, midpiece end point, unit midpiece direction."""
    th = math.radians(head.angle_deg)
    u = np.array([math.cos(th), math.sin(th)])
    p0 = np.asarray(head.center, float) - head.a * u
    tm = math.radians(mid.angle_deg)
    dm = np.array([math.cos(tm), math.sin(tm)])
    return p0, p0 + mid.length * dm, dm


def _acute(a: float, b: float) -> float:
    d = abs(a - b) % 180.0
    return min(d, 180.0 - d)


def render_sperm_phantom(
    head: HeadSpec,
    midpiece: MidpieceSpec,
    tail: CurveSpec,
    canvas: tuple[int, int] = (1280, 1024),
    noise_sigma: float = 0.0,
    seed: int | None = 0,
    instance: int = 1,
    margin: float = 8.0,
    window: float = 10.0,
    base: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None,
):
    """Composite phantom image, labelled mask and per-part truth.

    The tail curve must start at the midpiece end (see :func:`midpiece_end`).
    ``base`` lets several phantoms share one canvas: pass the noise-free
    image and part/instance arrays from a previous call.
    """
    shape = (canvas[1], canvas[0])
    if base is None:
        img = np.zeros(shape)
        part = np.zeros(shape, dtype=np.int64)
        inst = np.zeros(shape, dtype=np.int64)
    else:
        img, part, inst = (np.array(a, copy=True) for a in base)
    occupied = inst != 0

    p0, p1, dm = midpiece_end(head, midpiece)
    gt = _ground_truth(tail, window)
    if np.hypot(*(gt.samples[0] - p1)) > 1e-6:
        raise PhantomError("tail must start at the midpiece end")
    _check_canvas(gt.samples, canvas, margin)

    # head
    th = math.radians(head.angle_deg)
    u = np.array([math.cos(th), math.sin(th)])
    v = np.array([-u[1], u[0]])
    c = np.asarray(head.center, float)
    hb = _grid(shape, (c[0] - head.a - 4, c[1] - head.a - 4, c[0] + head.a + 4, c[1] + head.a + 4))
    hx, hy = hb
    rel = np.stack([hx - c[0], hy - c[1]], axis=1)
    pu, pv = rel @ u, rel @ v
    rho = np.sqrt((pu / head.a) ** 2 + (pv / head.b) ** 2)
    in_head = rho <= 1.0
    # signed distance approximation to the ellipse boundary for soft edges
    sd = (1.0 - rho) * min(head.a, head.b)
    edge = 0.5 * (1 + erf(sd / (math.sqrt(2) * 0.7)))
    acro = pu >= head.a * (1 - 2 * head.acrosome_fraction)
    val = np.where(acro, head.acrosome_intensity, head.nucleus_intensity) * edge
    in_vac = np.zeros_like(in_head)
    for (vu, vv, vr) in head.vacuoles:
        dv = np.hypot(pu - vu, pv - vv)
        in_vac |= dv <= vr
        val = np.where(dv <= vr + 1.0, np.minimum(val, head.vacuole_intensity + (val - head.vacuole_intensity) * np.clip(dv - vr + 0.5, 0, 1)), val)
    head_lab = np.where(in_vac, PartLabel.VACUOLE, np.where(acro, PartLabel.ACROSOME, PartLabel.NUCLEUS))
    if np.any(occupied[hy[in_head], hx[in_head]]):
        raise PhantomError("part collision: head overlaps another instance")
    img[hy, hx] = np.maximum(img[hy, hx], val)
    part[hy[in_head], hx[in_head]] = head_lab[in_head]
    inst[hy[in_head], hx[in_head]] = instance

    # midpiece: gaussian cross-section, flat ends, rectangular mask
    mid_samples = p0 + np.linspace(0, midpiece.length, int(math.ceil(midpiece.length / DENSE_STEP)) + 1)[:, None] * dm
    r = _ribbon(shape, mid_samples, np.full(len(mid_samples), midpiece.width), "gaussian",
                midpiece.amplitude, 0.5, 2.0 * midpiece.width + 4)
    mx, my, mval, mins = r
    img[my, mx] = np.maximum(img[my, mx], mval)
    free = mins & (part[my, mx] == 0)
    if np.any(occupied[my[free], mx[free]]):
        raise PhantomError("part collision: midpiece overlaps another instance")
    part[my[free], mx[free]] = PartLabel.MIDPIECE
    inst[my[free], mx[free]] = instance

    # tail
    r = _ribbon(shape, gt.samples, gt.widths, tail.profile, tail.amplitude, tail.edge_sigma,
                4.0 * max(tail.width) + 4.0)
    tx, ty, tval, tins = r
    img[ty, tx] = np.maximum(img[ty, tx], tval)
    free = tins & (part[ty, tx] == 0)
    if np.any(occupied[ty[free], tx[free]]):
        raise PhantomError("part collision: tail overlaps another instance")
    part[ty[free], tx[free]] = PartLabel.TAIL
    inst[ty[free], tx[free]] = instance
    if tail.junction is not None:
        _add_bar(img, _junction_samples(tail, gt), tail.junction, tail.profile, tail.edge_sigma)

    mine = inst == instance
    vac_mask = mine & (part == PartLabel.VACUOLE)
    truth = PhantomTruth(
        head_length=2 * head.a,
        head_width=2 * head.b,
        ellipticity=head.a / head.b,
        head_angle=head.angle_deg % 180.0,
        midpiece_length=midpiece.length,
        midpiece_width=midpiece.width,
        midpiece_angle=midpiece.angle_deg % 180.0,
        head_midpiece_angle=_acute(head.angle_deg, midpiece.angle_deg),
        vacuole_count=len(connected_components(vac_mask)),
        acrosome_px=int(np.sum(mine & (part == PartLabel.ACROSOME))),
        nucleus_px=int(np.sum(mine & (part == PartLabel.NUCLEUS))),
        vacuole_px=int(np.sum(vac_mask)),
        tail=gt,
        instance=instance,
    )
    return img, part, inst, truth


def finish(img: np.ndarray, part: np.ndarray, inst: np.ndarray, noise_sigma: float, seed):
    """Add noise and wrap raw phantom arrays as package types."""
    return ScalarImage(_add_noise(img, noise_sigma, seed)), InstancePartMask(part, inst)


def random_phantom_specs(rng: np.random.Generator, canvas=(1280, 1024), junction_prob: float = 0.5,
                         kinds=("arc", "spline")):
    """Draw one plausible sperm phantom (head, midpiece, tail) that fits the canvas."""
    w, h = canvas
    for _ in range(200):
        a = rng.uniform(22, 30)
        b = a / rng.uniform(1.5, 2.1)
        head_angle = rng.uniform(0, 360)
        hm = rng.uniform(0, 25) * rng.choice([-1, 1])
        mid_angle = head_angle + 180 + hm
        mid_len = rng.uniform(30, 45)
        mid_w = rng.uniform(6, 8)
        w0 = rng.uniform(4.5, 6.0)
        w1 = rng.uniform(3.0, 4.0)
        length = rng.uniform(200, 450)
        centre = (rng.uniform(0.2 * w, 0.8 * w), rng.uniform(0.2 * h, 0.8 * h))
        vac = ()
        nv = rng.integers(0, 3)
        if nv >= 1:
            vac += ((-0.25 * a, 0.2 * b, rng.uniform(2.5, 4.0)),)
        if nv == 2:
            vac += ((0.1 * a, -0.3 * b, rng.uniform(2.0, 3.5)),)
        head = HeadSpec(centre, a, b, head_angle, vacuoles=vac)
        mid = MidpieceSpec(mid_len, mid_w, mid_angle)
        _, p1, dm = midpiece_end(head, mid)
        kind = rng.choice(list(kinds))
        junction = None
        if rng.uniform() < junction_prob:
            junction = Junction("end", float(rng.uniform(85, 95)), float(rng.uniform(30, 50)),
                                float(rng.uniform(8, 10)), float(rng.uniform(0.85, 0.95)))
        tail = make_tail(kind, p1, dm, length, (w0, w1), rng, junction)
        try:
            gt = _ground_truth(tail)
            _check_canvas(gt.samples, canvas, 40.0)
        except PhantomError:
            continue
        # relative curvature error is meaningless on an almost straight tail
        if gt.mean_abs_curvature < MIN_TAIL_CURVATURE:
            continue
        # keep the tail clear of the head
        d = np.hypot(*(gt.samples[200:] - np.asarray(centre)).T) if len(gt.samples) > 200 else np.array([1e9])
        if d.min() < a + 20:
            continue
        return head, mid, tail
    raise PhantomError("could not place a phantom on the canvas")


def make_tail(kind, start, direction, length, widths, rng, junction=None) -> CurveSpec:
    start = np.asarray(start, float)
    direction = np.asarray(direction, float) / np.hypot(*direction)
    normal = np.array([-direction[1], direction[0]])
    if kind == "straight":
        ctrl = (tuple(start), tuple(start + length * direction))
    elif kind == "arc":
        sign = rng.choice([-1.0, 1.0])
        r = max(rng.uniform(90, 220), length / 3.0)
        centre = start + sign * r * normal
        a0 = math.degrees(math.atan2(start[1] - centre[1], start[0] - centre[0]))
        sweep = sign * math.degrees(length / r)
        ctrl = (float(centre[0]), float(centre[1]), float(r), float(a0), float(sweep))
    else:
        b1 = rng.uniform(0.15, 0.35) * length * rng.choice([-1.0, 1.0])
        b2 = rng.uniform(0.15, 0.35) * length * rng.choice([-1.0, 1.0])
        p1 = start + length / 3 * direction
        p2 = start + 2 * length / 3 * direction + b1 * normal
        p3 = start + 0.92 * length * direction + b2 * normal
        ctrl = (tuple(start), tuple(p1), tuple(p2), tuple(p3))
    return CurveSpec(kind, ctrl, tuple(float(w) for w in widths), "gaussian", 0.6, junction=junction)


@dataclass
class Phantom:
    image: ScalarImage
    mask: InstancePartMask
    truth: list[PhantomTruth]


def generate_phantom(seed: int, canvas=(1280, 1024), noise_sigma: float = 0.02,
                     junction_prob: float = 0.5, kinds=("arc", "spline")) -> Phantom:
    """One single-sperm phantom, reproducible from ``seed``."""
    rng = np.random.default_rng(seed)
    head, mid, tail = random_phantom_specs(rng, canvas, junction_prob, kinds)
    img, part, inst, truth = render_sperm_phantom(head, mid, tail, canvas)
    image, mask = finish(img, part, inst, noise_sigma, rng.integers(0, 2**32))
    return Phantom(image, mask, [truth])


def generate_batch(seed: int, count: int, **kwargs) -> list[Phantom]:
    seeds = np.random.SeedSequence(seed).generate_state(count)
    return [generate_phantom(int(s), **kwargs) for s in seeds]


def write_phantom(out_dir, stem: str, phantom: Phantom) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "image": out / f"{stem}.png",
        "part": out / f"{stem}_part.png",
        "instance": out / f"{stem}_instance.png",
        "truth": out / f"{stem}_truth.json",
    }
    save_image(paths["image"], phantom.image, bits=16)
    save_mask(paths["part"], paths["instance"], phantom.mask)
    paths["truth"].write_text(json.dumps([t.to_dict() for t in phantom.truth], indent=2))
    return paths
