"""Per-sperm morphology parameters: tail measures from centerlines, head
ellipse, midpiece rectangle, part areas and inter-axis angles."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .config import MeasurementConfig
from .derivatives import DerivativeFields, derivative_fields
from .endpoint import (
    NoValidCenterPoints,
    UndefinedAngle,
    clip_to_mask,
    extend_line,
    filter_endpoints,
    reconstruct_endpoint,
)
from .geometry import FitDegenerate, axis_angle, fit_ellipse, fit_rectangle
from .raster import (
    InstancePartMask,
    PartLabel,
    RasterError,
    ScalarImage,
    check_scale,
    connected_components,
)
from .steger import (
    Centerline,
    detect_candidates,
    edge_pairs,
    gate_mask,
    link_centerlines,
    with_widths,
)

FLAGS = ("missing_part", "fragmented_tail", "nonterminating_walk", "fit_degenerate",
         "midpiece_angle_fallback")


# --------------------------------------------------------------------------
# Tail measures


def tail_length(line: Centerline, um_per_px: float = 1.0) -> float:
    if len(line) < 2:
        raise ValueError("tail length needs at least 2 points")
    check_scale(um_per_px)
    p = line.positions()
    return float(np.hypot(*np.diff(p, axis=0).T).sum()) * um_per_px


def tail_width(line: Centerline) -> float:
    """Mean width in px over points that carry a width."""
    w = [p.width for p in line.points if p.width is not None]
    if not w:
        raise ValueError("no point has a valid edge pair")
    return float(np.mean(w))


@dataclass(frozen=True)
class CurvatureProfile:
    curvature: np.ndarray  # rad/px, signed, per point
    angle_max: float  # degrees
    arc_length: np.ndarray

    @property
    def mean_abs(self) -> float:
        return float(np.mean(np.abs(self.curvature)))


def tail_curvature(line: Centerline, window: float = 10.0) -> CurvatureProfile:
    """Windowed rate of change of the (undirected) normal orientation.

    For each point, the unwrapped normal angle of all points within
    ``s +- window/2`` (clipped to the line) is regressed on arc length; the
    slope is the curvature. ``angle_max`` is the largest orientation change
    this implies across one window, in degrees. Regressing over the window
    instead of differencing its two end samples keeps per-point normal noise
    from dominating on gently curved lines.
    """
    if len(line) < 3:
        raise ValueError("curvature needs at least 3 points")
    if not window > 0:
        raise ValueError("window must be positive")
    p = line.positions()
    seg = np.hypot(*np.diff(p, axis=0).T)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = s[-1]
    if total <= 0:
        raise ValueError("degenerate centerline: all points coincide")
    n = line.normals()
    theta = 0.5 * np.unwrap(2.0 * np.arctan2(n[:, 1], n[:, 0]))
    lo = np.searchsorted(s, s - 0.5 * window, side="left")
    hi = np.searchsorted(s, s + 0.5 * window, side="right")
    # prefix sums of centred values for windowed least squares
    sc = s - s.mean()
    tc = theta - theta.mean()

    def csum(a):
        return np.concatenate([[0.0], np.cumsum(a)])

    S0, S1, T1 = csum(np.ones_like(sc)), csum(sc), csum(tc)
    S2, ST = csum(sc * sc), csum(sc * tc)
    cnt = S0[hi] - S0[lo]
    m_s = (S1[hi] - S1[lo]) / cnt
    m_t = (T1[hi] - T1[lo]) / cnt
    var = (S2[hi] - S2[lo]) - cnt * m_s * m_s
    cov = (ST[hi] - ST[lo]) - cnt * m_s * m_t
    ok = (cnt >= 2) & (var > 1e-12 * np.maximum(1.0, cnt))
    kappa = np.where(ok, cov / np.where(ok, var, 1.0), 0.0)
    span = s[hi - 1] - s[lo]
    angle = np.abs(kappa) * np.minimum(span, window)
    return CurvatureProfile(kappa, float(np.degrees(angle.max())), s)


# --------------------------------------------------------------------------
# Areas and angles


@dataclass(frozen=True)
class PartAreas:
    acrosome: float
    nucleus: float
    midpiece: float
    tail: float
    vacuole_count: int
    vacuole: float | None  # None when no vacuole is present


def part_areas(mask: InstancePartMask, instance: int, um_per_px: float = 1.0) -> PartAreas:
    check_scale(um_per_px)
    if not mask.has_instance(instance):
        raise RasterError(f"unknown instance {instance}")
    mine = mask.instance == instance
    a2 = um_per_px * um_per_px
    count = {lab: int(np.sum(mine & (mask.part == lab))) for lab in PartLabel if lab}
    vac = mine & (mask.part == PartLabel.VACUOLE)
    nvac = len(connected_components(vac))
    return PartAreas(
        acrosome=count[PartLabel.ACROSOME] * a2,
        nucleus=count[PartLabel.NUCLEUS] * a2,
        midpiece=count[PartLabel.MIDPIECE] * a2,
        tail=count[PartLabel.TAIL] * a2,
        vacuole_count=nvac,
        vacuole=count[PartLabel.VACUOLE] * a2 if nvac else None,
    )


def head_midpiece_angle(head_major_angle: float, midpiece_major_angle: float) -> float:
    return axis_angle(head_major_angle, midpiece_major_angle)


# --------------------------------------------------------------------------
# Full pipeline


@dataclass
class MorphReport:
    instance: int
    head_length: float | None = None
    head_width: float | None = None
    ellipticity: float | None = None
    acrosome_area: float | None = None
    nucleus_area: float | None = None
    vacuole_count: int = 0
    vacuole_area: float | None = None
    head_midpiece_angle: float | None = None
    midpiece_length: float | None = None
    midpiece_width: float | None = None
    midpiece_angle_max: float | None = None
    tail_length: float | None = None
    tail_width: float | None = None
    tail_angle_max: float | None = None
    # beyond the tabulated columns
    tail_curvature: float | None = None  # mean |curvature|, rad per um
    head_angle: float | None = None
    midpiece_angle: float | None = None
    flags: set[str] = field(default_factory=set)
    tail_line: Centerline | None = field(default=None, repr=False, compare=False)
    midpiece_line: Centerline | None = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("tail_line")
        d.pop("midpiece_line")
        d["flags"] = sorted(self.flags)
        return d


@dataclass(frozen=True)
class TailResult:
    line: Centerline
    raw: Centerline  # linked chain before clipping and filtering
    profile: CurvatureProfile
    nonterminating: bool
    fragmented: bool


def _crop_box(mine: np.ndarray, margin: int):
    ys, xs = np.nonzero(mine)
    h, w = mine.shape
    return (max(int(ys.min()) - margin, 0), min(int(ys.max()) + margin + 1, h),
            max(int(xs.min()) - margin, 0), min(int(xs.max()) + margin + 1, w))


def _shift(line: Centerline, dx: float, dy: float) -> Centerline:
    from dataclasses import replace

    pts = [replace(p, position=(p.position[0] + dx, p.position[1] + dy)) for p in line.points]
    return Centerline(pts, line.instance, line.closed, list(line.warnings))


def _points_inside(line: Centerline, mask: np.ndarray) -> int:
    p = np.rint(line.positions()).astype(int)
    h, w = mask.shape
    ok = (p[:, 0] >= 0) & (p[:, 0] < w) & (p[:, 1] >= 0) & (p[:, 1] < h)
    return int(mask[p[ok, 1], p[ok, 0]].sum())


def _orient(line: Centerline, anchor) -> Centerline:
    """First point nearest ``anchor``."""
    if anchor is None:
        return line
    p = line.positions()
    a = np.asarray(anchor, dtype=np.float64)
    return line.reversed() if np.hypot(*(p[-1] - a)) < np.hypot(*(p[0] - a)) else line


def _widths(line: Centerline, fields: DerivativeFields, cfg: MeasurementConfig) -> Centerline:
    pairs = edge_pairs(fields, line.positions(), line.normals(), cfg.max_halfwidth,
                       threshold=cfg.edge_threshold, width_model=cfg.width_model)
    return with_widths(line, pairs)


def trace_centerline(
    fields: DerivativeFields,
    part_mask: np.ndarray,
    cfg: MeasurementConfig,
    anchor=None,
    instance: int = 0,
    reconstruct: bool = True,
) -> TailResult | None:
    """Centerline of one curvilinear part in field coordinates.

    With ``cfg.steger_baseline`` the detector runs over the whole field
    (or the dilated mask when ``cfg.baseline_gated``) and the chain covering
    most of ``part_mask`` is returned as is.
    Otherwise candidates are gated by the dilated mask, the longest chain
    is clipped to the mask, filtered at both ends and (if ``reconstruct``)
    extended by the gradient walk.
    """
    part_mask = np.asarray(part_mask, dtype=bool)
    border = int(math.ceil(3 * cfg.sigma))
    frag = len(connected_components(part_mask)) > 1
    gate = gate_mask(part_mask, cfg.mask_margin)
    if cfg.steger_baseline:
        region = gate if cfg.baseline_gated else None
        cands = detect_candidates(fields, region, cfg.strength_threshold, border=border)
        lines = link_centerlines(cands, None, cfg.r_link, cfg.theta_max, cfg.gamma,
                                 cfg.min_points, instance)
        lines = [ln for ln in lines if _points_inside(ln, part_mask) > 0]
        if not lines:
            return None
        line = _orient(max(lines, key=lambda ln: _points_inside(ln, part_mask)), anchor)
        line = _widths(line, fields, cfg)
        return TailResult(line, line, tail_curvature(line, cfg.curvature_window), False, frag)

    cands = detect_candidates(fields, gate, cfg.strength_threshold, border=border)
    lines = link_centerlines(cands, None, cfg.r_link, cfg.theta_max, cfg.gamma,
                             cfg.min_points, instance)
    if not lines:
        return None
    # a second chain lying mostly on the part means the ridge itself broke
    frag = frag or any(_points_inside(ln, part_mask) >= max(cfg.min_points, len(ln) // 2)
                       for ln in lines[1:])
    raw = _orient(lines[0], anchor)
    line = clip_to_mask(raw, part_mask)
    if len(line) < cfg.min_points:
        return None
    line, _ = filter_endpoints(line, fields, cfg.cos_threshold, min(cfg.min_points, len(line)),
                               cfg.max_halfwidth, cfg.edge_threshold, cfg.width_model)
    # walk points sit on the pixel grid with normals from a smoothed gradient;
    # good for extent and width, too rough for orientation derivatives
    profile = tail_curvature(line, cfg.curvature_window)
    nonterm = False
    if reconstruct:
        walks = []
        for end in ("start", "end"):
            try:
                walks.append(reconstruct_endpoint(line, end, fields, part_mask, cfg.w1, cfg.w2,
                                                  cfg.momentum_alpha, cfg.max_steps))
            except UndefinedAngle:
                walks.append(None)
        line = extend_line(line, *walks)
        nonterm = any(w is not None and w.nonterminating for w in walks)
    line = _widths(line, fields, cfg)
    return TailResult(line, raw, profile, nonterm, frag)


def curvilinear_fields(values: np.ndarray, region: np.ndarray, cfg: MeasurementConfig):
    """Derivative fields over a crop around ``region`` (midpiece plus tail).

    The crop leaves room for the kernel, the edge search and the gate, so
    results match a full-image computation away from the image border.
    Returns ``(fields, (y0, y1, x0, x1))``.
    """
    margin = int(math.ceil(3 * cfg.sigma)) + int(math.ceil(cfg.max_halfwidth)) + cfg.mask_margin + 4
    box = _crop_box(region, margin)
    y0, y1, x0, x1 = box
    crop = values[y0:y1, x0:x1]
    if cfg.dark_lines:
        crop = 1.0 - crop
    return derivative_fields(crop, cfg.gaussian), box


def measure_sperm(
    img: ScalarImage | np.ndarray,
    mask: InstancePartMask,
    instance: int,
    cfg: MeasurementConfig | None = None,
) -> MorphReport:
    """All morphology parameters for one instance.

    Missing or unusable parts leave their fields ``None`` and add a flag;
    only an absent instance or mismatched dimensions raise.
    """
    cfg = cfg or MeasurementConfig()
    values = img.values if isinstance(img, ScalarImage) else np.asarray(img, dtype=np.float64)
    if values.shape != mask.shape:
        raise RasterError(f"image {values.shape} and mask {mask.shape} dimensions differ")
    if not mask.has_instance(instance):
        raise RasterError(f"unknown instance {instance}")
    s = cfg.microns_per_pixel
    rep = MorphReport(instance)
    mine = mask.instance == instance
    part = np.where(mine, mask.part, 0)

    areas = part_areas(mask, instance, s)
    rep.acrosome_area = areas.acrosome
    rep.nucleus_area = areas.nucleus
    rep.vacuole_count = areas.vacuole_count
    rep.vacuole_area = areas.vacuole

    head = (part == PartLabel.ACROSOME) | (part == PartLabel.NUCLEUS) | (part == PartLabel.VACUOLE)
    head_fit = None
    if not head.any():
        rep.flags.add("missing_part")
    else:
        try:
            head_fit = fit_ellipse(head)
            rep.head_length = head_fit.length(s)
            rep.head_width = head_fit.width(s)
            rep.ellipticity = head_fit.ellipticity
            rep.head_angle = head_fit.angle
        except FitDegenerate:
            rep.flags.add("fit_degenerate")

    mid = part == PartLabel.MIDPIECE
    mid_fit = None
    if not mid.any():
        rep.flags.add("missing_part")
    else:
        mid_fit = fit_rectangle(mid)
        if mid_fit.degenerate:
            rep.flags.add("fit_degenerate")
            mid_fit = None
        else:
            rep.midpiece_length = mid_fit.length(s)
            rep.midpiece_width = mid_fit.width(s)
            rep.midpiece_angle = mid_fit.angle
    if head_fit is not None and mid_fit is not None:
        rep.head_midpiece_angle = head_midpiece_angle(head_fit.angle, mid_fit.angle)

    tail = part == PartLabel.TAIL
    curvilinear = tail | mid
    if not tail.any():
        rep.flags.add("missing_part")
    if not curvilinear.any():
        return rep

    try:
        fields, (y0, y1, x0, x1) = curvilinear_fields(values, curvilinear, cfg)
    except ValueError:
        rep.flags.add("fit_degenerate")
        return rep
    anchor = None
    if mid.any():
        anchor = np.argwhere(mid[y0:y1, x0:x1]).mean(axis=0)[::-1]
    elif head.any():
        anchor = np.argwhere(head[y0:y1, x0:x1]).mean(axis=0)[::-1]

    if tail.any():
        try:
            res = trace_centerline(fields, tail[y0:y1, x0:x1], cfg, anchor, instance)
        except NoValidCenterPoints:
            res = None
        if res is None:
            rep.flags.add("fit_degenerate")
        else:
            line = res.line
            rep.tail_line = _shift(line, x0, y0)
            rep.tail_length = tail_length(line, s)
            try:
                rep.tail_width = tail_width(line) * s
            except ValueError:
                rep.flags.add("fit_degenerate")
            rep.tail_angle_max = res.profile.angle_max
            rep.tail_curvature = res.profile.mean_abs / s
            if res.fragmented:
                rep.flags.add("fragmented_tail")
            if res.nonterminating:
                rep.flags.add("nonterminating_walk")

    if mid.any():
        res = None
        hanchor = None
        if head.any():
            hanchor = np.argwhere(head[y0:y1, x0:x1]).mean(axis=0)[::-1]
        try:
            res = trace_centerline(fields, mid[y0:y1, x0:x1], cfg.replace(steger_baseline=False),
                                   hanchor, instance, reconstruct=False)
        except (NoValidCenterPoints, ValueError):
            res = None
        if res is not None:
            rep.midpiece_line = _shift(res.line, x0, y0)
            rep.midpiece_angle_max = res.profile.angle_max
        elif rep.head_midpiece_angle is not None:
            rep.midpiece_angle_max = rep.head_midpiece_angle
            rep.flags.add("midpiece_angle_fallback")
    return rep
