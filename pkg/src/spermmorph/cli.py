"""Command line driver: measure, centerline, eval-parsing, synth, overlay."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np
from PIL import Image

from . import __version__
from .batch import measure_image, parallel_map, thread_count
from .config import ConfigError, MeasurementConfig, config_text, load_config
from .endpoint import reconstruct_endpoint
from .metrics import MetricReport, evaluate
from .morphometry import _shift, curvilinear_fields, trace_centerline
from .overlay import centerline_svg
from .raster import (
    InstancePartMask,
    PartLabel,
    RasterError,
    label_table,
    load_image,
    load_mask,
    save_image,
    save_mask,
)
from .report import csv_text, json_text
from .steger import Centerline, CenterPoint, PointSource
from .synth import CurveSpec, Junction, generate_batch, render_curve, write_phantom

log = logging.getLogger("spermmorph")

EXIT_OK = 0
EXIT_ERROR = 2
MASK_SUFFIXES = ("_part", "_instance")


class CliError(Exception):
    pass


# --------------------------------------------------------------------------
# inputs


def mask_paths(image: Path, mask_dir: Path | None = None) -> tuple[Path, Path]:
    base = mask_dir or image.parent
    return base / f"{image.stem}_part.png", base / f"{image.stem}_instance.png"


def collect_images(inputs: list[str]) -> list[Path]:
    """Image files named directly or found in directories, sorted by path."""
    out = []
    for raw in inputs:
        p = Path(raw)
        if p.is_dir():
            out += [q for q in p.glob("*.png") if not q.stem.endswith(MASK_SUFFIXES)]
        elif p.exists():
            out.append(p)
        else:
            raise CliError(f"{p}: no such file or directory")
    return sorted(set(out))


def resolve_config(args) -> MeasurementConfig:
    try:
        cfg = load_config(args.config) if args.config else MeasurementConfig()
        changes = {}
        if args.scale_um_per_px is not None:
            changes["microns_per_pixel"] = args.scale_um_per_px
        if args.steger_baseline:
            changes["steger_baseline"] = True
        if args.dark_lines:
            changes["dark_lines"] = True
        return cfg.replace(**changes) if changes else cfg
    except ConfigError as exc:
        raise CliError(f"config: {exc}") from exc


def load_pair(image: Path, mask_dir: Path | None):
    part, inst = mask_paths(image, mask_dir)
    for p in (part, inst):
        if not p.exists():
            raise CliError(f"{image}: mask file missing: {p}")
    try:
        img = load_image(image)
        mask = load_mask(part, inst)
    except (OSError, RasterError) as exc:
        raise CliError(f"{image}: {exc}") from exc
    if img.shape != mask.shape:
        raise CliError(f"{image}: image {img.shape} and mask {mask.shape} dimensions differ")
    return img, mask


# --------------------------------------------------------------------------
# centerline serialization


def centerline_dict(line: Centerline) -> dict:
    return {
        "instance": line.instance,
        "closed": line.closed,
        "warnings": list(line.warnings),
        "points": [
            {
                "x": p.position[0],
                "y": p.position[1],
                "nx": p.normal[0],
                "ny": p.normal[1],
                "width": p.width,
                "source": p.source.value,
            }
            for p in line.points
        ],
    }


def centerline_from_dict(d: dict) -> Centerline:
    pts = [
        CenterPoint((p["x"], p["y"]), (p["nx"], p["ny"]), width=p.get("width"),
                    source=PointSource(p.get("source", "detected")))
        for p in d["points"]
    ]
    return Centerline(pts, int(d.get("instance", 0)), bool(d.get("closed", False)),
                      list(d.get("warnings", [])))


# --------------------------------------------------------------------------
# subcommands


def cmd_measure(args) -> int:
    cfg = resolve_config(args)
    out = Path(args.out)
    images = collect_images(args.inputs)
    threads = thread_count()
    failed = False

    def one(path: Path):
        try:
            img, mask = load_pair(path, args.mask_dir)
            reps = measure_image(img, mask, cfg, threads=1)
            return path, img, reps, None
        except (CliError, RasterError, ValueError) as exc:
            return path, None, [], str(exc)

    rows = []
    results = parallel_map(one, images, threads)
    out.mkdir(parents=True, exist_ok=True)
    for path, img, reps, err in results:
        if err is not None:
            failed = True
            print(f"error: {err}", file=sys.stderr)
            continue
        if not reps:
            print(f"warning: {path}: no instances in mask", file=sys.stderr)
        log.info("%s: %d instance(s) measured", path, len(reps))
        rows += [(str(path), r) for r in reps]
        if args.overlay and reps:
            lines = [ln for r in reps for ln in (r.tail_line, r.midpiece_line) if ln is not None]
            (out / f"{path.stem}_overlay.svg").write_text(centerline_svg(img, lines))
    (out / "report.csv").write_text(csv_text(rows))
    (out / "report.json").write_text(json_text(rows))
    return EXIT_ERROR if failed else EXIT_OK


def cmd_centerline(args) -> int:
    cfg = resolve_config(args)
    image = Path(args.image)
    if not image.exists():
        raise CliError(f"{image}: no such file")
    img, mask = load_pair(image, args.mask_dir)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ids = [args.instance] if args.instance is not None else mask.instances()
    lines, traces = [], []
    for i in ids:
        if not mask.has_instance(i):
            raise CliError(f"{image}: unknown instance {i}")
        mine = mask.instance == i
        tail = mine & (mask.part == PartLabel.TAIL)
        if not tail.any():
            print(f"warning: {image}: instance {i} has no tail pixels", file=sys.stderr)
            continue
        mid = mine & (mask.part == PartLabel.MIDPIECE)
        f, (y0, y1, x0, x1) = curvilinear_fields(img.values, tail | mid, cfg)
        anchor = np.argwhere(mid[y0:y1, x0:x1]).mean(axis=0)[::-1] if mid.any() else None
        res = trace_centerline(f, tail[y0:y1, x0:x1], cfg, anchor, i)
        if res is None:
            print(f"warning: {image}: instance {i}: no centerline found", file=sys.stderr)
            continue
        lines.append(_shift(res.line, x0, y0))
        log.info("%s: instance %d: %d centerline points", image, i, len(res.line))
        if args.trace_walk and not cfg.steger_baseline:
            core = Centerline([p for p in res.line.points if p.source is PointSource.DETECTED], i)
            for end in ("start", "end"):
                walk = reconstruct_endpoint(core, end, f, tail[y0:y1, x0:x1], cfg.w1, cfg.w2,
                                            cfg.momentum_alpha, cfg.max_steps)
                traces += [_trace_row(i, end, t, x0, y0) for t in walk.trace]
        if args.dump_fields:
            for k in ("rx", "ry", "rxx", "rxy", "ryy"):
                Image.fromarray(getattr(f, k).astype(np.float32), mode="F").save(
                    out / f"{image.stem}_{i}_{k}.tif")
            (out / f"{image.stem}_{i}_fields.json").write_text(json.dumps(
                {"origin_x": x0, "origin_y": y0, "width": x1 - x0, "height": y1 - y0,
                 "sigma": cfg.sigma, "fields": ["rx", "ry", "rxx", "rxy", "ryy"]}, indent=2) + "\n")
    doc = {"image": str(image), "config": asdict(cfg), "centerlines": [centerline_dict(ln) for ln in lines]}
    (out / f"{image.stem}_centerlines.json").write_text(json.dumps(doc, indent=2) + "\n")
    with open(out / f"{image.stem}_centerlines.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(POINT_COLUMNS)
        for ln in lines:
            for k, p in enumerate(ln.points):
                w.writerow([ln.instance, k, repr(p.position[0]), repr(p.position[1]),
                            repr(p.normal[0]), repr(p.normal[1]),
                            "NA" if p.width is None else repr(p.width), p.source.value])
    if args.trace_walk:
        with open(out / f"{image.stem}_walk.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_COLUMNS)
            w.writerows(traces)
    if args.overlay:
        (out / f"{image.stem}_overlay.svg").write_text(centerline_svg(img, lines))
    return EXIT_OK


POINT_COLUMNS = ("instance", "index", "x", "y", "nx", "ny", "width", "source")
TRACE_COLUMNS = ("instance", "end", "step", "cx", "cy", "gx", "gy", "cand0_x", "cand0_y", "score0",
                 "cand1_x", "cand1_y", "score1", "selected", "inside")


def _trace_row(instance: int, end: str, t: dict, x0: int, y0: int) -> list:
    (ax, ay), (bx, by) = t["cand0"], t["cand1"]
    return [instance, end, t["step"], t["cx"] + x0, t["cy"] + y0, repr(t["gx"]), repr(t["gy"]),
            ax + x0, ay + y0, repr(t["score0"]), bx + x0, by + y0, repr(t["score1"]),
            t["selected"], int(t["inside"])]


def _load_confidences(path: Path) -> dict[int, float] | None:
    if not path.exists():
        return None
    return {int(k): float(v) for k, v in json.loads(path.read_text()).items()}


def cmd_eval_parsing(args) -> int:
    pred_dir, gt_dir = Path(args.pred), Path(args.gt)
    for d in (pred_dir, gt_dir):
        if not d.is_dir():
            raise CliError(f"{d}: not a directory")
    stems = sorted(p.name[: -len("_part.png")] for p in gt_dir.glob("*_part.png"))
    if not stems:
        raise CliError(f"{gt_dir}: no *_part.png ground-truth masks")

    def one(stem):
        gt = load_mask(gt_dir / f"{stem}_part.png", gt_dir / f"{stem}_instance.png")
        pp, pi = pred_dir / f"{stem}_part.png", pred_dir / f"{stem}_instance.png"
        for p in (pp, pi):
            if not p.exists():
                raise CliError(f"{stem}: prediction missing: {p}")
        pred = load_mask(pp, pi)
        conf = _load_confidences(pred_dir / f"{stem}_scores.json")
        return stem, evaluate(pred, gt, conf, args.unmatched)

    results = parallel_map(one, stems, thread_count())
    keys = ("miou", "ap_p_50", "ap_p_vol", "pcp_50")
    agg = MetricReport(*(float(np.mean([getattr(r, k) for _, r in results])) for k in keys))
    doc = {"images": {s: r.to_dict() for s, r in results}, "aggregate": agg.to_dict()}
    lines = ["image," + ",".join(keys)]
    lines += [s + "," + ",".join(f"{getattr(r, k):.6f}" for k in keys) for s, r in results]
    lines.append("ALL," + ",".join(f"{getattr(agg, k):.6f}" for k in keys))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.json").write_text(json.dumps(doc, indent=2) + "\n")
        (out / "metrics.csv").write_text("\n".join(lines) + "\n")
    else:
        print(json.dumps(doc, indent=2))
    return EXIT_OK


def _curve_spec(d: dict) -> CurveSpec:
    d = dict(d)
    if d.get("junction") is not None:
        d["junction"] = Junction(**d["junction"])
    for k in ("control", "width"):
        if k in d:
            d[k] = tuple(tuple(v) if isinstance(v, list) else v for v in d[k])
    return CurveSpec(**d)


def cmd_synth(args) -> int:
    spec = {}
    if args.spec:
        try:
            spec = json.loads(Path(args.spec).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"{args.spec}: {exc}") from exc
    out = Path(args.out)
    canvas = tuple(spec.get("canvas", (1280, 1024)))
    noise = float(spec.get("noise_sigma", 0.02))
    if "curve" in spec:
        img, mask, gt = render_curve(_curve_spec(spec["curve"]), canvas, noise, args.seed)
        out.mkdir(parents=True, exist_ok=True)
        save_image(out / "curve.png", img)
        part = np.where(mask, int(PartLabel.TAIL), 0)
        save_mask(out / "curve_part.png", out / "curve_instance.png",
                  InstancePartMask(part, mask.astype(np.int64)))
        (out / "curve_truth.json").write_text(json.dumps(gt.to_dict(), indent=2) + "\n")
        return EXIT_OK
    count = int(args.count if args.count is not None else spec.get("count", 1))
    kw = {k: spec[k] for k in ("junction_prob",) if k in spec}
    if "kinds" in spec:
        kw["kinds"] = tuple(spec["kinds"])
    batch = generate_batch(args.seed, count, canvas=canvas, noise_sigma=noise, **kw)
    for k, ph in enumerate(batch):
        write_phantom(out, f"phantom_{k:03d}", ph)
    return EXIT_OK


def cmd_overlay(args) -> int:
    image = Path(args.image)
    try:
        img = load_image(image)
        doc = json.loads(Path(args.centerlines).read_text())
    except (OSError, RasterError, json.JSONDecodeError) as exc:
        raise CliError(str(exc)) from exc
    lines = [centerline_from_dict(d) for d in doc.get("centerlines", doc if isinstance(doc, list) else [])]
    svg = centerline_svg(img, lines, embed_image=not args.no_image)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(svg)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def _pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value configuration file")
    p.add_argument("--scale-um-per-px", type=float, help="pixel size in micrometres")
    p.add_argument("--steger-baseline", action="store_true",
                   help="plain ridge detection without filtering or reconstruction "
                        "(ungated unless pipeline.baseline_gated is set)")
    p.add_argument("--dark-lines", action="store_true", help="structures are darker than background")
    p.add_argument("--overlay", action="store_true", help="also write SVG overlays")
    p.add_argument("--mask-dir", type=Path, help="directory holding <stem>_part.png / <stem>_instance.png")
    p.add_argument("--out", default="out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spermmorph", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--print-labels", action="store_true", help="print part label codes and exit")
    parser.add_argument("--print-config", action="store_true", help="print the default config and exit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("measure", help="morphology report for labelled images")
    p.add_argument("inputs", nargs="+", help="image files or directories")
    _pipeline_flags(p)
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("centerline", help="tail centerlines of one image")
    p.add_argument("image")
    p.add_argument("--instance", type=int)
    p.add_argument("--dump-fields", action="store_true", help="save derivative fields as float TIFFs")
    p.add_argument("--trace-walk", action="store_true", help="save per-step endpoint walk traces")
    _pipeline_flags(p)
    p.set_defaults(func=cmd_centerline)

    p = sub.add_parser("eval-parsing", help="score predicted part masks against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--unmatched", choices=("zero", "exclude"), default="zero",
                   help="how unmatched ground-truth instances enter PCP")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval_parsing)

    p = sub.add_parser("synth", help="write synthetic phantoms with ground truth")
    p.add_argument("--spec", help="JSON phantom description")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int)
    p.add_argument("--out", default="phantoms")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("overlay", help="render saved centerlines over an image as SVG")
    p.add_argument("image")
    p.add_argument("--centerlines", required=True, help="JSON written by the centerline command")
    p.add_argument("--no-image", action="store_true", help="omit the embedded raster")
    p.add_argument("--out", required=True, help="output .svg path")
    p.set_defaults(func=cmd_overlay)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    if args.print_labels:
        print(label_table())
        return EXIT_OK
    if args.print_config:
        print(config_text(MeasurementConfig()), end="")
        return EXIT_OK
    if not getattr(args, "func", None):
        parser.print_help(sys.stderr)
        return EXIT_ERROR
    try:
        return args.func(args)
    except (CliError, RasterError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
