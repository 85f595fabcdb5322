"""SVG overlays of centerlines on the source image."""
from __future__ import annotations

import base64
import io

import numpy as np
from PIL import Image

from .raster import ScalarImage
from .steger import Centerline, PointSource

STYLE = {
    "line": "#00c8ff",
    "normal": "#ffd400",
    "detected": "#00ff66",
    "reconstructed": "#ff2d55",
}


def _png_data_uri(values: np.ndarray) -> str:
    im = Image.fromarray(np.round(np.clip(values, 0, 1) * 255).astype(np.uint8), mode="L")
    buf = io.BytesIO()
    im.save(buf, format="PNG")
    return "data:image/png;base64," + base64.b64encode(buf.getvalue()).decode("ascii")


def _f(v: float) -> str:
    return f"{v:.3f}"


def centerline_svg(
    img: ScalarImage | np.ndarray,
    lines: list[Centerline],
    normal_every: int = 5,
    normal_length: float = 4.0,
    embed_image: bool = True,
) -> str:
    """Image with centerline polylines, normal ticks and point markers.

    Detected points are filled circles, reconstructed points hollow squares.
    Coordinates are pixel centers, so a point at ``(x, y)`` is drawn at
    ``(x + 0.5, y + 0.5)`` over the image raster.
    """
    values = img.values if isinstance(img, ScalarImage) else np.asarray(img, dtype=np.float64)
    h, w = values.shape
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
        f'viewBox="0 0 {w} {h}">'
    ]
    if embed_image:
        out.append(f'<image x="0" y="0" width="{w}" height="{h}" href="{_png_data_uri(values)}"/>')
    for k, line in enumerate(lines):
        if len(line) == 0:
            continue
        out.append(f'<g class="centerline" data-instance="{line.instance}" data-index="{k}">')
        pts = line.positions() + 0.5
        path = " ".join(f"{_f(x)},{_f(y)}" for x, y in pts)
        out.append(f'<polyline points="{path}" fill="none" stroke="{STYLE["line"]}" '
                   f'stroke-width="0.6"/>')
        for i, cp in enumerate(line.points):
            if normal_every and i % normal_every == 0:
                x, y = pts[i]
                nx, ny = cp.normal
                a, b = normal_length / 2 * nx, normal_length / 2 * ny
                out.append(f'<line class="normal" x1="{_f(x - a)}" y1="{_f(y - b)}" '
                           f'x2="{_f(x + a)}" y2="{_f(y + b)}" stroke="{STYLE["normal"]}" '
                           f'stroke-width="0.3"/>')
        for i, cp in enumerate(line.points):
            x, y = pts[i]
            if cp.source is PointSource.RECONSTRUCTED:
                out.append(f'<rect class="reconstructed" x="{_f(x - 0.6)}" y="{_f(y - 0.6)}" '
                           f'width="1.2" height="1.2" fill="none" '
                           f'stroke="{STYLE["reconstructed"]}" stroke-width="0.3"/>')
            else:
                out.append(f'<circle class="detected" cx="{_f(x)}" cy="{_f(y)}" r="0.4" '
                           f'fill="{STYLE["detected"]}"/>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
