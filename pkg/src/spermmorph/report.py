"""CSV and JSON serialization of morphology reports."""
from __future__ import annotations

import csv
import io
import json
import math
from decimal import ROUND_HALF_UP, Decimal

from .morphometry import MorphReport

# instance, the fourteen tabulated parameters, then provenance
MEASURE_COLUMNS = (
    "head_length",
    "head_width",
    "ellipticity",
    "acrosome_area",
    "nucleus_area",
    "vacuole_count",
    "vacuole_area",
    "head_midpiece_angle",
    "midpiece_length",
    "midpiece_width",
    "midpiece_angle_max",
    "tail_length",
    "tail_width",
    "tail_angle_max",
)
CSV_COLUMNS = ("instance",) + MEASURE_COLUMNS + ("image", "flags")
NA = "NA"


def round_half_up(value: float, places: int = 2) -> str:
    """Decimal string rounded half away from zero, independent of locale.

    The shortest repr of the float is rounded, so 1.005 gives "1.01"
    rather than falling victim to its binary expansion.
    """
    if not math.isfinite(value):
        raise ValueError(f"cannot format non-finite value {value}")
    q = Decimal(1).scaleb(-places)
    out = Decimal(repr(float(value))).quantize(q, rounding=ROUND_HALF_UP)
    if out == 0:
        out = abs(out)
    return str(out)


def format_value(name: str, value) -> str:
    if value is None:
        return NA
    if name in ("instance", "vacuole_count"):
        return str(int(value))
    return round_half_up(float(value))


def csv_row(report: MorphReport, image: str = "") -> list[str]:
    row = [format_value(c, getattr(report, c)) for c in ("instance",) + MEASURE_COLUMNS]
    return row + [image, ";".join(sorted(report.flags))]


def write_csv(rows, fh, header: bool = True) -> None:
    """``rows`` is an iterable of ``(image, MorphReport)``."""
    w = csv.writer(fh, lineterminator="\n")
    if header:
        w.writerow(CSV_COLUMNS)
    for image, rep in rows:
        w.writerow(csv_row(rep, image))


def csv_text(rows, header: bool = True) -> str:
    buf = io.StringIO()
    write_csv(rows, buf, header)
    return buf.getvalue()


def report_json(rows) -> list[dict]:
    out = []
    for image, rep in rows:
        d = {"image": image}
        d.update(rep.to_dict())
        out.append(d)
    return out


def json_text(rows) -> str:
    return json.dumps(report_json(rows), indent=2, allow_nan=False) + "\n"
