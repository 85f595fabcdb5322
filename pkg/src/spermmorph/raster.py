"""Raster types, PNG I/O for images and part masks, component analysis.

Coordinates follow the image convention used throughout the package:
``x`` is the column index, ``y`` the row index, arrays are indexed
``[y, x]``. Binary masks are plain boolean ``numpy`` arrays.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage


class RasterError(ValueError):
    """Raised on malformed image or mask input."""


class PartLabel(IntEnum):
    BACKGROUND = 0
    ACROSOME = 1
    VACUOLE = 2
    NUCLEUS = 3
    MIDPIECE = 4
    TAIL = 5


FOREGROUND_PARTS = tuple(p for p in PartLabel if p is not PartLabel.BACKGROUND)


def label_table() -> str:
    """Human-readable part-code table (``--print-labels``)."""
    return "\n".join(f"{int(p)}\t{p.name.lower()}" for p in PartLabel)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ScalarImage:
    """Grayscale intensities in [0, 1], shape ``(height, width)``."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise RasterError(f"image must be 2-D, got shape {v.shape}")
        if v.size == 0:
            raise RasterError("zero-sized image")
        if not np.all(np.isfinite(v)) or v.min() < 0.0 or v.max() > 1.0:
            raise RasterError("intensities must lie in [0, 1]")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class InstancePartMask:
    """Per-pixel part label and instance ID.

    Background pixels carry instance 0 and every labelled pixel carries a
    nonzero instance; violations are reported with the first offending
    pixel's ``(x, y)`` coordinates.
    """

    part: np.ndarray
    instance: np.ndarray

    def __post_init__(self):
        part = np.asarray(self.part)
        inst = np.asarray(self.instance)
        if part.ndim != 2 or part.shape != inst.shape:
            raise RasterError(
                f"part/instance shape mismatch: {part.shape} vs {inst.shape}"
            )
        if part.size and (part.min() < 0 or part.max() > 5):
            y, x = np.argwhere((part < 0) | (part > 5))[0]
            raise RasterError(f"invalid part code {part[y, x]} at ({x}, {y})")
        if inst.size and inst.min() < 0:
            raise RasterError("instance IDs must be non-negative")
        bad = (part == 0) != (inst == 0)
        if bad.any():
            y, x = np.argwhere(bad)[0]
            if part[y, x] == 0:
                raise RasterError(
                    f"background with nonzero instance {inst[y, x]} at ({x}, {y})"
                )
            raise RasterError(f"labelled part with instance 0 at ({x}, {y})")
        object.__setattr__(self, "part", _frozen(part.astype(np.uint8)))
        object.__setattr__(self, "instance", _frozen(inst.astype(np.int64)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.part.shape

    @property
    def height(self) -> int:
        return self.part.shape[0]

    @property
    def width(self) -> int:
        return self.part.shape[1]

    def instances(self) -> list[int]:
        ids = np.unique(self.instance)
        return [int(i) for i in ids if i != 0]

    def has_instance(self, instance: int) -> bool:
        return bool(np.any(self.instance == instance))


def check_scale(microns_per_pixel: float) -> float:
    s = float(microns_per_pixel)
    if not np.isfinite(s) or s <= 0:
        raise RasterError(f"microns_per_pixel must be finite and > 0, got {s}")
    return s


def _read_gray(path) -> np.ndarray:
    path = Path(path)
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode not in ("L", "I;16", "I;16B", "I;16L", "I", "1", "P"):
                raise RasterError(f"{path}: expected single-channel PNG, got mode {mode}")
            if mode == "P":
                raise RasterError(f"{path}: palette images are not supported")
            arr = np.array(im)
    except RasterError:
        raise
    except (OSError, ValueError) as exc:
        raise RasterError(f"{path}: unreadable image ({exc})") from exc
    if arr.ndim != 2:
        raise RasterError(f"{path}: expected single-channel PNG")
    if arr.size == 0:
        raise RasterError(f"{path}: zero-sized image")
    return arr, mode


def load_image(path) -> ScalarImage:
    """Read an 8- or 16-bit grayscale PNG and rescale linearly to [0, 1]."""
    arr, mode = _read_gray(path)
    if mode == "1":
        return ScalarImage(arr.astype(np.float64))
    if mode == "L":
        return ScalarImage(arr.astype(np.float64) / 255.0)
    return ScalarImage(arr.astype(np.float64) / 65535.0)


def save_image(path, img: ScalarImage | np.ndarray, bits: int = 16) -> None:
    values = img.values if isinstance(img, ScalarImage) else np.asarray(img)
    if bits == 8:
        Image.fromarray(np.round(values * 255.0).astype(np.uint8)).save(path)
    elif bits == 16:
        Image.fromarray(np.round(values * 65535.0).astype(np.uint16)).save(path)
    else:
        raise ValueError("bits must be 8 or 16")


def load_mask(part_path, instance_path) -> InstancePartMask:
    part, pmode = _read_gray(part_path)
    inst, _ = _read_gray(instance_path)
    if pmode != "L":
        raise RasterError(f"{part_path}: part file must be 8-bit")
    if part.shape != inst.shape:
        raise RasterError(
            f"dimension mismatch: part {part.shape[::-1]} vs instance {inst.shape[::-1]}"
        )
    return InstancePartMask(part.astype(np.int64), inst.astype(np.int64))


def save_mask(part_path, instance_path, mask: InstancePartMask) -> None:
    if mask.instance.size and mask.instance.max() > 65535:
        raise RasterError("instance IDs above 65535 do not fit a 16-bit PNG")
    Image.fromarray(mask.part.astype(np.uint8)).save(part_path)
    Image.fromarray(mask.instance.astype(np.uint16)).save(instance_path)


def instance_part_mask(mask: InstancePartMask, instance: int, part: PartLabel) -> np.ndarray:
    if instance == 0 or not mask.has_instance(instance):
        raise RasterError(f"unknown instance {instance}")
    return (mask.instance == instance) & (mask.part == int(part))


def instance_mask(mask: InstancePartMask, instance: int, parts=FOREGROUND_PARTS) -> np.ndarray:
    """Union of several parts of one instance."""
    if instance == 0 or not mask.has_instance(instance):
        raise RasterError(f"unknown instance {instance}")
    return (mask.instance == instance) & np.isin(mask.part, [int(p) for p in parts])


@dataclass(frozen=True)
class Component:
    mask: np.ndarray
    area: int
    centroid: tuple[float, float]  # (x, y)


_EIGHT = np.ones((3, 3), dtype=bool)


def connected_components(mask: np.ndarray) -> list[Component]:
    """8-connected components sorted by decreasing area.

    Ties are broken by the top-left-most pixel (row-major first pixel), so
    the result does not depend on the labelling order.
    """
    mask = np.asarray(mask, dtype=bool)
    labels, n = ndimage.label(mask, structure=_EIGHT)
    if n == 0:
        return []
    comps = []
    flat = labels.ravel()
    first = {}
    nz = np.flatnonzero(flat)
    # np.unique on labels in row-major order gives first occurrence per label
    lab_vals, idx = np.unique(flat[nz], return_index=True)
    for lab, i in zip(lab_vals, idx):
        first[int(lab)] = int(nz[i])
    areas = ndimage.sum_labels(mask, labels, index=np.arange(1, n + 1))
    for lab in range(1, n + 1):
        m = labels == lab
        ys, xs = np.nonzero(m)
        comps.append(
            (
                -int(areas[lab - 1]),
                first[lab],
                Component(m, int(areas[lab - 1]), (float(xs.mean()), float(ys.mean()))),
            )
        )
    comps.sort(key=lambda c: (c[0], c[1]))
    return [c[2] for c in comps]
