"""Input coercion and checks shared by the estimator and the CLI."""
from __future__ import annotations

import numpy as np

from .raster import InstancePartMask, RasterError, ScalarImage, check_scale

__all__ = ["check_image", "check_mask", "check_pair", "check_samples", "check_scale"]


def check_image(img) -> ScalarImage:
    """Accept a :class:`ScalarImage` or a 2-D array of intensities in [0, 1]."""
    if isinstance(img, ScalarImage):
        return img
    arr = np.asarray(img)
    if arr.ndim != 2:
        raise RasterError(f"image must be 2-D, got shape {arr.shape}")
    if arr.dtype.kind not in "fiub":
        raise RasterError(f"image dtype {arr.dtype} is not numeric")
    return ScalarImage(arr.astype(np.float64))


def check_mask(mask) -> InstancePartMask:
    """Accept an :class:`InstancePartMask` or a ``(part, instance)`` array pair."""
    if isinstance(mask, InstancePartMask):
        return mask
    try:
        part, inst = mask
    except (TypeError, ValueError) as exc:
        raise RasterError("mask must be an InstancePartMask or a (part, instance) pair") from exc
    return InstancePartMask(np.asarray(part), np.asarray(inst))


def check_pair(img, mask) -> tuple[ScalarImage, InstancePartMask]:
    img, mask = check_image(img), check_mask(mask)
    if img.shape != mask.shape:
        raise RasterError(f"image {img.shape} and mask {mask.shape} dimensions differ")
    return img, mask


def check_samples(X) -> list[tuple[ScalarImage, InstancePartMask]]:
    """A sequence of ``(image, mask)`` samples."""
    if isinstance(X, tuple) and len(X) == 2 and not isinstance(X[0], tuple):
        raise RasterError("expected a sequence of (image, mask) pairs, got a single pair")
    try:
        items = list(X)
    except TypeError as exc:
        raise RasterError("expected a sequence of (image, mask) pairs") from exc
    out = []
    for k, item in enumerate(items):
        try:
            img, mask = item
        except (TypeError, ValueError) as exc:
            raise RasterError(f"sample {k} is not an (image, mask) pair") from exc
        out.append(check_pair(img, mask))
    return out
