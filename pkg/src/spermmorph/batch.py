"""Order-preserving parallel measurement across images and instances."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

from .config import MeasurementConfig
from .morphometry import MorphReport, measure_sperm
from .raster import InstancePartMask, ScalarImage

ENV_THREADS = "MORPH_THREADS"


def thread_count(default: int | None = None) -> int:
    """Worker cap from ``MORPH_THREADS`` (falls back to the CPU count)."""
    raw = os.environ.get(ENV_THREADS, "").strip()
    if raw:
        try:
            n = int(raw)
        except ValueError as exc:
            raise ValueError(f"{ENV_THREADS} must be an integer, got {raw!r}") from exc
        if n < 1:
            raise ValueError(f"{ENV_THREADS} must be at least 1")
        return n
    return default or os.cpu_count() or 1


def parallel_map(fn, items, threads: int | None = None) -> list:
    """``[fn(x) for x in items]`` on a thread pool; result order is input order."""
    items = list(items)
    n = min(threads or thread_count(), max(len(items), 1))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def measure_image(img: ScalarImage, mask: InstancePartMask, cfg: MeasurementConfig,
                  threads: int | None = None) -> list[MorphReport]:
    """One report per instance, ordered by instance ID."""
    return parallel_map(lambda i: measure_sperm(img, mask, i, cfg), mask.instances(), threads)


def measure_many(samples, cfg: MeasurementConfig, threads: int | None = None) -> list[list[MorphReport]]:
    """Reports for ``(image, mask)`` samples; instances of all images share one pool."""
    samples = list(samples)
    jobs = [(k, img, mask, i) for k, (img, mask) in enumerate(samples) for i in mask.instances()]
    reports = parallel_map(lambda j: measure_sperm(j[1], j[2], j[3], cfg), jobs, threads)
    out: list[list[MorphReport]] = [[] for _ in range(len(samples))]
    for (k, *_), rep in zip(jobs, reports):
        out[k].append(rep)
    return out
