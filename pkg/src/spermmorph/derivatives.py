"""Sampled Gaussian derivative kernels and the five Hessian/gradient fields."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import convolve1d

from .raster import ScalarImage


@dataclass(frozen=True)
class GaussianSpec:
    sigma: float = 1.8
    radius: int | None = None

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        min_radius = math.ceil(3.0 * self.sigma)
        if self.radius is None:
            object.__setattr__(self, "radius", min_radius)
        elif self.radius < min_radius:
            raise ValueError(f"radius {self.radius} < ceil(3*sigma) = {min_radius}")

    @property
    def size(self) -> int:
        return 2 * self.radius + 1


def gaussian_kernel_1d(spec: GaussianSpec, order: int, normalize: bool = True) -> np.ndarray:
    """Sampled Gaussian (derivative) kernel of length ``2*radius + 1``.

    With ``normalize=False`` the raw samples of the continuous Gaussian
    derivative are returned. Otherwise the kernels are corrected so that
    their discrete moments are exact: order 0 sums to 1, order 1 maps a
    unit ramp to 1, order 2 sums to 0 and maps ``x**2 / 2`` to 1.
    """
    if order not in (0, 1, 2):
        raise ValueError(f"order must be 0, 1 or 2, got {order}")
    s = spec.sigma
    x = np.arange(-spec.radius, spec.radius + 1, dtype=np.float64)
    g = np.exp(-0.5 * (x / s) ** 2) / (math.sqrt(2.0 * math.pi) * s)
    if order == 0:
        k = g
        return k / k.sum() if normalize else k
    if order == 1:
        k = -x / s**2 * g
        if normalize:
            # convolution of f(x) = x with k equals -sum(u * k(u))
            k = k / -np.sum(x * k)
        return k
    k = (x**2 / s**4 - 1.0 / s**2) * g
    if not normalize:
        return k
    # k = a*x^2*g - b*g with sum(k) = 0 and sum(x^2/2 * k) = 1
    m0, m2, m4 = g.sum(), np.sum(x**2 * g), np.sum(x**4 * g)
    a = 2.0 / (m4 - m2 * m2 / m0)
    b = a * m2 / m0
    return a * x**2 * g - b * g


@dataclass(frozen=True)
class DerivativeFields:
    """Gaussian-smoothed first and second derivatives, each ``(H, W)``."""

    rx: np.ndarray
    ry: np.ndarray
    rxx: np.ndarray
    rxy: np.ndarray
    ryy: np.ndarray
    sigma: float

    @property
    def shape(self) -> tuple[int, int]:
        return self.rx.shape

    def gradient_at(self, x, y) -> np.ndarray:
        """Bilinear gradient samples at sub-pixel positions, shape ``(..., 2)``."""
        return np.stack([bilinear(self.rx, x, y), bilinear(self.ry, x, y)], axis=-1)


def bilinear(field: np.ndarray, x, y) -> np.ndarray:
    """Bilinear interpolation with edge clamping; ``x`` columns, ``y`` rows."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    h, w = field.shape
    x = np.clip(x, 0.0, w - 1.0)
    y = np.clip(y, 0.0, h - 1.0)
    x0 = np.minimum(np.floor(x).astype(np.intp), w - 2 if w > 1 else 0)
    y0 = np.minimum(np.floor(y).astype(np.intp), h - 2 if h > 1 else 0)
    fx = x - x0
    fy = y - y0
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    top = field[y0, x0] * (1 - fx) + field[y0, x1] * fx
    bot = field[y1, x0] * (1 - fx) + field[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def _separable(values: np.ndarray, kx: np.ndarray, ky: np.ndarray) -> np.ndarray:
    tmp = convolve1d(values, kx, axis=1, mode="reflect")
    return convolve1d(tmp, ky, axis=0, mode="reflect")


def derivative_fields(img: ScalarImage | np.ndarray, spec: GaussianSpec) -> DerivativeFields:
    values = img.values if isinstance(img, ScalarImage) else np.asarray(img, dtype=np.float64)
    if min(values.shape) < spec.size:
        raise ValueError(
            f"image {values.shape[1]}x{values.shape[0]} smaller than kernel size {spec.size}"
        )
    k0, k1, k2 = (gaussian_kernel_1d(spec, o) for o in (0, 1, 2))
    return DerivativeFields(
        rx=_separable(values, k1, k0),
        ry=_separable(values, k0, k1),
        rxx=_separable(values, k2, k0),
        rxy=_separable(values, k1, k1),
        ryy=_separable(values, k0, k2),
        sigma=spec.sigma,
    )


def smoothed(img: ScalarImage | np.ndarray, spec: GaussianSpec) -> np.ndarray:
    values = img.values if isinstance(img, ScalarImage) else np.asarray(img, dtype=np.float64)
    k0 = gaussian_kernel_1d(spec, 0)
    return _separable(values, k0, k0)
