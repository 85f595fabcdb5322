from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from spermmorph.derivatives import DerivativeFields

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("default")


def fields_from_hessian(rxx, rxy, ryy, rx=0.0, ry=0.0, shape=(3, 3)):
    """Constant derivative fields, for exercising per-pixel formulas."""
    full = lambda v: np.full(shape, float(v))
    return DerivativeFields(full(rx), full(ry), full(rxx), full(rxy), full(ryy), sigma=1.0)


@pytest.fixture
def const_fields():
    return fields_from_hessian


def gaussian_line_image(shape, y0, sigma_line, amplitude=1.0, angle_deg=0.0, cx=None, cy=None):
    """Straight line with Gaussian cross-section through ``(cx, y0)`` at ``angle_deg``."""
    h, w = shape
    yy, xx = np.mgrid[:h, :w].astype(np.float64)
    cx = (w - 1) / 2 if cx is None else cx
    t = np.radians(angle_deg)
    # signed distance to the line through (cx, y0) with direction (cos t, sin t)
    d = -(xx - cx) * np.sin(t) + (yy - y0) * np.cos(t)
    return amplitude * np.exp(-0.5 * (d / sigma_line) ** 2)


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
