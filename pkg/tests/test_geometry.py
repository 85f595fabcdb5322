from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spermmorph.geometry import (
    FitDegenerate,
    axis_angle,
    boundary_points,
    fit_ellipse,
    fit_ellipse_points,
    fit_rectangle,
)


def ellipse_mask(a, b, angle_deg, shape=(200, 200)):
    h, w = shape
    yy, xx = np.mgrid[:h, :w].astype(float)
    cx, cy = (w - 1) / 2 + 0.3, (h - 1) / 2 - 0.2
    t = math.radians(angle_deg)
    u = (xx - cx) * math.cos(t) + (yy - cy) * math.sin(t)
    v = -(xx - cx) * math.sin(t) + (yy - cy) * math.cos(t)
    return (u / a) ** 2 + (v / b) ** 2 <= 1.0


def rect_mask(length, width, angle_deg, shape=(120, 120)):
    h, w = shape
    yy, xx = np.mgrid[:h, :w].astype(float)
    cx, cy = (w - 1) / 2, (h - 1) / 2
    t = math.radians(angle_deg)
    u = (xx - cx) * math.cos(t) + (yy - cy) * math.sin(t)
    v = -(xx - cx) * math.sin(t) + (yy - cy) * math.cos(t)
    return (np.abs(u) <= length / 2) & (np.abs(v) <= width / 2)


def angle_diff(a, b):
    return axis_angle(a, b)


def test_boundary_points_of_single_pixel():
    m = np.zeros((3, 3), bool)
    m[1, 1] = True
    pts = sorted(map(tuple, boundary_points(m)))
    assert pts == [(0.5, 1.0), (1.0, 0.5), (1.0, 1.5), (1.5, 1.0)]


def test_ellipse_axis_aligned():
    e = fit_ellipse(ellipse_mask(50, 25, 0))
    assert e.length() == pytest.approx(100, rel=0.02)
    assert e.width() == pytest.approx(50, rel=0.02)
    assert e.ellipticity == pytest.approx(2.0, rel=0.02)
    assert angle_diff(e.angle, 0.0) < 1.0


def test_ellipse_circle():
    e = fit_ellipse(ellipse_mask(20, 20, 0))
    assert e.ellipticity == pytest.approx(1.0, rel=0.02)
    assert e.length(0.1) == pytest.approx(4.0, rel=0.02)


def test_ellipse_exact_on_analytic_points():
    t = np.linspace(0, 2 * np.pi, 50, endpoint=False)
    c, s = math.cos(0.4), math.sin(0.4)
    x, y = 30 * np.cos(t), 12 * np.sin(t)
    pts = np.stack([5 + c * x - s * y, -3 + s * x + c * y], axis=1)
    e = fit_ellipse_points(pts)
    assert e.semi_major == pytest.approx(30, abs=1e-6)
    assert e.semi_minor == pytest.approx(12, abs=1e-6)
    assert e.center == pytest.approx((5, -3), abs=1e-6)
    assert e.angle == pytest.approx(math.degrees(0.4), abs=1e-6)


@settings(max_examples=40)
@given(st.floats(1.0, 4.0), st.floats(0.0, 170.0))
def test_ellipse_ratio_and_rotation(ratio, angle):
    b = 18.0
    e = fit_ellipse(ellipse_mask(b * ratio, b, angle, shape=(170, 170)))
    assert e.length() == pytest.approx(2 * b * ratio, rel=0.02)
    assert e.width() == pytest.approx(2 * b, rel=0.02)
    assert e.ellipticity >= 1.0
    if ratio > 1.1:
        assert angle_diff(e.angle, angle) < 1.0


def test_ellipse_degenerate():
    line = np.zeros((10, 10), bool)
    line[5, :] = True
    with pytest.raises(FitDegenerate):
        fit_ellipse_points(np.array([[0, 0], [1, 1], [2, 2], [3, 3], [4, 4], [5, 5]], float))
    with pytest.raises(FitDegenerate):
        fit_ellipse(np.zeros((5, 5), bool))
    with pytest.raises(FitDegenerate):
        fit_ellipse_points(np.zeros((4, 2)))


def test_rectangle_axis_aligned():
    m = np.zeros((50, 60), bool)
    m[20:30, 10:50] = True
    r = fit_rectangle(m)
    assert (r.length(), r.width(), r.angle) == pytest.approx((40, 10, 0), abs=1e-9)
    assert r.center == pytest.approx((29.5, 24.5))


def test_rectangle_rotated_30():
    r = fit_rectangle(rect_mask(40, 10, 30))
    assert r.length() == pytest.approx(40, abs=1.0)
    assert r.width() == pytest.approx(10, abs=1.0)
    assert angle_diff(r.angle, 30) < 1.0


def test_rectangle_square_is_stable():
    m = np.zeros((40, 40), bool)
    m[10:30, 10:30] = True
    r1, r2 = fit_rectangle(m), fit_rectangle(m.copy())
    assert r1.length() == r1.width() == 20
    assert r1 == r2


def test_rectangle_single_pixel_degenerate():
    m = np.zeros((5, 5), bool)
    m[2, 3] = True
    r = fit_rectangle(m)
    assert r.degenerate and r.length() == 0 and r.width() == 0
    with pytest.raises(FitDegenerate):
        fit_rectangle(np.zeros((5, 5), bool))


@settings(max_examples=60)
@given(st.floats(30, 70), st.floats(8, 15), st.floats(0, 179))
def test_rectangle_rotation_sweep(length, width, angle):
    r = fit_rectangle(rect_mask(length, width, angle, shape=(100, 100)))
    assert abs(r.length() - length) <= 1.0
    assert abs(r.width() - width) <= 1.0
    assert r.length() >= r.width()
    assert 0.0 <= r.angle < 180.0
    assert axis_angle(r.angle, angle) <= 1.0


@pytest.mark.parametrize("a,b,expected", [(10, 10, 0), (0, 90, 90), (170, 10, 20), (-30, 150, 0)])
def test_axis_angle(a, b, expected):
    assert axis_angle(a, b) == pytest.approx(expected)
