from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spermmorph.raster import PartLabel
from spermmorph.synth import (
    MIN_TAIL_CURVATURE,
    CurveSpec,
    HeadSpec,
    Junction,
    MidpieceSpec,
    PhantomError,
    curve_geometry,
    generate_batch,
    generate_phantom,
    midpiece_end,
    render_curve,
    render_sperm_phantom,
    write_phantom,
)


def test_straight_length():
    _, _, gt = render_curve(CurveSpec("straight", ((20, 30), (220, 30))), (260, 60))
    assert gt.length == 200.0
    assert gt.mean_abs_curvature == 0.0
    assert gt.endpoints == ((20.0, 30.0), (220.0, 30.0))


def test_arc_length_and_curvature():
    spec = CurveSpec("arc", (150, 150, 100, 0, 90))
    _, _, gt = render_curve(spec, (300, 300))
    assert gt.length == pytest.approx(157.0796, abs=1e-4)
    assert np.all(gt.curvature == pytest.approx(0.01))


@pytest.mark.parametrize("spec", [
    CurveSpec("straight", ((20, 30), (220, 80))),
    CurveSpec("arc", (150, 150, 100, 30, -140)),
    CurveSpec("spline", ((20, 20), (120, 20), (200, 200), (260, 120))),
])
def test_ground_truth_self_consistent(spec):
    pts, _, length = curve_geometry(spec)
    assert np.hypot(*np.diff(pts, axis=0).T).sum() == pytest.approx(length, abs=1e-3)


def test_spline_curvature_of_a_straight_bezier():
    pts, k, length = curve_geometry(CurveSpec("spline", ((0, 0), (10, 0), (20, 0), (30, 0))))
    assert length == pytest.approx(30.0)
    assert np.allclose(k, 0.0)


@settings(max_examples=25)
@given(st.floats(60, 140), st.floats(-170, 170).filter(lambda s: abs(s) > 10), st.floats(0, 360),
       st.floats(2, 7))
def test_samples_lie_inside_mask(radius, sweep, start, width):
    spec = CurveSpec("arc", (160, 160, radius, start, sweep), (width, width))
    _, mask, gt = render_curve(spec, (320, 320))
    px = np.rint(gt.samples).astype(int)
    assert mask[px[:, 1], px[:, 0]].all()


def test_render_is_deterministic():
    spec = CurveSpec("arc", (150, 150, 100, 0, 90), junction=Junction())
    a = render_curve(spec, (300, 300), 0.05, 9)
    b = render_curve(spec, (300, 300), 0.05, 9)
    assert np.array_equal(a[0].values, b[0].values) and np.array_equal(a[1], b[1])
    assert not np.array_equal(a[0].values, render_curve(spec, (300, 300), 0.05, 10)[0].values)


def test_noise_clipped():
    img, _, _ = render_curve(CurveSpec("straight", ((20, 30), (220, 30)), amplitude=1.0), (260, 60), 0.3, 1)
    assert img.values.min() >= 0.0 and img.values.max() <= 1.0


def test_junction_adds_crossing_bar():
    plain = CurveSpec("straight", ((20, 60), (150, 60)))
    dec = CurveSpec("straight", ((20, 60), (150, 60)), junction=Junction("end", 90, 40, 6, 0.9))
    a, ma, _ = render_curve(plain, (200, 120))
    b, mb, _ = render_curve(dec, (200, 120))
    # the bar runs vertically through the end point and leaves the mask alone
    assert b.values[40, 150] > 0.8 and a.values[40, 150] < 0.01
    assert np.array_equal(ma, mb)


def test_curve_must_fit_canvas():
    with pytest.raises(PhantomError):
        render_curve(CurveSpec("straight", ((2, 30), (220, 30))), (260, 60))
    with pytest.raises(PhantomError):
        CurveSpec("helix", ((0, 0), (1, 1)))
    with pytest.raises(PhantomError):
        CurveSpec("straight", ((0, 0), (1, 1)), width=(0, 2))


def _phantom(vacuoles=(), head_center=(200.0, 150.0), canvas=(600, 400), base=None, instance=1):
    head = HeadSpec(head_center, 25.0, 13.0, 180.0, vacuoles=vacuoles)
    mid = MidpieceSpec(40.0, 8.0, 0.0)
    _, p1, _ = midpiece_end(head, mid)
    tail = CurveSpec("straight", (tuple(p1), (p1[0] + 200, p1[1])), (5.0, 3.0))
    return render_sperm_phantom(head, mid, tail, canvas, base=base, instance=instance)


def test_sperm_phantom_truth():
    img, part, inst, t = _phantom(vacuoles=((5, 3, 2.5), (-8, -3, 2.0)))
    assert t.ellipticity == pytest.approx(25 / 13)
    assert t.vacuole_count == 2
    assert t.acrosome_px == int(np.sum(part == PartLabel.ACROSOME))
    assert set(np.unique(part)) == {0, 1, 2, 3, 4, 5}
    assert set(np.unique(inst)) == {0, 1}
    assert t.tail.length == pytest.approx(200.0)


def test_sperm_phantom_rejects_collisions():
    img, part, inst, _ = _phantom()
    with pytest.raises(PhantomError):
        _phantom(head_center=(210.0, 150.0), base=(img, part, inst), instance=2)
    head = HeadSpec((200.0, 150.0), 25.0, 13.0, 180.0)
    with pytest.raises(PhantomError):
        render_sperm_phantom(head, MidpieceSpec(40.0, 8.0, 0.0),
                             CurveSpec("straight", ((0.0 + 300, 150.0), (500.0, 150.0))), (600, 400))


def test_batch_is_reproducible():
    a = generate_batch(7, 2)
    b = generate_batch(7, 2)
    for p, q in zip(a, b):
        assert np.array_equal(p.image.values, q.image.values)
        assert np.array_equal(p.mask.part, q.mask.part)
        assert p.truth[0].to_dict() == q.truth[0].to_dict()
    assert not np.array_equal(a[0].image.values, a[1].image.values)


def test_random_phantoms_are_curved_and_valid():
    for seed in range(3):
        ph = generate_phantom(seed, canvas=(640, 512))
        t = ph.truth[0]
        assert t.tail.mean_abs_curvature >= MIN_TAIL_CURVATURE
        assert 1.5 <= t.ellipticity <= 2.1
        assert ph.mask.has_instance(1)


def test_write_phantom(tmp_path):
    paths = write_phantom(tmp_path, "p", generate_phantom(1, canvas=(640, 512)))
    assert all(p.exists() for p in paths.values())
    assert paths["part"].name == "p_part.png"
