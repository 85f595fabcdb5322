from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from spermmorph.metrics import THRESHOLDS, ap_p, ap_p_vol, evaluate, miou, pcp, score_matrix
from spermmorph.raster import InstancePartMask, PartLabel, RasterError

T, M = int(PartLabel.TAIL), int(PartLabel.MIDPIECE)


def mk(part, inst=None):
    part = np.array(part)
    if inst is None:
        inst = (part > 0).astype(int)
    return InstancePartMask(part, np.array(inst))


def test_miou_identity_and_disjoint():
    a = mk([[T, T, M, M]])
    assert miou(a, a)[0] == 1.0
    assert miou(mk([[T, T, 0, 0]]), mk([[0, 0, T, T]]))[0] == 0.0


def test_miou_strip_example():
    value, per = miou(mk([[T, M, M, M]]), mk([[T, T, M, M]]))
    assert per == {T: pytest.approx(1 / 2), M: pytest.approx(2 / 3)}
    assert value == pytest.approx(7 / 12)


def test_miou_empty_masks_agree():
    e = mk([[0, 0]])
    assert miou(e, e) == (1.0, {})


def test_dimension_mismatch():
    with pytest.raises(RasterError):
        evaluate(mk([[T]]), mk([[T, T]]))


def two_part_instance(width=10):
    # one instance: tail on the left half, midpiece on the right
    return [T] * (width // 2) + [M] * (width // 2)


def test_ap_perfect_and_empty():
    g = mk([two_part_instance()])
    for t in THRESHOLDS:
        assert ap_p(g, g, t) == 1.0
    empty = mk([[0] * 10])
    assert ap_p(empty, g) == 0.0
    assert ap_p_vol(empty, g) == 0.0
    assert ap_p_vol(g, g) == 1.0


def test_ap_one_gt_two_predictions():
    # prediction 1 scores 0.8 against the gt, prediction 2 scores 0.2
    gt = mk([[T] * 10 + [0] * 10])
    p1 = [T] * 8 + [0] * 12
    p2 = [0] * 8 + [T] * 2 + [0] * 10
    part = np.array([p1]) + np.array([p2])
    inst = np.where(np.array([p1]) > 0, 1, np.where(np.array([p2]) > 0, 2, 0))
    pred = mk(part, inst)
    pid, gid, s = score_matrix(pred, gt)
    assert s[:, 0] == pytest.approx([0.8, 0.2])
    assert ap_p(pred, gt, 0.5, {1: 0.9, 2: 0.8}) == 1.0
    # reversing confidence puts the false positive first
    assert ap_p(pred, gt, 0.5, {1: 0.8, 2: 0.9}) == pytest.approx(0.5)


def test_ap_vol_uniform_score():
    # 20 gt tail pixels and 11 predicted: score 0.55 exactly
    gt = mk([[T] * 20])
    pred = mk([[T] * 11 + [0] * 9])
    assert score_matrix(pred, gt)[2][0, 0] == pytest.approx(0.55)
    assert [ap_p(pred, gt, t) for t in THRESHOLDS] == [1.0] * 5 + [0.0] * 4
    assert ap_p_vol(pred, gt) == pytest.approx(5 / 9)


def test_pcp_examples():
    g = mk([two_part_instance()])
    assert pcp(g, g) == 1.0
    # five parts, three of them predicted correctly
    gt = mk([[1, 2, 3, 4, 5]])
    pred = mk([[1, 2, 3, 5, 4]])
    assert pcp(pred, gt, 0.5) == pytest.approx(0.6)
    # two gt instances, one predicted perfectly, one missed
    gt2 = mk([[T, T, 0, M, M]], [[1, 1, 0, 2, 2]])
    pred2 = mk([[T, T, 0, 0, 0]], [[1, 1, 0, 0, 0]])
    assert pcp(pred2, gt2) == pytest.approx(0.5)
    assert pcp(pred2, gt2, unmatched="exclude") == pytest.approx(1.0)
    with pytest.raises(ValueError):
        pcp(pred2, gt2, unmatched="ignore")


def test_report_bounds():
    pred, gt, conf = oracles.random_pair(11)
    d = evaluate(pred, gt, conf).to_dict()
    for k in ("miou", "ap_p_50", "ap_p_vol", "pcp_50"):
        assert 0.0 <= d[k] <= 1.0


seeds = st.integers(0, 2**31 - 1)


@settings(max_examples=300)
@given(seeds)
def test_metrics_match_brute_force(seed):
    pred, gt, conf = oracles.random_pair(seed)
    assert miou(pred, gt)[0] == pytest.approx(oracles.miou(pred, gt), abs=1e-12)
    for t in (0.1, 0.5, 0.9):
        assert ap_p(pred, gt, t, conf) == pytest.approx(oracles.ap(pred, gt, t, conf), abs=1e-12)
    assert ap_p_vol(pred, gt, conf) == pytest.approx(oracles.ap_vol(pred, gt, conf), abs=1e-12)
    for mode in ("zero", "exclude"):
        assert pcp(pred, gt, 0.5, conf, mode) == pytest.approx(
            oracles.pcp(pred, gt, 0.5, conf, mode), abs=1e-12)


def _relabel(mask, mapping):
    inst = np.vectorize(lambda i: mapping.get(i, i))(mask.instance)
    return InstancePartMask(mask.part, inst)


@settings(max_examples=100)
@given(seeds)
def test_metrics_relabel_invariant(seed):
    pred, gt, conf = oracles.random_pair(seed)
    # order-preserving maps keep confidence ties resolved the same way
    pm = {i: 3 * i + 7 for i in range(1, 6)}
    gm = {i: 2 * i + 40 for i in range(1, 6)}
    conf2 = {pm[i]: c for i, c in conf.items()}
    a = evaluate(pred, gt, conf).to_dict()
    b = evaluate(_relabel(pred, pm), _relabel(gt, gm), conf2).to_dict()
    assert a == b


@settings(max_examples=100)
@given(seeds)
def test_ap_monotone_in_threshold(seed):
    pred, gt, conf = oracles.random_pair(seed)
    vals = [ap_p(pred, gt, t, conf) for t in THRESHOLDS]
    assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))
