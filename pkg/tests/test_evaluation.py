from types import SimpleNamespace

import numpy as np
import pytest

from tinyssd.evaluation import EvalConfig, average_precision, evaluate, mean_ap


def ann(boxes, labels, difficult=None):
    return SimpleNamespace(boxes=np.array(boxes, float), labels=np.array(labels), difficult=difficult)


# Image "A" holds g1, g2; image "B" holds g3; all class 1.
FIXTURE_GTS = {
    "A": ann([[0, 0, 0.5, 0.5], [0.5, 0.5, 1, 1]], [1, 1]),
    "B": ann([[0.2, 0.2, 0.6, 0.6]], [1]),
}
# Trace, by decreasing score:
#   0.9 A  IoU(g1) = 1            -> TP  (tp=1 fp=0)  R=1/3 P=1
#   0.8 B  no overlap with g3     -> FP  (tp=1 fp=1)  R=1/3 P=1/2
#   0.7 A  IoU(g1) = 0.9, g1 used -> FP  (tp=1 fp=2)  R=1/3 P=1/3
#   0.6 B  IoU(g3) = 0.875        -> TP  (tp=2 fp=2)  R=2/3 P=1/2
#   0.5 A  IoU(g2) = 0.81         -> TP  (tp=3 fp=2)  R=1   P=3/5
# 11-point: t in {0, .1, .2, .3} -> 1; t in {.4 .. 1} -> 0.6  =>  (4 + 7 * 0.6) / 11
# all-points envelope: 1 on (0, 1/3], 0.6 on (1/3, 1]  =>  1/3 + 2/3 * 0.6 = 11/15
FIXTURE_DETS = [
    ("A", 1, 0.9, [0, 0, 0.5, 0.5]),
    ("B", 1, 0.8, [0.6, 0.6, 0.9, 0.9]),
    ("A", 1, 0.7, [0, 0, 0.5, 0.45]),
    ("B", 1, 0.6, [0.2, 0.2, 0.6, 0.55]),
    ("A", 1, 0.5, [0.55, 0.55, 1, 1]),
]


def test_fixture_eleven_point():
    pr = average_precision(FIXTURE_DETS, FIXTURE_GTS, 1, EvalConfig(0.5, "eleven_point"))
    np.testing.assert_allclose(pr.recall, [1 / 3, 1 / 3, 1 / 3, 2 / 3, 1])
    np.testing.assert_allclose(pr.precision, [1, 1 / 2, 1 / 3, 1 / 2, 3 / 5])
    assert pr.ap == pytest.approx((4 + 7 * 0.6) / 11, abs=1e-12)


def test_fixture_all_points():
    pr = average_precision(FIXTURE_DETS, FIXTURE_GTS, 1, EvalConfig(0.5, "all_points"))
    assert pr.ap == pytest.approx(11 / 15, abs=1e-12)


def test_fixture_order_independent():
    rev = list(reversed(FIXTURE_DETS))
    for mode in ("eleven_point", "all_points"):
        cfg = EvalConfig(interpolation=mode)
        assert average_precision(rev, FIXTURE_GTS, 1, cfg).ap == average_precision(FIXTURE_DETS, FIXTURE_GTS, 1, cfg).ap


def test_perfect_and_missed_detection():
    gts = {0: ann([[0.1, 0.1, 0.5, 0.5]], [1])}
    assert average_precision([(0, 1, 0.9, [0.1, 0.1, 0.5, 0.5])], gts, 1).ap == 1.0
    # IoU 0.3 with the gt
    assert average_precision([(0, 1, 0.9, [0.1, 0.1, 0.22, 0.5])], gts, 1).ap == 0.0


def test_no_ground_truth_for_class():
    gts = {0: ann([[0.1, 0.1, 0.5, 0.5]], [2])}
    assert average_precision([(0, 1, 0.9, [0.1, 0.1, 0.5, 0.5])], gts, 1).ap == 0.0


def test_duplicate_never_increases_ap():
    rng = np.random.default_rng(0)
    for _ in range(100):
        dets = list(FIXTURE_DETS)
        base = average_precision(dets, FIXTURE_GTS, 1).ap
        dup = dets[int(rng.integers(len(dets)))]
        # ranked after the original, so its gt is already matched when it is visited
        dets.append((dup[0], 1, float(rng.uniform(0, dup[2])), dup[3]))
        assert average_precision(dets, FIXTURE_GTS, 1).ap <= base + 1e-12


def test_difficult_gt_excluded():
    gts = {0: ann([[0.1, 0.1, 0.5, 0.5], [0.6, 0.6, 0.9, 0.9]], [1, 1], np.array([False, True]))}
    dets = [(0, 1, 0.9, [0.6, 0.6, 0.9, 0.9]), (0, 1, 0.8, [0.1, 0.1, 0.5, 0.5])]
    pr = average_precision(dets, gts, 1)
    assert pr.n_gt == 1
    assert pr.ap == 1.0


def test_mean_ap():
    assert mean_ap([1, 1, 1]) == 1.0
    assert mean_ap([1, 0]) == 0.5
    assert mean_ap([0.2, 0.4, 0.9]) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        mean_ap([])


def test_evaluate_per_class():
    gts = {0: ann([[0.1, 0.1, 0.5, 0.5], [0.6, 0.6, 0.9, 0.9]], [1, 2])}
    dets = [(0, 1, 0.9, [0.1, 0.1, 0.5, 0.5])]
    aps, m = evaluate(dets, gts, [1, 2])
    assert aps == {1: 1.0, 2: 0.0} and m == 0.5


def test_eval_config_validation():
    with pytest.raises(ValueError):
        EvalConfig(interpolation="coco")
    with pytest.raises(ValueError):
        EvalConfig(iou_threshold=0)
