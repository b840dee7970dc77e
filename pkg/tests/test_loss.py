import math

import numpy as np
import pytest

from oracles import brute_multibox_loss
from tinyssd.gradcheck import finite_difference, max_rel_error, random_loss_instance
from tinyssd.loss import (
    conf_loss, hard_negative_select, loc_loss, multibox_loss, smooth_l1, smooth_l1_grad,
)
from tinyssd.matching import empty_assignment


def assignment_with(labels, targets=None):
    a = empty_assignment(len(labels))
    a.labels[:] = labels
    if targets is not None:
        a.targets[:] = targets
    return a


@pytest.mark.parametrize("x, y", [(0.0, 0.0), (1.0, 0.5), (-3.0, 2.5), (0.5, 0.125)])
def test_smooth_l1_values(x, y):
    assert smooth_l1(x) == pytest.approx(y)


def test_smooth_l1_grad():
    np.testing.assert_array_equal(smooth_l1_grad([-3.0, -0.5, 0.0, 0.25, 2.0]), [-1, -0.5, 0, 0.25, 1])


def test_conf_loss_uniform_logits():
    a = assignment_with([2])
    loss, grad = conf_loss(np.zeros((1, 4)), a, [])
    assert loss == pytest.approx(math.log(4))
    np.testing.assert_allclose(grad, [[0.25, 0.25, -0.75, 0.25]])


def test_conf_loss_saturated():
    a = assignment_with([1])
    loss, _ = conf_loss(np.array([[0.0, 800.0]]), a, [])
    assert loss == pytest.approx(0.0, abs=1e-300)


def test_conf_loss_selected_negative():
    a = assignment_with([1, 0])
    conf = np.array([[0.0, 1000.0], [0.0, 0.0]])
    loss, grad = conf_loss(conf, a, [1])
    assert loss == pytest.approx(math.log(2))
    np.testing.assert_allclose(grad[1], [-0.5, 0.5])


def test_conf_loss_rejects_positive_negative_overlap():
    with pytest.raises(ValueError):
        conf_loss(np.zeros((2, 2)), assignment_with([1, 0]), [0])


@pytest.mark.parametrize("diff, expected", [((0.0, 0, 0, 0), 0.0), ((0.5, 0, 0, 0), 0.125), ((2.0, 0, 0, 0), 1.5)])
def test_loc_loss(diff, expected):
    a = assignment_with([1, 0], [[0.1, 0.2, 0.3, 0.4], [0, 0, 0, 0]])
    loc = a.targets.copy()
    loc[0] += diff
    loc[1] = 5.0  # negatives never contribute
    loss, grad = loc_loss(loc, a)
    assert loss == pytest.approx(expected)
    assert np.all(grad[1] == 0)


def test_hard_negative_budget():
    rng = np.random.default_rng(0)
    labels = np.zeros(102, dtype=int)
    labels[:2] = 1
    conf = rng.normal(size=(102, 3))
    sel = hard_negative_select(conf, assignment_with(labels))
    assert len(sel) == 6
    bg = -(conf[:, 0] - np.log(np.exp(conf).sum(axis=1)))
    neg_bg = bg[2:]
    assert set(sel) == set(2 + np.argsort(-neg_bg)[:6])


def test_hard_negative_saturates_and_empty():
    conf = np.zeros((3, 2))
    assert len(hard_negative_select(conf, assignment_with([1, 0, 0]))) == 2
    assert len(hard_negative_select(conf, assignment_with([0, 0, 0]))) == 0


def test_hard_negative_tie_break_lowest_index():
    sel = hard_negative_select(np.zeros((6, 2)), assignment_with([1, 0, 0, 0, 0, 0]))
    assert list(sel) == [1, 2, 3]


def test_no_positives_gives_zero_report():
    conf = np.random.default_rng(1).normal(size=(5, 3))
    r = multibox_loss(conf, np.ones((5, 4)), assignment_with([0] * 5))
    assert r.total == 0 and r.n_pos == 0
    assert not r.grad_conf.any() and not r.grad_loc.any()


def test_perfect_prediction_is_zero():
    a = assignment_with([1, 2, 0, 0], np.random.default_rng(2).normal(size=(4, 4)))
    a.targets[2:] = 0
    conf = np.full((4, 3), -500.0)
    conf[0, 1] = conf[1, 2] = 500.0
    conf[2:, 0] = 500.0
    r = multibox_loss(conf, a.targets.copy(), a)
    assert r.total == pytest.approx(0.0, abs=1e-12)


def test_rejects_non_finite():
    with pytest.raises(ValueError):
        multibox_loss(np.array([[np.nan, 0.0]]), np.zeros((1, 4)), assignment_with([1]))


def test_unselected_negative_rows_have_zero_gradient():
    rng = np.random.default_rng(4)
    labels = np.zeros(40, dtype=int)
    labels[:3] = 1
    a = assignment_with(labels, rng.normal(size=(40, 4)))
    r = multibox_loss(rng.normal(size=(40, 3)), rng.normal(size=(40, 4)), a)
    contributing = set(range(3)) | set(r.selected_negatives.tolist())
    for i in range(40):
        if i not in contributing:
            assert not r.grad_conf[i].any()
        if i >= 3:
            assert not r.grad_loc[i].any()
    assert len(r.selected_negatives) <= 3 * r.n_pos


def test_alpha_weighting():
    rng = np.random.default_rng(6)
    conf, loc, a = random_loss_instance(rng, 12, 3)
    r1 = multibox_loss(conf, loc, a, alpha=1.0)
    r2 = multibox_loss(conf, loc, a, alpha=2.0)
    assert r2.total == pytest.approx(r1.total + r1.l_loc / r1.n_pos)


def test_matches_brute_force_oracle():
    rng = np.random.default_rng(7)
    for _ in range(200):
        conf, loc, a = random_loss_instance(rng, int(rng.integers(1, 33)), int(rng.integers(1, 5)))
        r = multibox_loss(conf, loc, a)
        expected = brute_multibox_loss(conf.tolist(), loc.tolist(), a.labels.tolist(), a.targets.tolist())
        assert r.total == pytest.approx(expected, abs=1e-10, rel=0)


def test_permutation_invariance():
    rng = np.random.default_rng(8)
    conf, loc, a = random_loss_instance(rng, 20, 3)
    perm = rng.permutation(20)
    r = multibox_loss(conf, loc, a)
    rp = multibox_loss(conf[perm], loc[perm], a.subset(perm))
    assert rp.total == pytest.approx(r.total, rel=1e-12)


def test_batched_loss_pools_positive_count():
    rng = np.random.default_rng(9)
    c1, l1, a1 = random_loss_instance(rng, 10, 2)
    c2, l2, a2 = random_loss_instance(rng, 10, 2)
    r = multibox_loss(np.stack([c1, c2]), np.stack([l1, l2]), [a1, a2])
    s1 = multibox_loss(c1, l1, a1)
    s2 = multibox_loss(c2, l2, a2)
    n = a1.n_pos + a2.n_pos
    assert r.total == pytest.approx((s1.total * a1.n_pos + s2.total * a2.n_pos) / n)


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(10)
    for _ in range(20):
        conf, loc, a = random_loss_instance(rng, int(rng.integers(2, 17)), 3)
        r = multibox_loss(conf, loc, a)
        num_c = finite_difference(lambda c: multibox_loss(c, loc, a).total, conf)
        num_l = finite_difference(lambda l: multibox_loss(conf, l, a).total, loc)
        assert max_rel_error(r.grad_conf, num_c) < 1e-3
        assert max_rel_error(r.grad_loc, num_l) < 1e-3
