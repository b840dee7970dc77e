import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tinyssd.geometry import (
    area, center_to_corner, corner_to_center, decode, encode, iou, iou_matrix,
)


def test_iou_identical():
    assert iou([0, 0, 1, 1], [0, 0, 1, 1]) == 1.0


def test_iou_touching_corner():
    assert iou([0, 0, 0.5, 0.5], [0.5, 0.5, 1, 1]) == 0.0


def test_iou_half_shift():
    # intersection 0.5, union 1.5
    assert iou([0, 0, 1, 1], [0.5, 0, 1.5, 1]) == pytest.approx(1 / 3, abs=1e-15)


def test_iou_degenerate_pair_is_zero():
    assert iou([0.2, 0.2, 0.2, 0.2], [0.2, 0.2, 0.2, 0.2]) == 0.0


def test_iou_matrix_shape():
    assert iou_matrix(np.zeros((3, 4)), np.zeros((5, 4))).shape == (3, 5)


def test_corner_center_examples():
    np.testing.assert_array_equal(corner_to_center([0, 0, 1, 1]), [0.5, 0.5, 1, 1])
    np.testing.assert_allclose(corner_to_center([0.25, 0.25, 0.75, 0.75]), [0.5, 0.5, 0.5, 0.5])
    box = np.array([0.1, 0.2, 0.3, 0.6])
    np.testing.assert_allclose(center_to_corner(corner_to_center(box)), box, atol=1e-12)


def test_center_to_corner_rejects_nonpositive():
    with pytest.raises(ValueError):
        center_to_corner([0.5, 0.5, 0.0, 0.1])


def test_encode_identity():
    d = np.array([0.3, 0.4, 0.2, 0.1])
    np.testing.assert_array_equal(encode(d, d), np.zeros(4))


@pytest.mark.parametrize(
    "d, g, t",
    [
        ([0.5, 0.5, 0.2, 0.2], [0.55, 0.5, 0.4, 0.2], [0.25, 0.0, math.log(2), 0.0]),
        ([0.5, 0.5, 0.1, 0.4], [0.45, 0.6, 0.1, 0.2], [-0.5, 0.25, 0.0, math.log(0.5)]),
    ],
)
def test_encode_examples(d, g, t):
    np.testing.assert_allclose(encode(g, d), t, atol=1e-12)


def test_encode_rejects_zero_size():
    with pytest.raises(ValueError):
        encode([0.5, 0.5, 0.0, 0.2], [0.5, 0.5, 0.2, 0.2])


def test_decode_examples():
    d = np.array([0.5, 0.5, 0.2, 0.2])
    np.testing.assert_allclose(decode(np.zeros(4), d), d)
    np.testing.assert_allclose(decode([0.25, 0, math.log(2), 0], d), [0.55, 0.5, 0.4, 0.2], atol=1e-12)


def test_variances_round_trip():
    d = np.array([0.5, 0.5, 0.2, 0.2])
    g = np.array([0.55, 0.45, 0.3, 0.1])
    t = encode(g, d, variances=(0.1, 0.2))
    np.testing.assert_allclose(t[0], 2.5)
    np.testing.assert_allclose(decode(t, d, variances=(0.1, 0.2)), g)


def test_encode_decode_roundtrip_random():
    rng = np.random.default_rng(0)
    n = 10_000
    g = np.column_stack([rng.uniform(0, 1, (n, 2)), rng.uniform(0.01, 1, (n, 2))])
    d = np.column_stack([rng.uniform(0, 1, (n, 2)), rng.uniform(0.01, 1, (n, 2))])
    assert np.abs(decode(encode(g, d), d) - g).max() < 1e-6


boxes = st.tuples(
    st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1)
).map(lambda t: [min(t[0], t[2]), min(t[1], t[3]), max(t[0], t[2]), max(t[1], t[3])])


@settings(max_examples=300)
@given(boxes, boxes)
def test_iou_properties(a, b):
    ab, ba = iou(a, b), iou(b, a)
    assert ab == pytest.approx(ba, abs=1e-12)
    assert 0.0 <= ab <= 1.0
    aa, bb = area(np.array(a)), area(np.array(b))
    if aa > 1e-9 and bb > 1e-9:
        assert iou(a, a) == pytest.approx(1.0)
        assert ab <= min(aa, bb) / max(aa, bb) + 1e-9
