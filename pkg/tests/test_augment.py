import numpy as np
import pytest

from tinyssd.augment import (
    RANDOM, WHOLE, AugmentConfig, augment_pipeline, expand_canvas, hflip, mean_object_scale,
    patch_within_limits, photometric, resize, sample_patch, sample_rng,
)
from tinyssd.dataio import ImageSample
from tinyssd.geometry import iou_matrix
from tinyssd.tinynet.synth import synth_dataset


@pytest.fixture(scope="module")
def dataset():
    return synth_dataset(11, 200)


def make_sample(boxes, labels=None, size=(40, 60)):
    rng = np.random.default_rng(0)
    boxes = np.array(boxes, float)
    labels = np.arange(1, len(boxes) + 1) if labels is None else labels
    return ImageSample(rng.uniform(size=size + (3,)).astype(np.float32), boxes, labels)


def test_whole_option_is_identity():
    s = make_sample([[0.1, 0.1, 0.5, 0.5]])
    out, p = sample_patch(s, AugmentConfig(), sample_rng(0), option=WHOLE, return_param=True)
    assert np.array_equal(out.pixels, s.pixels) and np.array_equal(out.boxes, s.boxes)
    assert p["option"] == WHOLE


def test_full_image_gt_high_constraint():
    s = make_sample([[0.0, 0.0, 1.0, 1.0]])
    cfg = AugmentConfig()
    for i in range(200):
        out, p = sample_patch(s, cfg, sample_rng(1, i), option=0.9, return_param=True)
        if p["option"] != WHOLE:
            assert iou_matrix(p["patch"], s.boxes)[0, 0] >= 0.9


def test_gt_with_center_outside_dropped():
    s = make_sample([[0.0, 0.0, 0.2, 0.2], [0.6, 0.6, 1.0, 1.0]])
    cfg = AugmentConfig()
    seen = 0
    for i in range(300):
        out, p = sample_patch(s, cfg, sample_rng(2, i), option=RANDOM, return_param=True)
        patch = p["patch"]
        centers = (s.boxes[:, :2] + s.boxes[:, 2:]) / 2
        inside = np.all((centers > patch[:2]) & (centers < patch[2:]), axis=1)
        assert sorted(out.labels.tolist()) == sorted(s.labels[inside].tolist())
        seen += int((~inside).any())
    assert seen > 0


def test_crop_boxes_renormalized():
    s = make_sample([[0.2, 0.2, 0.6, 0.6]])
    cfg = AugmentConfig()
    for i in range(50):
        out, p = sample_patch(s, cfg, sample_rng(3, i), option=0.1, return_param=True)
        if p["option"] == WHOLE:
            continue
        patch = p["patch"]
        clipped = np.clip(s.boxes[0], np.tile(patch[:2], 2), np.tile(patch[2:], 2))
        size = np.tile(patch[2:] - patch[:2], 2)
        np.testing.assert_allclose(out.boxes[0], (clipped - np.tile(patch[:2], 2)) / size, atol=1e-12)
        h, w = s.size
        assert out.pixels.shape[:2] == (round((patch[3] - patch[1]) * h), round((patch[2] - patch[0]) * w))


def test_no_gts_falls_back_to_whole():
    s = ImageSample(np.zeros((10, 10, 3), np.float32))
    out, p = sample_patch(s, AugmentConfig(), sample_rng(0), option=0.5, return_param=True)
    assert out.pixels.shape == (10, 10, 3) and p["patch"].tolist() == [0, 0, 1, 1]


def test_expand_ratio_one_identity():
    s = make_sample([[0.1, 0.2, 0.3, 0.4]])
    out = expand_canvas(s, AugmentConfig(), sample_rng(0), ratio=1.0)
    assert np.array_equal(out.pixels, s.pixels)
    np.testing.assert_allclose(out.boxes, s.boxes)


def test_expand_ratio_four_top_left():
    s = make_sample([[0.0, 0.0, 1.0, 1.0]], size=(10, 10))
    out = expand_canvas(s, AugmentConfig(mean_fill=0.5), sample_rng(0), ratio=4.0, offset=(0, 0))
    assert out.pixels.shape == (40, 40, 3)
    np.testing.assert_allclose(out.boxes, [[0, 0, 0.25, 0.25]])
    assert np.all(out.pixels[10:] == 0.5) and np.all(out.pixels[:, 10:] == 0.5)


def test_expand_random_fill_and_boxes():
    s = make_sample([[0.1, 0.2, 0.3, 0.4]], size=(16, 16))
    for i in range(50):
        out = expand_canvas(s, AugmentConfig(mean_fill=(0.25, 0.5, 0.75)), sample_rng(5, i))
        h, w = out.size
        assert 16 <= h <= 64 and 16 <= w <= 64
        mask = np.ones((h, w), bool)
        # locate the original by the box position
        x0 = int(round(out.boxes[0, 0] * w - 0.1 * 16))
        y0 = int(round(out.boxes[0, 1] * h - 0.2 * 16))
        np.testing.assert_array_equal(out.pixels[y0:y0 + 16, x0:x0 + 16], s.pixels)
        mask[y0:y0 + 16, x0:x0 + 16] = False
        np.testing.assert_array_equal(out.pixels[mask], np.tile([0.25, 0.5, 0.75], (mask.sum(), 1)))


def test_hflip():
    s = make_sample([[0.1, 0.2, 0.4, 0.6]])
    out = hflip(s, sample_rng(0), prob=1.0)
    np.testing.assert_allclose(out.boxes, [[0.6, 0.2, 0.9, 0.6]])
    np.testing.assert_array_equal(out.pixels, s.pixels[:, ::-1])
    back = hflip(out, sample_rng(0), prob=1.0)
    np.testing.assert_allclose(back.boxes, s.boxes)
    np.testing.assert_array_equal(back.pixels, s.pixels)
    same = hflip(s, sample_rng(0), prob=0.0)
    np.testing.assert_array_equal(same.pixels, s.pixels)


def test_photometric():
    s = ImageSample(np.full((4, 4, 3), 0.5, np.float32))
    np.testing.assert_array_equal(photometric(s, sample_rng(0), brightness=0.0, contrast=1.0).pixels, s.pixels)
    np.testing.assert_allclose(photometric(s, sample_rng(0), brightness=0.1, contrast=1.0).pixels, 0.6, atol=1e-6)
    rnd = make_sample([[0.1, 0.1, 0.2, 0.2]])
    for i in range(20):
        out = photometric(rnd, sample_rng(9, i))
        assert out.pixels.min() >= 0 and out.pixels.max() <= 1
        np.testing.assert_array_equal(out.boxes, rnd.boxes)


def test_pipeline_identity_path():
    s = make_sample([[0.1, 0.2, 0.5, 0.6]], size=(32, 32))
    # every crop option degenerates to the whole image; photometric is neutral
    cfg = AugmentConfig(min_jaccard_options=(), patch_area_range=(0.999, 1.0), flip_prob=0.0,
                        brightness_delta=0.0, contrast_range=(1.0, 1.0 + 1e-12), expand_prob=0.0)
    for i in range(20):
        piped = augment_pipeline(s, cfg, sample_rng(0, i), 16)
        np.testing.assert_allclose(piped.pixels, resize(s, 16).pixels, atol=1e-6)
        np.testing.assert_array_equal(piped.boxes, s.boxes)


def test_pipeline_invariants(dataset):
    cfg = AugmentConfig()
    for i in range(2000):
        s = dataset[i % len(dataset)]
        out = augment_pipeline(s, cfg, sample_rng(4, i), 64)
        assert out.pixels.shape == (64, 64, 3)
        b = out.boxes
        assert np.all((b >= 0) & (b <= 1))
        assert np.all(b[:, 2] > b[:, 0]) and np.all(b[:, 3] > b[:, 1])


def test_pipeline_deterministic(dataset):
    cfg = AugmentConfig()
    a = augment_pipeline(dataset[0], cfg, sample_rng(7, 0), 64)
    b = augment_pipeline(dataset[0], cfg, sample_rng(7, 0), 64)
    assert a.pixels.tobytes() == b.pixels.tobytes() and a.boxes.tobytes() == b.boxes.tobytes()


def test_expansion_shrinks_objects(dataset):
    cfg = AugmentConfig()
    with_exp = [augment_pipeline(dataset[i % 200], cfg, sample_rng(8, i), 64, expand=True) for i in range(3000)]
    without = [augment_pipeline(dataset[i % 200], cfg, sample_rng(8, i), 64, expand=False) for i in range(3000)]
    assert mean_object_scale(with_exp) < mean_object_scale(without)


def test_patch_limits():
    cfg = AugmentConfig()
    assert patch_within_limits(np.array([0, 0, 1, 1.0]), cfg)
    assert not patch_within_limits(np.array([0, 0, 0.2, 0.2]), cfg)
    assert not patch_within_limits(np.array([0, 0, 1, 0.4]), cfg)


def test_config_validation():
    with pytest.raises(ValueError):
        AugmentConfig(flip_prob=1.5)
    with pytest.raises(ValueError):
        AugmentConfig(patch_area_range=(0.5, 0.1))
