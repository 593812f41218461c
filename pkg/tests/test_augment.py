import numpy as np
import pytest

from selfevoc.augment import AugmentConfig, augment_sample, build_augmented_set
from selfevoc.cleaning import CleaningResult, Region
from selfevoc.numerics import ContractError
from selfevoc.selection import SelectionSet

SHAPE = (8, 8, 1)


def image(seed=0):
    return np.random.default_rng(seed).random(64)


def graded(indices, regions):
    return CleaningResult(np.asarray(indices), np.asarray(regions), np.zeros((len(indices), 2)), None)


def selection(*groups):
    groups = [np.asarray(g, dtype=np.int64) for g in groups]
    return SelectionSet(groups, [np.ones(len(g)) for g in groups],
                        np.zeros(10, dtype=np.int64), [])


def test_count_zero():
    assert augment_sample(image(), SHAPE, 0, 1).shape == (0, 64)


def test_identity_transform():
    cfg = AugmentConfig(rotation_deg=0, shift_px=0, noise_sd=0)
    out = augment_sample(image(), SHAPE, 3, 1, cfg)
    np.testing.assert_array_equal(out, np.tile(image(), (3, 1)))


def test_zero_image_stays_near_zero():
    out = augment_sample(np.zeros(64), SHAPE, 50, 2)
    assert out.min() >= 0 and out.max() <= 1
    assert np.mean(out <= 3 * 0.02) >= 0.99


def test_pure_shift_matches_roll():
    img = np.zeros((8, 8))
    img[3, 4] = 1.0
    from selfevoc.augment import _warp
    out = _warp(img[:, :, None], 0.0, np.array([1.0, -2.0]))[:, :, 0]
    assert out[4, 2] == pytest.approx(1.0)


def test_rotation_90_degrees():
    from selfevoc.augment import _warp
    img = np.arange(16.0).reshape(4, 4, 1) / 16
    out = _warp(img, 90.0, np.zeros(2))[:, :, 0]
    # a quarter turn permutes pixels exactly; compare against numpy's rot90 either way
    assert np.allclose(out, np.rot90(img[:, :, 0], 1)) or np.allclose(out, np.rot90(img[:, :, 0], -1))


def test_noise_only_without_shape():
    with pytest.warns(UserWarning):
        out = augment_sample(np.full(5, 0.5), None, 4, 0)
    assert out.shape == (4, 5) and np.all(np.abs(out - 0.5) < 0.2)


def test_negative_count():
    with pytest.raises(ContractError):
        augment_sample(image(), SHAPE, -1, 0)


def test_region_sizes():
    X = np.stack([image(i) for i in range(4)])
    sel = selection([0, 1, 2, 3])
    g = graded([0, 1, 2, 3], [Region.A1, Region.A2, Region.A3, Region.REMOVED])
    aug = build_augmented_set(X, SHAPE, sel, [g], seed=0)
    counts = np.bincount(aug.sources, minlength=4)
    np.testing.assert_array_equal(counts, [6, 4, 2, 0])
    assert np.all(aug.labels == 0)
    assert aug.samples.min() >= 0 and aug.samples.max() <= 1
    originals = np.isnan(aug.transforms[:, 0])
    np.testing.assert_array_equal(aug.samples[originals], X[:3])


def test_base_count_two_single_a3():
    X = np.stack([image(i) for i in range(3)])
    g = graded([0, 1, 2], [Region.REMOVED, Region.A3, Region.REMOVED])
    aug = build_augmented_set(X, SHAPE, selection([0, 1, 2]), [g], 0, AugmentConfig(base_count=2))
    assert len(aug) == 3


def test_base_count_zero_originals_only():
    X = np.stack([image(i) for i in range(3)])
    sel = selection([0], [1, 2])
    gs = [graded([0], [Region.A1]), graded([2, 1], [Region.A2, Region.A3])]
    aug = build_augmented_set(X, SHAPE, sel, gs, 0, AugmentConfig(base_count=0))
    np.testing.assert_array_equal(aug.sources, [0, 2, 1])
    np.testing.assert_array_equal(aug.labels, [0, 1, 1])


def test_labels_follow_cluster_and_determinism():
    X = np.stack([image(i) for i in range(6)])
    sel = selection([0, 1, 2], [3, 4, 5])
    gs = [graded([0, 1, 2], [1, 2, 3]), graded([3, 4, 5], [3, 1, 0])]
    a = build_augmented_set(X, SHAPE, sel, gs, seed=5)
    b = build_augmented_set(X, SHAPE, sel, gs, seed=5)
    assert a.samples.tobytes() == b.samples.tobytes()
    assert np.array_equal(a.transforms, b.transforms, equal_nan=True)
    owner = {0: 0, 1: 0, 2: 0, 3: 1, 4: 1, 5: 1}
    assert all(owner[s] == lab for s, lab in zip(a.sources, a.labels))
    valid = ~np.isnan(a.transforms[:, 0])
    assert np.all(np.abs(a.transforms[valid, 0]) <= 15)
    assert np.all(np.abs(a.transforms[valid, 1:]) <= 2)


def test_coverage_mismatch_and_empty():
    X = np.stack([image(i) for i in range(2)])
    with pytest.raises(ContractError):
        build_augmented_set(X, SHAPE, selection([0, 1]), [graded([0], [1])], 0)
    with pytest.raises(ContractError):
        build_augmented_set(X, SHAPE, selection([0]), [graded([0], [Region.REMOVED])], 0)
