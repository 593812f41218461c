import gzip
import struct

import numpy as np
import pytest

from selfevoc import metrics
from selfevoc.dataset import (Dataset, DatasetError, load_csv, load_idx, save_csv, subsample,
                              synth_blobs)


def write_idx_images(path, pixels, compress=False):
    n, h, w = pixels.shape
    payload = struct.pack(">IIII", 0x00000803, n, h, w) + pixels.astype(np.uint8).tobytes()
    opener = gzip.open if compress else open
    with opener(path, "wb") as f:
        f.write(payload)


def write_idx_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)) + np.asarray(labels, np.uint8).tobytes())


@pytest.mark.parametrize("compress", [False, True])
def test_idx_two_tiny_images(tmp_path, compress):
    pix = np.array([[[0, 255], [128, 1]], [[255, 255], [0, 0]]], dtype=np.uint8)
    write_idx_images(tmp_path / "img", pix, compress)
    write_idx_labels(tmp_path / "lab", [3, 7])
    ds = load_idx(tmp_path / "img", tmp_path / "lab")
    assert ds.samples.shape == (2, 4)
    assert ds.image_shape == (2, 2, 1)
    np.testing.assert_array_equal(ds.samples, pix.reshape(2, 4) / 255.0)
    assert ds.samples[0, 0] == 0.0 and ds.samples[0, 1] == 1.0
    np.testing.assert_array_equal(ds.true_labels, [3, 7])


def test_idx_empty_file(tmp_path):
    (tmp_path / "empty").write_bytes(b"")
    with pytest.raises(DatasetError):
        load_idx(tmp_path / "empty")


def test_idx_bad_magic(tmp_path):
    # label-file magic where an image file is expected
    (tmp_path / "bad").write_bytes(struct.pack(">IIII", 0x0801, 1, 1, 1) + b"\x00")
    with pytest.raises(DatasetError, match="magic"):
        load_idx(tmp_path / "bad")


def test_idx_truncated(tmp_path):
    pix = np.zeros((3, 2, 2), dtype=np.uint8)
    write_idx_images(tmp_path / "img", pix)
    raw = (tmp_path / "img").read_bytes()
    (tmp_path / "img").write_bytes(raw[:-1])
    with pytest.raises(DatasetError, match="truncated"):
        load_idx(tmp_path / "img")


def test_idx_label_count_mismatch(tmp_path):
    write_idx_images(tmp_path / "img", np.zeros((3, 2, 2), dtype=np.uint8))
    write_idx_labels(tmp_path / "lab", [0, 1])
    with pytest.raises(DatasetError, match="mismatch"):
        load_idx(tmp_path / "img", tmp_path / "lab")


def test_bundled_mnist_subset(mnist5k):
    assert mnist5k.samples.shape == (5000, 784)
    assert mnist5k.image_shape == (28, 28, 1)
    assert mnist5k.samples.min() >= 0 and mnist5k.samples.max() <= 1
    assert np.bincount(mnist5k.true_labels).tolist() == [500] * 10


def test_csv_round_trip_is_bit_exact(tmp_path):
    ds = synth_blobs(3, 20, 5, 0.3, 0.05, seed=4)
    save_csv(ds, tmp_path / "d.csv")
    back = load_csv(tmp_path / "d.csv")
    np.testing.assert_array_equal(back.samples, ds.samples)
    np.testing.assert_array_equal(back.true_labels, ds.true_labels)


def test_csv_byte_pixels_are_scaled(tmp_path):
    (tmp_path / "p.csv").write_text("0,255,51,1\n255,0,0,0\n")
    ds = load_csv(tmp_path / "p.csv")
    np.testing.assert_allclose(ds.samples[0], [0, 1, 0.2])
    np.testing.assert_array_equal(ds.true_labels, [1, 0])


def test_csv_empty(tmp_path):
    (tmp_path / "e.csv").write_text("")
    with pytest.raises(DatasetError):
        load_csv(tmp_path / "e.csv")


def test_dataset_rejects_out_of_range():
    with pytest.raises(DatasetError):
        Dataset(np.array([[1.5]]))
    with pytest.raises(DatasetError):
        Dataset(np.zeros((1, 4)), image_shape=(3, 1, 1))


def test_blobs_single_noiseless_cluster_is_constant():
    ds = synth_blobs(1, 10, 4, sep=0.5, noise_sd=0.0, seed=0)
    assert np.all(ds.samples == ds.samples[0])


def test_blobs_balanced_labels():
    ds = synth_blobs(3, 100, 8, 0.3, 0.03, seed=0)
    assert ds.n == 300
    assert np.bincount(ds.true_labels).tolist() == [100, 100, 100]
    assert 0 <= ds.samples.min() and ds.samples.max() <= 1
    c = ds.meta["centers"]
    assert min(np.linalg.norm(c[i] - c[j]) for i in range(3) for j in range(i)) >= 0.3


def lloyd_kmeans(X, K, seed, iters=100):
    # independent oracle: plain Lloyd iterations with farthest-point seeding
    rng = np.random.default_rng(seed)
    centers = [X[rng.integers(len(X))]]
    for _ in range(1, K):
        d = np.min([np.sum((X - c) ** 2, axis=1) for c in centers], axis=0)
        centers.append(X[np.argmax(d)])
    centers = np.array(centers)
    for _ in range(iters):
        lab = np.argmin(((X[:, None] - centers[None]) ** 2).sum(-1), axis=1)
        centers = np.array([X[lab == k].mean(0) for k in range(K)])
    return lab


def test_blobs_separated_enough_for_kmeans():
    ds = synth_blobs(3, 100, 10, sep=0.3, noise_sd=0.03, seed=2)
    assert metrics.acc(lloyd_kmeans(ds.samples, 3, 0), ds.true_labels) == 1.0


def test_blobs_infeasible_packing():
    with pytest.raises(DatasetError, match="cannot place"):
        synth_blobs(50, 2, 1, sep=0.5, noise_sd=0.01, seed=0)


def test_subsample_identity_and_determinism(mnist5k):
    assert subsample(mnist5k, mnist5k.n) is mnist5k
    a = subsample(mnist5k, 300, seed=3)
    b = subsample(mnist5k, 300, seed=3)
    np.testing.assert_array_equal(a.meta["indices"], b.meta["indices"])


def test_subsample_balanced(mnist5k):
    sub = subsample(mnist5k, 1000, balanced=True, seed=0)
    assert np.bincount(sub.true_labels).tolist() == [100] * 10
    assert sub.image_shape == (28, 28, 1)


def test_subsample_balanced_without_labels():
    ds = Dataset(np.zeros((10, 2)))
    with pytest.raises(DatasetError):
        subsample(ds, 4, balanced=True)
