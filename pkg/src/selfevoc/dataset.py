"""Dataset loading (IDX, CSV), synthetic blobs and subsampling."""
from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .numerics import make_rng

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    samples: np.ndarray
    image_shape: tuple[int, int, int] | None = None
    true_labels: np.ndarray | None = None
    name: str = "dataset"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim != 2:
            raise DatasetError(f"samples must be N x D, got shape {x.shape}")
        if x.size and (x.min() < 0.0 or x.max() > 1.0):
            raise DatasetError("sample values must lie in [0, 1]")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        if self.image_shape is not None:
            shape = tuple(int(s) for s in self.image_shape)
            if len(shape) != 3 or int(np.prod(shape)) != x.shape[1]:
                raise DatasetError(f"image_shape {shape} does not match D={x.shape[1]}")
            object.__setattr__(self, "image_shape", shape)
        if self.true_labels is not None:
            y = np.asarray(self.true_labels, dtype=np.int64)
            if y.shape != (x.shape[0],):
                raise DatasetError("true_labels length must equal sample count")
            if y.size and y.min() < 0:
                raise DatasetError("labels must be non-negative")
            y.setflags(write=False)
            object.__setattr__(self, "true_labels", y)

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]


def _read_bytes(path) -> bytes:
    path = Path(path)
    with open(path, "rb") as f:
        head = f.read(2)
    opener = gzip.open if head == b"\x1f\x8b" else open
    with opener(path, "rb") as f:
        return f.read()


def _parse_idx(raw: bytes, magic: int, path) -> tuple[tuple[int, ...], np.ndarray]:
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < 4:
        raise DatasetError(f"{path}: file too short for an IDX header")
    (found,) = struct.unpack(">I", raw[:4])
    if found != magic:
        raise DatasetError(f"{path}: bad magic number 0x{found:08x}, expected 0x{magic:08x}")
    if len(raw) < header:
        raise DatasetError(f"{path}: truncated IDX header")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    count = int(np.prod(dims))
    if len(raw) - header < count:
        raise DatasetError(f"{path}: truncated payload ({len(raw) - header} of {count} bytes)")
    data = np.frombuffer(raw, dtype=np.uint8, count=count, offset=header)
    return dims, data


def read_idx_labels(path) -> np.ndarray:
    _, data = _parse_idx(_read_bytes(path), IDX_LABELS_MAGIC, path)
    return data.astype(np.int64)


def load_idx(images_path, labels_path=None, name: str | None = None) -> Dataset:
    """Load an IDX image file (optionally gzipped) with optional labels.

    Pixels are scaled by 1/255.
    """
    dims, data = _parse_idx(_read_bytes(images_path), IDX_IMAGES_MAGIC, images_path)
    n, h, w = dims
    samples = data.reshape(n, h * w).astype(np.float64) / 255.0
    labels = None
    if labels_path is not None:
        labels = read_idx_labels(labels_path)
        if len(labels) != n:
            raise DatasetError(f"image/label count mismatch: {n} images, {len(labels)} labels")
    return Dataset(samples, (h, w, 1), labels, name or Path(images_path).name)


def load_csv(path, has_labels: bool = True, image_shape=None, scale: float | None = None,
             name: str | None = None) -> Dataset:
    """One sample per row, optional integer label in the last column, no header.

    ``scale`` defaults to 255 when any value exceeds 1 (byte pixels), else 1.
    """
    if not Path(path).read_text().strip():
        raise DatasetError(f"{path}: empty file")
    try:
        table = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise DatasetError(f"{path}: {exc}") from exc
    if table.size == 0:
        raise DatasetError(f"{path}: empty file")
    labels = None
    if has_labels:
        labels = table[:, -1]
        if not np.all(labels == np.round(labels)):
            raise DatasetError(f"{path}: last column is not integer-valued")
        labels = labels.astype(np.int64)
        table = table[:, :-1]
    if scale is None:
        scale = 255.0 if table.max() > 1.0 else 1.0
    return Dataset(table / scale, image_shape, labels, name or Path(path).name)


def save_csv(ds: Dataset, path) -> None:
    """Write ``ds`` in the CSV layout read by :func:`load_csv` (``repr`` floats, lossless)."""
    with open(path, "w") as f:
        for i, row in enumerate(ds.samples):
            cells = [repr(float(v)) for v in row]
            if ds.true_labels is not None:
                cells.append(str(int(ds.true_labels[i])))
            f.write(",".join(cells) + "\n")


def synth_blobs(K: int, n_per: int, dim: int, sep: float, noise_sd: float, seed: int,
                max_tries: int = 10000) -> Dataset:
    """Isotropic Gaussian clusters in [0, 1]^dim with pairwise center spacing >= sep."""
    if K < 1 or n_per < 1 or dim < 1:
        raise DatasetError("K, n_per and dim must be >= 1")
    if sep <= 0 or noise_sd < 0:
        raise DatasetError("sep must be > 0 and noise_sd >= 0")
    rng = make_rng(seed)
    # Keep centers 2 sd inside the box so clipping rarely bites.
    margin = min(2.0 * noise_sd, 0.25)
    centers: list[np.ndarray] = []
    tries = 0
    while len(centers) < K:
        tries += 1
        if tries > max_tries:
            raise DatasetError(f"cannot place {K} centers {sep} apart in [0,1]^{dim}")
        c = rng.uniform(margin, 1.0 - margin, size=dim)
        if all(np.linalg.norm(c - o) >= sep for o in centers):
            centers.append(c)
    centers_arr = np.array(centers)
    labels = np.repeat(np.arange(K), n_per)
    samples = centers_arr[labels] + noise_sd * rng.standard_normal((K * n_per, dim))
    samples = np.clip(samples, 0.0, 1.0)
    return Dataset(samples, None, labels, f"blobs-k{K}-n{n_per}-d{dim}",
                   meta={"centers": centers_arr})


def subsample(ds: Dataset, n: int, balanced: bool = False, seed: int = 0) -> Dataset:
    """Draw ``n`` samples without replacement; ``balanced`` draws n/C per true class."""
    if n > ds.n:
        raise DatasetError(f"cannot draw {n} of {ds.n} samples")
    if n == ds.n and not balanced:
        return ds
    rng = make_rng(seed)
    if balanced:
        if ds.true_labels is None:
            raise DatasetError("balanced subsampling needs true labels")
        classes = np.unique(ds.true_labels)
        per, rem = divmod(n, len(classes))
        if rem:
            raise DatasetError(f"n={n} is not divisible by {len(classes)} classes")
        picks = []
        for c in classes:
            members = np.flatnonzero(ds.true_labels == c)
            if len(members) < per:
                raise DatasetError(f"class {c} has only {len(members)} samples, need {per}")
            picks.append(rng.choice(members, size=per, replace=False))
        idx = np.sort(np.concatenate(picks))
    else:
        idx = np.sort(rng.choice(ds.n, size=n, replace=False))
    labels = None if ds.true_labels is None else ds.true_labels[idx]
    return Dataset(ds.samples[idx], ds.image_shape, labels, f"{ds.name}[{n}]",
                   meta={"indices": idx})
