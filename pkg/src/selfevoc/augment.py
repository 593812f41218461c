"""Rotation / translation / noise augmentation of selected samples.

Each selected sample is copied according to its ellipse region (5:3:1 times
a base count for A1:A2:A3); removed samples are dropped entirely.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import affine_transform

from .cleaning import Region
from .numerics import ContractError, make_rng

REGION_MULTIPLIER = {Region.A1: 5, Region.A2: 3, Region.A3: 1, Region.REMOVED: 0}


@dataclass(frozen=True)
class AugmentConfig:
    rotation_deg: float = 15.0
    shift_px: float = 2.0
    noise_sd: float = 0.02
    base_count: int = 1


@dataclass
class AugmentedSet:
    samples: np.ndarray
    labels: np.ndarray
    sources: np.ndarray      # originating sample index per row
    transforms: np.ndarray   # (angle_deg, shift_row, shift_col); NaN for originals

    def __len__(self) -> int:
        return len(self.labels)


def _warp(img: np.ndarray, angle_deg: float, shift: np.ndarray) -> np.ndarray:
    """Rotate about the image center, then translate; bilinear, zero fill."""
    h, w, c = img.shape
    theta = np.deg2rad(angle_deg)
    cos, sin = np.cos(theta), np.sin(theta)
    # maps output (row, col) back to input coordinates
    inv = np.array([[cos, -sin], [sin, cos]])
    mid = np.array([(h - 1) / 2.0, (w - 1) / 2.0])
    offset = mid - inv @ (mid + shift)
    out = np.empty_like(img)
    for ch in range(c):
        out[:, :, ch] = affine_transform(img[:, :, ch], inv, offset=offset, order=1,
                                         mode="constant", cval=0.0)
    return out


def augment_sample(x, image_shape, count: int, seed, cfg: AugmentConfig = AugmentConfig(),
                   return_params: bool = False):
    """``count`` perturbed copies of one flattened sample.

    Without ``image_shape`` only the additive noise is applied.
    """
    if count < 0:
        raise ContractError("count must be >= 0")
    x = np.asarray(x, dtype=np.float64)
    rng = make_rng(seed)
    copies = np.empty((count, x.size))
    params = np.zeros((count, 3))
    if image_shape is None and count:
        warnings.warn("no image shape; augmenting with noise only", stacklevel=2)
    img = None if image_shape is None else x.reshape(image_shape)
    for k in range(count):
        if img is not None:
            angle = rng.uniform(-cfg.rotation_deg, cfg.rotation_deg)
            shift = rng.uniform(-cfg.shift_px, cfg.shift_px, size=2)
            params[k] = angle, shift[0], shift[1]
            if angle == 0.0 and not shift.any():
                y = x.copy()
            else:
                y = _warp(img, angle, shift).reshape(-1)
        else:
            y = x.copy()
        if cfg.noise_sd > 0:
            y = y + cfg.noise_sd * rng.standard_normal(x.size)
        copies[k] = np.clip(y, 0.0, 1.0)
    return (copies, params) if return_params else copies


def build_augmented_set(samples, image_shape, selection, graded, seed: int,
                        cfg: AugmentConfig = AugmentConfig()) -> AugmentedSet:
    """Assemble originals plus region-weighted copies for classifier training.

    ``graded`` holds one entry per cluster with ``indices`` and ``regions``
    arrays covering exactly that cluster's selected samples.
    """
    samples = np.asarray(samples, dtype=np.float64)
    rows, labels, sources, transforms = [], [], [], []
    nan3 = np.full((1, 3), np.nan)
    with warnings.catch_warnings():
        if image_shape is None:
            warnings.simplefilter("ignore")
        for label, (chosen, g) in enumerate(zip(selection.indices, graded)):
            if set(np.asarray(g.indices).tolist()) != set(np.asarray(chosen).tolist()):
                raise ContractError(f"regions do not cover the selection of cluster {label}")
            for idx, region in zip(g.indices, g.regions):
                copies = REGION_MULTIPLIER[Region(int(region))] * cfg.base_count
                if region == Region.REMOVED:
                    continue
                aug, params = augment_sample(samples[idx], image_shape, copies,
                                             (seed, int(idx)), cfg, return_params=True)
                rows += [samples[idx][None, :], aug]
                transforms += [nan3, params]
                labels.append(np.full(copies + 1, label, dtype=np.int64))
                sources.append(np.full(copies + 1, idx, dtype=np.int64))
    if not labels:
        raise ContractError("augmented set is empty; nothing to train the classifier on")
    return AugmentedSet(np.concatenate(rows), np.concatenate(labels),
                        np.concatenate(sources), np.concatenate(transforms))
