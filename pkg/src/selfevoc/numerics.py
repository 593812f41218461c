"""Small dense-math helpers shared by the learning modules.

Matrices are plain float64 numpy arrays. Random streams come from numpy's
PCG64 generator, which is bit-reproducible across platforms for a fixed seed.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

SYMMETRY_TOL = 1e-12
ISOTROPY_TOL = 1e-12


class ContractError(ValueError):
    """Raised when an input violates a documented precondition."""


def make_rng(seed: int | Sequence[int]) -> np.random.Generator:
    """Deterministic PCG64 stream.

    ``seed`` may be a tuple such as ``(master_seed, iteration, cluster)`` so
    independent sub-streams can be derived without sharing generator state.
    """
    if isinstance(seed, (int, np.integer)):
        seed = int(seed)
    else:
        seed = [int(s) for s in seed]
    return np.random.Generator(np.random.PCG64(seed))


def derive_seed(seed: int, *keys: int) -> int:
    """Independent 63-bit seed for a named sub-task, e.g. ``derive_seed(s, it, cluster)``."""
    state = np.random.SeedSequence([int(seed), *[int(k) for k in keys]]).generate_state(2, np.uint32)
    return int(state[0]) << 31 | int(state[1]) >> 1


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ContractError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ContractError(f"{name} contains non-finite entries")
    return m


def _canonical_sign(v: np.ndarray) -> np.ndarray:
    for c in v:
        if c != 0.0:
            return v if c > 0 else -v
    return v


def eig2x2_symmetric(a) -> tuple[float, float, np.ndarray, np.ndarray]:
    """Closed-form eigen-decomposition of a symmetric 2x2 matrix.

    Returns ``(lam_large, lam_small, v_large, v_small)`` with unit
    eigenvectors whose first nonzero component is positive. Near-isotropic
    input returns the canonical axes.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (2, 2) or not np.all(np.isfinite(a)):
        raise ContractError("expected a finite 2x2 matrix")
    p, q, r = a[0, 0], a[0, 1], a[1, 1]
    if abs(q - a[1, 0]) > SYMMETRY_TOL * max(1.0, abs(q)):
        raise ContractError("matrix is not symmetric")

    mean = 0.5 * (p + r)
    half_diff = 0.5 * (p - r)
    radius = np.hypot(half_diff, q)
    lam_l = mean + radius
    lam_s = mean - radius
    if lam_l - lam_s <= ISOTROPY_TOL * abs(lam_l) or radius == 0.0:
        return float(lam_l), float(lam_s), np.array([1.0, 0.0]), np.array([0.0, 1.0])

    # Pick the better-conditioned of the two row formulas for v_L.
    if half_diff >= 0:
        v = np.array([radius + half_diff, q])
    else:
        v = np.array([q, radius - half_diff])
    v /= np.linalg.norm(v)
    v_l = _canonical_sign(v)
    v_s = _canonical_sign(np.array([-v_l[1], v_l[0]]))
    return float(lam_l), float(lam_s), v_l, v_s


def finite_diff_check(
    f: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    x,
    h: float = 1e-5,
) -> float:
    """Max relative error between ``grad(x)`` and central differences of ``f``.

    The error per coordinate is ``|g - fd| / max(1, |fd|)``.
    """
    if h <= 0:
        raise ContractError("step h must be positive")
    x = np.array(x, dtype=np.float64)
    analytic = np.asarray(grad(x.copy()), dtype=np.float64).reshape(x.shape)
    flat = x.reshape(-1)
    worst = 0.0
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x.copy())
        flat[i] = orig - h
        fm = f(x.copy())
        flat[i] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise ContractError(f"f is not finite near coordinate {i}")
        fd = (fp - fm) / (2.0 * h)
        err = abs(analytic.reshape(-1)[i] - fd) / max(1.0, abs(fd))
        worst = max(worst, err)
    return worst
