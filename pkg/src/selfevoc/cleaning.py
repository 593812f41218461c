"""Local boundary cleaning of one cluster.

Selected samples of a cluster are projected to 2-D, density-separated islands
are dropped, an ellipse is fitted to what remains and every point is graded
into one of three equal-area elliptical rings (or removed).
"""
from __future__ import annotations

import enum
import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .numerics import ContractError, eig2x2_symmetric, make_rng

log = logging.getLogger(__name__)

RING_EDGES = (np.sqrt(3.0) / 3.0, np.sqrt(6.0) / 3.0, 1.0)
_EDGE_TOL = 1e-12


class Region(enum.IntEnum):
    REMOVED = 0
    A1 = 1
    A2 = 2
    A3 = 3


class CleaningWarning(UserWarning):
    pass


# --------------------------------------------------------------------------- t-SNE

def _conditional_affinities(d2: np.ndarray, perplexity: float, tol: float = 1e-4,
                            max_steps: int = 50) -> np.ndarray:
    """Row-wise Gaussian affinities whose perplexity matches the target.

    Bisection on the precision beta, vectorised over rows.
    """
    n = len(d2)
    target = np.log(perplexity)
    beta = np.ones(n)
    lo = np.full(n, -np.inf)
    hi = np.full(n, np.inf)
    mask = ~np.eye(n, dtype=bool)
    active = np.ones(n, dtype=bool)
    P = np.zeros_like(d2)
    for _ in range(max_steps):
        # shift by each row's smallest off-diagonal distance to avoid underflow
        shifted = d2 - np.min(np.where(mask, d2, np.inf), axis=1, keepdims=True)
        W = np.exp(-shifted * beta[:, None]) * mask
        S = W.sum(axis=1)
        Pi = W / S[:, None]
        H = np.log(S) + beta * np.sum(Pi * shifted, axis=1)
        P[active] = Pi[active]
        diff = H - target
        done = np.abs(np.exp(H) - perplexity) <= tol
        active &= ~done
        if not active.any():
            break
        up = active & (diff > 0)
        down = active & (diff <= 0)
        lo[up] = beta[up]
        beta[up] = np.where(np.isinf(hi[up]), beta[up] * 2.0, 0.5 * (beta[up] + hi[up]))
        hi[down] = beta[down]
        beta[down] = np.where(np.isinf(lo[down]), beta[down] / 2.0, 0.5 * (beta[down] + lo[down]))
    return P


def tsne_project(points, perplexity: float = 30.0, iters: int = 1000, seed: int = 0,
                 learning_rate: float | None = None) -> np.ndarray:
    """Exact t-SNE to two dimensions.

    Early exaggeration x4 for the first 100 iterations, momentum 0.5 then 0.8
    from iteration 250, delta-bar-delta gains. The default step size is
    ``max(n / 16, 50)``; a fixed 200 overshoots badly on small clusters.
    """
    X = np.asarray(points, dtype=np.float64)
    n = len(X)
    if n < 5:
        raise ContractError("t-SNE needs at least 5 points")
    if not perplexity < n / 3.0:
        raise ContractError(f"perplexity {perplexity} must be < n/3 = {n / 3:.3f}")
    if np.all(X == X[0]):
        raise ContractError("degenerate input: all points are identical")
    sq = np.sum(X * X, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * X @ X.T, 0.0)
    P = _conditional_affinities(d2, perplexity)
    P = (P + P.T) / (2.0 * n)
    P = np.maximum(P, 1e-12)

    if learning_rate is None:
        learning_rate = max(n / (4.0 * 4.0), 50.0)
    rng = make_rng(seed)
    Y = 1e-4 * rng.standard_normal((n, 2))
    update = np.zeros_like(Y)
    gains = np.ones_like(Y)
    for it in range(iters):
        exaggeration = 4.0 if it < 100 else 1.0
        momentum = 0.5 if it < 250 else 0.8
        ys = np.sum(Y * Y, axis=1)
        num = 1.0 / (1.0 + np.maximum(ys[:, None] + ys[None, :] - 2.0 * Y @ Y.T, 0.0))
        np.fill_diagonal(num, 0.0)
        Q = np.maximum(num / num.sum(), 1e-12)
        PQ = (exaggeration * P - Q) * num
        grad = 4.0 * (PQ.sum(axis=1)[:, None] * Y - PQ @ Y)
        same_sign = np.sign(grad) == np.sign(update)
        gains = np.where(same_sign, gains * 0.8, gains + 0.2)
        np.maximum(gains, 0.01, out=gains)
        update = momentum * update - learning_rate * gains * grad
        Y = Y + update
        Y -= Y.mean(axis=0)
    return Y


def pca_project(points) -> np.ndarray:
    """Top-2 principal component scores; a cheap stand-in for t-SNE on large clusters."""
    X = np.asarray(points, dtype=np.float64)
    Xc = X - X.mean(axis=0)
    _, _, vt = np.linalg.svd(Xc, full_matrices=False)
    out = np.zeros((len(X), 2))
    k = min(2, vt.shape[0])
    out[:, :k] = Xc @ vt[:k].T
    return out


# --------------------------------------------------------------------------- islands

def auto_eps(points2d: np.ndarray, k: int = 4) -> float:
    """Twice the mean distance to the k-th nearest neighbour."""
    k = min(k, len(points2d) - 1)
    if k < 1:
        return 0.0
    dist, _ = cKDTree(points2d).query(points2d, k=k + 1)
    return 2.0 * float(np.mean(dist[:, k]))


def density_labels(points2d: np.ndarray, min_pts: int, eps: float) -> np.ndarray:
    """DBSCAN labels; -1 marks noise. Neighbourhoods include the point itself."""
    tree = cKDTree(points2d)
    neigh = tree.query_ball_point(points2d, r=eps)
    core = np.array([len(nb) >= min_pts for nb in neigh])
    labels = np.full(len(points2d), -1, dtype=np.int64)
    cid = 0
    for i in range(len(points2d)):
        if not core[i] or labels[i] != -1:
            continue
        labels[i] = cid
        stack = [i]
        while stack:
            p = stack.pop()
            for q in neigh[p]:
                if labels[q] == -1:
                    labels[q] = cid
                    if core[q]:
                        stack.append(q)
        cid += 1
    return labels


def remove_islands(points2d, min_pts: int = 5, eps: float | str = "auto") -> np.ndarray:
    """Indices of the points in the largest density cluster (noise dropped)."""
    pts = np.asarray(points2d, dtype=np.float64)
    if len(pts) < min_pts:
        raise ContractError(f"need at least min_pts={min_pts} points")
    radius = auto_eps(pts) if eps == "auto" else float(eps)
    labels = density_labels(pts, min_pts, radius)
    if np.all(labels < 0):
        warnings.warn("density clustering marked every point as noise; keeping all",
                      CleaningWarning, stacklevel=2)
        return np.arange(len(pts))
    counts = np.bincount(labels[labels >= 0])
    return np.flatnonzero(labels == int(np.argmax(counts)))


# --------------------------------------------------------------------------- ellipse

@dataclass(frozen=True)
class EllipseModel:
    center: np.ndarray
    v_L: np.ndarray
    v_S: np.ndarray
    R_L: float
    R_S: float
    lam_L: float = 0.0
    lam_S: float = 0.0


def fit_ellipse(points2d) -> EllipseModel:
    """Principal-axis ellipse: axes from the 2x2 covariance, radii from the
    largest absolute projection on each axis.
    """
    pts = np.asarray(points2d, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise ContractError("need at least 3 points in 2-D")
    center = pts.mean(axis=0)
    dev = pts - center
    cov = dev.T @ dev / len(pts)
    cov[1, 0] = cov[0, 1]
    lam_l, lam_s, v_l, v_s = eig2x2_symmetric(cov)
    if lam_l <= 0 or lam_s <= 1e-9 * lam_l:
        raise ContractError("degenerate ellipse: points are collinear")
    R_L = float(np.max(np.abs(dev @ v_l)))
    R_S = float(np.max(np.abs(dev @ v_s)))
    if R_S > R_L:
        # can happen for odd shapes; keep the longer radius as the major axis
        v_l, v_s, R_L, R_S, lam_l, lam_s = v_s, v_l, R_S, R_L, lam_s, lam_l
    return EllipseModel(center, v_l, v_s, R_L, R_S, lam_l, lam_s)


def ellipse_radius(e: EllipseModel, points2d) -> np.ndarray:
    """Normalised elliptical radius r of each point (1 on the boundary)."""
    dev = np.asarray(points2d, dtype=np.float64) - e.center
    return np.sqrt((dev @ e.v_L / e.R_L) ** 2 + (dev @ e.v_S / e.R_S) ** 2)


def region_assign(e: EllipseModel, points2d) -> np.ndarray:
    """Region per point: A1 for r <= sqrt(3)/3, A2 for r <= sqrt(6)/3, A3 for r <= 1."""
    r = ellipse_radius(e, points2d)
    out = np.full(len(r), Region.REMOVED, dtype=np.int64)
    for region, edge in zip((Region.A3, Region.A2, Region.A1), RING_EDGES[::-1]):
        out[r <= edge + _EDGE_TOL] = region
    return out


# --------------------------------------------------------------------------- per cluster

@dataclass
class CleaningResult:
    indices: np.ndarray        # sample indices of the cluster's selected points
    regions: np.ndarray        # Region per entry of ``indices``
    projection: np.ndarray     # n x 2
    ellipse: EllipseModel | None


def clean_cluster(embeddings, indices, projection: str = "tsne", perplexity: float = 30.0,
                  tsne_iters: int = 500, min_pts: int = 5, eps: float | str = "auto",
                  seed: int = 0) -> CleaningResult:
    """Grade the selected members of one cluster into ellipse regions.

    Clusters too small to project are graded A3 throughout.
    """
    Z = np.asarray(embeddings, dtype=np.float64)
    indices = np.asarray(indices, dtype=np.int64)
    n = len(indices)
    if n < max(6, min_pts, 3) or np.all(Z == Z[0]):
        log.info("cluster of %d points left uncleaned", n)
        return CleaningResult(indices, np.full(n, Region.A3, np.int64), np.zeros((n, 2)), None)
    if projection == "tsne":
        perp = min(perplexity, (n - 1) / 3.0)
        Y = tsne_project(Z, perp, tsne_iters, seed)
    elif projection == "pca":
        Y = pca_project(Z)
    else:
        raise ContractError(f"unknown projection {projection!r}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CleaningWarning)
        kept = remove_islands(Y, min_pts, eps)
    regions = np.full(n, Region.REMOVED, dtype=np.int64)
    try:
        ellipse = fit_ellipse(Y[kept])
    except ContractError:
        regions[kept] = Region.A3
        return CleaningResult(indices, regions, Y, None)
    regions[kept] = region_assign(ellipse, Y[kept])
    return CleaningResult(indices, regions, Y, ellipse)


def write_projection_csv(path, results: list[CleaningResult]) -> None:
    with open(path, "w") as f:
        f.write("x,y,sample_index,region\n")
        for res in results:
            for (x, y), idx, reg in zip(res.projection, res.indices, res.regions):
                f.write(f"{x!r},{y!r},{int(idx)},{Region(reg).name.lower()}\n")
