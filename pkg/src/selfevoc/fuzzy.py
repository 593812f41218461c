"""Fuzzy clustering layer: memberships, FCM fitting, stable initialization and
the gradients of the KL clustering loss with respect to embeddings and centers.
"""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .numerics import ContractError, make_rng

log = logging.getLogger(__name__)

SINGULAR_DIST = 1e-12   # membership: point sits on a center
GRAD_SINGULAR_DIST = 1e-9   # gradient: rows this close to a center are skipped
DEAD_MASS = 1e-10


class DeadClusterError(RuntimeError):
    pass


@dataclass
class FuzzyConfig:
    K: int
    m: float = 1.4
    tol: float = 1e-7
    max_iter: int = 300
    M: int = 5

    def __post_init__(self):
        if self.m <= 1:
            raise ContractError(f"fuzzifier m must be > 1, got {self.m}")
        if self.K < 2:
            raise ContractError("K must be >= 2")
        if self.M < 1:
            raise ContractError("M must be >= 1")


@dataclass
class FcmResult:
    centers: np.ndarray
    U: np.ndarray
    trace: list[float] = field(default_factory=list)
    n_iter: int = 0

    @property
    def labels(self) -> np.ndarray:
        return hard_labels(self.U)


def hard_labels(U: np.ndarray) -> np.ndarray:
    """argmax per row; ties go to the lowest column."""
    return np.argmax(U, axis=1)


def sq_dists(Z: np.ndarray, mu: np.ndarray) -> np.ndarray:
    diff = Z[:, None, :] - mu[None, :, :]
    return np.einsum("nkl,nkl->nk", diff, diff)


def _check_centers(mu: np.ndarray) -> None:
    d = sq_dists(mu, mu)
    np.fill_diagonal(d, np.inf)
    if np.min(d) <= SINGULAR_DIST ** 2:
        raise ContractError("cluster centers must be pairwise distinct")


def _membership_from_sq(d2: np.ndarray, m: float, singular: float = SINGULAR_DIST) -> np.ndarray:
    q = 1.0 / (m - 1.0)
    d2 = np.maximum(d2, 0.0)
    on_center = d2 <= singular ** 2
    # log-space softmax of -q*log(d^2) avoids overflow for small distances
    logw = -q * np.log(np.where(on_center, 1.0, d2))
    logw -= np.max(logw, axis=1, keepdims=True)
    w = np.exp(logw)
    U = w / w.sum(axis=1, keepdims=True)
    rows = np.flatnonzero(on_center.any(axis=1))
    if rows.size:
        U[rows] = 0.0
        U[rows, np.argmin(d2[rows], axis=1)] = 1.0
    return U


def membership(Z, mu, m: float) -> np.ndarray:
    """u_ij = 1 / sum_k (|z_i - mu_j| / |z_i - mu_k|)^(2/(m-1)).

    A point within 1e-12 of a center gets a crisp row.
    """
    if m <= 1:
        raise ContractError(f"fuzzifier m must be > 1, got {m}")
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    mu = np.atleast_2d(np.asarray(mu, dtype=np.float64))
    _check_centers(mu)
    return _membership_from_sq(sq_dists(Z, mu), m)


def fcm_objective(Z, mu, U, m: float) -> float:
    Z, mu, U = (np.atleast_2d(np.asarray(a, dtype=np.float64)) for a in (Z, mu, U))
    if U.shape != (len(Z), len(mu)) or Z.shape[1] != mu.shape[1]:
        raise ContractError("inconsistent shapes")
    return float(np.sum(U ** m * sq_dists(Z, mu)))


def update_centers(Z, U, m: float) -> np.ndarray:
    """mu_j = sum_i u_ij^m z_i / sum_i u_ij^m."""
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    W = np.asarray(U, dtype=np.float64) ** m
    mass = W.sum(axis=0)
    dead = np.flatnonzero(mass <= DEAD_MASS)
    if dead.size:
        raise DeadClusterError(f"clusters {dead.tolist()} have no membership mass")
    return (W.T @ Z) / mass[:, None]


def _init_centers(Z: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    uniq = np.unique(Z, axis=0)
    if len(uniq) < K:
        raise ContractError(f"need at least K={K} distinct samples, found {len(uniq)}")
    # draw from the original order so the stream does not depend on np.unique sorting
    chosen: list[int] = []
    seen: set[bytes] = set()
    for i in rng.permutation(len(Z)):
        key = Z[i].tobytes()
        if key not in seen:
            seen.add(key)
            chosen.append(i)
            if len(chosen) == K:
                break
    return Z[chosen].copy()


def fcm_fit(Z, cfg: FuzzyConfig, seed: int = 0, centers=None) -> FcmResult:
    """Alternate membership / center updates until the relative objective change
    drops below ``cfg.tol``. The returned trace is non-increasing.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    if len(Z) < cfg.K:
        raise ContractError(f"N={len(Z)} < K={cfg.K}")
    mu = _init_centers(Z, cfg.K, make_rng(seed)) if centers is None else np.array(centers, float)
    trace: list[float] = []
    rescued = False
    it = 0
    while it < cfg.max_iter:
        it += 1
        U = _membership_from_sq(sq_dists(Z, mu), cfg.m)
        try:
            new_mu = update_centers(Z, U, cfg.m)
        except DeadClusterError:
            if rescued:
                raise
            rescued = True
            dead = np.flatnonzero((U ** cfg.m).sum(axis=0) <= DEAD_MASS)
            for j in dead:
                weakest = int(np.argmin(U.max(axis=1)))
                log.warning("fcm: re-seeding dead cluster %d at sample %d", j, weakest)
                mu[j] = Z[weakest]
                U[weakest] = 0.0
                U[weakest, j] = 1.0
            trace = []
            continue
        mu = new_mu
        obj = fcm_objective(Z, mu, U, cfg.m)
        prev = trace[-1] if trace else None
        trace.append(obj)
        if prev is not None and abs(prev - obj) <= cfg.tol * obj:
            break
    U = _membership_from_sq(sq_dists(Z, mu), cfg.m)
    return FcmResult(mu, U, trace, it)


def canonical_partition(labels) -> np.ndarray:
    """Relabel clusters in order of first appearance, so equal partitions compare equal."""
    labels = np.asarray(labels)
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first)] = np.arange(len(first))
    return rank[inverse]


def pick_most_frequent(label_runs: list[np.ndarray]) -> int:
    """Index of the earliest trial in the most frequent partition.

    Runs are compared as partitions, i.e. up to relabeling of the clusters;
    ties between groups go to the lowest trial index.
    """
    keys = [canonical_partition(run).tobytes() for run in label_runs]
    counts = Counter(keys)
    best = max(counts.values())
    return next(i for i, key in enumerate(keys) if counts[key] == best)


def stable_init(Z, cfg: FuzzyConfig, base_seed: int = 0) -> np.ndarray:
    """Run FCM ``cfg.M`` times and keep the centers of the most frequent outcome."""
    results = [fcm_fit(Z, cfg, seed=base_seed + t) for t in range(cfg.M)]
    chosen = pick_most_frequent([r.labels for r in results])
    log.info("stable_init: trial %d of %d selected", chosen + 1, cfg.M)
    return results[chosen].centers


def kl_terms(U: np.ndarray, P: np.ndarray) -> np.ndarray:
    """Elementwise u*log(u/p) with 0*log(0) = 0."""
    out = np.zeros_like(U)
    pos = U > 0
    if np.any(P[pos] <= 0):
        raise ContractError("target distribution has zero mass where membership is positive")
    out[pos] = U[pos] * np.log(U[pos] / P[pos])
    return out


def clustering_loss(Z, mu, m: float, P) -> float:
    U = membership(Z, mu, m)
    return float(np.sum(kl_terms(U, np.asarray(P, dtype=np.float64))))


def clustering_loss_grads(Z, mu, m: float, P):
    """Gradients of sum_ij u_ij log(u_ij/p_ij) through the membership formula.

    Returns ``(dL_dZ, dL_dmu, n_singular)``. Rows within 1e-9 of a center
    contribute nothing and are counted in ``n_singular``.
    """
    if m <= 1:
        raise ContractError(f"fuzzifier m must be > 1, got {m}")
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    mu = np.atleast_2d(np.asarray(mu, dtype=np.float64))
    P = np.atleast_2d(np.asarray(P, dtype=np.float64))
    q = 1.0 / (m - 1.0)
    d2 = sq_dists(Z, mu)
    singular = np.min(d2, axis=1) <= GRAD_SINGULAR_DIST ** 2
    U = _membership_from_sq(d2, m)
    A = kl_terms(U, P)
    A[singular] = 0.0
    U_ok = np.where(singular[:, None], 0.0, U)
    d2_safe = np.where(singular[:, None], 1.0, d2)
    # dL/d(d2_ik) = -q (a_ik - u_ik * sum_j a_ij) / d2_ik
    G = -q * (A - U_ok * A.sum(axis=1, keepdims=True)) / d2_safe
    row = G.sum(axis=1)
    dZ = 2.0 * (row[:, None] * Z - G @ mu)
    dmu = -2.0 * (G.T @ Z - G.sum(axis=0)[:, None] * mu)
    n_singular = int(singular.sum())
    if n_singular:
        log.debug("clustering_loss_grads: %d singular rows skipped", n_singular)
    return dZ, dmu, n_singular
