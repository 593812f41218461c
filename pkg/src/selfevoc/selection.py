"""Per-cluster top-eta selection of confident samples and the eta schedule."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import ContractError


@dataclass(frozen=True)
class SelectionSchedule:
    eta0: float = 0.5
    delta_eta: float = 0.1
    cap: float = 1.0

    def __post_init__(self):
        if not 0 < self.eta0 <= 1:
            raise ContractError("eta0 must be in (0, 1]")
        if self.delta_eta < 0:
            raise ContractError("delta_eta must be >= 0")
        if not self.eta0 <= self.cap <= 1:
            raise ContractError("cap must be in [eta0, 1]")


def eta_at(schedule: SelectionSchedule, iteration: int) -> float:
    if iteration < 0:
        raise ContractError("iteration must be >= 0")
    return min(schedule.eta0 + iteration * schedule.delta_eta, schedule.cap)


@dataclass
class SelectionSet:
    indices: list[np.ndarray]        # per cluster, most confident first
    confidences: list[np.ndarray]
    labels: np.ndarray               # hard label of every sample in U
    empty_clusters: list[int]

    @property
    def K(self) -> int:
        return len(self.indices)

    def all_indices(self) -> np.ndarray:
        return np.concatenate(self.indices) if self.indices else np.empty(0, np.int64)

    def __len__(self) -> int:
        return sum(len(ix) for ix in self.indices)


def select_confident(U: np.ndarray, eta: float) -> SelectionSet:
    """Keep the ceil(eta * n_j) samples of each cluster with the largest max-membership.

    Ties in confidence are broken by lower sample index.
    """
    if not 0 < eta <= 1:
        raise ContractError(f"eta must be in (0, 1], got {eta}")
    U = np.asarray(U, dtype=np.float64)
    labels = np.argmax(U, axis=1)
    conf = U[np.arange(len(U)), labels]
    indices, confidences, empty = [], [], []
    for j in range(U.shape[1]):
        members = np.flatnonzero(labels == j)
        if members.size == 0:
            empty.append(j)
            indices.append(np.empty(0, np.int64))
            confidences.append(np.empty(0))
            continue
        order = members[np.lexsort((members, -conf[members]))]
        # the small epsilon keeps e.g. 0.3*10 from rounding up to 4
        take = math.ceil(eta * members.size - 1e-9)
        chosen = order[:take]
        indices.append(chosen)
        confidences.append(conf[chosen])
    return SelectionSet(indices, confidences, labels, empty)
