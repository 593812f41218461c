"""External clustering metrics: ACC (Hungarian-matched accuracy), NMI, ARI."""
from __future__ import annotations

from collections import Counter

import numpy as np
from scipy.optimize import linear_sum_assignment

from .numerics import ContractError

MAX_CLUSTERS = 64


def _as_labels(a, name: str) -> list[int]:
    arr = np.asarray(a)
    if arr.ndim != 1:
        raise ContractError(f"{name} must be a 1-D label vector")
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        if not np.all(arr == np.round(arr)):
            raise ContractError(f"{name} must hold integer labels")
        arr = arr.astype(np.int64)
    labels = arr.tolist()
    if labels and min(labels) < 0:
        raise ContractError(f"{name} has negative labels")
    return labels


def _pair(pred, truth) -> tuple[list[int], list[int]]:
    pred, truth = _as_labels(pred, "pred"), _as_labels(truth, "truth")
    if len(pred) != len(truth):
        raise ContractError(f"length mismatch: {len(pred)} vs {len(truth)}")
    return pred, truth


def _cells(pred, truth) -> Counter:
    return Counter(zip(*_pair(pred, truth)))


def contingency(pred, truth) -> np.ndarray:
    """Counts of (pred cluster, true class); rows and columns follow sorted label ids."""
    cells = _cells(pred, truth)
    rows = {v: i for i, v in enumerate(sorted({p for p, _ in cells}))}
    cols = {v: i for i, v in enumerate(sorted({t for _, t in cells}))}
    table = np.zeros((len(rows), len(cols)), dtype=np.int64)
    for (p, t), count in cells.items():
        table[rows[p], cols[t]] = count
    return table


def align_labels(labels, reference, K: int | None = None) -> np.ndarray:
    """Relabel ``labels`` to best agree with ``reference`` (Hungarian, exact)."""
    labels, reference = (np.asarray(v, dtype=np.int64) for v in _pair(labels, reference))
    if K is None:
        K = int(max(labels.max(initial=0), reference.max(initial=0))) + 1
    table = np.zeros((K, K), dtype=np.int64)
    np.add.at(table, (labels, reference), 1)
    rows, cols = linear_sum_assignment(table, maximize=True)
    mapping = np.empty(K, dtype=np.int64)
    mapping[rows] = cols
    return mapping[labels]


def acc(pred, truth) -> float:
    """Best agreement over one-to-one label matchings (Hungarian on the
    zero-padded square contingency table)."""
    cells = _cells(pred, truth)
    if not cells:
        raise ContractError("empty label vectors")
    rows = {v: i for i, v in enumerate({p for p, _ in cells})}
    cols = {v: i for i, v in enumerate({t for _, t in cells})}
    size = max(len(rows), len(cols))
    if size > MAX_CLUSTERS:
        raise ContractError(f"more than {MAX_CLUSTERS} clusters")
    square = np.zeros((size, size), dtype=np.int64)
    for (p, t), count in cells.items():
        square[rows[p], cols[t]] = count
    r, c = linear_sum_assignment(square, maximize=True)
    return int(square[r, c].sum()) / sum(cells.values())


def _entropy(counts: np.ndarray, n: int) -> float:
    p = counts[counts > 0] / n
    return float(-np.sum(p * np.log(p)))


def nmi(pred, truth) -> float:
    """Mutual information over the geometric mean of the two entropies (natural log)."""
    table = contingency(pred, truth)
    n = int(table.sum())
    if n == 0:
        raise ContractError("empty label vectors")
    h_p = _entropy(table.sum(axis=1), n)
    h_t = _entropy(table.sum(axis=0), n)
    if h_p == 0.0 or h_t == 0.0:
        return 1.0 if h_p == h_t else 0.0
    pij = table / n
    outer = np.outer(table.sum(axis=1), table.sum(axis=0)) / n ** 2
    nz = pij > 0
    mi = float(np.sum(pij[nz] * np.log(pij[nz] / outer[nz])))
    return float(np.clip(mi / np.sqrt(h_p * h_t), 0.0, 1.0))


def _comb2(counts) -> int:
    return sum(v * (v - 1) // 2 for v in counts)


def pair_counts(pred, truth) -> tuple[int, int, int, int]:
    """(same/same, same-pred only, same-truth only, different/different) pair counts,
    as exact Python integers."""
    cells = _cells(pred, truth)
    row, col = Counter(), Counter()
    for (p, t), count in cells.items():
        row[p] += count
        col[t] += count
    n = sum(cells.values())
    both = _comb2(cells.values())
    same_pred = _comb2(row.values()) - both
    same_truth = _comb2(col.values()) - both
    total = n * (n - 1) // 2
    return both, same_pred, same_truth, total - both - same_pred - same_truth


def ari_from_pairs(a: int, b: int, c: int, d: int) -> float:
    den = (a + b) * (b + d) + (a + c) * (c + d)
    if den == 0:
        return 1.0
    return 2 * (a * d - b * c) / den


def ari(pred, truth) -> float:
    pred, truth = _pair(pred, truth)
    if len(pred) < 2:
        raise ContractError("ARI needs at least two samples")
    return ari_from_pairs(*pair_counts(pred, truth))


def evaluate(pred, truth) -> dict[str, float]:
    return {"acc": acc(pred, truth), "nmi": nmi(pred, truth), "ari": ari(pred, truth)}
