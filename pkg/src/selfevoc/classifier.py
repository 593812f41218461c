"""Self-supervised classifier producing the smoothed one-hot target distribution."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .extractor import DivergenceError
from .mlp import Momentum, Network, load_network, save_networks
from .numerics import ContractError, make_rng


@dataclass
class ClassifierState:
    net: Network
    epochs_seen: int = 0

    @property
    def n_classes(self) -> int:
        return self.net.dims[-1]

    def copy(self) -> "ClassifierState":
        return ClassifierState(self.net.copy(), self.epochs_seen)


def init_classifier(input_dim: int, n_classes: int, hidden: Sequence[int] = (256, 128),
                    seed: int = 0) -> ClassifierState:
    dims = [input_dim, *hidden, n_classes]
    acts = ["relu"] * len(hidden) + ["identity"]
    return ClassifierState(Network.init(dims, acts, make_rng(seed)))


def softmax(logits: np.ndarray) -> np.ndarray:
    e = np.exp(logits - logits.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def predict_proba(state: ClassifierState, X, batch: int = 2048) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != state.net.dims[0]:
        raise ContractError(f"expected N x {state.net.dims[0]} inputs, got {X.shape}")
    return np.concatenate([softmax(state.net.forward(X[s:s + batch]))
                           for s in range(0, len(X), batch)]) if len(X) else np.empty((0, state.n_classes))


def cross_entropy(state: ClassifierState, X, labels) -> float:
    p = predict_proba(state, X)
    return float(-np.mean(np.log(np.maximum(p[np.arange(len(p)), labels], 1e-300))))


def accuracy(state: ClassifierState, X, labels) -> float:
    return float(np.mean(np.argmax(predict_proba(state, X), axis=1) == labels))


def finetune(state: ClassifierState, aug, epochs: int = 30, batch: int = 128, lr: float = 0.01,
             seed: int = 0, momentum: float = 0.9) -> ClassifierState:
    """Minibatch cross-entropy training on ``aug.samples`` / ``aug.labels``.

    Starts from a copy of ``state`` (warm start); the input is not modified.
    """
    X = np.asarray(aug.samples, dtype=np.float64)
    y = np.asarray(aug.labels, dtype=np.int64)
    if len(y) == 0:
        raise ContractError("cannot fine-tune on an empty set")
    if y.min() < 0 or y.max() >= state.n_classes:
        raise ContractError("labels out of range")
    state = state.copy()
    if lr == 0.0:
        return state
    rng = make_rng(seed)
    opt = Momentum(lr, momentum)
    params = state.net.params
    batch = min(batch, len(y))
    for epoch in range(epochs):
        order = rng.permutation(len(y))
        for s in range(0, len(y), batch):
            idx = order[s:s + batch]
            logits, cache = state.net.forward(X[idx], keep=True)
            g = softmax(logits)
            g[np.arange(len(idx)), y[idx]] -= 1.0
            grads, _ = state.net.backward(cache, g / len(idx))
            opt.step(params, grads)
        if not state.net.is_finite():
            raise DivergenceError(f"classifier diverged at epoch {state.epochs_seen + epoch + 1}")
    state.epochs_seen += epochs
    return state


def smooth_one_hot(labels, K: int, eps: float) -> np.ndarray:
    """(1 - eps) * onehot + eps / K."""
    P = np.full((len(labels), K), eps / K)
    P[np.arange(len(labels)), labels] += 1.0 - eps
    return P


def predict_target(state: ClassifierState, X, eps_smooth: float = 0.05) -> np.ndarray:
    """Smoothed one-hot of the classifier's argmax prediction for every sample."""
    K = state.n_classes
    if not 0 <= eps_smooth < K / (K + 1):
        raise ContractError("eps_smooth must be in [0, K/(K+1))")
    return smooth_one_hot(np.argmax(predict_proba(state, X), axis=1), K, eps_smooth)


def save_classifier(state: ClassifierState, path) -> None:
    save_networks(path, [state.net])


def load_classifier(path) -> ClassifierState:
    return ClassifierState(load_network(path))
