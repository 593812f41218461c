"""Autoencoder feature extractor (D-500-100-L-100-500-D by default)."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .mlp import Momentum, Network, load_network, save_networks, split_network
from .numerics import ContractError, make_rng

log = logging.getLogger(__name__)


class DivergenceError(RuntimeError):
    pass


@dataclass
class ExtractorState:
    encoder: Network
    decoder: Network

    @property
    def input_dim(self) -> int:
        return self.encoder.dims[0]

    @property
    def latent_dim(self) -> int:
        return self.encoder.dims[-1]

    @property
    def layer_dims(self) -> list[int]:
        return self.encoder.dims + self.decoder.dims[1:]

    def copy(self) -> "ExtractorState":
        return ExtractorState(self.encoder.copy(), self.decoder.copy())


def init_extractor(input_dim: int, latent_dim: int = 10, hidden: Sequence[int] = (500, 100),
                   seed: int = 0) -> ExtractorState:
    rng = make_rng(seed)
    enc_dims = [input_dim, *hidden, latent_dim]
    dec_dims = enc_dims[::-1]
    acts = ["relu"] * len(hidden) + ["identity"]
    return ExtractorState(Network.init(enc_dims, acts, rng), Network.init(dec_dims, acts, rng))


def encode(state: ExtractorState, samples: np.ndarray) -> np.ndarray:
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2 or samples.shape[1] != state.input_dim:
        raise ContractError(f"expected N x {state.input_dim} samples, got {samples.shape}")
    return state.encoder.forward(samples)


def reconstruct(state: ExtractorState, samples: np.ndarray) -> np.ndarray:
    return state.decoder.forward(encode(state, samples))


def reconstruction_error(state: ExtractorState, samples: np.ndarray, batch: int = 1024) -> float:
    """Mean squared error per entry."""
    total = 0.0
    for s in range(0, len(samples), batch):
        x = samples[s:s + batch]
        total += float(np.sum((reconstruct(state, x) - x) ** 2))
    return total / np.asarray(samples).size


def pretrain(samples: np.ndarray, epochs: int = 100, batch: int = 256, lr: float = 0.01,
             seed: int = 0, latent_dim: int = 10, hidden: Sequence[int] = (500, 100),
             momentum: float = 0.9, state: ExtractorState | None = None) -> ExtractorState:
    """Minimise reconstruction error with minibatch SGD + momentum.

    The per-batch loss is the mean over samples of the summed squared error.
    """
    samples = np.asarray(samples, dtype=np.float64)
    n = len(samples)
    if epochs < 1:
        raise ContractError("epochs must be >= 1")
    if not 1 <= batch <= n:
        raise ContractError(f"batch must be in [1, {n}]")
    if state is None:
        state = init_extractor(samples.shape[1], latent_dim, hidden, seed)
    rng = make_rng((seed, 1))
    opt = Momentum(lr, momentum)
    params = state.encoder.params + state.decoder.params
    for epoch in range(epochs):
        order = rng.permutation(n)
        running = 0.0
        for s in range(0, n, batch):
            x = samples[order[s:s + batch]]
            z, enc_cache = state.encoder.forward(x, keep=True)
            xr, dec_cache = state.decoder.forward(z, keep=True)
            diff = xr - x
            running += float(np.sum(diff * diff))
            g_out = 2.0 * diff / len(x)
            dec_grads, g_z = state.decoder.backward(dec_cache, g_out, need_input=True)
            enc_grads, _ = state.encoder.backward(enc_cache, g_z)
            opt.step(params, enc_grads + dec_grads)
        if not np.isfinite(running) or not state.encoder.is_finite():
            raise DivergenceError(f"autoencoder pretraining diverged at epoch {epoch + 1}")
        log.debug("pretrain epoch %d mse %.6f", epoch + 1, running / samples.size)
    return state


def encoder_grads(state: ExtractorState, samples: np.ndarray, dL_dZ: np.ndarray) -> list[np.ndarray]:
    """Batch-summed gradient of a loss on Z w.r.t. encoder params (``Network.params`` order)."""
    _, cache = state.encoder.forward(np.asarray(samples, dtype=np.float64), keep=True)
    grads, _ = state.encoder.backward(cache, dL_dZ)
    return grads


def apply_clustering_gradient(state: ExtractorState, samples: np.ndarray, dL_dZ: np.ndarray,
                              lr: float) -> ExtractorState:
    """One encoder step ``w -= lr/m_b * sum_i dL/dz_i dz_i/dw``; decoder untouched.

    Updates ``state`` in place and returns it.
    """
    dL_dZ = np.asarray(dL_dZ, dtype=np.float64)
    if dL_dZ.shape != (len(samples), state.latent_dim):
        raise ContractError(f"dL_dZ shape {dL_dZ.shape} does not match batch")
    if not np.all(np.isfinite(dL_dZ)):
        raise ContractError("non-finite clustering gradient")
    if lr == 0.0:
        return state
    grads = encoder_grads(state, samples, dL_dZ)
    scale = lr / len(samples)
    for p, g in zip(state.encoder.params, grads):
        p -= scale * g
    return state


def save_extractor(state: ExtractorState, path) -> None:
    save_networks(path, [state.encoder, state.decoder])


def load_extractor(path) -> ExtractorState:
    net = load_network(path)
    n_layers = len(net.weights)
    if n_layers % 2 or net.dims != net.dims[::-1]:
        raise ContractError(f"{path}: not a symmetric autoencoder checkpoint")
    return ExtractorState(*split_network(net, n_layers // 2))
