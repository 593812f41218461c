"""Fully-connected networks with hand-written backprop and SGD-momentum.

Checkpoint layout (little-endian)::

    b"SEVC" | u32 version | u32 n_dims | u32 dims[n_dims] | u8 act[n_dims-1]
    | for each layer: float64 W[in*out] (row-major, in x out), float64 b[out]
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

MAGIC = b"SEVC"
VERSION = 1
ACTIVATIONS = ("identity", "relu")


class CheckpointError(ValueError):
    pass


@dataclass
class Network:
    dims: list[int]
    activations: list[str]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @classmethod
    def init(cls, dims: Sequence[int], activations: Sequence[str], rng: np.random.Generator):
        dims = [int(d) for d in dims]
        if len(activations) != len(dims) - 1:
            raise ValueError("need one activation per layer")
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(dims, list(activations), weights, biases)

    @property
    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> "Network":
        return Network(list(self.dims), list(self.activations),
                       [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def forward(self, x: np.ndarray, keep: bool = False):
        """Return the output, plus the list of layer inputs/pre-activations when ``keep``."""
        cache = []
        h = x
        for w, b, act in zip(self.weights, self.biases, self.activations):
            a = h @ w + b
            if keep:
                cache.append((h, a))
            h = np.maximum(a, 0.0) if act == "relu" else a
        return (h, cache) if keep else h

    def backward(self, cache, grad_out: np.ndarray, need_input: bool = False):
        """Backprop ``grad_out`` (dLoss/dOutput) through the cached pass.

        Returns ``(param_grads, grad_input)``; param grads follow :attr:`params` order.
        """
        grads: list[np.ndarray] = [None] * (2 * len(self.weights))
        g = grad_out
        for k in range(len(self.weights) - 1, -1, -1):
            h, a = cache[k]
            if self.activations[k] == "relu":
                g = g * (a > 0.0)
            grads[2 * k] = h.T @ g
            grads[2 * k + 1] = g.sum(axis=0)
            if k > 0 or need_input:
                g = g @ self.weights[k].T
        return grads, (g if need_input else None)

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in self.params)


@dataclass
class Momentum:
    """SGD with classical momentum: v <- mu*v - lr*g; p <- p + v."""
    lr: float
    momentum: float = 0.9
    velocity: list[np.ndarray] = field(default_factory=list)

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if not self.velocity:
            self.velocity = [np.zeros_like(p) for p in params]
        for p, g, v in zip(params, grads, self.velocity):
            v *= self.momentum
            v -= self.lr * g
            p += v


def save_networks(path, networks: Sequence[Network]) -> None:
    """Write the networks as one chained checkpoint (decoder follows encoder, etc.)."""
    dims = list(networks[0].dims)
    acts = list(networks[0].activations)
    for net in networks[1:]:
        if net.dims[0] != dims[-1]:
            raise CheckpointError("networks do not chain")
        dims += net.dims[1:]
        acts += net.activations
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack(f"<II{len(dims)}I", VERSION, len(dims), *dims))
        f.write(bytes(ACTIVATIONS.index(a) for a in acts))
        for net in networks:
            for w, b in zip(net.weights, net.biases):
                f.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
                f.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_network(path) -> Network:
    """Read a checkpoint as a single chained network."""
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a SEVC checkpoint")
    try:
        version, n_dims = struct.unpack_from("<II", raw, 4)
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported version {version}")
        dims = list(struct.unpack_from(f"<{n_dims}I", raw, 12))
        off = 12 + 4 * n_dims
        acts = [ACTIVATIONS[c] for c in raw[off:off + n_dims - 1]]
        off += n_dims - 1
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            w = np.frombuffer(raw, dtype="<f8", count=fan_in * fan_out, offset=off)
            off += 8 * fan_in * fan_out
            b = np.frombuffer(raw, dtype="<f8", count=fan_out, offset=off)
            off += 8 * fan_out
            weights.append(w.reshape(fan_in, fan_out).astype(np.float64))
            biases.append(b.astype(np.float64))
    except (struct.error, ValueError, IndexError) as exc:
        raise CheckpointError(f"{path}: truncated checkpoint") from exc
    if off != len(raw):
        raise CheckpointError(f"{path}: {len(raw) - off} trailing bytes")
    return Network(dims, acts, weights, biases)


def split_network(net: Network, at: int) -> tuple[Network, Network]:
    """Split a chained network after layer index ``at`` (count of layers in the first part)."""
    first = Network(net.dims[:at + 1], net.activations[:at], net.weights[:at], net.biases[:at])
    second = Network(net.dims[at:], net.activations[at:], net.weights[at:], net.biases[at:])
    return first, second
