"""Small from-scratch MLP stack: ReLU hidden layers, linear output head,
per-entry squared-error gradients, Adam, and Polyak-averaged target copies.

Everything is float64 and owned by a single training loop; evaluation copies
can be shared read-only.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

Array = np.ndarray

CHECKPOINT_VERSION = 1


class NetworkError(Exception):
    pass


@dataclass
class Mlp:
    layer_sizes: tuple[int, ...]
    weights: list[Array]
    biases: list[Array]
    init_seed: int | None = None

    @classmethod
    def create(cls, layer_sizes, rng: np.random.Generator,
               init_seed: int | None = None) -> "Mlp":
        """Uniform +-sqrt(6 / fan_in) weights, zero biases."""
        sizes = tuple(int(s) for s in layer_sizes)
        if len(sizes) < 2:
            raise NetworkError("need at least input and output sizes")
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = math.sqrt(6.0 / fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(sizes, weights, biases, init_seed)

    @property
    def num_params(self) -> int:
        return sum((w.shape[0] + 1) * w.shape[1] for w in self.weights)

    def copy(self) -> "Mlp":
        return Mlp(self.layer_sizes, [w.copy() for w in self.weights],
                   [b.copy() for b in self.biases], self.init_seed)

    def forward(self, inputs: Array) -> Array:
        """Batched forward pass; inputs (B, in) -> (B, out)."""
        x = np.asarray(inputs, dtype=float)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[None, :]
        if x.shape[1] != self.layer_sizes[0]:
            raise NetworkError(
                f"input width {x.shape[1]} != {self.layer_sizes[0]}")
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            x = np.maximum(x @ w + b, 0.0)
        x = x @ self.weights[-1] + self.biases[-1]
        return x[0] if squeeze else x


def mse_grad(net: Mlp, inputs: Array, selected: Array, targets: Array
             ) -> tuple[list[tuple[Array, Array]], float]:
    """Gradient of (1/k) sum (out[j, selected[j]] - targets[j])^2.

    Returns per-layer (dW, db) and the loss value.
    """
    residuals, grads = _selected_residuals_and_grads(net, inputs, selected,
                                                     np.asarray(targets, dtype=float))
    loss = float(np.mean(residuals ** 2))
    return grads, loss


def residual_grad(net: Mlp, inputs: Array, selected: Array, residuals: Array
                  ) -> list[tuple[Array, Array]]:
    """Gradient of (1/k) sum residual_j * out[j, selected[j]] * 2 ... i.e. the
    chain through precomputed residuals; used when the selected value is a sum
    of outputs of several networks (decomposed heads)."""
    x = np.asarray(inputs, dtype=float)
    acts, pre = _forward_cached(net, x)
    k = x.shape[0]
    delta = np.zeros((k, net.layer_sizes[-1]))
    delta[np.arange(k), np.asarray(selected, dtype=int)] = 2.0 * residuals / k
    return _backprop(net, acts, pre, delta)


def _selected_residuals_and_grads(net, x, selected, targets):
    x = np.asarray(x, dtype=float)
    acts, pre = _forward_cached(net, x)
    k = x.shape[0]
    sel = np.asarray(selected, dtype=int)
    out_sel = acts[-1][np.arange(k), sel]
    residuals = out_sel - targets
    delta = np.zeros((k, net.layer_sizes[-1]))
    delta[np.arange(k), sel] = 2.0 * residuals / k
    return residuals, _backprop(net, acts, pre, delta)


def _forward_cached(net, x):
    acts = [x]
    pre = []
    h = x
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0)
        acts.append(h)
    acts.append(h @ net.weights[-1] + net.biases[-1])
    return acts, pre


def _backprop(net, acts, pre, delta):
    grads: list[tuple[Array, Array]] = [None] * len(net.weights)
    for layer in range(len(net.weights) - 1, -1, -1):
        grads[layer] = (acts[layer].T @ delta, delta.sum(axis=0))
        if layer > 0:
            delta = (delta @ net.weights[layer].T) * (pre[layer - 1] > 0.0)
    return grads


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[tuple[Array, Array]] = field(default_factory=list)
    v: list[tuple[Array, Array]] = field(default_factory=list)

    @classmethod
    def for_net(cls, net: Mlp, lr: float = 1e-3) -> "AdamState":
        zeros = lambda: [(np.zeros_like(w), np.zeros_like(b))
                         for w, b in zip(net.weights, net.biases)]
        return cls(lr=lr, m=zeros(), v=zeros())


def adam_step(net: Mlp, state: AdamState, grads) -> None:
    """Bias-corrected Adam update of the network parameters in place."""
    for gw, gb in grads:
        if not (np.all(np.isfinite(gw)) and np.all(np.isfinite(gb))):
            raise NetworkError("non-finite gradient")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for layer, (gw, gb) in enumerate(grads):
        mw, mb = state.m[layer]
        vw, vb = state.v[layer]
        mw *= b1; mw += (1 - b1) * gw
        mb *= b1; mb += (1 - b1) * gb
        vw *= b2; vw += (1 - b2) * gw * gw
        vb *= b2; vb += (1 - b2) * gb * gb
        net.weights[layer] -= state.lr * (mw / c1) / (np.sqrt(vw / c2) + state.eps)
        net.biases[layer] -= state.lr * (mb / c1) / (np.sqrt(vb / c2) + state.eps)


def polyak_update(target: Mlp, online: Mlp, tau: float) -> None:
    """theta_target <- tau theta_online + (1 - tau) theta_target."""
    if target.layer_sizes != online.layer_sizes:
        raise NetworkError("architecture mismatch in polyak update")
    for wt, wo in zip(target.weights, online.weights):
        wt *= 1.0 - tau
        wt += tau * wo
    for bt, bo in zip(target.biases, online.biases):
        bt *= 1.0 - tau
        bt += tau * bo


def save_checkpoint(net: Mlp, path) -> None:
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "layer_sizes": list(net.layer_sizes),
        "init_seed": net.init_seed,
        "weights": [w.tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_checkpoint(path) -> Mlp:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("format_version") != CHECKPOINT_VERSION:
        raise NetworkError(f"unsupported checkpoint version in {path}")
    return Mlp(tuple(payload["layer_sizes"]),
               [np.asarray(w, dtype=float) for w in payload["weights"]],
               [np.asarray(b, dtype=float) for b in payload["biases"]],
               payload.get("init_seed"))
