"""Reverse-mode gradients over Network, and a small SGD trainer.

The tape is recorded per layer: an affine node remembers its input, an
activation node remembers its local slopes (right-hand derivatives at kinks).
Gradients come back as one flat vector in ``Network.parameters()`` order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .activation import EUAF, ActivationKind, parse_tag, subgradient
from .network import AffineLayer, Network

__all__ = [
    "Tape",
    "TapeNode",
    "record",
    "backward",
    "grad",
    "input_grad",
    "loss_value",
    "loss_gradient",
    "LOSSES",
    "Architecture",
    "TrainConfig",
    "TrainResult",
    "init_network",
    "train_toy",
    "TOY_TARGETS",
]

LOSSES = ("MSE", "MAE", "MAX")
DIVERGENCE = 1e6


@dataclass(frozen=True)
class TapeNode:
    op: str  # "affine" or "activation"
    layer: int
    inputs: np.ndarray  # affine: layer input (batch, in); activation: pre-activation (batch, n)
    local: np.ndarray | None  # activation slopes, same shape as inputs


@dataclass
class Tape:
    """Topologically ordered nodes of one forward pass and where each layer's parameters live."""

    nodes: list[TapeNode] = field(default_factory=list)
    param_index: list[tuple[slice, slice]] = field(default_factory=list)
    output: np.ndarray | None = None


def _param_index(net: Network) -> list[tuple[slice, slice]]:
    out, pos = [], 0
    for layer in net.layers:
        nw = layer.weights.size
        out.append((slice(pos, pos + nw), slice(pos + nw, pos + nw + layer.out_dim)))
        pos += nw + layer.out_dim
    return out


def _batch(net: Network, x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim <= 1 and net.input_dim == 1:
        return arr.reshape(-1, 1)
    return np.atleast_2d(arr)


def record(net: Network, x) -> Tape:
    """Forward pass that keeps what the backward pass needs."""
    h = _batch(net, x)
    tape = Tape(param_index=_param_index(net))
    for i, layer in enumerate(net.layers):
        tape.nodes.append(TapeNode("affine", i, h, None))
        z = h @ layer.weights.T + layer.bias
        if i == net.depth:
            h = z
            break
        slopes = np.empty_like(z)
        for kind, idx in net._groups[i]:
            slopes[:, idx] = subgradient(kind, z[:, idx])
        tape.nodes.append(TapeNode("activation", i, z, slopes))
        h = net.activate(i, z)
    tape.output = h
    return tape


def backward(net: Network, tape: Tape, upstream) -> tuple[np.ndarray, np.ndarray]:
    """Return (parameter gradient summed over the batch, input gradient per sample)."""
    g = np.broadcast_to(np.asarray(upstream, dtype=float), tape.output.shape).copy()
    theta = np.zeros(sum(l.weights.size + l.out_dim for l in net.layers))
    for node in reversed(tape.nodes):
        if node.op == "activation":
            g = g * node.local
        else:
            layer = net.layers[node.layer]
            ws, bs = tape.param_index[node.layer]
            theta[ws] = (g.T @ node.inputs).ravel()
            theta[bs] = g.sum(axis=0)
            g = g @ layer.weights
    return theta, g


def grad(net: Network, x, upstream=1.0) -> np.ndarray:
    """d(upstream . output)/d(parameters), summed over the batch."""
    tape = record(net, x)
    return backward(net, tape, upstream)[0]


def input_grad(net: Network, x, upstream=1.0) -> np.ndarray:
    tape = record(net, x)
    return backward(net, tape, upstream)[1]


# --- losses -----------------------------------------------------------------


def _check_loss(kind: str) -> str:
    kind = kind.upper()
    if kind not in LOSSES:
        raise ValueError(f"loss must be one of {LOSSES}")
    return kind


def loss_value(kind: str, prediction, target) -> float:
    """MSE = mean squared residual, MAE = mean absolute residual, MAX = largest absolute residual."""
    r = np.asarray(prediction, dtype=float).reshape(-1) - np.asarray(target, dtype=float).reshape(-1)
    kind = _check_loss(kind)
    if kind == "MSE":
        return float(np.mean(r * r))
    if kind == "MAE":
        return float(np.mean(np.abs(r)))
    return float(np.max(np.abs(r)))


def loss_gradient(kind: str, prediction, target) -> np.ndarray:
    """Derivative of the loss with respect to each prediction (a subgradient for MAE and MAX)."""
    p = np.asarray(prediction, dtype=float)
    r = p.reshape(-1) - np.asarray(target, dtype=float).reshape(-1)
    kind = _check_loss(kind)
    if kind == "MSE":
        g = 2.0 * r / r.size
    elif kind == "MAE":
        g = np.sign(r) / r.size
    else:
        g = np.zeros_like(r)
        k = int(np.argmax(np.abs(r)))
        g[k] = np.sign(r[k])
    return g.reshape(p.shape)


# --- training ---------------------------------------------------------------


def _sin8(x):
    return 0.6 * np.sin(8.0 * x[:, 0])


def _osc2d(x):
    return 0.6 * np.sin(8.0 * x[:, 0]) + 0.4 * np.sin(16.0 * x[:, 1])


def _constant(x):
    return np.full(x.shape[0], 0.3)


TOY_TARGETS: dict[str, tuple[int, Callable]] = {
    "sin8": (1, _sin8),
    "osc2d": (2, _osc2d),
    "constant": (1, _constant),
}


@dataclass(frozen=True)
class Architecture:
    width: int = 40
    depth: int = 2
    activation: ActivationKind | str = EUAF
    input_dim: int = 1

    def __post_init__(self):
        if self.width < 1 or self.depth < 0 or self.input_dim < 1:
            raise ValueError("width and input_dim must be positive, depth nonnegative")
        if isinstance(self.activation, str):
            object.__setattr__(self, "activation", parse_tag(self.activation))


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 2000
    batch_size: int = 64
    learning_rate: float = 0.1
    decay: float = 0.9  # multiply the rate by this every decay_period steps
    decay_period: int = 200
    seed: int = 0
    loss: str = "MSE"
    samples: int = 20_000
    test_samples: int = 2_000
    log_every: int = 100

    def __post_init__(self):
        if self.steps < 1 or self.batch_size < 1 or self.samples < 1 or self.test_samples < 1:
            raise ValueError("steps, batch size and sample counts must be positive")
        if not self.learning_rate > 0 or not 0 < self.decay <= 1 or self.decay_period < 1:
            raise ValueError("need rate > 0, decay in (0, 1], decay period >= 1")
        if self.log_every < 1:
            raise ValueError("log_every must be positive")
        object.__setattr__(self, "loss", _check_loss(self.loss))

    def rate(self, step: int) -> float:
        return self.learning_rate * self.decay ** (step // self.decay_period)


@dataclass(frozen=True)
class TrainResult:
    network: Network
    trace: tuple[tuple[int, float, float, float, float], ...]  # step, train MSE, test MSE, test MAE, test MAX
    diverged: bool
    initial_train_mse: float
    final_train_mse: float
    test_losses: dict


def init_network(arch: Architecture, rng: np.random.Generator) -> Network:
    """Glorot-uniform weights, zero biases."""
    dims = [arch.input_dim] + [arch.width] * arch.depth + [1]
    layers = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        layers.append(AffineLayer(rng.uniform(-limit, limit, (fan_out, fan_in)), np.zeros(fan_out)))
    acts = tuple((arch.activation,) * arch.width for _ in range(arch.depth))
    return Network(arch.input_dim, tuple(layers), acts)


def _losses(net: Network, x, y) -> tuple[float, float, float]:
    p = net.scalar(x)
    return loss_value("MSE", p, y), loss_value("MAE", p, y), loss_value("MAX", p, y)


def train_toy(target: str | Callable, arch: Architecture = Architecture(), config: TrainConfig = TrainConfig()) -> TrainResult:
    """Mini-batch SGD on samples of ``target`` over [0, 1]^d.

    ``target`` is a name from TOY_TARGETS or a function of an (n, d) array.
    Deterministic for a fixed seed.  Stops early, flagged, once the loss
    exceeds 1e6 or stops being finite.
    """
    if isinstance(target, str):
        if target not in TOY_TARGETS:
            raise ValueError(f"unknown toy target {target!r}; choose from {sorted(TOY_TARGETS)}")
        d, f = TOY_TARGETS[target]
        if d != arch.input_dim:
            arch = Architecture(arch.width, arch.depth, arch.activation, d)
    else:
        f = target
    rng = np.random.default_rng(config.seed)
    x_train = rng.random((config.samples, arch.input_dim))
    x_test = rng.random((config.test_samples, arch.input_dim))
    y_train = np.asarray(f(x_train), dtype=float).reshape(-1)
    y_test = np.asarray(f(x_test), dtype=float).reshape(-1)
    net = init_network(arch, rng)
    theta = net.parameters()

    def log(step, net):
        train = loss_value("MSE", net.scalar(x_train), y_train)
        return (step, train, *_losses(net, x_test, y_test))

    trace = [log(0, net)]
    diverged = False
    for step in range(1, config.steps + 1):
        idx = rng.integers(0, config.samples, config.batch_size)
        tape = record(net, x_train[idx])
        pred = tape.output[:, 0]
        batch_loss = loss_value(config.loss, pred, y_train[idx])
        if not math.isfinite(batch_loss) or batch_loss > DIVERGENCE:
            diverged = True
            break
        g, _ = backward(net, tape, loss_gradient(config.loss, pred, y_train[idx])[:, None])
        theta = theta - config.rate(step - 1) * g
        if not np.all(np.isfinite(theta)):
            diverged = True
            break
        net = net.with_parameters(theta)
        if step % config.log_every == 0 or step == config.steps:
            trace.append(log(step, net))
            if trace[-1][1] > DIVERGENCE:
                diverged = True
                break
    last = trace[-1]
    return TrainResult(
        network=net,
        trace=tuple(trace),
        diverged=diverged,
        initial_train_mse=trace[0][1],
        final_train_mse=last[1],
        test_losses={"MSE": last[2], "MAE": last[3], "MAX": last[4]},
    )
