"""Layered affine networks with per-neuron activation tags.

A network is ``L_L o act o L_{L-1} o ... o act o L_0`` where each ``L_i`` is a
dense affine map and every hidden neuron carries its own activation tag.
Width is the largest hidden layer, depth the number of hidden layers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .activation import EUAF, IDENTITY, ActivationKind, DomainError, evaluate, parse_tag

__all__ = [
    "AffineLayer",
    "Network",
    "NetworkError",
    "ParamCount",
    "affine_net",
    "compose",
    "parallel",
    "sum_nets",
    "count_params",
    "serialize",
    "deserialize",
    "pad_depth",
]


class NetworkError(ValueError):
    """Structural problems: mismatched dimensions, malformed documents, missing bounds."""


def _frozen(a, ndim: int) -> np.ndarray:
    arr = np.array(a, dtype=float, copy=True)
    if arr.ndim != ndim:
        raise NetworkError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class AffineLayer:
    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w = _frozen(self.weights, 2)
        b = _frozen(self.bias, 1)
        if w.shape[0] != b.shape[0]:
            raise NetworkError(f"bias length {b.shape[0]} != weight rows {w.shape[0]}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, AffineLayer)
            and self.weights.shape == other.weights.shape
            and np.array_equal(self.weights, other.weights)
            and np.array_equal(self.bias, other.bias)
        )

    __hash__ = None


@dataclass(frozen=True)
class ParamCount:
    total: int
    nonzero: int


@dataclass(frozen=True, eq=False)
class Network:
    input_dim: int
    layers: tuple[AffineLayer, ...]
    hidden_activations: tuple[tuple[ActivationKind, ...], ...]
    domain: tuple[tuple[float, ...], tuple[float, ...]] | None = None
    _groups: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        layers = tuple(self.layers)
        acts = tuple(tuple(a) for a in self.hidden_activations)
        if not layers:
            raise NetworkError("a network needs at least one affine layer")
        if layers[0].in_dim != self.input_dim:
            raise NetworkError(f"layer 0 expects {layers[0].in_dim} inputs, network has {self.input_dim}")
        for i in range(1, len(layers)):
            if layers[i].in_dim != layers[i - 1].out_dim:
                raise NetworkError(
                    f"layer {i} expects {layers[i].in_dim} inputs but layer {i - 1} emits {layers[i - 1].out_dim}"
                )
        if len(acts) != len(layers) - 1:
            raise NetworkError(f"{len(acts)} activation lists for {len(layers) - 1} hidden layers")
        for i, a in enumerate(acts):
            if len(a) != layers[i].out_dim:
                raise NetworkError(f"hidden layer {i} has {layers[i].out_dim} neurons but {len(a)} activation tags")
        dom = self.domain
        if dom is not None:
            lo = tuple(float(v) for v in np.atleast_1d(dom[0]))
            hi = tuple(float(v) for v in np.atleast_1d(dom[1]))
            if len(lo) != self.input_dim or len(hi) != self.input_dim:
                raise NetworkError("domain bounds must match input_dim")
            if any(a > b for a, b in zip(lo, hi)):
                raise NetworkError("domain needs lo <= hi")
            dom = (lo, hi)
        groups = []
        for a in acts:
            kinds = {}
            for j, k in enumerate(a):
                kinds.setdefault(k, []).append(j)
            groups.append(tuple((k, np.array(idx)) for k, idx in kinds.items()))
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "hidden_activations", acts)
        object.__setattr__(self, "domain", dom)
        object.__setattr__(self, "_groups", tuple(groups))

    @property
    def depth(self) -> int:
        return len(self.layers) - 1

    @property
    def width(self) -> int:
        return max((l.out_dim for l in self.layers[:-1]), default=0)

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    def activate(self, i: int, z: np.ndarray) -> np.ndarray:
        """Apply hidden layer ``i``'s activations to pre-activations ``z`` (batch, n)."""
        groups = self._groups[i]
        if len(groups) == 1:
            return np.asarray(evaluate(groups[0][0], z))
        out = np.empty_like(z)
        for kind, idx in groups:
            out[:, idx] = evaluate(kind, z[:, idx])
        return out

    def __call__(self, x) -> np.ndarray:
        return self.evaluate(x)

    def evaluate(self, x) -> np.ndarray:
        """Forward pass.  ``x`` of shape (input_dim,) or (batch, input_dim)."""
        arr = np.asarray(x, dtype=float)
        single = arr.ndim <= 1
        if self.input_dim == 1 and arr.ndim == 1 and arr.shape[0] != 1:
            single = False
            arr = arr[:, None]
        h = np.atleast_2d(arr)
        if h.shape[1] != self.input_dim:
            raise NetworkError(f"input has {h.shape[1]} coordinates, network expects {self.input_dim}")
        for i, layer in enumerate(self.layers):
            z = h @ layer.weights.T + layer.bias
            h = self.activate(i, z) if i < self.depth else z
        return h[0] if single else h

    def scalar(self, x) -> np.ndarray:
        """Evaluate a scalar-output network on a batch, returning a flat array."""
        return np.asarray(self.evaluate(np.asarray(x, dtype=float).reshape(-1, self.input_dim)))[:, 0]

    def with_domain(self, lo, hi) -> "Network":
        return Network(self.input_dim, self.layers, self.hidden_activations, (tuple(np.atleast_1d(lo)), tuple(np.atleast_1d(hi))))

    def parameters(self) -> np.ndarray:
        return np.concatenate([np.concatenate([l.weights.ravel(), l.bias]) for l in self.layers])

    def with_parameters(self, theta: np.ndarray) -> "Network":
        theta = np.asarray(theta, dtype=float)
        layers, pos = [], 0
        for l in self.layers:
            nw = l.weights.size
            w = theta[pos : pos + nw].reshape(l.weights.shape)
            pos += nw
            b = theta[pos : pos + l.out_dim]
            pos += l.out_dim
            layers.append(AffineLayer(w, b))
        if pos != theta.size:
            raise NetworkError("parameter vector length does not match the network")
        return Network(self.input_dim, tuple(layers), self.hidden_activations, self.domain)

    def structurally_equal(self, other: "Network") -> bool:
        return (
            self.input_dim == other.input_dim
            and self.domain == other.domain
            and self.hidden_activations == other.hidden_activations
            and len(self.layers) == len(other.layers)
            and all(a == b for a, b in zip(self.layers, other.layers))
        )


def affine_net(weights, bias, domain=None) -> Network:
    """A network with no hidden layer."""
    w = np.atleast_2d(np.asarray(weights, dtype=float))
    return Network(w.shape[1], (AffineLayer(w, np.atleast_1d(bias)),), (), domain)


def compose(outer: Network, inner: Network, junction: Sequence[ActivationKind] | None = None) -> Network:
    """``outer o inner``.

    Without a junction (or an all-identity one) the inner output map and the
    outer input map are fused into one affine layer, so depths add.  A
    junction inserts one hidden layer of the given activations between them.
    """
    if outer.input_dim != inner.output_dim:
        raise NetworkError(f"outer expects {outer.input_dim} inputs, inner emits {inner.output_dim}")
    if junction is not None and len(junction) != inner.output_dim:
        raise NetworkError("junction needs one activation per inner output")
    if junction is None or all(k == IDENTITY for k in junction):
        last, first = inner.layers[-1], outer.layers[0]
        fused = AffineLayer(first.weights @ last.weights, first.weights @ last.bias + first.bias)
        layers = inner.layers[:-1] + (fused,) + outer.layers[1:]
        acts = inner.hidden_activations + outer.hidden_activations
    else:
        layers = inner.layers + outer.layers
        acts = inner.hidden_activations + (tuple(junction),) + outer.hidden_activations
    return Network(inner.input_dim, layers, acts, inner.domain)


def _block_diag(mats: Sequence[np.ndarray]) -> np.ndarray:
    rows = sum(m.shape[0] for m in mats)
    cols = sum(m.shape[1] for m in mats)
    out = np.zeros((rows, cols))
    r = c = 0
    for m in mats:
        out[r : r + m.shape[0], c : c + m.shape[1]] = m
        r += m.shape[0]
        c += m.shape[1]
    return out


def pad_depth(net: Network, depth: int, bound: float | None) -> Network:
    """Append identity-widening layers until ``net`` has the requested depth.

    Each padding layer computes ``2M euaf((y+M)/2M) - M`` per output with
    ``M = bound + 1``, which is the identity whenever ``|y| <= M``.
    """
    extra = depth - net.depth
    if extra < 0:
        raise NetworkError("cannot pad a network to a smaller depth")
    if extra == 0:
        return net
    if bound is None:
        raise NetworkError("padding needs a declared output bound")
    m = float(bound) + 1.0
    n = net.output_dim
    eye = np.eye(n)
    enter = affine_net(eye / (2 * m), np.full(n, 0.5))
    layers = list(net.layers)
    acts = list(net.hidden_activations)
    last = layers.pop()
    layers.append(AffineLayer(enter.layers[0].weights @ last.weights, enter.layers[0].weights @ last.bias + 0.5))
    acts.append((EUAF,) * n)
    for _ in range(extra - 1):
        # between padding layers the value stays in [0, 1], where euaf is the identity
        layers.append(AffineLayer(eye, np.zeros(n)))
        acts.append((EUAF,) * n)
    layers.append(AffineLayer(2 * m * eye, np.full(n, -m)))
    return Network(net.input_dim, tuple(layers), tuple(acts), net.domain)


def parallel(nets: Sequence[Network], equalize_depth: bool = True, bounds: Sequence[float | None] | None = None) -> Network:
    """Stack networks that share an input; outputs are concatenated.

    Branches shallower than the deepest one are padded with identity-widening
    layers, which needs each such branch's output bound in ``bounds``.
    """
    nets = list(nets)
    if not nets:
        raise NetworkError("parallel needs at least one network")
    d = nets[0].input_dim
    if any(n.input_dim != d for n in nets):
        raise NetworkError("parallel branches must share input_dim")
    depth = max(n.depth for n in nets)
    if any(n.depth != depth for n in nets):
        if not equalize_depth:
            raise NetworkError("branches differ in depth and equalize_depth is off")
        bounds = list(bounds) if bounds is not None else [None] * len(nets)
        nets = [pad_depth(n, depth, b) for n, b in zip(nets, bounds)]
    layers = [
        AffineLayer(
            np.vstack([n.layers[0].weights for n in nets]),
            np.concatenate([n.layers[0].bias for n in nets]),
        )
    ]
    for i in range(1, depth + 1):
        layers.append(
            AffineLayer(
                _block_diag([n.layers[i].weights for n in nets]),
                np.concatenate([n.layers[i].bias for n in nets]),
            )
        )
    acts = tuple(sum((n.hidden_activations[i] for n in nets), ()) for i in range(depth))
    return Network(d, tuple(layers), acts, nets[0].domain)


def sum_nets(nets: Sequence[Network], coefficients: Sequence[float], bounds=None) -> Network:
    """Scalar network computing ``sum_i c_i * net_i(x)``."""
    if len(nets) != len(coefficients):
        raise NetworkError("one coefficient per network")
    if any(n.output_dim != 1 for n in nets):
        raise NetworkError("sum_nets needs scalar-output networks")
    stacked = parallel(nets, True, bounds)
    c = np.asarray(coefficients, dtype=float)[None, :]
    return compose(affine_net(c, [0.0]), stacked)


def count_params(net: Network) -> ParamCount:
    total = sum(l.weights.size + l.bias.size for l in net.layers)
    nonzero = sum(int(np.count_nonzero(l.weights)) + int(np.count_nonzero(l.bias)) for l in net.layers)
    return ParamCount(total, nonzero)


def _floats(values, where: str) -> list:
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise NetworkError(f"{where}: non-finite value cannot be serialized")
    return arr.tolist()


def to_document(net: Network) -> dict:
    layers = []
    for i, l in enumerate(net.layers):
        acts = [str(k) for k in net.hidden_activations[i]] if i < net.depth else None
        layers.append({"weights": _floats(l.weights, f"layer {i}"), "bias": _floats(l.bias, f"layer {i}"), "activations": acts})
    dom = None if net.domain is None else {"lo": list(net.domain[0]), "hi": list(net.domain[1])}
    return {"input_dim": net.input_dim, "domain": dom, "layers": layers}


def serialize(net: Network, indent: int | None = None) -> str:
    """JSON text; floats use Python's shortest round-trip repr."""
    return json.dumps(to_document(net), indent=indent)


def from_document(doc: dict) -> Network:
    if not isinstance(doc, dict):
        raise NetworkError("document root must be an object")
    for key in ("input_dim", "layers"):
        if key not in doc:
            raise NetworkError(f"missing field {key!r}")
    d = doc["input_dim"]
    if not isinstance(d, int) or d < 1:
        raise NetworkError("input_dim must be a positive integer")
    raw = doc["layers"]
    if not isinstance(raw, list) or not raw:
        raise NetworkError("layers must be a non-empty list")
    layers, acts = [], []
    prev = d
    for i, entry in enumerate(raw):
        if not isinstance(entry, dict) or "weights" not in entry or "bias" not in entry:
            raise NetworkError(f"layer {i}: needs 'weights' and 'bias'")
        try:
            w = np.array(entry["weights"], dtype=float)
            b = np.array(entry["bias"], dtype=float)
        except (TypeError, ValueError) as exc:
            raise NetworkError(f"layer {i}: {exc}") from None
        if w.ndim != 2 or b.ndim != 1:
            raise NetworkError(f"layer {i}: weights must be a matrix and bias a vector")
        if w.shape[1] != prev:
            raise NetworkError(f"layer {i}: expects {w.shape[1]} inputs but receives {prev}")
        if w.shape[0] != b.shape[0]:
            raise NetworkError(f"layer {i}: bias length {b.shape[0]} != weight rows {w.shape[0]}")
        tags = entry.get("activations")
        last = i == len(raw) - 1
        if last and tags is not None:
            raise NetworkError(f"layer {i}: final layer must have null activations")
        if not last:
            if not isinstance(tags, list) or len(tags) != w.shape[0]:
                raise NetworkError(f"layer {i}: needs one activation tag per neuron")
            try:
                acts.append(tuple(parse_tag(t) for t in tags))
            except (DomainError, ValueError) as exc:
                raise NetworkError(f"layer {i}: {exc}") from None
        layers.append(AffineLayer(w, b))
        prev = w.shape[0]
    dom = doc.get("domain")
    if dom is not None:
        if not isinstance(dom, dict) or "lo" not in dom or "hi" not in dom:
            raise NetworkError("domain must be null or have 'lo' and 'hi'")
        dom = (tuple(dom["lo"]), tuple(dom["hi"]))
    return Network(d, tuple(layers), tuple(acts), dom)


def deserialize(text: str) -> Network:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetworkError(f"malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return from_document(doc)
