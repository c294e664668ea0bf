"""Small EUAF networks with exact algebraic behaviour."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .activation import EUAF, STEP, euaf
from .network import AffineLayer, Network, NetworkError, affine_net, compose

__all__ = [
    "GadgetSpec",
    "MagnitudeReduced",
    "build_gadget",
    "square_net",
    "product_net",
    "step_encode_net",
    "partition_component_net",
    "partition_bump",
    "snap_net",
    "identity_widen_net",
    "magnitude_reduced_affine",
]

# first-layer rows of the square gadget acting on s: (-s-1, -s-2, (6-5s)/11)
_SQ_W0 = np.array([-1.0, -1.0, -5.0 / 11.0])
_SQ_B0 = np.array([-1.0, -2.0, 6.0 / 11.0])
_SQ_W1 = np.array([[-12.0, 12.0, 0.0], [0.0, 0.0, 1.0]])
_SQ_B1 = np.array([1.0, 0.0])
_SQ_OUT = np.array([12.0, 11.0])


def square_net() -> Network:
    """x -> x^2 on [-1, 1]; width 3, depth 2."""
    layers = (
        AffineLayer(_SQ_W0[:, None], _SQ_B0),
        AffineLayer(_SQ_W1, _SQ_B1),
        AffineLayer(_SQ_OUT[None, :], [0.0]),
    )
    return Network(1, layers, ((EUAF,) * 3, (EUAF,) * 2), ((-1.0,), (1.0,)))


def product_net(bound: float) -> Network:
    """(x, y) -> xy on [-bound, bound]^2; width 9, depth 2.

    Three square gadgets evaluate ((x+y)/2M)^2, (x/2M)^2 and (y/2M)^2; the
    input scaling is folded into the first layer.
    """
    if not bound > 0:
        raise NetworkError("product bound must be positive")
    m = float(bound)
    probes = np.array([[1.0, 1.0], [1.0, 0.0], [0.0, 1.0]]) / (2 * m)
    w0 = np.vstack([np.outer(_SQ_W0, p) for p in probes])
    b0 = np.tile(_SQ_B0, 3)
    w1 = np.zeros((6, 9))
    for j in range(3):
        w1[2 * j : 2 * j + 2, 3 * j : 3 * j + 3] = _SQ_W1
    b1 = np.tile(_SQ_B1, 3)
    out = 2 * m * m * np.concatenate([_SQ_OUT, -_SQ_OUT, -_SQ_OUT])
    layers = (AffineLayer(w0, b0), AffineLayer(w1, b1), AffineLayer(out[None, :], [0.0]))
    return Network(2, layers, ((EUAF,) * 9, (EUAF,) * 6), ((-m, -m), (m, m)))


def step_encode_net(K: int) -> Network:
    """x -> k on [(2k-2)/2K, (2k-1)/2K]: one step-tagged neuron, psi(2Kx)/2 + 1."""
    if K < 1:
        raise NetworkError("K must be at least 1")
    layers = (AffineLayer([[2.0 * K]], [0.0]), AffineLayer([[0.5]], [1.0]))
    return Network(1, layers, ((STEP,),), ((0.0,), (1.0,)))


def partition_bump(x):
    """psi(x) = euaf(x + 1 - euaf(x + 1)); a unit hat on [2k, 2k+1], zero on [2k+1, 2k+2]."""
    x = np.asarray(x, dtype=float)
    return euaf(x + 1.0 - euaf(x + 1.0))


def partition_component_net(K: int, i: int) -> Network:
    """x -> psi(2Kx + i/2) on [0, 9/10]; width 2, depth 2.

    Uses the bounded rewrite psi(t) = euaf(c euaf((t+1)/c) - euaf(t+1)),
    valid while t + 1 <= c; c = max(2K+1, 1.8K+3) covers t up to 1.8K+2.
    """
    if K < 1:
        raise NetworkError("K must be at least 1")
    if i not in (1, 2, 3, 4):
        raise NetworkError("component index must be in 1..4")
    c = max(2.0 * K + 1.0, 1.8 * K + 3.0)
    shift = i / 2.0 + 1.0
    w0 = np.array([[2.0 * K / c], [2.0 * K]])
    b0 = np.array([shift / c, shift])
    layers = (AffineLayer(w0, b0), AffineLayer([[c, -1.0]], [0.0]), AffineLayer([[1.0]], [0.0]))
    return Network(1, layers, ((EUAF, EUAF), (EUAF,)), ((0.0,), (0.9,)))


def snap_net(bound: float) -> Network:
    """y -> M euaf(y/M) + 1/2 - euaf(y + 3/2), which equals 2k+1 when |2k+1-y| <= 1/2."""
    if not bound > 0:
        raise NetworkError("snap bound must be positive")
    m = float(bound)
    layers = (AffineLayer([[1.0 / m], [1.0]], [0.0, 1.5]), AffineLayer([[m, -1.0]], [0.5]))
    return Network(1, layers, ((EUAF, EUAF),), ((0.0,), (m,)))


def identity_widen_net(bound: float, depth: int = 1) -> Network:
    """x -> 2M euaf((x+M)/2M) - M repeated; the identity on [-M, M]."""
    if not bound > 0 or depth < 1:
        raise NetworkError("identity widening needs bound > 0 and depth >= 1")
    m = float(bound)
    layers = [AffineLayer([[0.5 / m]], [0.5])]
    layers += [AffineLayer([[1.0]], [0.0]) for _ in range(depth - 1)]
    layers.append(AffineLayer([[2 * m]], [-m]))
    return Network(1, tuple(layers), tuple((EUAF,) for _ in range(depth)), ((-m,), (m,)))


@dataclass(frozen=True)
class MagnitudeReduced:
    network: Network
    c0: float
    scale: float
    max_parameter: float


def magnitude_reduced_affine(a: float, b: float, range_bound: float) -> MagnitudeReduced:
    """Depth-2 EUAF net for x -> ax + b on [-R, R] with parameters of size ~ max(sqrt a, sqrt b).

    The input is mapped to t = x/2R + 1/2 in [0, 1] where euaf is the identity;
    the large slope and offset are then spread over many output weights each
    bounded by S = max(sqrt a, sqrt b, 1).  ``c0`` is the measured ratio
    max|parameter| / S.
    """
    if a < 1 or b < 1:
        raise NetworkError("magnitude reduction expects a, b >= 1")
    if not range_bound > 0:
        raise NetworkError("range bound must be positive")
    r = float(range_bound)
    s = max(math.sqrt(a), math.sqrt(b), 1.0)
    slope_total = 2.0 * r * a  # coefficient of t
    const_total = b - a * r  # constant left after substituting x = 2Rt - R
    n_t = max(1, math.ceil(slope_total / s))
    n_c = math.ceil(abs(const_total) / s) if const_total != 0 else 0
    # hidden layer 1: t and the constant 1
    w0 = np.array([[1.0 / (2.0 * r)], [0.0]])
    b0 = np.array([0.5, 1.0])
    # hidden layer 2: copies of t and of 1, still inside euaf's identity segment
    w1 = np.zeros((n_t + n_c, 2))
    w1[:n_t, 0] = 1.0
    w1[n_t:, 1] = 1.0
    out = np.concatenate([np.full(n_t, slope_total / n_t), np.full(n_c, const_total / max(n_c, 1))])
    net = Network(
        1,
        (AffineLayer(w0, b0), AffineLayer(w1, np.zeros(n_t + n_c)), AffineLayer(out[None, :], [0.0])),
        ((EUAF, EUAF), (EUAF,) * (n_t + n_c)),
        ((-r,), (r,)),
    )
    biggest = float(max(np.max(np.abs(l.weights)) if l.weights.size else 0.0 for l in net.layers))
    biggest = max(biggest, float(max(np.max(np.abs(l.bias)) for l in net.layers)))
    return MagnitudeReduced(net, biggest / s, s, biggest)


@dataclass(frozen=True)
class GadgetSpec:
    """Named gadget plus its parameters, e.g. ``GadgetSpec("product", {"M": 3})``."""

    kind: str
    params: dict = field(default_factory=dict)


def build_gadget(spec: GadgetSpec) -> Network:
    p = spec.params
    if spec.kind == "square":
        return square_net()
    if spec.kind == "product":
        return product_net(p.get("M", 1.0))
    if spec.kind == "step":
        return step_encode_net(int(p.get("K", 5)))
    if spec.kind == "partition":
        return partition_component_net(int(p.get("K", 10)), int(p.get("i", 1)))
    if spec.kind == "identity":
        return identity_widen_net(p.get("M", 1.0), int(p.get("depth", 1)))
    if spec.kind == "snap":
        return snap_net(p.get("M", 10.0))
    if spec.kind == "magnitude":
        return magnitude_reduced_affine(p.get("a", 1.0), p.get("b", 1.0), p.get("range_bound", 1.0)).network
    raise NetworkError(f"unknown gadget kind {spec.kind!r}")


def shifted(net: Network, scale: float, offset: float) -> Network:
    """``net(scale * x + offset)`` for a scalar-input network."""
    return compose(net, affine_net([[scale]], [offset]))
