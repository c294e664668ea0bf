"""Smooth and sigmoidal relatives of the EUAF, plus activation substitution.

rho_s is the s-fold integral of the EUAF from 0, so rho_s is C^s and its s-th
derivative is the EUAF.  On x >= 0 it splits into a polynomial drift plus a
periodic part built from zero-mean primitives of the centred triangular wave;
on x < 0 the softsign branch integrates in closed form.

The sigmoidal activation integrates (c sigma(t) + 1)/(2t + 1)^2 on the
positive side and equals softsign on the negative side; c is chosen so both
limits are -1 and 1.  Every per-segment integral has an elementary
antiderivative, so the whole thing is evaluated exactly rather than by
quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import Polynomial
from scipy.special import polygamma

from .activation import EUAF, SIGMOIDAL, ActivationKind, DomainError, euaf, smooth
from .network import AffineLayer, Network, NetworkError, affine_net, compose, parallel

__all__ = [
    "MAX_SMOOTH_ORDER",
    "compute_c",
    "SIGMOIDAL_C",
    "eval_sigmoidal",
    "sigmoidal_derivative",
    "eval_smooth",
    "DifferenceScheme",
    "SubstitutionResult",
    "SubstitutionError",
    "substitute_activation",
    "SigmaApproximation",
    "approximate_sigma_by_sigmoidal",
]

MAX_SMOOTH_ORDER = 4
_TABLE = 1024


class SubstitutionError(RuntimeError):
    def __init__(self, message: str, best_delta: float, best_difference: float):
        super().__init__(f"{message} (best delta {best_delta:.3g}, sup difference {best_difference:.3g})")
        self.best_delta = best_delta
        self.best_difference = best_difference


# --- sigmoidal activation -------------------------------------------------


def _pair_integral(m):
    # integral of sigma(t)/(2t+1)^2 over one period [2m, 2m+2]
    m = np.asarray(m, dtype=float)
    return 0.25 * np.log1p(4.0 / ((4 * m + 1) * (4 * m + 5)))


def _tail(n: int) -> float:
    # sum_{m >= n} of the period integrals.  With a = 4m+3 each term is
    # -(1/4) log(1 - 4/a^2) = 1/a^2 + 2/a^4 + 16/(3 a^6) + ...; the sums of
    # inverse powers are polygamma values at n + 3/4.
    z = n + 0.75
    s2 = polygamma(1, z) / 16.0
    s4 = polygamma(3, z) / (6.0 * 256.0)
    s6 = polygamma(5, z) / (120.0 * 4096.0)
    return float(s2 + 2.0 * s4 + 16.0 / 3.0 * s6)


def _positive_integral(cutoff: int = _TABLE) -> float:
    return math.fsum(_pair_integral(np.arange(cutoff)).tolist()) + _tail(cutoff)


def compute_c(cutoff: int = _TABLE) -> float:
    """c = 1 / (2 * integral_0^inf sigma(t)/(2t+1)^2 dt).

    Periods below ``cutoff`` are summed exactly; the rest come from an
    asymptotic series whose first omitted term is below 1e-20 for cutoff >= 64.
    """
    if cutoff < 64:
        raise ValueError("cutoff must be at least 64")
    return 1.0 / (2.0 * _positive_integral(cutoff))


_TOTAL = _positive_integral()
SIGMOIDAL_C = 1.0 / (2.0 * _TOTAL)
_PREFIX = np.concatenate([[0.0], np.array([math.fsum(_pair_integral(np.arange(n)).tolist()) for n in range(1, _TABLE + 1)])])


def _log1p_minus_ratio(rho):
    # log1p(rho) - rho/(1+rho), with a series near 0 to avoid cancellation
    rho = np.asarray(rho, dtype=float)
    small = np.abs(rho) < 1e-3
    r = np.where(small, rho, 0.0)
    series = r * r * (0.5 + r * (-2.0 / 3.0 + r * (0.75 + r * (-0.8 + r * 5.0 / 6.0))))
    rb = np.where(small, 1.0, rho)
    return np.where(small, series, np.log1p(rb) - rb / (1.0 + rb))


def _prefix(n: np.ndarray) -> np.ndarray:
    out = np.empty(n.shape)
    low = n <= _TABLE
    out[low] = _PREFIX[n[low].astype(np.int64)]
    if np.any(~low):
        out[~low] = [_TOTAL - _tail(int(k)) for k in n[~low]]
    return out


def _weighted_integral(x: np.ndarray) -> np.ndarray:
    # integral_0^x sigma(t)/(2t+1)^2 dt for x >= 0
    n = np.floor(x / 2.0)
    r = x - 2.0 * n
    rising = r < 1.0
    rise_part = 0.25 * _log1p_minus_ratio(2.0 * np.minimum(r, 1.0) / (4 * n + 1))
    full_rise = 0.25 * _log1p_minus_ratio(2.0 / (4 * n + 1))
    rho = 2.0 * np.maximum(r - 1.0, 0.0) / (4 * n + 3)
    fall_part = 0.25 * ((4 * n + 5) / (2 * x + 1) * rho - np.log1p(rho))
    return _prefix(n) + np.where(rising, rise_part, full_rise + fall_part)


def eval_sigmoidal(x):
    """Sigmoidal activation; softsign for x <= 0, increasing to 1 as x -> inf."""
    x = np.asarray(x, dtype=float)
    neg = x <= 0
    xn = np.where(neg, x, 0.0)
    xp = np.where(neg, 0.0, x)
    pos = SIGMOIDAL_C * _weighted_integral(xp) + xp / (2.0 * xp + 1.0)
    return np.where(neg, xn / (1.0 - xn), pos)


def sigmoidal_derivative(x):
    x = np.asarray(x, dtype=float)
    neg = x <= 0
    xn = np.where(neg, x, 0.0)
    xp = np.where(neg, 0.0, x)
    return np.where(neg, 1.0 / (1.0 - xn) ** 2, (SIGMOIDAL_C * euaf(xp) + 1.0) / (2.0 * xp + 1.0) ** 2)


# --- smooth activations ---------------------------------------------------


@lru_cache(maxsize=None)
def _periodic_primitives(order: int) -> tuple[tuple[Polynomial, Polynomial], ...]:
    """Zero-mean periodic primitives of tri - 1/2, as pieces on [0,1] and [1,2]."""
    pieces = [(Polynomial([-0.5, 1.0]), Polynomial([1.5, -1.0]))]
    for _ in range(order):
        p0, p1 = pieces[-1]
        q0 = p0.integ(lbnd=0.0)
        q1 = p1.integ(lbnd=1.0) + q0(1.0)
        mean = 0.5 * (q0.integ(lbnd=0.0)(1.0) + q1.integ(lbnd=1.0)(2.0))
        pieces.append((q0 - mean, q1 - mean))
    return tuple(pieces)


def _check_order(s) -> int:
    if not isinstance(s, (int, np.integer)) or not 1 <= s <= MAX_SMOOTH_ORDER:
        raise DomainError(f"smooth order must be an integer in 1..{MAX_SMOOTH_ORDER}")
    return int(s)


def _smooth_positive(s: int, x: np.ndarray) -> np.ndarray:
    prims = _periodic_primitives(s)
    r = np.mod(x, 2.0)
    p0, p1 = prims[s]
    periodic = np.where(r < 1.0, p0(np.minimum(r, 1.0)), p1(np.maximum(r, 1.0)))
    drift = x**s / (2.0 * math.factorial(s))
    correction = sum(prims[s - j][0](0.0) * x**j / math.factorial(j) for j in range(s))
    return drift + periodic - correction


def _smooth_negative(s: int, x: np.ndarray) -> np.ndarray:
    # sigma(t) = -1 + 1/(1-t) on t < 0; the s-fold integral of 1/(1-t) from 0
    # expands binomially in v = 1 - x.  Near 0 that expansion cancels badly, so
    # the power series sum_k k!/(k+s)! x^(k+s) takes over for |x| < 1/2.
    out = np.empty_like(x)
    near = x > -0.5
    if np.any(near):
        xs = x[near]
        total = np.zeros_like(xs)
        term_coeff = 1.0
        for k in range(1, 80):
            term_coeff = math.factorial(k) / math.factorial(k + s)
            total += term_coeff * xs ** (k + s)
        out[near] = total
    if np.any(~near):
        xf = x[~near]
        v = 1.0 - xf
        acc = (-v) ** (s - 1) * np.log(v)
        for j in range(1, s):
            acc += math.comb(s - 1, j) * (-v) ** (s - 1 - j) * (v**j - 1.0) / j
        out[~near] = -(xf**s) / math.factorial(s) - acc / math.factorial(s - 1)
    return out


def eval_smooth(s: int, x):
    """rho_s(x), the s-fold integral of the EUAF from 0."""
    s = _check_order(s)
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1)
    out = np.empty_like(flat)
    neg = flat < 0
    out[~neg] = _smooth_positive(s, flat[~neg])
    out[neg] = _smooth_negative(s, flat[neg])
    return out.reshape(x.shape)


# --- activation substitution ----------------------------------------------


@dataclass(frozen=True)
class DifferenceScheme:
    """Approximates the EUAF by a finite difference of another activation.

    ``order`` 0 means the activation is used as is.  ``order`` s uses the
    (centred) s-th difference with step delta, which converges to the s-th
    derivative, e.g. the EUAF for rho_s.
    """

    kind: ActivationKind
    order: int = 0
    centered: bool = True

    def terms(self, delta: float) -> list[tuple[float, float]]:
        s = self.order
        if s == 0:
            return [(0.0, 1.0)]
        base = -s / 2.0 if self.centered else 0.0
        return [((j + base) * delta, (-1.0) ** (s - j) * math.comb(s, j) / delta**s) for j in range(s + 1)]

    @classmethod
    def for_smooth(cls, s: int) -> "DifferenceScheme":
        return cls(smooth(_check_order(s)), s)


@dataclass(frozen=True)
class SubstitutionResult:
    network: Network
    delta: float
    sup_difference: float


def _replace_activations(net: Network, scheme: DifferenceScheme, delta: float) -> Network:
    terms = scheme.terms(delta)
    n_terms = len(terms)
    shifts = np.array([t[0] for t in terms])
    coeffs = np.array([t[1] for t in terms])
    layers = []
    prev_coeffs = None
    for i, layer in enumerate(net.layers):
        w, b = layer.weights, layer.bias
        if prev_coeffs is not None:
            # each old input column becomes n_terms columns scaled by the coefficients
            w = np.repeat(w, n_terms, axis=1) * np.tile(coeffs, w.shape[1])[None, :]
        if i < net.depth:
            w = np.repeat(w, n_terms, axis=0)
            b = np.repeat(b, n_terms) + np.tile(shifts, layer.out_dim)
            prev_coeffs = coeffs
        layers.append(AffineLayer(w, b))
    acts = tuple((scheme.kind,) * (len(a) * n_terms) for a in net.hidden_activations)
    return Network(net.input_dim, tuple(layers), acts, net.domain)


def _sample_domain(net: Network, samples: int) -> np.ndarray:
    lo, hi = (np.asarray(v, dtype=float) for v in net.domain)
    if net.input_dim == 1:
        return np.linspace(lo[0], hi[0], samples)[:, None]
    from scipy.stats import qmc

    pts = qmc.Halton(net.input_dim, scramble=False).random(samples)
    return lo + (hi - lo) * pts


def substitute_activation(
    net: Network,
    scheme: DifferenceScheme,
    epsilon: float,
    samples: int = 10_000,
    min_delta: float = 1e-12,
) -> SubstitutionResult:
    """Swap every EUAF neuron for a difference scheme, halving delta from 1.

    Stops at the first delta whose sup difference from ``net`` on ``samples``
    domain points is below epsilon/2.
    """
    if any(k != EUAF for acts in net.hidden_activations for k in acts):
        raise NetworkError("substitution expects an all-EUAF network")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    pts = _sample_domain(net, samples)
    ref = net.evaluate(pts)
    delta = 1.0
    best = (math.inf, delta, None)
    while delta >= min_delta:
        cand = _replace_activations(net, scheme, delta)
        diff = float(np.max(np.abs(cand.evaluate(pts) - ref)))
        if diff < best[0]:
            best = (diff, delta, cand)
        if diff < epsilon / 2:
            return SubstitutionResult(cand, delta, diff)
        delta /= 2.0
    raise SubstitutionError("no delta reached the target", best[1], best[0])


# --- EUAF approximated by a sigmoidal network -----------------------------


def _sig_net(input_dim, layers, widths, domain) -> Network:
    return Network(input_dim, tuple(layers), tuple((SIGMOIDAL,) * w for w in widths), domain)


def _identity_chain(depth: int, lam: float, dim_domain) -> Network:
    # z -> sigmoidal(lam z)/lam is the identity up to O(lam z^2)
    layers = [AffineLayer([[lam]], [0.0])] + [AffineLayer([[1.0]], [0.0]) for _ in range(depth - 1)]
    layers.append(AffineLayer([[1.0 / lam]], [0.0]))
    return _sig_net(1, layers, [1] * depth, dim_domain)


def _square(lam: float) -> Network:
    """v -> v^2 on [-4, 4]: 90 s(1 - 90 s(-v-4) + 90 s(-v-5)) - 11 v + 60."""
    layers = (
        AffineLayer([[-1.0], [-1.0], [lam]], [-4.0, -5.0, 0.0]),
        AffineLayer([[-90.0, 90.0, 0.0], [0.0, 0.0, 1.0]], [1.0, 0.0]),
        AffineLayer([[90.0, -11.0 / lam]], [60.0]),
    )
    return _sig_net(1, layers, [3, 2], ((-4.0,), (4.0,)))


def _product(bound: float, lam: float) -> Network:
    """(p, q) -> pq on [-4B, 4B]^2 from three squares at scale 1/(2B)."""
    sq = _square(lam)
    dom = ((-4 * bound, -4 * bound), (4 * bound, 4 * bound))
    branches = [
        compose(sq, affine_net([row], [0.0], dom))
        for row in ([1 / (2 * bound), 1 / (2 * bound)], [1 / (2 * bound), 0.0], [0.0, 1 / (2 * bound)])
    ]
    stacked = parallel(branches)
    k = 2 * bound * bound
    return compose(affine_net([[k, -k, -k]], [0.0]), stacked)


@dataclass(frozen=True)
class SigmaApproximation:
    network: Network
    delta: float
    eta: float
    identity_scale: float
    sup_error: float


def _sigma_candidate(M: float, delta: float, eta: float, lam: float) -> Network:
    c = SIGMOIDAL_C
    big = (M + 1.0) ** 2
    gamma = _product(big, lam)
    dom = ((-M,), (M,))

    def psi(scale: float, shift: float) -> Network:
        # x -> psi_delta(scale x + shift): ((2M+1)^2/c) * prod(square(u), diff) - 1/c
        u = affine_net([[2 * scale / (2 * M + 1)]], [(2 * shift + 1) / (2 * M + 1)], dom)
        square = compose(_square(lam), u)
        diff = Network(
            1,
            (AffineLayer([[scale], [scale]], [shift + delta, shift]), AffineLayer([[1.0 / delta, -1.0 / delta]], [0.0])),
            ((SIGMOIDAL,) * 2,),
            dom,
        )
        diff = compose(_identity_chain(1, lam, dom), diff)
        pair = parallel([square, diff])
        return compose(affine_net([[(2 * M + 1) ** 2 / c]], [-1.0 / c]), compose(gamma, pair))

    def ramp_half(shift: float) -> Network:
        # g~(x - shift) = (x - shift)/2 + (M+1)/2 (1 - psi((x - shift)/(M+1) + 1))
        p = psi(1.0 / (M + 1), 1.0 - shift / (M + 1))
        ident = _identity_chain(4, lam, dom)
        both = parallel([p, ident])
        return compose(affine_net([[-(M + 1) / 2, 0.5]], [(M + 1) / 2 - shift / 2]), both)

    carried = compose(_identity_chain(3, lam, dom), _sig_net(1, (AffineLayer([[1.0]], [0.0]), AffineLayer([[1.0]], [0.0])), [1], dom))
    inner = parallel([psi(1.0, 0.0), ramp_half(0.0), ramp_half(eta), carried, ramp_half(0.0), ramp_half(eta)])
    # outputs: psi(x), g~(x), g~(x-eta), sig(x), g~(x), g~(x-eta)
    first = compose(gamma, affine_net([[1, 0, 0, 0, 0, 0], [0, 1 / eta, -1 / eta, 0, 0, 0]], [0.0, 0.0]))
    second = compose(gamma, affine_net([[0, 0, 0, 1, 0, 0], [0, 0, 0, 0, -1 / eta, 1 / eta]], [0.0, 1.0]))
    outer = compose(affine_net([[1.0, 1.0]], [0.0]), parallel([first, second]))
    return compose(outer, inner).with_domain((-M,), (M,))


def approximate_sigma_by_sigmoidal(
    M: float,
    epsilon: float,
    samples: int = 10_000,
    identity_scale: float = 1e-9,
    min_delta: float = 1e-12,
) -> SigmaApproximation:
    """Width-50, depth-6 sigmoidal network within epsilon of the EUAF on [-M, M].

    The ramp width eta is the largest power of two below epsilon/6, where both
    activations stay under epsilon/6.  The difference step delta halves from 1
    until the sup error on ``samples`` grid points drops below epsilon.
    Identity neurons are s(lam z)/lam with lam = ``identity_scale``.
    """
    if M < 2:
        raise ValueError("M must be at least 2")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    eta = 2.0 ** math.floor(math.log2(epsilon / 6.0))
    if eta >= epsilon / 6.0:
        eta /= 2.0
    eta = min(eta, 0.5)
    grid = np.linspace(-M, M, samples)
    target = euaf(grid)
    delta = 1.0
    best = (math.inf, delta)
    while delta >= min_delta:
        net = _sigma_candidate(M, delta, eta, identity_scale)
        err = float(np.max(np.abs(net.scalar(grid) - target)))
        if err < best[0]:
            best = (err, delta)
        if err < epsilon:
            return SigmaApproximation(net, delta, eta, identity_scale, err)
        delta /= 2.0
    raise SubstitutionError("sigmoidal approximation did not converge", best[1], best[0])
