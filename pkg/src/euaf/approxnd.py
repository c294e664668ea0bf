"""Multivariate approximators assembled from a Kolmogorov superposition.

Given f(x) = sum_i G_i(sum_j H_ij(y_j)) with y_j = (x_j - a)/(b - a), every
inner H_ij and outer G_i is approximated by a width-36 depth-5 EUAF network and
the pieces are wired as

    phi(x) = sum_i phi_i(euaf(sum_j psi_ij(x_j)))

Each inner sum is normalised into [delta, 1 - delta] and approximated to
within delta, so it stays inside [0, 1] where the EUAF junction is the
identity.  For
d inputs this gives 2d+1 terms, width 36 d (2d+1) and depth 11.

The decomposition itself is an input.  Two exact ones ship for testing: the
additive one for sum_j c_j x_j and a five-term one for x_1 x_2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc

from .activation import EUAF
from .approx1d import Approx1DConfig, Approx1DReport, ConstructionError, Target1D, build_interval_approx, estimate_cost
from .network import Network, affine_net, compose, count_params, sum_nets

__all__ = [
    "KstDecomposition",
    "ApproxNDReport",
    "additive_kst",
    "product_kst",
    "kst_sanity",
    "assemble",
    "nonzero_bound",
]


def _zero(y):
    return np.zeros_like(np.asarray(y, dtype=float))


def _identity(y):
    return np.asarray(y, dtype=float)


@dataclass(frozen=True)
class KstDecomposition:
    """Inner functions ``inner[i][j]`` on [0, 1] and outer functions ``outer[i]`` on R."""

    d: int
    inner: tuple[tuple[Callable, ...], ...]
    outer: tuple[Callable, ...]

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be positive")
        terms = 2 * self.d + 1
        if len(self.inner) != terms or any(len(row) != self.d for row in self.inner):
            raise ValueError(f"inner grid must be {terms} x {self.d}")
        if len(self.outer) != terms:
            raise ValueError(f"need {terms} outer functions")
        object.__setattr__(self, "inner", tuple(tuple(r) for r in self.inner))
        object.__setattr__(self, "outer", tuple(self.outer))

    def evaluate(self, y: np.ndarray) -> np.ndarray:
        """sum_i G_i(sum_j H_ij(y_j)) for y in [0, 1]^d, shape (n, d)."""
        y = np.atleast_2d(np.asarray(y, dtype=float))
        total = np.zeros(y.shape[0])
        for row, g in zip(self.inner, self.outer):
            s = sum(np.asarray(h(y[:, j]), dtype=float) for j, h in enumerate(row))
            total = total + np.asarray(g(s), dtype=float)
        return total


def additive_kst(coefficients: Sequence[float]) -> KstDecomposition:
    """Exact decomposition of sum_j c_j y_j: one identity outer term, the rest zero."""
    c = [float(v) for v in coefficients]
    d = len(c)
    inner = [tuple((lambda y, cj=cj: cj * np.asarray(y, dtype=float)) for cj in c)]
    inner += [tuple(_zero for _ in range(d)) for _ in range(2 * d)]
    outer = [_identity] + [_zero] * (2 * d)
    return KstDecomposition(d, tuple(inner), tuple(outer))


def product_kst() -> KstDecomposition:
    """y1 y2 = (y1 + y2)^2 / 2 - y1^2 / 2 - y2^2 / 2 as five terms."""

    def half_square(s):
        return 0.5 * np.asarray(s, dtype=float) ** 2

    def neg_half_square(s):
        return -0.5 * np.asarray(s, dtype=float) ** 2

    inner = (
        (_identity, _identity),
        (_identity, _zero),
        (_zero, _identity),
        (_zero, _zero),
        (_zero, _zero),
    )
    outer = (half_square, neg_half_square, neg_half_square, _zero, _zero)
    return KstDecomposition(2, inner, outer)


def _box_points(d: int, lo: float, hi: float, samples: int) -> np.ndarray:
    if d == 1:
        return np.linspace(lo, hi, samples)[:, None]
    pts = qmc.Halton(d, scramble=False).random(samples)
    corners = np.array(np.meshgrid(*[[0.0, 1.0]] * d)).reshape(d, -1).T if d <= 10 else np.empty((0, d))
    return lo + (hi - lo) * np.vstack([pts, corners])


def kst_sanity(kst: KstDecomposition, f: Callable, domain: tuple[float, float] = (0.0, 1.0), samples: int = 10_000) -> float:
    """Max |f(x) - decomposition(x)| over quasi-random points of [a, b]^d."""
    a, b = domain
    x = _box_points(kst.d, a, b, samples)
    return float(np.max(np.abs(np.asarray(f(x), dtype=float) - kst.evaluate((x - a) / (b - a)))))


def nonzero_bound(d: int) -> int:
    return 5437 * (d + 1) * (2 * d + 1)


@dataclass(frozen=True)
class ApproxNDReport:
    network: Network
    d: int
    epsilon: float
    grid_sup_error: float
    deltas: tuple[float, ...]
    junction_in_unit_interval: bool
    nonzero_parameters: int
    allocation: str
    inner_reports: tuple[tuple[Approx1DReport, ...], ...] = field(repr=False, default=())
    outer_reports: tuple[Approx1DReport, ...] = field(repr=False, default=())


def _modulus(values: np.ndarray, step: float, radius: float) -> float:
    # empirical modulus of continuity at ``radius`` of values sampled every ``step``
    from scipy.ndimage import maximum_filter1d, minimum_filter1d

    window = max(2, int(math.ceil(radius / step)) + 1)
    return float(np.max(maximum_filter1d(values, window, mode="nearest") - minimum_filter1d(values, window, mode="nearest")))


@dataclass(frozen=True)
class _Term:
    lo: float  # min of the raw inner sum
    span: float  # max - min of the raw inner sum
    mins: tuple[float, ...]  # per-coordinate minima of the raw inner functions
    active: bool  # outer function varies over the inner range


def _term_geometry(kst: KstDecomposition, i: int, grid: np.ndarray) -> _Term:
    vals = [np.asarray(h(grid), dtype=float) for h in kst.inner[i]]
    mins = tuple(float(v.min()) for v in vals)
    lo = sum(mins)
    span = sum(float(v.max()) for v in vals) - lo
    probe = np.asarray(kst.outer[i](np.linspace(lo, lo + span, 2001)), dtype=float)
    return _Term(lo, span, mins, bool(np.ptp(probe) > 0))


def _outer_on_unit(g: Callable, lo: float, span: float, margin: float) -> Callable:
    # z in [margin, 1 - margin] <-> raw inner sum in [lo, lo + span]
    stretch = span / (1.0 - 2.0 * margin)

    def outer(z):
        return np.asarray(g(lo + stretch * (np.asarray(z, dtype=float) - margin)), dtype=float)

    return outer


def _inner_on_interval(h: Callable, a: float, b: float, shift: float, scale: float, offset: float) -> Callable:
    def inner(t):
        return (np.asarray(h((np.asarray(t, dtype=float) - a) / (b - a)), dtype=float) - shift) * scale + offset

    return inner


_LADDER = tuple(0.25 * 2.0**-n for n in range(12))


def _care_image(inners, delta: float, care) -> list[tuple[float, float]]:
    # junction values reachable from the care intervals (d = 1)
    out = []
    for c0, c1 in care:
        z = sum(np.asarray(h(np.linspace(c0, c1, 2001)), dtype=float) for h in inners)
        out.append((float(z.min()), float(z.max())))
    return out


def _pad(intervals, r: float) -> list[tuple[float, float]]:
    return [(max(0.0, lo - r), min(1.0, hi + r)) for lo, hi in intervals]


def _care_modulus(values: np.ndarray, step: float, radius: float, zgrid: np.ndarray, image) -> float:
    # sup |g(s) - g(t)| over s in the care image and |s - t| <= radius
    from scipy.ndimage import maximum_filter1d, minimum_filter1d

    window = 2 * int(math.ceil(radius / step)) + 1
    spread = maximum_filter1d(values, window, mode="nearest") - minimum_filter1d(values, window, mode="nearest")
    mask = np.zeros(zgrid.shape, dtype=bool)
    for lo, hi in image:
        mask |= (zgrid >= lo - step) & (zgrid <= hi + step)
    return float(spread[mask].max())


def _tight_term(kst, i, g: _Term, a, b, share, config, zgrid, step, care=None):
    """Pick delta for one term by balancing estimated inner and outer search costs.

    The inner sum is mapped onto [delta, 1 - delta], so an inner error below
    delta keeps the junction input inside [0, 1].
    """
    d = kst.d
    if g.span == 0 or not g.active:
        delta = 0.25
        scale = (1.0 - 2 * delta) / g.span if g.span > 0 else 0.0
        inners = [_inner_on_interval(h, a, b, m, scale, delta / d) for h, m in zip(kst.inner[i], g.mins)]
        outer = _outer_on_unit(kst.outer[i], g.lo, g.span, delta) if g.span > 0 else (
            lambda z, c=float(np.asarray(kst.outer[i](np.array([g.lo])))[0]): np.full(np.shape(z), c)
        )
        return delta, share, outer, inners, None
    best = None
    for delta in _LADDER:
        outer = _outer_on_unit(kst.outer[i], g.lo, g.span, delta)
        scale = (1.0 - 2 * delta) / g.span
        inners = [_inner_on_interval(h, a, b, m, scale, delta / d) for h, m in zip(kst.inner[i], g.mins)]
        if care is None:
            omega = _modulus(outer(zgrid), step, delta)
            z_care = None
        else:
            image = _care_image(inners, delta, care)
            omega = _care_modulus(outer(zgrid), step, delta, zgrid, image)
            z_care = _pad(image, delta)
        outer_eps = share - omega
        if outer_eps <= 0:
            continue
        cost = estimate_cost(Target1D(outer, (0.0, 1.0)), outer_eps, config, care=z_care)
        for inner in inners:
            cost = max(cost, estimate_cost(Target1D(inner, (a, b)), delta / d, config, care=care))
        if best is None or cost < best[0]:
            best = (cost, (delta, outer_eps, outer, inners, z_care))
    if best is None:
        raise ConstructionError(f"term {i}: no delta leaves an outer error budget")
    return best[1]


def _with_care(plan, care):
    delta, outer_eps, outer, inners, _ = plan
    return delta, outer_eps, outer, inners, _pad(_care_image(inners, delta, care), delta)


def _care_points(care, samples: int) -> np.ndarray:
    per = max(2, samples // len(care))
    return np.concatenate([np.linspace(c0, c1, per) for c0, c1 in care])[:, None]


def assemble(
    kst: KstDecomposition,
    epsilon: float,
    domain: tuple[float, float] = (0.0, 1.0),
    config: Approx1DConfig = Approx1DConfig(),
    verify_points: int = 10_000,
    f: Callable | None = None,
    care: Sequence[tuple[float, float]] | None = None,
) -> ApproxNDReport:
    """Width 36d(2d+1), depth 11 approximator of the function the decomposition represents.

    With ``allocation="uniform"`` every term uses the normalisation
    (t + 2M)/4M, one shared delta and an eps/(4d+2) share.  Otherwise the
    error budget 0.95 eps is shared equally by the terms whose outer function
    is not constant, and each term gets its own delta and normalisation.

    ``care`` (d = 1 only) restricts the guarantee to a union of intervals of
    the domain.  Inner approximators are then only accurate on those
    intervals, and each outer approximator only on the junction values they
    can produce.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    a, b = (float(v) for v in domain)
    d = kst.d
    terms = 2 * d + 1
    grid = np.linspace(0.0, 1.0, 10_001)
    zgrid = np.linspace(0.0, 1.0, 100_001)
    step = zgrid[1] - zgrid[0]
    geo = [_term_geometry(kst, i, grid) for i in range(terms)]

    # per term: (delta, outer eps, outer function on [0, 1], inner functions on [a, b])
    if care is not None and d != 1:
        raise ValueError("care regions are supported for d = 1 only")
    plans = []
    if config.allocation == "uniform":
        bound = max(max(abs(g.lo), abs(g.lo + g.span)) for g in geo) + 1.0
        share = epsilon / (4 * d + 2)
        outers = [(lambda z, g=kst.outer[i]: np.asarray(g(4 * bound * np.asarray(z) - 2 * bound), dtype=float)) for i in range(terms)]
        delta = 0.25
        for outer in outers:
            vals = outer(zgrid)
            r = 0.25
            while 2.0 * _modulus(vals, step, r) >= share and r > 1e-9:
                r /= 2.0
            delta = min(delta, r)
        for i in range(terms):
            inners = [_inner_on_interval(h, a, b, 0.0, 1.0 / (4 * bound), 1.0 / (2 * d)) for h in kst.inner[i]]
            plans.append((delta, share, outers[i], inners, None))
    else:
        share = config.margin * epsilon / max(1, sum(g.active for g in geo))
        for i, g in enumerate(geo):
            plans.append(_tight_term(kst, i, g, a, b, share, config, zgrid, step, care))

    if care is not None and config.allocation == "uniform":
        plans = [_with_care(plan, care) for plan in plans]

    inner_reports, inner_nets = [], []
    for i, (delta, _, _, inners, _) in enumerate(plans):
        reports, nets = [], []
        for j, inner in enumerate(inners):
            try:
                rep = build_interval_approx(Target1D(inner, (a, b), name=f"inner[{i}][{j}]"), delta / d, config, care=care)
            except ConstructionError as exc:
                raise ConstructionError(f"inner function ({i}, {j}): {exc}", exc.best_max_error) from exc
            reports.append(rep)
            selector = affine_net(np.eye(d)[j][None, :], [0.0], ((a,) * d, (b,) * d))
            nets.append(compose(rep.network, selector))
        inner_reports.append(tuple(reports))
        inner_nets.append(sum_nets(nets, [1.0] * d))

    outer_reports, term_nets = [], []
    for i, (delta, outer_eps, outer, _, z_care) in enumerate(plans):
        try:
            rep = build_interval_approx(Target1D(outer, (0.0, 1.0), name=f"outer[{i}]"), outer_eps, config, care=z_care)
        except ConstructionError as exc:
            raise ConstructionError(f"outer function {i}: {exc}", exc.best_max_error) from exc
        outer_reports.append(rep)
        term_nets.append(compose(rep.network, inner_nets[i], junction=[EUAF]))
    deltas = [p[0] for p in plans]

    net = sum_nets(term_nets, [1.0] * terms).with_domain((a,) * d, (b,) * d)
    pts = _box_points(d, a, b, verify_points) if care is None else _care_points(care, verify_points)
    inside = all(bool(np.all((s := inner.evaluate(pts)) >= 0.0) and np.all(s <= 1.0)) for inner in inner_nets)
    reference = np.asarray(f(pts), dtype=float) if f is not None else kst.evaluate((pts - a) / (b - a))
    err = float(np.max(np.abs(net.scalar(pts) - reference)))
    return ApproxNDReport(
        network=net,
        d=d,
        epsilon=epsilon,
        grid_sup_error=err,
        deltas=tuple(deltas),
        junction_in_unit_interval=inside,
        nonzero_parameters=count_params(net).nonzero,
        allocation=config.allocation,
        inner_reports=tuple(inner_reports),
        outer_reports=tuple(outer_reports),
    )
