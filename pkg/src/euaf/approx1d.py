"""Fixed-size EUAF approximators for continuous functions of one variable.

Three builders, each wrapping the previous one:

* ``build_half_approx``: width 2, depth 3.  Accurate on the intervals
  [(2k-2)/2K, (2k-1)/2K] of [0, 1]; the gaps in between are left free.
* ``build_region_approx``: width 36, depth 5 on [0, 0.9].  Four shifted half
  approximators are blended by a partition of unity so every point is covered
  by a component that is accurate there.
* ``build_interval_approx``: the same network with an affine change of
  variable fused into the first layer, accurate on all of [a, b].

Each half approximator computes A * tri(w / (pi + k)) + B on interval k, so a
single scalar w found by ``pointfit`` stores all K sampled values.

How the stored values are chosen is set by ``allocation``:

``"uniform"`` stores (f(x_k) + M) / 2M with tolerance eps / 4M, M = ||f|| + 1.

``"midrange"`` stores the midrange of f on each interval, rescaled to the range
of the stored values, and gives each interval whatever error budget its own
oscillation leaves.

``"tight"`` (the default) uses the fact that the partition weights are linear
hats peaking at interval centres: the blended output is then the piecewise
linear interpolant of the stored values, so storing f at the peaks leaves an
error of order 1/K^2 instead of 1/K.  The remaining budget becomes the point
fit tolerance.  This needs exponentially fewer search steps than the other
two and is what makes desk-scale runs possible.

The half approximator on its own has no blending, so there "tight" means
midrange.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.ndimage import maximum_filter1d, minimum_filter1d

from .activation import EUAF, DomainError
from .gadgets import partition_component_net, product_net
from .network import AffineLayer, Network, affine_net, compose, parallel, sum_nets
from .pointfit import FitResult, FitTargets, fit, shift_nonneg

__all__ = [
    "Target1D",
    "Approx1DConfig",
    "Approx1DReport",
    "ConstructionError",
    "choose_K",
    "half_network",
    "build_half_approx",
    "build_region_approx",
    "build_interval_approx",
    "sup_error",
    "estimate_cost",
]

ALPHA = math.pi
REGION_END = 0.9
# component 1's last hat peaks at 1 - 1/K, which must reach REGION_END
K_MIN = 10


class ConstructionError(RuntimeError):
    """A point fit ran out of budget or no feasible K exists."""

    def __init__(self, message: str, best_max_error: float = math.nan):
        super().__init__(message)
        self.best_max_error = best_max_error


@dataclass(frozen=True)
class Target1D:
    """A function on [a, b].  ``K`` overrides the automatic interval count."""

    evaluator: Callable
    interval: tuple[float, float] = (0.0, 1.0)
    K: int | None = None
    name: str = "f"

    def __post_init__(self):
        a, b = (float(v) for v in self.interval)
        if not a < b:
            raise DomainError("interval needs a < b")
        object.__setattr__(self, "interval", (a, b))
        if self.K is not None and self.K < 1:
            raise DomainError("K must be positive")

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        try:
            y = np.asarray(self.evaluator(x), dtype=float)
            if y.shape != x.shape:
                y = np.broadcast_to(y, x.shape).astype(float)
        except (TypeError, ValueError):
            y = np.array([float(self.evaluator(float(t))) for t in x.reshape(-1)]).reshape(x.shape)
        if not np.all(np.isfinite(y)):
            raise DomainError(f"{self.name} returned a non-finite value")
        return y


@dataclass(frozen=True)
class Approx1DConfig:
    allocation: str = "tight"
    budget: int = 10**9
    margin: float = 0.95
    K: int | None = None
    K_max: int = 200
    K_patience: int = 25  # stop the K scan after this many non-improving values
    samples_per_interval: int = 65
    verify_points: int = 10_000

    def __post_init__(self):
        if self.allocation not in ("tight", "midrange", "uniform"):
            raise ValueError("allocation must be 'tight', 'midrange' or 'uniform'")
        if self.K is not None and self.K < K_MIN:
            raise ValueError(f"K must be at least {K_MIN}")
        if self.K_max < K_MIN:
            raise ValueError(f"K_max must be at least {K_MIN}")
        if not 0 < self.margin <= 1:
            raise ValueError("margin must lie in (0, 1]")


@dataclass(frozen=True)
class Approx1DReport:
    network: Network
    K: int
    M: float
    w0: tuple[float, ...]
    m0: tuple[int, ...]
    grid_sup_error: float
    guarantee_region: str
    evaluations: int = 0
    allocation: str = "tight"
    fits: tuple[FitResult, ...] = field(default=(), repr=False)


# --- helpers --------------------------------------------------------------


def _modulus(values: np.ndarray, window: int) -> float:
    # largest spread of f over any run of ``window`` consecutive grid points
    window = max(2, window)
    hi = maximum_filter1d(values, window, mode="nearest")
    lo = minimum_filter1d(values, window, mode="nearest")
    return float(np.max(hi - lo))


def choose_K(target: Target1D, epsilon: float, grid: int = 100_000, K_max: int = 100_000) -> int:
    """Smallest K >= 10 with 2 * (empirical modulus at 1/K) < epsilon / 2."""
    if not epsilon > 0:
        raise DomainError("epsilon must be positive")
    a, b = target.interval
    values = target(np.linspace(a, b, grid + 1))
    per_unit = grid  # grid points per unit of the rescaled [0, 1] variable

    def ok(K: int) -> bool:
        return 2.0 * _modulus(values, per_unit // K + 1) < epsilon / 2.0

    if ok(10):
        return 10
    hi = 20
    while not ok(hi):
        hi *= 2
        if hi > K_max:
            raise ConstructionError("modulus too large for the sampling grid")
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        lo, hi = (lo, mid) if ok(mid) else (mid, hi)
    return hi


def half_network(K: int, w: float, m0: int, scale: float, offset: float, shift: float = 0.0) -> Network:
    """x -> scale * tri(w / (pi + k)) + offset on the k-th interval of x + shift.

    Width 2, depth 3: [s(2K y), s(y)] -> s(s(2Ky)/2 - K y - pi) -> s(w u + w + 2 m0)
    with y = x + shift.
    """
    layers = (
        AffineLayer([[2.0 * K], [1.0]], [2.0 * K * shift, shift]),
        AffineLayer([[0.5, -float(K)]], [-ALPHA]),
        AffineLayer([[float(w)]], [float(w) + 2.0 * m0]),
        AffineLayer([[float(scale)]], [float(offset)]),
    )
    return Network(1, layers, ((EUAF, EUAF), (EUAF,), (EUAF,)), ((0.0,), (1.0,)))


def _intersect(lo: float, hi: float, care: Sequence[tuple[float, float]]) -> list[tuple[float, float]]:
    out = []
    for c0, c1 in care:
        p0, p1 = max(lo, c0), min(hi, c1)
        if p1 - p0 > 1e-12 or (c1 - c0 <= 1e-12 and lo <= c0 <= hi):
            out.append((p0, max(p0, p1)))
    return out


def _stats(g: Callable, pieces, n: int) -> tuple[float, float]:
    """Midrange and a padded oscillation of g over a union of intervals."""
    zs = [np.linspace(p0, p1, n) for p0, p1 in pieces]
    vals = [g(z) for z in zs]
    v = np.concatenate(vals)
    jump = max(float(np.max(np.abs(np.diff(u)))) if u.size > 1 else 0.0 for u in vals)
    top, bottom = float(v.max()), float(v.min())
    return 0.5 * (top + bottom), top - bottom + jump


@dataclass(frozen=True)
class _Plan:
    ks: tuple[int, ...]
    values: tuple[float, ...]  # normalised targets in [0, 1]
    tolerances: tuple[float, ...]
    scale: float
    offset: float

    def cost(self) -> float:
        # log of the expected number of scanned grid points
        if self.scale == 0:
            return 0.0
        e = np.asarray(self.tolerances)
        return float(np.sum(np.log(1.0 / np.minimum(1.0, 2.0 * e))))


@dataclass(frozen=True)
class _Cells:
    """Per-cell statistics of g on the cells [m/4K, (m+1)/4K] of [0, 0.9].

    ``has`` marks cells that meet the care region; ``top``/``bottom``/``jump``
    describe g there; ``interp`` bounds |g - linear interpolant of the node
    values| (nodes at m/4K) including a padding for under-sampling.
    """

    K: int
    nodes: np.ndarray
    has: np.ndarray
    top: np.ndarray
    bottom: np.ndarray
    jump: np.ndarray
    interp: np.ndarray


def _cell_table(g: Callable, K: int, care, n: int) -> _Cells:
    count = math.ceil(REGION_END * 4 * K - 1e-9)
    width = 1.0 / (4 * K)
    node_x = np.clip(np.arange(-5, count + 2) * width, 0.0, REGION_END)
    nodes = g(node_x)  # nodes[m + 5] is the value at m/4K
    pts, owner = [], []
    for m in range(count):
        for p0, p1 in _intersect(m * width, min((m + 1) * width, REGION_END), care):
            pts.append(np.linspace(p0, p1, n))
            owner.append(m)
    has = np.zeros(count, dtype=bool)
    top = np.full(count, -np.inf)
    bottom = np.full(count, np.inf)
    jump = np.zeros(count)
    interp = np.zeros(count)
    if pts:
        z = np.vstack(pts)
        v = g(z)
        own = np.asarray(owner)[:, None]
        left = nodes[own + 5]
        right = nodes[own + 6]
        dev = v - (left + (right - left) * (z / width - own))
        seg_jump = np.max(np.abs(np.diff(v, axis=1)), axis=1)
        seg_err = np.max(np.abs(dev), axis=1) + np.max(np.abs(np.diff(dev, axis=1)), axis=1)
        for j, m in enumerate(owner):
            has[m] = True
            top[m] = max(top[m], v[j].max())
            bottom[m] = min(bottom[m], v[j].min())
            jump[m] = max(jump[m], seg_jump[j])
            interp[m] = max(interp[m], seg_err[j])
    return _Cells(K, nodes, has, top, bottom, jump, interp)


def _component_cells(K: int, i: int, count: int):
    # interval k of component i covers cells 4k-4-i and 4k-3-i; its hat peaks at node 4k-3-i
    for k in range(1, K + 2):
        m0 = 4 * k - 4 - i
        cells = [c for c in (m0, m0 + 1) if 0 <= c < count]
        if cells:
            yield k, m0 + 1, cells


def _plan_from_cells(cells: _Cells, i: int, budget: float, mode: str) -> _Plan | None:
    K = cells.K
    ks, vals, errs = [], [], []
    for k, node, cs in _component_cells(K, i, cells.has.size):
        cs = [c for c in cs if cells.has[c]]
        if not cs or k > K:
            if cs:  # a needed interval lies past the last index the step encoder produces
                return None
            continue
        ks.append(k)
        if mode == "tight":
            vals.append(cells.nodes[node + 5])
            errs.append(max(cells.interp[c] for c in cs))
        else:
            top = max(cells.top[c] for c in cs)
            bottom = min(cells.bottom[c] for c in cs)
            vals.append(0.5 * (top + bottom))
            errs.append(0.5 * (top - bottom + max(cells.jump[c] for c in cs)))
    if not ks:
        return _Plan((), (), (), 0.0, 0.0)
    vals, errs = np.array(vals), np.array(errs)
    slack = budget - errs
    if np.any(slack <= 0):
        return None
    lo, hi = float(vals.min()), float(vals.max())
    span = hi - lo
    if span == 0:
        return _Plan(tuple(ks), (0.0,) * len(ks), (1.0,) * len(ks), 0.0, lo)
    xi = np.clip((vals - lo) / span, 0.0, 1.0)
    return _Plan(tuple(ks), tuple(xi.tolist()), tuple((slack / span).tolist()), span, lo)


def _region_plans(g: Callable, K: int, care, budget: float, mode: str, n: int) -> list[_Plan | None]:
    cells = _cell_table(g, K, care, n)
    return [_plan_from_cells(cells, i, budget, mode) for i in range(1, 5)]


def _tight_plan(g: Callable, K: int, care, budget: float, n: int) -> _Plan | None:
    """Midrange plan for a standalone half approximator on [0, 1]."""
    ks, mids, oscs = [], [], []
    for k in range(1, K + 1):
        pieces = _intersect((2 * k - 2) / (2 * K), (2 * k - 1) / (2 * K), care)
        if not pieces:
            continue
        mid, osc = _stats(g, pieces, n)
        ks.append(k)
        mids.append(mid)
        oscs.append(osc)
    if not ks:
        return _Plan((), (), (), 0.0, 0.0)
    mids, oscs = np.array(mids), np.array(oscs)
    slack = budget - oscs / 2.0
    if np.any(slack <= 0):
        return None
    lo, hi = float(mids.min()), float(mids.max())
    span = hi - lo
    if span == 0:
        return _Plan(tuple(ks), (0.0,) * len(ks), (1.0,) * len(ks), 0.0, lo)
    xi = np.clip((mids - lo) / span, 0.0, 1.0)
    return _Plan(tuple(ks), tuple(xi.tolist()), tuple((slack / span).tolist()), span, lo)


def _uniform_plan(g: Callable, K: int, shift: float, eps: float, bound: float) -> _Plan:
    ks = tuple(range(1, K + 1))
    xs = np.array([(2 * k - 1) / (2 * K) - shift for k in ks])
    xi = np.clip((g(xs) + bound) / (2 * bound), 0.0, 1.0)
    return _Plan(ks, tuple(xi.tolist()), (eps / (4 * bound),) * K, 2 * bound, -bound)


def _realize(plan: _Plan, K: int, shift: float, budget: int) -> tuple[Network, FitResult | None, int]:
    if not plan.ks or plan.scale == 0:
        return half_network(K, 0.0, 1, 0.0, plan.offset, shift), None, 1
    targets = FitTargets(plan.values, ALPHA, tuple(float(k) for k in plan.ks))
    result = fit(targets, np.asarray(plan.tolerances), budget=budget)
    if not result.satisfied:
        worst = float(np.max(np.asarray(result.per_index_error) / np.asarray(plan.tolerances)))
        raise ConstructionError(
            f"point fit exhausted its budget after {result.evaluations} evaluations "
            f"(best normalised error {worst:.3g})",
            result.max_error,
        )
    w, m0 = shift_nonneg(result.w)
    return half_network(K, w, m0, plan.scale, plan.offset, shift), result, m0


def _check_grid(care: Sequence[tuple[float, float]], points: int) -> np.ndarray:
    lengths = np.array([c1 - c0 for c0, c1 in care])
    if lengths.sum() == 0:
        return np.unique([c0 for c0, _ in care])
    counts = np.maximum(2, np.round(points * lengths / lengths.sum()).astype(int))
    return np.unique(np.concatenate([np.linspace(c0, c1, n) for (c0, c1), n in zip(care, counts)]))


def sup_error(net: Network, f: Callable, grid: np.ndarray) -> float:
    return float(np.max(np.abs(net.scalar(grid) - np.asarray(f(grid), dtype=float))))


def _normalise_care(care, lo: float, hi: float) -> list[tuple[float, float]]:
    if care is None:
        return [(lo, hi)]
    out = sorted((max(lo, float(c0)), min(hi, float(c1))) for c0, c1 in care)
    out = [(c0, c1) for c0, c1 in out if c1 >= c0]
    if not out:
        raise DomainError("care region misses the interval")
    return out


# --- builders -------------------------------------------------------------


def build_half_approx(target: Target1D, epsilon: float, K: int | None = None, config: Approx1DConfig = Approx1DConfig()) -> Approx1DReport:
    """Width-2 depth-3 approximator, accurate on the first half of every 1/K cell of [0, 1]."""
    if target.interval != (0.0, 1.0):
        raise DomainError("half approximators work on [0, 1]")
    if not epsilon > 0:
        raise DomainError("epsilon must be positive")
    K = K or config.K or target.K or choose_K(target, epsilon)
    care = [((2 * k - 2) / (2 * K), (2 * k - 1) / (2 * K)) for k in range(1, K + 1)]
    if config.allocation == "uniform":
        bound = float(np.max(np.abs(target(np.linspace(0, 1, 10_001))))) + 1.0
        plan = _uniform_plan(target, K, 0.0, epsilon, bound)
    else:
        plan = _tight_plan(target, K, care, config.margin * epsilon, config.samples_per_interval)
        if plan is None:
            raise ConstructionError(f"K={K} is too coarse for epsilon={epsilon}")
        bound = max(abs(plan.offset), abs(plan.offset + plan.scale))
    net, result, m0 = _realize(plan, K, 0.0, config.budget)
    grid = _check_grid(care, config.verify_points)
    err = sup_error(net, target, grid)
    return Approx1DReport(
        network=net,
        K=K,
        M=bound,
        w0=(result.w if result else 0.0,),
        m0=(m0,),
        grid_sup_error=err,
        guarantee_region=f"union of [(2k-2)/{2 * K}, (2k-1)/{2 * K}], k=1..{K}",
        evaluations=result.evaluations if result else 0,
        allocation=config.allocation,
        fits=(result,) if result else (),
    )


def _extended(g: Callable, lo: float, hi: float) -> Callable:
    # constant extension outside [lo, hi]
    return lambda z: g(np.clip(np.asarray(z, dtype=float), lo, hi))


def _select_K(g, care, eps_budget: float, config: Approx1DConfig) -> tuple[int, list[_Plan]]:
    best = None
    for K in range(K_MIN, config.K_max + 1):
        plans = _region_plans(g, K, care, eps_budget, config.allocation, config.samples_per_interval)
        if any(p is None for p in plans):
            continue
        costs = np.array([p.cost() for p in plans])
        total = float(costs.max() + np.log(np.sum(np.exp(costs - costs.max()))))
        if best is None or total < best[0]:
            best = (total, K, plans)
        elif K - best[1] >= config.K_patience:
            break
    if best is None:
        raise ConstructionError(f"no K up to {config.K_max} leaves a positive error budget")
    return best[1], best[2]


def _uniform_setup(g: Callable, epsilon: float, config: Approx1DConfig) -> tuple[int, list[_Plan], float]:
    # uniform eps/4 split, values normalised by the sup bound, every index constrained
    ge = _extended(g, 0.0, REGION_END)
    K = config.K or max(K_MIN, choose_K(Target1D(ge, (0.0, 1.0)), epsilon / 4))
    bound = float(np.max(np.abs(ge(np.linspace(-1.0, 1.0, 20_001))))) + 1.0
    return K, [_uniform_plan(ge, K, i / (4 * K), epsilon / 4, bound) for i in range(1, 5)], bound


def _region_network(g: Callable, epsilon: float, care, config: Approx1DConfig):
    """Width-36 depth-5 network for g on [0, 0.9]; returns (net, K, M, fits, m0s)."""
    if config.K is not None and config.K < K_MIN:
        raise DomainError(f"region approximators need K >= {K_MIN}")
    if config.allocation == "uniform":
        K, plans, gamma_bound = _uniform_setup(g, epsilon, config)
    else:
        eps_budget = config.margin * epsilon
        if config.K is not None:
            K = config.K
            plans = _region_plans(g, K, care, eps_budget, config.allocation, config.samples_per_interval)
            if any(p is None for p in plans):
                raise ConstructionError(f"K={K} is too coarse for epsilon={epsilon}")
        else:
            K, plans = _select_K(g, care, eps_budget, config)
        gamma_bound = max(1.0, *(max(abs(p.offset), abs(p.offset + p.scale)) for p in plans))
    components = [None] * 4
    fits = [None] * 4
    m0s = [0] * 4
    # hardest component first so an infeasible build fails early
    for idx in sorted(range(4), key=lambda j: -plans[j].cost()):
        i = idx + 1
        half, result, m0 = _realize(plans[idx], K, i / (4 * K), config.budget)
        pair = parallel([half, partition_component_net(K, i)], bounds=[None, 1.0])
        components[idx] = compose(product_net(gamma_bound), pair)
        fits[idx] = result
        m0s[idx] = m0
    net = sum_nets(components, [1.0] * 4).with_domain((0.0,), (REGION_END,))
    return net, K, gamma_bound, fits, m0s


def _report(net, K, M, fits, m0s, err, region, allocation) -> Approx1DReport:
    return Approx1DReport(
        network=net,
        K=K,
        M=M,
        w0=tuple(r.w if r else 0.0 for r in fits),
        m0=tuple(m0s),
        grid_sup_error=err,
        guarantee_region=region,
        evaluations=sum(r.evaluations for r in fits if r),
        allocation=allocation,
        fits=tuple(r for r in fits if r),
    )


def build_region_approx(target: Target1D, epsilon: float, config: Approx1DConfig = Approx1DConfig(), care=None) -> Approx1DReport:
    """Width-36 depth-5 approximator accurate on [0, 0.9]."""
    if not epsilon > 0:
        raise DomainError("epsilon must be positive")
    care_z = _normalise_care(care, 0.0, REGION_END)
    net, K, M, fits, m0s = _region_network(target, epsilon, care_z, config)
    err = sup_error(net, target, _check_grid(care_z, config.verify_points))
    return _report(net, K, M, fits, m0s, err, f"{care_z}", config.allocation)


def build_interval_approx(target: Target1D, epsilon: float, config: Approx1DConfig = Approx1DConfig(), care=None) -> Approx1DReport:
    """Width-36 depth-5 approximator accurate on the whole target interval.

    ``care`` optionally restricts the guarantee to a union of sub-intervals.
    """
    if not epsilon > 0:
        raise DomainError("epsilon must be positive")
    a, b = target.interval
    care_x = _normalise_care(care, a, b)
    stretch = 10.0 * (b - a) / 9.0

    def g(z):
        return target(np.clip(a + stretch * np.asarray(z, dtype=float), a, b))

    care_z = [(min(REGION_END, (c0 - a) / stretch), min(REGION_END, (c1 - a) / stretch)) for c0, c1 in care_x]
    if config.K is None and target.K is not None:
        config = Approx1DConfig(**{**config.__dict__, "K": target.K})
    net, K, M, fits, m0s = _region_network(g, epsilon, care_z, config)
    change = affine_net([[1.0 / stretch]], [-a / stretch], ((a,), (b,)))
    net = compose(net, change).with_domain((a,), (b,))
    err = sup_error(net, target, _check_grid(care_x, config.verify_points))
    return _report(net, K, M, fits, m0s, err, f"{care_x}", config.allocation)


def estimate_cost(target: Target1D, epsilon: float, config: Approx1DConfig = Approx1DConfig(), care=None, K: int | None = None) -> float:
    """log10 of the expected point-fit scans for ``build_interval_approx``.

    K defaults to the one the builder would select.

    ``inf`` when K leaves no error budget.  Cheap enough to compare many
    candidate error splits before committing to one.
    """
    a, b = target.interval
    care_x = _normalise_care(care, a, b)
    stretch = 10.0 * (b - a) / 9.0

    def g(z):
        return target(np.clip(a + stretch * np.asarray(z, dtype=float), a, b))

    care_z = [(min(REGION_END, (c0 - a) / stretch), min(REGION_END, (c1 - a) / stretch)) for c0, c1 in care_x]
    mode = "midrange" if config.allocation == "midrange" else "tight"
    K = K or config.K
    if config.allocation == "uniform":
        if K is not None:
            config = Approx1DConfig(**{**config.__dict__, "K": K})
        plans = _uniform_setup(g, epsilon, config)[1]
    elif K is None:
        try:
            K, plans = _select_K(g, care_z, config.margin * epsilon, Approx1DConfig(**{**config.__dict__, "allocation": mode}))
        except ConstructionError:
            return math.inf
    else:
        plans = _region_plans(g, K, care_z, config.margin * epsilon, mode, config.samples_per_interval)
    if any(p is None for p in plans):
        return math.inf
    costs = np.array([p.cost() for p in plans])
    return float((costs.max() + np.log(np.sum(np.exp(costs - costs.max())))) / math.log(10.0))
