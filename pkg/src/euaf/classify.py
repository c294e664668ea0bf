"""Exact classifiers: networks equal to r_j on region E_j.

The label function is extended continuously with distance ratios, scaled to
odd integers 2(n1 g + n2) + 1, approximated within 1/2, and snapped back to
the exact odd integer before the final affine map recovers r_j.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .approx1d import Approx1DConfig, ConstructionError
from .approxnd import ApproxNDReport, KstDecomposition, assemble
from .gadgets import snap_net
from .network import Network, affine_net, compose, count_params

__all__ = [
    "LabeledRegions",
    "ClassifyReport",
    "continuous_extension",
    "choose_integers",
    "build_classifier",
    "classifier_bound",
    "sample_regions",
    "min_gap",
]

_SEPARATION = 1e-9


def _label(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (tuple, list)):
        num, den = value
        if int(den) == 0:
            raise ValueError("label denominator must be nonzero")
        return Fraction(int(num), int(den))
    if isinstance(value, dict):
        return _label((value["num"], value.get("den", 1)))
    if isinstance(value, int):
        return Fraction(value)
    raise ValueError(f"labels must be rationals, got {value!r}")


def _interval_distance(x: np.ndarray, intervals: np.ndarray) -> np.ndarray:
    lo, hi = intervals[:, 0], intervals[:, 1]
    gap = np.maximum(np.maximum(lo[None, :] - x[:, None], x[:, None] - hi[None, :]), 0.0)
    return gap.min(axis=1)


@dataclass(frozen=True)
class LabeledRegions:
    """J pairwise disjoint regions with rational labels inside the box [a, b]^d.

    A region is either a list of closed intervals (d = 1) or an (n, d) array
    of points.
    """

    regions: tuple
    labels: tuple[Fraction, ...]
    box: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        if not self.regions:
            raise ValueError("need at least one region")
        labels = tuple(_label(v) for v in self.labels)
        if len(labels) != len(self.regions):
            raise ValueError("one label per region")
        parsed = tuple(self._parse(r) for r in self.regions)
        dims = {1 if self._is_intervals(p) else p.shape[1] for p in parsed}
        kinds = {self._is_intervals(p) for p in parsed}
        if len(dims) != 1 or len(kinds) != 1:
            raise ValueError("regions must share one kind and one dimension")
        a, b = (float(v) for v in self.box)
        if not b > a:
            raise ValueError("box needs a < b")
        object.__setattr__(self, "regions", parsed)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "box", (a, b))
        for p in parsed:
            if self._is_intervals(p):
                if np.any(p[:, 0] < a) or np.any(p[:, 1] > b):
                    raise ValueError("intervals must lie inside the box")
            elif np.any(p < a) or np.any(p > b):
                raise ValueError("points must lie inside the box")
        for i in range(len(parsed)):
            for j in range(i + 1, len(parsed)):
                if self._gap(parsed[i], parsed[j]) <= _SEPARATION:
                    raise ValueError(f"regions {i} and {j} overlap or touch")

    @staticmethod
    def _parse(region) -> np.ndarray:
        if isinstance(region, _IntervalArray):
            return region
        if isinstance(region, dict):
            if "intervals" in region:
                arr = np.asarray(region["intervals"], dtype=float).reshape(-1, 2)
                return _IntervalArray(arr)
            region = region["points"]
        arr = np.asarray(region, dtype=float)
        if arr.ndim != 2 or arr.shape[0] == 0:
            raise ValueError("point clouds must be non-empty (n, d) arrays")
        if not np.all(np.isfinite(arr)):
            raise ValueError("regions must be finite")
        return arr

    @staticmethod
    def _is_intervals(p) -> bool:
        return isinstance(p, _IntervalArray)

    def _gap(self, p, q) -> float:
        if self._is_intervals(p):
            return _interval_gap(p, q)
        return float(cKDTree(p).query(q)[0].min())

    @property
    def d(self) -> int:
        p = self.regions[0]
        return 1 if self._is_intervals(p) else p.shape[1]

    @property
    def intervals(self) -> bool:
        return self._is_intervals(self.regions[0])

    @classmethod
    def from_document(cls, doc: dict) -> "LabeledRegions":
        return cls(tuple(doc["regions"]), tuple(doc["labels"]), tuple(doc.get("box", (0.0, 1.0))))


class _IntervalArray(np.ndarray):
    """(m, 2) array of closed intervals, tagged so it is not read as a point cloud."""

    def __new__(cls, arr):
        arr = np.asarray(arr, dtype=float)
        if arr.size == 0 or np.any(~np.isfinite(arr)) or np.any(arr[:, 1] < arr[:, 0]):
            raise ValueError("intervals need finite lo <= hi")
        return arr.view(cls)


def _interval_gap(p: np.ndarray, q: np.ndarray) -> float:
    gaps = np.maximum(np.maximum(p[:, None, 0] - q[None, :, 1], q[None, :, 0] - p[:, None, 1]), 0.0)
    overlap = (p[:, None, 0] <= q[None, :, 1]) & (q[None, :, 0] <= p[:, None, 1])
    return 0.0 if overlap.any() else float(gaps.min())


def _distance_fn(regions: LabeledRegions, members: Sequence[int]) -> Callable | None:
    if not members:
        return None
    if regions.intervals:
        ivs = np.vstack([np.asarray(regions.regions[j]) for j in members])

        def dist(x):
            x = np.asarray(x, dtype=float)
            return _interval_distance(x.reshape(-1), ivs).reshape(x.shape)

        return dist
    tree = cKDTree(np.vstack([regions.regions[j] for j in members]))

    def dist(x):
        # points along the last axis
        x = np.asarray(x, dtype=float)
        return tree.query(x.reshape(-1, regions.d))[0].reshape(x.shape[:-1])

    return dist


def continuous_extension(regions: LabeledRegions, dilation: float = 0.0) -> Callable:
    """g = sum_j r_j dist(x, rest_j) / (dist(x, E_j) + dist(x, rest_j)); continuous, r_j on E_j.

    With ``dilation`` > 0 every region is first grown by that radius, so g is
    constant r_j on a neighbourhood of E_j.  The dilation must stay below half
    the smallest gap between regions.
    """
    J = len(regions.regions)
    if not 0.0 <= dilation < 0.5 * min_gap(regions):
        raise ValueError("dilation must be in [0, half the smallest region gap)")

    def grown(fn):
        return None if fn is None else (lambda x: np.maximum(fn(x) - dilation, 0.0))

    own = [grown(_distance_fn(regions, [j])) for j in range(J)]
    rest = [grown(_distance_fn(regions, [k for k in range(J) if k != j])) for j in range(J)]
    labels = [float(r) for r in regions.labels]

    def g(x):
        total = 0.0
        for j in range(J):
            if rest[j] is None:
                part = np.ones_like(own[j](x))
            else:
                dj, dr = own[j](x), rest[j](x)
                part = dr / (dj + dr)
            total = total + labels[j] * part
        return total

    return g


def min_gap(regions: LabeledRegions) -> float:
    """Smallest distance between two different regions (inf for one region)."""
    J = len(regions.regions)
    gaps = [regions._gap(regions.regions[i], regions.regions[j]) for i in range(J) for j in range(i + 1, J)]
    return min(gaps, default=math.inf)


def choose_integers(labels: Sequence, g_range: tuple[float, float]) -> tuple[int, int]:
    """n1 > 0 and n2 > 0 with n1 r_j + n2 a positive integer and n1 g + n2 >= 0."""
    rs = [_label(v) for v in labels]
    n1 = math.lcm(*(r.denominator for r in rs))
    lo = float(g_range[0])
    n2 = max(1, math.ceil(-n1 * lo) + 1, 1 - min(int(n1 * r) for r in rs))
    assert all((n1 * r + n2).denominator == 1 and n1 * r + n2 >= 1 for r in rs)
    assert n1 * lo + n2 >= 0
    return n1, n2


def _extension_range(labels: Sequence[Fraction]) -> tuple[float, float]:
    # each ratio lies in [0, 1], so g is bounded by the signed label sums
    return float(sum(min(r, 0) for r in labels)), float(sum(max(r, 0) for r in labels))


def _level_map(regions: LabeledRegions, dilation: float) -> tuple[Callable, float]:
    # region j -> level j/(J-1), constant on the dilated region
    J = len(regions.regions)
    if J == 1:
        return (lambda x: np.zeros(np.shape(x))), 0.5
    ranks = LabeledRegions(regions.regions, tuple(range(J)), regions.box)
    ext = continuous_extension(ranks, dilation)
    if regions.intervals:
        return (lambda x: ext(x) / (J - 1)), 0.4 / (J - 1)
    return (lambda x: ext(np.asarray(x, dtype=float)[..., None]) / (J - 1)), 0.4 / (J - 1)


def _plateau_knots(values: Sequence[float], half_width: float) -> tuple[np.ndarray, np.ndarray]:
    # flat at values[j] on [u_j - w, u_j + w], linear in between
    J = len(values)
    ts, vs = [], []
    for j, v in enumerate(values):
        u = j / (J - 1) if J > 1 else 0.0
        ts += [u - half_width, u + half_width]
        vs += [v, v]
    return np.array(ts), np.array(vs)


def classifier_bound(d: int) -> int:
    """Nonzero-parameter ceiling 5509 (d+1)(2d+1)."""
    return 5509 * (d + 1) * (2 * d + 1)


@dataclass(frozen=True)
class ClassifyReport:
    network: Network
    n1: int
    n2: int
    verified_points: int
    max_deviation_on_samples: float
    approximation_error: float  # sup |approximant - odd-integer target| on the care samples
    snap_bound: float
    approximant: Network  # the network before snapping
    nonzero_parameters: int
    inner: ApproxNDReport


def sample_regions(regions: LabeledRegions, per_region: int = 1000, seed: int = 0) -> list[np.ndarray]:
    """``per_region`` points from every region: endpoints plus uniform draws."""
    rng = np.random.default_rng(seed)
    out = []
    for region in regions.regions:
        if regions.intervals:
            iv = np.asarray(region)
            lengths = iv[:, 1] - iv[:, 0]
            ends = iv.reshape(-1)[: per_region]
            n = per_region - ends.size
            if lengths.sum() > 0:
                pick = rng.choice(len(iv), size=n, p=lengths / lengths.sum())
            else:
                pick = rng.integers(0, len(iv), size=n)
            pts = iv[pick, 0] + rng.random(n) * lengths[pick]
            out.append(np.concatenate([ends, pts])[:, None])
        else:
            pts = np.asarray(region)
            out.append(pts[rng.integers(0, len(pts), size=per_region)])
    return out


def build_classifier(
    regions: LabeledRegions,
    budget: int = 10**9,
    config: Approx1DConfig | None = None,
    samples: int = 1000,
    seed: int = 0,
) -> ClassifyReport:
    """Depth-12 network equal to the label r_j on every sampled point of E_j (d = 1)."""
    if regions.d != 1:
        raise ValueError("exact classifiers are built for d = 1 only")
    config = config or Approx1DConfig(budget=budget)
    a, b = regions.box
    if regions.intervals:
        care = [tuple(map(float, iv)) for region in regions.regions for iv in np.asarray(region)]
    else:
        care = [(float(p), float(p)) for region in regions.regions for p in np.asarray(region)[:, 0]]
    gap = min_gap(regions)
    dilation = 0.45 * gap if math.isfinite(gap) else 0.0
    lo, hi = _extension_range(regions.labels)
    n1, n2 = choose_integers(regions.labels, (lo, hi))
    level, plateau = _level_map(regions, dilation)
    odd = [2.0 * (n1 * float(r) + n2) + 1.0 for r in regions.labels]
    knots_t, knots_v = _plateau_knots(odd, plateau)

    def to_level(y):
        return level(a + (b - a) * np.asarray(y, dtype=float))

    def odd_from_level(t):
        return np.interp(np.asarray(t, dtype=float), knots_t, knots_v)

    def zero(y):
        return np.zeros(np.shape(y))

    kst = KstDecomposition(1, ((to_level,), (zero,), (zero,)), (odd_from_level, zero, zero))
    target = lambda x: odd_from_level(level(x[:, 0]))  # noqa: E731
    inner = assemble(kst, 0.5, (a, b), config, f=target, care=care)
    if not inner.grid_sup_error < 0.5:
        raise ConstructionError(f"approximation error {inner.grid_sup_error:.3g} is not below 1/2", inner.grid_sup_error)
    bound = 2.0 * max(abs(n1 * lo + n2), abs(n1 * hi + n2)) + 1.5
    snapped = compose(snap_net(bound), inner.network)
    final = affine_net([[1.0 / (2 * n1)]], [-(2 * n2 + 1) / (2 * n1)])
    net = compose(final, snapped).with_domain((a,), (b,))

    pts = sample_regions(regions, samples, seed)
    dev = 0.0
    for p, r in zip(pts, regions.labels):
        dev = max(dev, float(np.max(np.abs(net.scalar(p) - float(r)))))
    return ClassifyReport(
        network=net,
        n1=n1,
        n2=n2,
        verified_points=int(sum(len(p) for p in pts)),
        max_deviation_on_samples=dev,
        approximation_error=inner.grid_sup_error,
        snap_bound=bound,
        approximant=inner.network,
        nonzero_parameters=count_params(net).nonzero,
        inner=inner,
    )
