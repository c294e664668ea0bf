"""Point fitting on the winding curve w -> (tri(w a_1), ..., tri(w a_K)).

Given targets xi_k in [0, 1] and slopes a_k = 1/(alpha + r_k), find one real w
with |tri(w a_k) - xi_k| < eps_k for every k, where tri is the period-2
triangular wave.  Density of the curve guarantees a witness exists; this
module finds one by a deterministic sweep:

* tri is even, so w and -w give the same vector and only w >= 0 is scanned;
* w runs over the grid j*h, h = (smallest period)/64, in ranges [0, B] with B
  doubling;
* a grid point is a candidate when every coordinate is within eps_k + a_k h/2
  of its target (Lipschitz bound), which is necessary for a witness to exist
  in the surrounding window of width h;
* each candidate window is solved exactly: between kinks of the wave every
  coordinate error is |linear|, so the max error is convex and minimised by
  ternary search.

The first window (lowest w) holding a witness is returned.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .activation import euaf, triangle_wave
from .config import thread_count

__all__ = ["FitTargets", "FitResult", "FitError", "fit", "shift_nonneg", "winding_coverage", "verify_fit"]

_CHUNK = 1 << 18


class FitError(ValueError):
    """Invalid targets or tolerances."""


@dataclass(frozen=True)
class FitTargets:
    values: tuple[float, ...]
    alpha: float = math.pi
    offsets: tuple[float, ...] | None = None

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise FitError("need at least one target")
        if any(not (0.0 <= v <= 1.0) for v in vals):
            raise FitError("targets must lie in [0, 1]")
        offs = tuple(float(r) for r in (self.offsets if self.offsets is not None else range(1, len(vals) + 1)))
        if len(offs) != len(vals):
            raise FitError("one offset per target")
        if len(set(offs)) != len(offs):
            raise FitError("offsets must be pairwise distinct")
        if any(self.alpha + r == 0 for r in offs):
            raise FitError("alpha + offset must be nonzero")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "offsets", offs)
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def slopes(self) -> np.ndarray:
        return 1.0 / (self.alpha + np.asarray(self.offsets))

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class FitResult:
    w: float
    per_index_error: tuple[float, ...]
    max_error: float
    evaluations: int
    search_bound_reached: float
    satisfied: bool
    windows_solved: int = 0


def _errors(w: float, targets: FitTargets) -> np.ndarray:
    return np.abs(triangle_wave(w * targets.slopes) - np.asarray(targets.values))


def verify_fit(result: FitResult, targets: FitTargets) -> np.ndarray:
    """Recompute per-index errors of ``result.w`` from scratch."""
    return _errors(result.w, targets)


def _solve_window(lo: float, hi: float, a: np.ndarray, xi: np.ndarray, tol: np.ndarray) -> tuple[float, float]:
    """Minimise max_k |tri(w a_k) - xi_k| / tol_k over w in [lo, hi]."""
    cuts = [lo, hi]
    for ak in a:
        n0, n1 = math.ceil(lo * ak), math.floor(hi * ak)
        cuts.extend(n / ak for n in range(n0, n1 + 1))
    cuts = sorted(c for c in cuts if lo <= c <= hi)
    best_w, best_v = lo, math.inf

    def value(w):
        return float(np.max(np.abs(triangle_wave(w * a) - xi) / tol))

    for left, right in zip(cuts[:-1], cuts[1:]):
        if right <= left:
            continue
        # wave is linear on [left, right] in every coordinate, so the objective is convex
        mid = 0.5 * (left + right)
        theta = mid * a
        slope = np.where(np.mod(theta, 2.0) < 1.0, 1.0, -1.0) * a
        base = triangle_wave(theta) - slope * mid - xi

        def f(w):
            return float(np.max(np.abs(slope * w + base) / tol))

        x0, x1 = left, right
        for _ in range(200):
            if x1 - x0 <= 1e-15 * max(1.0, abs(x1)):
                break
            m0 = x0 + (x1 - x0) / 3.0
            m1 = x1 - (x1 - x0) / 3.0
            if f(m0) <= f(m1):
                x1 = m1
            else:
                x0 = m0
        for w in (0.5 * (x0 + x1), left, right):
            v = value(w)
            if v < best_v:
                best_w, best_v = w, v
    return best_w, best_v


def _first_pass(j0: int, j1: int, step: float, lo: float, hi: float) -> np.ndarray:
    """Grid indices j in [j0, j1) with tri(j * step) in [lo, hi], listed without scanning.

    tri(theta) = |theta - 2n| near 2n, so the valid theta form the bands
    [2n - hi, 2n - lo] and [2n + lo, 2n + hi].
    """
    n0 = math.floor((j0 * step - 1.0) / 2.0)
    n1 = math.ceil((j1 * step + 1.0) / 2.0)
    n = np.arange(n0, n1 + 1, dtype=float)
    starts = np.concatenate([2 * n - hi, 2 * n + lo])
    ends = np.concatenate([2 * n - lo, 2 * n + hi])
    order = np.argsort(starts, kind="stable")
    first = np.maximum(np.ceil(starts[order] / step - 1e-9).astype(np.int64), j0)
    last = np.minimum(np.floor(ends[order] / step + 1e-9).astype(np.int64), j1 - 1)
    keep = last >= first
    first, last = first[keep], last[keep]
    if first.size == 0:
        return np.empty(0, dtype=np.int64)
    counts = last - first + 1
    offsets = np.repeat(first - np.concatenate([[0], np.cumsum(counts)[:-1]]), counts)
    idx = np.unique(offsets + np.arange(counts.sum()))
    return idx


def _chunk_candidates(j0: int, j1: int, h: float, a, xi, thr, order) -> np.ndarray:
    k0 = order[0]
    # bands are widened slightly; the exact test below decides
    idx = _first_pass(j0, j1, h * a[k0], max(0.0, xi[k0] - thr[k0]), min(1.0, xi[k0] + thr[k0]))
    if idx.size == 0:
        return idx
    w = idx.astype(float) * h
    for k in order:
        theta = w * a[k]
        err = np.abs(np.abs(theta - 2.0 * np.floor((theta + 1.0) * 0.5)) - xi[k])
        keep = err < thr[k]
        idx, w = idx[keep], w[keep]
        if idx.size == 0:
            break
    return idx


def fit(targets: FitTargets, epsilon, budget: int = 10**9) -> FitResult:
    """Find w with |tri(w a_k) - xi_k| < epsilon_k for all k.

    ``epsilon`` is a scalar or one tolerance per target.  ``budget`` caps the
    number of grid points scanned.  On exhaustion the best window optimum seen
    so far is returned with ``satisfied=False``.
    """
    k = len(targets)
    tol = np.broadcast_to(np.asarray(epsilon, dtype=float), (k,)).copy()
    if np.any(~(tol > 0)):
        raise FitError("tolerances must be positive")
    if budget < 1:
        raise FitError("budget must be at least 1")
    a = np.abs(targets.slopes)
    xi = np.asarray(targets.values)
    h = (2.0 / a.max()) / 64.0
    thr = tol + a * h / 2.0
    # most selective coordinates first: smallest fraction of a period passes
    passing = np.minimum(1.0, xi + thr) - np.maximum(0.0, xi - thr)
    order = np.argsort(passing, kind="stable")
    bound = 2.0 / a.min()  # one period of the slowest coordinate
    evaluations = 0
    windows = 0
    best_w, best_v = 0.0, float(np.max(_errors(0.0, targets) / tol))
    workers = thread_count()
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        j = 0
        while evaluations < budget:
            j_end = min(math.floor(bound / h) + 1, j + (budget - evaluations))
            chunks = [(s, min(s + _CHUNK, j_end)) for s in range(j, j_end, _CHUNK)]
            for batch_start in range(0, len(chunks), max(workers, 1)):
                batch = chunks[batch_start : batch_start + max(workers, 1)]
                if pool is not None:
                    found = list(pool.map(lambda c: _chunk_candidates(c[0], c[1], h, a, xi, thr, order), batch))
                else:
                    found = [_chunk_candidates(c[0], c[1], h, a, xi, thr, order) for c in batch]
                for (c0, c1), cand in zip(batch, found):
                    evaluations += c1 - c0
                    for jj in cand:
                        g = jj * h
                        w, v = _solve_window(max(0.0, g - h / 2), g + h / 2, a, xi, tol)
                        windows += 1
                        if v < best_v:
                            best_w, best_v = w, v
                        if v < 1.0:
                            return _result(w, targets, evaluations, bound, windows, tol)
            j = j_end
            if evaluations >= budget:
                break
            bound *= 2.0
    finally:
        if pool is not None:
            pool.shutdown()
    return _result(best_w, targets, evaluations, bound, windows, tol)


def _result(w: float, targets: FitTargets, evaluations: int, bound: float, windows: int, tol) -> FitResult:
    err = _errors(w, targets)
    return FitResult(
        w=float(w),
        per_index_error=tuple(float(e) for e in err),
        max_error=float(err.max()),
        evaluations=int(evaluations),
        search_bound_reached=float(bound),
        satisfied=bool(np.all(err < tol)),
        windows_solved=windows,
    )


def shift_nonneg(w: float, alpha: float = math.pi, offsets: Sequence[float] | None = None) -> tuple[float, int]:
    """Return (w, m0) with m0 = floor(|w|) + 1.

    For alpha + r_k >= 1 the shifted arguments w/(alpha + r_k) + 2 m0 are
    nonnegative, so euaf of them equals the triangular wave of the unshifted
    argument by periodicity.
    """
    w = float(w.w) if isinstance(w, FitResult) else float(w)
    return w, int(math.floor(abs(w))) + 1


def shifted_values(w: float, m0: int, alpha: float, offsets: Sequence[float]) -> np.ndarray:
    return euaf(w / (alpha + np.asarray(offsets, dtype=float)) + 2 * m0)


def winding_coverage(
    K: int,
    samples: int,
    range_: float,
    alpha: float = math.pi,
    offsets: Sequence[float] | None = None,
    bits: int = 5,
) -> float:
    """Fraction of the 2^(bits K) cells of [0,1)^K hit by the fractional parts of w a_k.

    w runs over j * range/samples, j = 0..samples-1.  Offsets may repeat here
    (that is the degenerate case the statistic is meant to expose).
    """
    if K < 1 or K > 4:
        raise FitError("coverage supports 1 <= K <= 4")
    offs = np.asarray(offsets if offsets is not None else range(1, K + 1), dtype=float)
    if offs.size != K:
        raise FitError("one offset per coordinate")
    a = 1.0 / (alpha + offs)
    cells = 1 << bits
    hit = np.zeros(cells**K, dtype=bool)
    step = range_ / samples
    radix = cells ** np.arange(K)
    for s in range(0, samples, 1 << 20):
        w = np.arange(s, min(samples, s + (1 << 20)), dtype=float) * step
        frac = np.mod(w[:, None] * a[None, :], 1.0)
        cell = np.minimum((frac * cells).astype(np.int64), cells - 1)
        hit[cell @ radix] = True
    return float(hit.mean())
