"""Scalar and vectorized evaluation of every activation used by the toolkit.

The elementary universal activation (EUAF) is a triangular wave of period 2
on ``[0, inf)`` glued to softsign on ``(-inf, 0)``.  The other kinds are
either pieces of it (triangular wave, softsign), small formulas built from it
(step, snap), or the auxiliary activations needed by the variant
constructions (ramp, ReLU, identity, the sigmoidal and smooth variants).

All evaluators accept scalars or numpy arrays.  Subgradients follow the
right-hand derivative convention at kinks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ActivationKind",
    "DomainError",
    "EUAF",
    "TRIWAVE",
    "SOFTSIGN",
    "STEP",
    "SNAP",
    "RELU",
    "IDENTITY",
    "SIGMOIDAL",
    "ramp",
    "smooth",
    "evaluate",
    "subgradient",
    "breakpoints",
    "triangle_wave",
    "euaf",
    "parse_tag",
]

_TAGS = (
    "euaf",
    "triwave",
    "softsign",
    "step",
    "snap",
    "ramp",
    "relu",
    "identity",
    "sigmoidal",
    "smooth",
)


class DomainError(ValueError):
    """Raised for non-finite activation inputs or invalid activation parameters."""


@dataclass(frozen=True)
class ActivationKind:
    """An activation tag plus its parameter (ramp width or smoothness order)."""

    tag: str
    param: float | int | None = None

    def __post_init__(self):
        if self.tag not in _TAGS:
            raise DomainError(f"unknown activation tag {self.tag!r}")
        if self.tag == "ramp":
            if self.param is None or not 0.0 < float(self.param) < 1.0:
                raise DomainError("ramp width must lie in (0, 1)")
        elif self.tag == "smooth":
            if not isinstance(self.param, int) or self.param < 1:
                raise DomainError("smooth order must be an integer >= 1")
        elif self.param is not None:
            raise DomainError(f"{self.tag} takes no parameter")

    def __str__(self) -> str:
        if self.tag == "ramp":
            return f"ramp:{float(self.param)!r}"
        if self.tag == "smooth":
            return f"smooth:{self.param}"
        return self.tag


EUAF = ActivationKind("euaf")
TRIWAVE = ActivationKind("triwave")
SOFTSIGN = ActivationKind("softsign")
STEP = ActivationKind("step")
SNAP = ActivationKind("snap")
RELU = ActivationKind("relu")
IDENTITY = ActivationKind("identity")
SIGMOIDAL = ActivationKind("sigmoidal")


def ramp(width: float) -> ActivationKind:
    return ActivationKind("ramp", float(width))


def smooth(order: int) -> ActivationKind:
    return ActivationKind("smooth", int(order))


def parse_tag(text: str) -> ActivationKind:
    """Inverse of ``str(kind)``, used by the JSON format."""
    name, _, arg = text.partition(":")
    if name == "ramp":
        return ramp(float(arg))
    if name == "smooth":
        return smooth(int(arg))
    if arg:
        raise DomainError(f"{name} takes no parameter")
    return ActivationKind(name)


def _check_finite(x: np.ndarray) -> None:
    if not np.all(np.isfinite(x)):
        raise DomainError("activation input must be finite")


def triangle_wave(x):
    """Period-2 triangular wave |x - 2 floor((x+1)/2)| with range [0, 1]."""
    x = np.asarray(x, dtype=float)
    return np.abs(x - 2.0 * np.floor((x + 1.0) / 2.0))


def euaf(x):
    """The EUAF: triangular wave for x >= 0, softsign x/(|x|+1) for x < 0."""
    x = np.asarray(x, dtype=float)
    neg = x < 0
    # softsign branch computed on a clipped copy so no warnings leak
    xn = np.where(neg, x, -1.0)
    return np.where(neg, xn / (1.0 - xn), triangle_wave(np.where(neg, 0.0, x)))


def _tri_slope(x):
    # right-hand slope of the triangular wave: +1 on [2n, 2n+1), -1 on [2n+1, 2n+2)
    r = np.mod(x, 2.0)
    return np.where(r < 1.0, 1.0, -1.0)


def _euaf_slope(x):
    neg = x < 0
    xn = np.where(neg, x, -1.0)
    return np.where(neg, 1.0 / (1.0 - xn) ** 2, _tri_slope(np.where(neg, 0.0, x)))


def _out(value, scalar: bool):
    return float(value) if scalar else value


def evaluate(kind: ActivationKind, x):
    """Evaluate ``kind`` at ``x`` (scalar or array)."""
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    _check_finite(x)
    tag = kind.tag
    if tag == "euaf":
        y = euaf(x)
    elif tag == "triwave":
        y = triangle_wave(x)
    elif tag == "softsign":
        y = x / (np.abs(x) + 1.0)
    elif tag == "step":
        y = x - euaf(x)
    elif tag == "snap":
        y = x + 0.5 - euaf(x + 1.5)
    elif tag == "ramp":
        y = np.clip(x / float(kind.param), 0.0, 1.0)
    elif tag == "relu":
        y = np.maximum(x, 0.0)
    elif tag == "identity":
        y = x.copy()
    elif tag == "sigmoidal":
        from . import uaf_variants

        y = uaf_variants.eval_sigmoidal(x)
    else:
        from . import uaf_variants

        y = uaf_variants.eval_smooth(int(kind.param), x)
    return _out(y, scalar)


def subgradient(kind: ActivationKind, x):
    """Derivative of ``kind`` at ``x``; right-hand derivative at kinks."""
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    _check_finite(x)
    tag = kind.tag
    if tag == "euaf":
        y = _euaf_slope(x)
    elif tag == "triwave":
        y = _tri_slope(x)
    elif tag == "softsign":
        y = 1.0 / (np.abs(x) + 1.0) ** 2
    elif tag == "step":
        y = 1.0 - _euaf_slope(x)
    elif tag == "snap":
        y = 1.0 - _euaf_slope(x + 1.5)
    elif tag == "ramp":
        eta = float(kind.param)
        y = np.where((x >= 0.0) & (x < eta), 1.0 / eta, 0.0)
    elif tag == "relu":
        y = np.where(x >= 0.0, 1.0, 0.0)
    elif tag == "identity":
        y = np.ones_like(x)
    elif tag == "sigmoidal":
        from . import uaf_variants

        y = uaf_variants.sigmoidal_derivative(x)
    else:
        from . import uaf_variants

        s = int(kind.param)
        y = euaf(x) if s == 1 else uaf_variants.eval_smooth(s - 1, x)
    return _out(y, scalar)


def _integers(lo: float, hi: float, offset: float = 0.0, start: float = -math.inf):
    # points n + offset in [lo, hi] with n integer and n + offset >= start
    first = max(math.ceil(lo - offset), math.ceil(start - offset)) if start > -math.inf else math.ceil(lo - offset)
    last = math.floor(hi - offset)
    return [float(n + offset) for n in range(first, last + 1)]


def breakpoints(kind: ActivationKind, lo: float, hi: float) -> list[float]:
    """Sorted non-smooth points of ``kind`` inside ``[lo, hi]``."""
    if lo > hi:
        raise DomainError("breakpoints needs lo <= hi")
    tag = kind.tag
    if tag in ("euaf", "sigmoidal", "smooth"):
        pts = _integers(lo, hi, start=0.0)
    elif tag == "triwave":
        pts = _integers(lo, hi)
    elif tag in ("softsign", "relu"):
        pts = [0.0] if lo <= 0.0 <= hi else []
    elif tag == "step":
        pts = _integers(lo, hi, start=0.0)
    elif tag == "snap":
        pts = _integers(lo, hi, offset=-1.5, start=-1.5)
    elif tag == "ramp":
        pts = [p for p in (0.0, float(kind.param)) if lo <= p <= hi]
    else:
        pts = []
    return sorted(set(pts))
