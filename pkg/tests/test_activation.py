import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from euaf.activation import (
    EUAF,
    RELU,
    SNAP,
    SOFTSIGN,
    STEP,
    TRIWAVE,
    ActivationKind,
    DomainError,
    breakpoints,
    euaf,
    evaluate,
    parse_tag,
    ramp,
    smooth,
    subgradient,
    triangle_wave,
)

reals = st.floats(-1e4, 1e4, allow_nan=False)


@pytest.mark.parametrize(
    "x, expected",
    [(0.0, 0.0), (0.5, 0.5), (1.0, 1.0), (1.5, 0.5), (2.0, 0.0), (3.25, 0.75), (-1.0, -0.5), (-3.0, -0.75)],
)
def test_euaf_values(x, expected):
    assert evaluate(EUAF, x) == pytest.approx(expected, abs=1e-15)


@given(reals)
def test_triangle_wave_range_and_period(x):
    y = triangle_wave(x)
    assert 0.0 <= y <= 1.0
    assert triangle_wave(x + 2.0) == pytest.approx(y, abs=1e-9)
    assert triangle_wave(-x) == pytest.approx(y, abs=1e-12)


@given(st.floats(-1e6, -1e-9))
def test_negative_side_is_softsign(x):
    assert euaf(x) == pytest.approx(x / (abs(x) + 1.0), rel=1e-14)
    assert -1.0 < euaf(x) < 0.0


@given(reals)
def test_step_plus_euaf_is_identity(x):
    assert evaluate(STEP, x) + evaluate(EUAF, x) == pytest.approx(x, abs=1e-9)


@given(st.integers(0, 50), st.floats(-0.5, 0.5))
def test_snap_plateau(k, u):
    assert evaluate(SNAP, 2 * k + 1 + u) == pytest.approx(2 * k + 1, abs=1e-12)


@pytest.mark.parametrize("kind", [EUAF, TRIWAVE, SOFTSIGN, STEP, SNAP, RELU, ramp(0.7)])
def test_subgradient_matches_central_difference(kind):
    rng = np.random.default_rng(7)
    x = rng.uniform(-5, 5, 2000)
    kinks = np.array(breakpoints(kind, -6.0, 6.0))
    if kinks.size:
        x = x[np.min(np.abs(x[:, None] - kinks[None, :]), axis=1) > 1e-3]
    h = 1e-6
    fd = (evaluate(kind, x + h) - evaluate(kind, x - h)) / (2 * h)
    assert np.max(np.abs(subgradient(kind, x) - fd)) < 1e-6


def test_subgradient_is_right_derivative_at_kinks():
    # tri has slope +1 on [2n, 2n+1) and -1 on [2n+1, 2n+2)
    assert subgradient(EUAF, 0.0) == 1.0
    assert subgradient(EUAF, 1.0) == -1.0
    assert subgradient(EUAF, 2.0) == 1.0
    assert subgradient(RELU, 0.0) == 1.0


def test_breakpoints_of_euaf_are_integers():
    assert breakpoints(EUAF, -1.0, 3.5) == [0.0, 1.0, 2.0, 3.0]


@pytest.mark.parametrize("kind", [EUAF, TRIWAVE, SOFTSIGN, STEP, SNAP, RELU, ramp(0.25), smooth(3)])
def test_tag_round_trip(kind):
    assert parse_tag(str(kind)) == kind


def test_bad_tags_and_inputs():
    with pytest.raises(DomainError):
        parse_tag("euaf:3")
    with pytest.raises(DomainError):
        ActivationKind("tanh")
    with pytest.raises(DomainError):
        evaluate(EUAF, math.inf)
    with pytest.raises(DomainError):
        evaluate(EUAF, np.array([0.0, math.nan]))
