import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from euaf.activation import triangle_wave
from euaf.pointfit import FitError, FitTargets, fit, shift_nonneg, shifted_values, verify_fit, winding_coverage


def brute_force_first(values, eps, upper, step=1e-6):
    # smallest w on a fine grid with every coordinate within eps; independent of the solver
    a = 1.0 / (math.pi + np.arange(1, len(values) + 1))
    for start in np.arange(0.0, upper, 1.0):
        w = np.arange(start, start + 1.0, step)
        ok = np.all(np.abs(triangle_wave(w[:, None] * a) - np.asarray(values)) < eps, axis=1)
        if ok.any():
            return float(w[ok][0])
    return None


def test_frozen_two_target_fit():
    res = fit(FitTargets((0.3, 0.7)), 0.05)
    assert res.satisfied
    assert res.w == pytest.approx(6.881597745998799, abs=1e-12)
    assert res.evaluations == 80
    first = brute_force_first((0.3, 0.7), 0.05, 20.0)
    assert first == pytest.approx(6.833628, abs=2e-6)
    # the solver returns the optimum of the first window holding a witness
    h = (2.0 * (math.pi + 1)) / 64.0
    assert first - h <= res.w <= first + h


def test_zero_targets_fit_at_zero():
    res = fit(FitTargets((0.0, 0.0, 0.0)), 0.1)
    assert res.satisfied and res.w == 0.0


@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=3))
@settings(max_examples=40, deadline=None)
def test_random_targets_fit_and_reverify(values):
    targets = FitTargets(tuple(values))
    res = fit(targets, 0.05)
    assert res.satisfied
    err = verify_fit(res, targets)
    assert np.all(err < 0.05)
    np.testing.assert_allclose(err, res.per_index_error, atol=1e-15)


def test_per_index_tolerances():
    targets = FitTargets((0.2, 0.9, 0.5))
    tol = np.array([0.01, 0.2, 0.05])
    res = fit(targets, tol)
    assert res.satisfied
    assert np.all(verify_fit(res, targets) < tol)


def test_custom_alpha_and_offsets():
    targets = FitTargets((0.4, 0.6), alpha=2.0, offsets=(0.5, math.sqrt(2.0)))
    res = fit(targets, 0.05)
    assert res.satisfied
    w = res.w
    assert abs(triangle_wave(w / 2.5) - 0.4) < 0.05 and abs(triangle_wave(w / (2.0 + math.sqrt(2.0))) - 0.6) < 0.05


def test_rationally_dependent_slopes_can_be_unreachable():
    # slopes 0.4 and 0.2: tri(0.4 w) = tri(2 * 0.2 w), and tri(theta) = 0.6 forces tri(2 theta) = 0.8
    res = fit(FitTargets((0.4, 0.6), alpha=2.0, offsets=(0.5, 3.0)), 0.05, budget=10**6)
    assert not res.satisfied


def test_budget_exhaustion_reports_best():
    targets = FitTargets(tuple(np.linspace(0.05, 0.95, 8)))
    res = fit(targets, 1e-3, budget=10_000)
    assert not res.satisfied
    assert res.evaluations <= 10_000
    assert res.max_error == pytest.approx(float(np.max(verify_fit(res, targets))))


def test_shift_makes_euaf_agree_with_the_wave():
    offsets = np.arange(1, 6, dtype=float)
    for w in (-37.25, -0.5, 0.0, 12.0, 1e4 + 0.3):
        w, m0 = shift_nonneg(w)
        assert m0 == math.floor(abs(w)) + 1
        np.testing.assert_allclose(shifted_values(w, m0, math.pi, offsets), triangle_wave(w / (math.pi + offsets)), atol=1e-9)


def test_coverage():
    assert winding_coverage(2, 100_000, 10_000.0) == 1.0
    # equal offsets put the curve on the diagonal: one row of cells per column
    assert winding_coverage(2, 100_000, 10_000.0, offsets=(1.0, 1.0)) <= 2 * 32 / 1024


@pytest.mark.parametrize(
    "kwargs",
    [
        {"values": ()},
        {"values": (1.5,)},
        {"values": (0.5, 0.5), "offsets": (1.0, 1.0)},
        {"values": (0.5,), "offsets": (1.0, 2.0)},
        {"values": (0.5,), "alpha": -1.0, "offsets": (1.0,)},
    ],
)
def test_invalid_targets(kwargs):
    with pytest.raises(FitError):
        FitTargets(**kwargs)


def test_invalid_tolerance_and_budget():
    with pytest.raises(FitError):
        fit(FitTargets((0.5,)), 0.0)
    with pytest.raises(FitError):
        fit(FitTargets((0.5,)), 0.1, budget=0)
    with pytest.raises(FitError):
        winding_coverage(5, 10, 1.0)
