import numpy as np
import pytest

from conftest import ONE_D_TARGETS
from euaf.activation import DomainError
from euaf.approx1d import (
    K_MIN,
    Approx1DConfig,
    ConstructionError,
    Target1D,
    build_half_approx,
    build_interval_approx,
    build_region_approx,
    estimate_cost,
)

GRID = np.linspace(0.0, 1.0, 10_000)


def identity(x):
    return np.asarray(x, dtype=float)


@pytest.mark.parametrize("eps", [0.3, 0.2])
@pytest.mark.parametrize("name", sorted(ONE_D_TARGETS))
def test_interval_approx_meets_epsilon(build_1d, name, eps):
    rep = build_1d(name, eps)
    err = np.max(np.abs(rep.network.scalar(GRID) - ONE_D_TARGETS[name](GRID)))
    assert err < eps
    assert (rep.network.width, rep.network.depth) == (36, 5)
    assert rep.evaluations <= 10**9


def test_frozen_identity_build(build_1d):
    rep = build_1d("x", 0.3)
    assert rep.K == 10
    assert rep.grid_sup_error == pytest.approx(0.27875930112741243, abs=1e-12)


def test_half_approx_shape_and_accuracy():
    K = 4
    rep = build_half_approx(Target1D(identity, (0.0, 1.0)), 0.1, K=K)
    assert (rep.network.width, rep.network.depth) == (2, 3)
    # only the first half of every 1/K cell is guaranteed
    x = np.concatenate([np.linspace((2 * k - 2) / (2 * K), (2 * k - 1) / (2 * K), 200) for k in range(1, K + 1)])
    assert np.max(np.abs(rep.network.scalar(x) - x)) < 0.1


def test_region_approx_on_its_region():
    rep = build_region_approx(Target1D(identity, (0.0, 0.9)), 0.3)
    x = np.linspace(0.0, 0.9, 5000)
    assert (rep.network.width, rep.network.depth) == (36, 5)
    assert np.max(np.abs(rep.network.scalar(x) - x)) < 0.3


def test_care_region_skips_a_jump():
    def step(x):
        return (np.asarray(x) > 0.5).astype(float)

    rep = build_interval_approx(Target1D(step, (0.0, 1.0)), 0.3, care=[(0.0, 0.4), (0.6, 1.0)])
    x = np.concatenate([np.linspace(0.0, 0.4, 2000), np.linspace(0.6, 1.0, 2000)])
    assert np.max(np.abs(rep.network.scalar(x) - step(x))) < 0.3


def test_midrange_allocation():
    rep = build_interval_approx(Target1D(identity, (0.0, 1.0)), 0.3, Approx1DConfig(allocation="midrange"))
    assert np.max(np.abs(rep.network.scalar(GRID) - GRID)) < 0.3


def test_shifted_interval():
    rep = build_interval_approx(Target1D(identity, (-2.0, 3.0)), 1.5)
    x = np.linspace(-2.0, 3.0, 10_000)
    assert rep.network.domain == ((-2.0,), (3.0,))
    assert np.max(np.abs(rep.network.scalar(x) - x)) < 1.5


def test_uniform_allocation_is_far_beyond_budget():
    target = Target1D(identity, (0.0, 1.0))
    tight = estimate_cost(target, 1.0)
    uniform = estimate_cost(target, 1.0, Approx1DConfig(allocation="uniform"))
    assert tight < 1.0
    assert uniform > 20.0


def test_cost_estimate_orders_targets():
    eps = 0.2
    costs = {n: estimate_cost(Target1D(f, (0.0, 1.0)), eps) for n, f in ONE_D_TARGETS.items()}
    assert max(costs, key=costs.get) == "osc"


def test_budget_exhaustion_is_reported():
    with pytest.raises(ConstructionError) as info:
        build_interval_approx(Target1D(identity, (0.0, 1.0)), 1e-4, Approx1DConfig(budget=1000, K_max=12))
    assert info.value.best_max_error > 0


def test_config_validation():
    with pytest.raises(ValueError):
        Approx1DConfig(K=K_MIN - 1)
    with pytest.raises(ValueError):
        Approx1DConfig(K_max=K_MIN - 1)
    with pytest.raises(ValueError):
        Approx1DConfig(allocation="greedy")
    with pytest.raises(ValueError):
        Approx1DConfig(margin=0.0)
    with pytest.raises(DomainError):
        build_interval_approx(Target1D(identity, (0.0, 1.0)), 0.0)
    with pytest.raises(DomainError):
        build_half_approx(Target1D(identity, (0.0, 2.0)), 0.1)
