"""One check per acceptance criterion; each prints a single PASS/FAIL line."""

import time

import numpy as np
import pytest

from conftest import ONE_D_TARGETS, two_interval_regions
from helpers import random_network
from euaf.activation import EUAF, RELU, euaf
from euaf.approx1d import Target1D, build_half_approx
from euaf.approxnd import nonzero_bound
from euaf.autodiff import Architecture, TrainConfig, grad, train_toy
from euaf.classify import classifier_bound, sample_regions
from euaf.gadgets import partition_bump, product_net, snap_net, square_net
from euaf.network import deserialize, serialize
from euaf.pointfit import FitTargets, fit, verify_fit, winding_coverage
from euaf.uaf_variants import approximate_sigma_by_sigmoidal, compute_c, eval_sigmoidal, eval_smooth, sigmoidal_derivative


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n} {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail

    return emit


def test_criterion_1_gadget_exactness(report):
    start = time.perf_counter()
    x = np.linspace(-1.0, 1.0, 10_000)
    sq = float(np.max(np.abs(square_net().scalar(x) - x**2)))
    xy = np.random.default_rng(0).uniform(-1.0, 1.0, (10_000, 2))
    pr = float(np.max(np.abs(product_net(1.0).scalar(xy) - xy[:, 0] * xy[:, 1])))
    elapsed = time.perf_counter() - start
    ok = sq <= 1e-12 and pr <= 1e-12 and elapsed < 1.0
    report(1, ok, f"square error {sq:.2e}, product error {pr:.2e}, {elapsed:.3f} s")


def test_criterion_2_structural_pinning(report, build_1d, build_nd, classifier):
    half = build_half_approx(Target1D(ONE_D_TARGETS["x"], (0.0, 1.0)), 0.1, K=4).network
    region = build_1d("x", 0.3).network
    nd = build_nd("prod")
    cls = classifier.network
    ok = (
        (half.width, half.depth) == (2, 3)
        and (region.width, region.depth) == (36, 5)
        and (nd.network.width, nd.network.depth) == (360, 11)
        and nd.nonzero_parameters <= nonzero_bound(2) == 81555
        and cls.depth == 12
        and classifier.nonzero_parameters <= classifier_bound(1) == 33054
    )
    report(
        2,
        ok,
        f"half {half.width}x{half.depth}, region {region.width}x{region.depth}, "
        f"assembly {nd.network.width}x{nd.network.depth} with {nd.nonzero_parameters} nonzero, "
        f"classifier depth {cls.depth} with {classifier.nonzero_parameters} nonzero",
    )


def test_criterion_3_one_dimensional_approximation(report, build_1d):
    grid = np.linspace(0.0, 1.0, 10_000)
    rows, ok = [], True
    for name, f in ONE_D_TARGETS.items():
        for eps in (0.3, 0.2):
            start = time.perf_counter()
            rep = build_1d(name, eps)
            err = float(np.max(np.abs(rep.network.scalar(grid) - f(grid))))
            seconds = time.perf_counter() - start
            ok &= err < eps and rep.evaluations <= 10**9 and seconds < 300
            rows.append(f"{name}@{eps}={err:.3f}")
    report(3, ok, "sup errors " + ", ".join(rows))


def test_criterion_4_point_fitting(report):
    rng = np.random.default_rng(11)
    failures = 0
    for trial in range(50):
        K = 1 + trial % 3
        targets = FitTargets(tuple(rng.random(K)))
        res = fit(targets, 0.05)
        if not (res.satisfied and np.all(verify_fit(res, targets) < 0.05)):
            failures += 1
    coverage = winding_coverage(2, 10**7, 1e6)
    report(4, failures == 0 and coverage >= 0.99, f"{50 - failures}/50 fits re-verified, coverage {coverage:.4f}")


def test_criterion_5_partition_of_unity(report):
    x = np.random.default_rng(5).uniform(0.0, 100.0, 10_000)
    err = float(np.max(np.abs(sum(partition_bump(x + i / 2) for i in range(1, 5)) - 1.0)))
    report(5, err <= 1e-12, f"max deviation {err:.2e}")


def test_criterion_6_classification(report, classifier):
    regions = two_interval_regions()
    dev = 0.0
    for pts, r in zip(sample_regions(regions, 1000, seed=17), regions.labels):
        dev = max(dev, float(np.max(np.abs(classifier.network.scalar(pts) - float(r)))))
    # shake the pre-snap values by anything inside the remaining room
    room = 0.5 - classifier.approximation_error
    snapped = snap_net(classifier.snap_bound)
    rng = np.random.default_rng(4)
    robust = room > 0
    for pts in sample_regions(regions, 1000, seed=18):
        base = classifier.approximant.scalar(pts)
        shaken = base + rng.uniform(-0.999 * room, 0.999 * room, base.shape)
        robust &= bool(np.max(np.abs(snapped.scalar(shaken[:, None]) - snapped.scalar(base[:, None]))) <= 1e-12)
    report(6, dev <= 1e-9 and robust, f"label deviation {dev:.2e}, plateau room {room:.3f}, perturbation {'held' if robust else 'broke'}")


def test_criterion_7_uaf_variants(report):
    c = compute_c()
    drift = abs(compute_c(2048) - compute_c(1024))
    x = np.linspace(-1e3, 1e3, 200_001)
    y = eval_sigmoidal(x)
    monotone = bool(np.all(np.diff(y) > 0) and np.all(np.abs(y) < 1))
    rng = np.random.default_rng(0)
    p = rng.uniform(0.0, 20.0, 400)
    p = p[np.abs(p - np.round(p)) > 1e-3]
    h = 1e-5
    fd = (eval_sigmoidal(p + h) - eval_sigmoidal(p - h)) / (2 * h)
    sig_rel = float(np.max(np.abs(fd - sigmoidal_derivative(p)) / sigmoidal_derivative(p)))
    q = rng.uniform(-3.0, 3.0, 100)
    q = q[np.abs(q) > 1e-2]
    h = 1e-6
    smooth_rel = float(np.max(np.abs((eval_smooth(2, q + h) - eval_smooth(2, q - h)) / (2 * h) - eval_smooth(1, q)) / np.maximum(1.0, np.abs(eval_smooth(1, q)))))
    net = approximate_sigma_by_sigmoidal(2.0, 0.1).network
    g = np.linspace(-2.0, 2.0, 10_000)
    err = float(np.max(np.abs(net.scalar(g) - euaf(g))))
    ok = 2.5 <= c <= 2.6 and drift < 1e-10 and monotone and sig_rel < 1e-6 and smooth_rel < 1e-6 and err < 0.1 and (net.width, net.depth) == (50, 6)
    report(
        7,
        ok,
        f"c={c:.6f} drift {drift:.1e}, monotone {monotone}, derivative checks {sig_rel:.1e}/{smooth_rel:.1e}, "
        f"sigmoidal net {net.width}x{net.depth} error {err:.3f}",
    )


def _kink_distance(net, x):
    h = x
    worst = np.inf
    for i, layer in enumerate(net.layers[:-1]):
        z = h @ layer.weights.T + layer.bias
        worst = min(worst, float(np.min(np.where(z < -0.5, np.inf, np.abs(z - np.round(z))))))
        h = net.activate(i, z)
    return worst


def test_criterion_8_gradient_engine(report):
    rng = np.random.default_rng(8)
    worst, done = 0.0, 0
    while done < 100:
        net = random_network(rng, tags=(EUAF,), max_width=5, max_depth=3)
        x = rng.uniform(-1, 1, (1, net.input_dim))
        if _kink_distance(net, x) < 1e-3:
            continue
        theta = net.parameters()
        g = grad(net, x)
        fd = np.empty_like(theta)
        for k in range(theta.size):
            e = np.zeros_like(theta)
            e[k] = 1e-7
            fd[k] = (net.with_parameters(theta + e).evaluate(x).sum() - net.with_parameters(theta - e).evaluate(x).sum()) / 2e-7
        worst = max(worst, float(np.max(np.abs(g - fd)) / max(1.0, np.max(np.abs(fd)))))
        done += 1
    report(8, worst < 1e-4, f"worst relative gradient error {worst:.2e} over 100 nets")


def test_criterion_9_training_demo(report):
    ratios = {}
    for kind in (RELU, EUAF):
        res = train_toy("sin8", Architecture(activation=kind), TrainConfig(steps=2000, seed=0))
        ratios[str(kind)] = res.final_train_mse / res.initial_train_mse
    ok = all(r <= 0.5 for r in ratios.values())
    report(9, ok, ", ".join(f"{k} final/initial train MSE {r:.4f}" for k, r in ratios.items()))


def test_criterion_10_serialization(report):
    rng = np.random.default_rng(10)
    same = 0
    for _ in range(100):
        net = random_network(rng)
        text = serialize(net)
        back = deserialize(text)
        same += int(back.structurally_equal(net) and serialize(back) == text)
    report(10, same == 100, f"{same}/100 bitwise round trips")

