import functools

import numpy as np
import pytest

from euaf.approx1d import Target1D, build_interval_approx
from euaf.approxnd import additive_kst, assemble, product_kst
from euaf.classify import LabeledRegions, build_classifier

ONE_D_TARGETS = {
    "x": lambda x: np.asarray(x, dtype=float),
    "square": lambda x: np.asarray(x, dtype=float) ** 2,
    "sin3": lambda x: np.sin(3.0 * np.asarray(x, dtype=float)),
    "osc": lambda x: 0.6 * np.sin(8.0 * np.asarray(x, dtype=float)) + 0.4 * np.sin(16.0 * np.asarray(x, dtype=float)),
}

# additive at 0.3 exceeds the 1e9 scan budget; these are the tightest feasible settings
ND_CASES = {
    "add": (additive_kst([1.0, 1.0]), lambda x: x[:, 0] + x[:, 1], 0.5),
    "prod": (product_kst(), lambda x: x[:, 0] * x[:, 1], 2.0),
}


@functools.lru_cache(maxsize=None)
def interval_build(name: str, eps: float):
    return build_interval_approx(Target1D(ONE_D_TARGETS[name], (0.0, 1.0), name=name), eps)


@functools.lru_cache(maxsize=None)
def nd_build(name: str):
    kst, f, eps = ND_CASES[name]
    return assemble(kst, eps, f=f)


def two_interval_regions() -> LabeledRegions:
    return LabeledRegions(({"intervals": [[0.0, 0.3]]}, {"intervals": [[0.5, 0.8]]}), ((1, 2), (-1, 3)))


@functools.lru_cache(maxsize=None)
def classifier_build():
    return build_classifier(two_interval_regions())


@pytest.fixture(scope="session")
def build_1d():
    return interval_build


@pytest.fixture(scope="session")
def build_nd():
    return nd_build


@pytest.fixture(scope="session")
def classifier():
    return classifier_build()
