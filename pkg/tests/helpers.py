import numpy as np

from euaf.activation import EUAF, RELU, SNAP, SOFTSIGN, STEP, TRIWAVE, ramp, smooth
from euaf.network import AffineLayer, Network

TAG_POOL = (EUAF, TRIWAVE, SOFTSIGN, STEP, SNAP, RELU, ramp(0.5), smooth(2))


def random_network(rng: np.random.Generator, tags=TAG_POOL, max_width: int = 6, max_depth: int = 4, input_dim=None) -> Network:
    d = int(input_dim or rng.integers(1, 4))
    depth = int(rng.integers(0, max_depth + 1))
    dims = [d] + [int(rng.integers(1, max_width + 1)) for _ in range(depth)] + [int(rng.integers(1, 3))]
    layers = [AffineLayer(rng.normal(size=(o, i)), rng.normal(size=o)) for i, o in zip(dims[:-1], dims[1:])]
    acts = tuple(tuple(tags[int(k)] for k in rng.integers(0, len(tags), n)) for n in dims[1:-1])
    domain = None
    if rng.random() < 0.5:
        lo = rng.uniform(-2, 0, d)
        domain = (tuple(lo), tuple(lo + rng.uniform(0.1, 3, d)))
    return Network(d, tuple(layers), acts, domain)
