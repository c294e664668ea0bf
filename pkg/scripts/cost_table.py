"""Estimated point-fit scans (log10) per target, tolerance and allocation mode."""

import argparse
import sys

import numpy as np

from euaf.approx1d import Approx1DConfig, Target1D, estimate_cost

TARGETS = {
    "x": lambda x: x,
    "square": lambda x: x**2,
    "sin3": lambda x: np.sin(3 * x),
    "osc": lambda x: 0.6 * np.sin(8 * x) + 0.4 * np.sin(16 * x),
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--eps", type=float, nargs="+", default=[1.0, 0.5, 0.3, 0.2, 0.1])
    args = parser.parse_args(argv)
    modes = ("tight", "midrange", "uniform")
    print("target  eps    " + "  ".join(f"{m:>9}" for m in modes))
    for name, f in TARGETS.items():
        for eps in args.eps:
            costs = [estimate_cost(Target1D(f, (0.0, 1.0)), eps, Approx1DConfig(allocation=m)) for m in modes]
            print(f"{name:<7} {eps:<6} " + "  ".join(f"{c:9.2f}" for c in costs))
    return 0


if __name__ == "__main__":
    sys.exit(main())
