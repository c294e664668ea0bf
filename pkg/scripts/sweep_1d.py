"""Build every 1-D benchmark target at eps 0.3 and 0.2 and print one row per case."""

import argparse
import csv
import sys
import time

import numpy as np

from euaf.approx1d import Approx1DConfig, ConstructionError, Target1D, build_interval_approx

TARGETS = {
    "x": lambda x: x,
    "square": lambda x: x**2,
    "sin3": lambda x: np.sin(3 * x),
    "osc": lambda x: 0.6 * np.sin(8 * x) + 0.4 * np.sin(16 * x),
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--eps", type=float, nargs="+", default=[0.3, 0.2])
    parser.add_argument("--budget", type=int, default=10**9)
    parser.add_argument("--csv", help="also write the rows here")
    args = parser.parse_args(argv)

    grid = np.linspace(0.0, 1.0, 10_000)
    rows = []
    for name, f in TARGETS.items():
        for eps in args.eps:
            start = time.perf_counter()
            try:
                rep = build_interval_approx(Target1D(f, (0.0, 1.0), name=name), eps, Approx1DConfig(budget=args.budget))
                err = float(np.max(np.abs(rep.network.scalar(grid) - f(grid))))
                row = dict(target=name, eps=eps, ok=err < eps, K=rep.K, error=err, evaluations=rep.evaluations)
            except ConstructionError as exc:
                row = dict(target=name, eps=eps, ok=False, K="", error=exc.best_max_error, evaluations="")
            row["seconds"] = round(time.perf_counter() - start, 2)
            rows.append(row)
            print(" ".join(f"{k}={v}" for k, v in row.items()), flush=True)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
    return 0 if all(r["ok"] for r in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
