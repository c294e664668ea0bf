"""Train the same toy fit with EUAF and ReLU tags and write both loss traces."""

import argparse
import csv
import sys

from euaf.autodiff import TOY_TARGETS, Architecture, TrainConfig, train_toy


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--target", default="sin8", choices=sorted(TOY_TARGETS))
    parser.add_argument("--steps", type=int, default=2000)
    parser.add_argument("--seeds", type=int, nargs="+", default=[0])
    parser.add_argument("--width", type=int, default=40)
    parser.add_argument("--depth", type=int, default=2)
    parser.add_argument("--out", default="train_compare.csv")
    args = parser.parse_args(argv)

    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["activation", "seed", "step", "train_mse", "test_mse", "test_mae", "test_max"])
        for tag in ("euaf", "relu"):
            for seed in args.seeds:
                res = train_toy(args.target, Architecture(args.width, args.depth, tag), TrainConfig(steps=args.steps, seed=seed))
                writer.writerows([tag, seed, *row] for row in res.trace)
                ratio = res.final_train_mse / res.initial_train_mse
                print(f"{tag} seed={seed} train MSE {res.initial_train_mse:.4g} -> {res.final_train_mse:.4g} (ratio {ratio:.3f})"
                      + (" diverged" if res.diverged else ""))
    return 0


if __name__ == "__main__":
    sys.exit(main())
