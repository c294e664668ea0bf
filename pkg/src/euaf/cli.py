"""Command-line entry point: ``euaf <subcommand> ...``.

Exit codes: 0 success, 2 invalid input, 3 construction failure (the
best-effort report is still written).  Every run writes a JSON manifest.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys
import time
from pathlib import Path
from typing import Callable

import numpy as np

from . import approx1d, approxnd, autodiff, classify, gadgets, pointfit, uaf_variants
from .activation import DomainError
from .config import VERSION
from .network import Network, NetworkError, count_params, deserialize, serialize

__all__ = ["main", "BUILTIN_1D", "RunManifest"]


class _Invalid(Exception):
    """Bad input; exit code 2."""


class _Failed(Exception):
    """Construction failed; exit code 3."""

    def __init__(self, message: str, report: dict | None = None):
        super().__init__(message)
        self.report = report or {}


BUILTIN_1D: dict[str, Callable] = {
    "x": lambda x: np.asarray(x, dtype=float),
    "square": lambda x: np.asarray(x, dtype=float) ** 2,
    "sin": lambda x: np.sin(x),
    "sin3": lambda x: np.sin(3.0 * np.asarray(x, dtype=float)),
    "sin8": lambda x: 0.6 * np.sin(8.0 * np.asarray(x, dtype=float)),
    "osc": lambda x: 0.6 * np.sin(8.0 * np.asarray(x, dtype=float)) + 0.4 * np.sin(16.0 * np.asarray(x, dtype=float)),
}

# name -> (decomposition factory taking d, exact function of an (n, d) array)
BUILTIN_ND: dict[str, tuple[Callable, Callable]] = {
    "add": (lambda d: approxnd.additive_kst([1.0] * d), lambda x: x.sum(axis=1)),
    "prod": (lambda d: approxnd.product_kst() if d == 2 else None, lambda x: x[:, 0] * x[:, 1]),
}


@dataclasses.dataclass
class RunManifest:
    subcommand: str
    arguments: dict
    version: str
    wall_time: float
    outputs: list[str]
    exit_code: int


def jsonable(obj):
    """Plain JSON value for reports; networks are summarised by shape."""
    if isinstance(obj, Network):
        return {"width": obj.width, "depth": obj.depth, "nonzero_parameters": count_params(obj).nonzero}
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (str, int, bool)) or obj is None:
        return obj
    return str(obj)


def _write(path: str | None, text: str, outputs: list[str]) -> None:
    if path is None:
        return
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text)
    outputs.append(str(path))


def _emit(report: dict, path: str | None, outputs: list[str]) -> None:
    text = json.dumps(jsonable(report), indent=2)
    print(text)
    _write(path, text, outputs)


def _load_csv_function(path: str) -> Callable:
    try:
        data = np.loadtxt(path, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise _Invalid(f"cannot read {path}: {exc}") from exc
    if data.shape[1] != 2 or data.shape[0] < 2:
        raise _Invalid("CSV targets need two columns x,y and at least two rows")
    order = np.argsort(data[:, 0])
    xs, ys = data[order, 0], data[order, 1]
    return lambda x: np.interp(np.asarray(x, dtype=float), xs, ys)


def _function(args) -> Callable:
    if getattr(args, "csv", None):
        return _load_csv_function(args.csv)
    if args.function not in BUILTIN_1D:
        raise _Invalid(f"unknown function {args.function!r}; choose from {sorted(BUILTIN_1D)} or pass --csv")
    return BUILTIN_1D[args.function]


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise _Invalid(f"expected comma-separated numbers, got {text!r}") from exc


# --- subcommands ------------------------------------------------------------


def _gadget_reference(kind: str, params: dict):
    if kind == "square":
        x = np.linspace(-1.0, 1.0, 10_000)[:, None]
        return x, x[:, 0] ** 2
    if kind == "product":
        m = params.get("M", 1.0)
        x = np.random.default_rng(0).uniform(-m, m, (10_000, 2))
        return x, x[:, 0] * x[:, 1]
    if kind == "partition":
        K, i = int(params.get("K", 10)), int(params.get("i", 1))
        x = np.linspace(0.0, 0.9, 10_000)[:, None]
        return x, gadgets.partition_bump(2 * K * x[:, 0] + i / 2)
    if kind == "identity":
        m = params.get("M", 1.0)
        x = np.linspace(-m, m, 10_000)[:, None]
        return x, x[:, 0]
    if kind == "step":
        K = int(params.get("K", 5))
        # value k on the first half of each cell, [(2k-2)/2K, (2k-1)/2K]
        x = np.concatenate([np.linspace((2 * k - 2) / (2 * K), (2 * k - 1) / (2 * K), 200) for k in range(1, K + 1)])
        return x[:, None], np.repeat(np.arange(1.0, K + 1), 200)
    if kind == "snap":
        m = params.get("M", 10.0)
        ks = np.arange(0, max(1, int((m - 1.5) // 2)))
        x = (2 * ks[:, None] + 1 + np.linspace(-0.5, 0.5, 101)[None, :]).reshape(-1, 1)
        return x, np.repeat(2 * ks + 1.0, 101)
    return None


def cmd_gadget(args, outputs):
    params = {k: v for k, v in (("M", args.bound), ("K", args.K), ("i", args.i), ("depth", args.depth)) if v is not None}
    net = gadgets.build_gadget(gadgets.GadgetSpec(args.kind, params))
    report = {"kind": args.kind, "params": params, "network": net}
    if args.check:
        ref = _gadget_reference(args.kind, params)
        if ref is None:
            raise _Invalid(f"no reference check for gadget {args.kind!r}")
        x, y = ref
        report["max_grid_error"] = float(np.max(np.abs(net.scalar(x) - y)))
        report["points"] = int(len(x))
    _write(args.out, serialize(net), outputs)
    _emit(report, args.report, outputs)
    return 0


def cmd_pointfit(args, outputs):
    offsets = _floats(args.offsets) if args.offsets else None
    targets = pointfit.FitTargets(tuple(_floats(args.targets)), args.alpha, offsets)
    eps = _floats(args.epsilon)
    result = pointfit.fit(targets, eps[0] if len(eps) == 1 else eps, args.budget)
    _emit(result, args.report, outputs)
    return 0 if result.satisfied else 3


def _config(args) -> approx1d.Approx1DConfig:
    return approx1d.Approx1DConfig(allocation=args.allocation, budget=args.budget, K=args.K)


def cmd_fit1d(args, outputs):
    f = _function(args)
    target = approx1d.Target1D(f, (args.a, args.b), name=args.function or args.csv)
    try:
        report = approx1d.build_interval_approx(target, args.epsilon, _config(args))
    except approx1d.ConstructionError as exc:
        raise _Failed(str(exc), {"error": str(exc), "best_max_error": exc.best_max_error}) from exc
    _write(args.out, serialize(report.network), outputs)
    _emit(report, args.report, outputs)
    return 0


def cmd_fitnd(args, outputs):
    if args.builtin_target not in BUILTIN_ND:
        raise _Invalid(f"unknown target {args.builtin_target!r}; choose from {sorted(BUILTIN_ND)}")
    factory, f = BUILTIN_ND[args.builtin_target]
    kst = factory(args.d)
    if kst is None:
        raise _Invalid(f"target {args.builtin_target!r} has no decomposition for d={args.d}")
    try:
        report = approxnd.assemble(kst, args.epsilon, (args.a, args.b), _config(args), f=f)
    except approx1d.ConstructionError as exc:
        raise _Failed(str(exc), {"error": str(exc), "best_max_error": exc.best_max_error}) from exc
    _write(args.out, serialize(report.network), outputs)
    _emit(report, args.report, outputs)
    return 0


def cmd_classify(args, outputs):
    try:
        doc = json.loads(Path(args.regions).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise _Invalid(f"cannot read regions: {exc}") from exc
    regions = classify.LabeledRegions.from_document(doc)
    try:
        report = classify.build_classifier(regions, args.budget)
    except approx1d.ConstructionError as exc:
        raise _Failed(str(exc), {"error": str(exc), "best_max_error": exc.best_max_error}) from exc
    _write(args.out, serialize(report.network), outputs)
    _emit(report, args.report, outputs)
    return 0


def cmd_uaf(args, outputs):
    if args.approximate_sigma:
        try:
            res = uaf_variants.approximate_sigma_by_sigmoidal(args.M, args.epsilon)
        except uaf_variants.SubstitutionError as exc:
            raise _Failed(str(exc), {"error": str(exc), "best_delta": exc.best_delta}) from exc
        _write(args.out, serialize(res.network), outputs)
        _emit(res, args.report, outputs)
        return 0
    if args.eval is None:
        raise _Invalid("uaf needs --eval or --approximate-sigma")
    x = np.asarray(_floats(args.eval))
    if args.variant == "sigmoidal":
        values = uaf_variants.eval_sigmoidal(x)
        report = {"variant": "sigmoidal", "c": uaf_variants.SIGMOIDAL_C}
    else:
        values = uaf_variants.eval_smooth(args.s, x)
        report = {"variant": "smooth", "s": args.s}
    report.update(x=x, value=np.atleast_1d(values))
    _emit(report, args.report, outputs)
    return 0


def cmd_train_demo(args, outputs):
    arch = autodiff.Architecture(args.width, args.depth, args.activation)
    config = autodiff.TrainConfig(steps=args.steps, seed=args.seed, learning_rate=args.learning_rate, loss=args.loss)
    result = autodiff.train_toy(args.target, arch, config)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["step", "train_mse", "test_mse", "test_mae", "test_max"])
    writer.writerows([[s, *(repr(float(v)) for v in rest)] for s, *rest in result.trace])
    if args.out:
        _write(args.out, buf.getvalue(), outputs)
    else:
        sys.stdout.write(buf.getvalue())
    summary = {
        "initial_train_mse": result.initial_train_mse,
        "final_train_mse": result.final_train_mse,
        "diverged": result.diverged,
        "test_losses": result.test_losses,
    }
    if args.report:
        _write(args.report, json.dumps(jsonable(summary), indent=2), outputs)
    return 3 if result.diverged else 0


def cmd_verify(args, outputs):
    try:
        net = deserialize(Path(args.network).read_text())
    except OSError as exc:
        raise _Invalid(f"cannot read network: {exc}") from exc
    if net.input_dim == 1:
        f = _function(args)
        lo, hi = (args.a, args.b) if args.a is not None else (net.domain[0][0], net.domain[1][0]) if net.domain else (0.0, 1.0)
        x = np.linspace(lo, hi, args.grid)[:, None]
        y = np.asarray(f(x[:, 0]), dtype=float)
    else:
        if args.function not in BUILTIN_ND:
            raise _Invalid(f"unknown {net.input_dim}-d target {args.function!r}; choose from {sorted(BUILTIN_ND)}")
        lo, hi = (args.a, args.b) if args.a is not None else (0.0, 1.0)
        x = approxnd._box_points(net.input_dim, lo, hi, args.grid)
        y = BUILTIN_ND[args.function][1](x)
    residual = net.scalar(x) - y
    report = {
        "network": net,
        "points": int(len(x)),
        "sup_error": float(np.max(np.abs(residual))),
        "mean_error": float(np.mean(np.abs(residual))),
    }
    if args.residuals:
        buf = io.StringIO()
        np.savetxt(buf, np.column_stack([x, residual]), delimiter=",", header=",".join([f"x{i}" for i in range(x.shape[1])] + ["residual"]), comments="")
        _write(args.residuals, buf.getvalue(), outputs)
    _emit(report, args.report, outputs)
    return 0


# --- parser -----------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="euaf", description="Constructive EUAF network toolkit.")
    p.add_argument("--version", action="version", version=VERSION)
    p.add_argument("--manifest", help="where to write the run manifest (default: next to the first output)")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out=True):
        if out:
            sp.add_argument("--out", help="network JSON output path")
        sp.add_argument("--report", help="report JSON output path")

    def construction(sp):
        sp.add_argument("--allocation", default="tight", choices=["tight", "midrange", "uniform"])
        sp.add_argument("--budget", type=int, default=10**9)
        sp.add_argument("--K", type=int)

    g = sub.add_parser("gadget", help="build an exact gadget network")
    g.add_argument("--kind", required=True, choices=["square", "product", "step", "partition", "identity", "snap", "magnitude"])
    g.add_argument("--bound", type=float, help="magnitude bound M")
    g.add_argument("--K", type=int)
    g.add_argument("--i", type=int)
    g.add_argument("--depth", type=int)
    g.add_argument("--check", action="store_true", help="report the max error on a reference grid")
    common(g)
    g.set_defaults(run=cmd_gadget)

    f = sub.add_parser("pointfit", help="fit one point of the winding curve")
    f.add_argument("--targets", required=True, help="comma-separated values in [0, 1]")
    f.add_argument("--epsilon", required=True, help="one tolerance or one per target")
    f.add_argument("--alpha", type=float, default=math.pi)
    f.add_argument("--offsets")
    f.add_argument("--budget", type=int, default=10**9)
    common(f, out=False)
    f.set_defaults(run=cmd_pointfit)

    o = sub.add_parser("fit1d", help="approximate a function on [a, b]")
    o.add_argument("--function", help=f"builtin: {', '.join(BUILTIN_1D)}")
    o.add_argument("--csv", help="two-column x,y samples, linearly interpolated")
    o.add_argument("--a", type=float, default=0.0)
    o.add_argument("--b", type=float, default=1.0)
    o.add_argument("--epsilon", type=float, required=True)
    construction(o)
    common(o)
    o.set_defaults(run=cmd_fit1d)

    n = sub.add_parser("fitnd", help="approximate a builtin d-variate target")
    n.add_argument("--d", type=int, required=True)
    n.add_argument("--builtin-target", required=True, help=f"one of {', '.join(BUILTIN_ND)}")
    n.add_argument("--epsilon", type=float, required=True)
    n.add_argument("--a", type=float, default=0.0)
    n.add_argument("--b", type=float, default=1.0)
    construction(n)
    common(n)
    n.set_defaults(run=cmd_fitnd)

    c = sub.add_parser("classify", help="exact classifier for labelled intervals")
    c.add_argument("--regions", required=True)
    c.add_argument("--budget", type=int, default=10**9)
    common(c)
    c.set_defaults(run=cmd_classify)

    u = sub.add_parser("uaf", help="smooth and sigmoidal activation variants")
    u.add_argument("--variant", choices=["sigmoidal", "smooth"], default="sigmoidal")
    u.add_argument("--s", type=int, default=1)
    u.add_argument("--eval", help="comma-separated points")
    u.add_argument("--approximate-sigma", action="store_true")
    u.add_argument("--M", type=float, default=2.0)
    u.add_argument("--epsilon", type=float, default=0.1)
    common(u)
    u.set_defaults(run=cmd_uaf)

    t = sub.add_parser("train-demo", help="SGD toy fit; CSV loss trace")
    t.add_argument("--target", default="sin8", choices=sorted(autodiff.TOY_TARGETS))
    t.add_argument("--activation", default="euaf", choices=["euaf", "relu"])
    t.add_argument("--width", type=int, default=40)
    t.add_argument("--depth", type=int, default=2)
    t.add_argument("--steps", type=int, default=2000)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--learning-rate", type=float, default=autodiff.TrainConfig.learning_rate)
    t.add_argument("--loss", default="MSE", choices=list(autodiff.LOSSES))
    t.add_argument("--out", help="CSV trace path (default: stdout)")
    t.add_argument("--report")
    t.set_defaults(run=cmd_train_demo)

    v = sub.add_parser("verify", help="re-check a serialized network against a target")
    v.add_argument("network")
    v.add_argument("--function", default="x")
    v.add_argument("--csv")
    v.add_argument("--grid", type=int, default=10_000)
    v.add_argument("--a", type=float)
    v.add_argument("--b", type=float)
    v.add_argument("--residuals", help="CSV of per-point residuals")
    v.add_argument("--report")
    v.set_defaults(run=cmd_verify)
    return p


def _manifest_path(args, outputs: list[str]) -> Path:
    if args.manifest:
        return Path(args.manifest)
    base = Path(outputs[0]).parent if outputs else Path(".")
    return base / f"{args.command}.manifest.json"


def main(argv: list[str] | None = None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    outputs: list[str] = []
    start = time.perf_counter()
    code = 0
    try:
        code = args.run(args, outputs)
    except _Failed as exc:
        print(f"construction failed: {exc}", file=sys.stderr)
        report = getattr(args, "report", None)
        _write(report, json.dumps(jsonable(exc.report), indent=2), outputs)
        code = 3
    except (_Invalid, ValueError, DomainError, NetworkError, pointfit.FitError, KeyError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        code = 2
    manifest = RunManifest(
        subcommand=args.command,
        arguments={k: v for k, v in vars(args).items() if k != "run"},
        version=VERSION,
        wall_time=time.perf_counter() - start,
        outputs=outputs,
        exit_code=code,
    )
    path = _manifest_path(args, outputs)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(jsonable(manifest), indent=2))
    except OSError as exc:
        print(f"could not write manifest: {exc}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
