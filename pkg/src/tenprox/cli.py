"""Command-line entry point.

Subcommands: ``complete`` (one algorithm), ``bench`` (all six algorithms,
with figures and recovered tensors next to the results file),
``extrapolate-demo`` and ``selftest``. Options may also come from a JSON
file given by ``--config``; its keys are the long option names with
underscores (``mask_p``, ``max_outer``...). Command-line flags win.
"""

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .errors import ParameterError
from .extrap import gt_tet, hosvd_mpe
from .harness.experiment import (ALGORITHMS, ExperimentParams, emit_records, masked_psnr,
                                 run_completion_experiment)
from .harness.images import bundled_synthetic, load_image, save_image
from .harness.masks import MaskSpec, make_mask
from .harness.plots import plot_records
from .prox import InnerLoopConfig
from .selftest import run_selftest
from .solvers import SolverConfig

DEFAULTS = {
    "image": None, "mask_p": 0.5, "mask_image": None, "seed": 42, "per_entry": False,
    "mu": None, "alpha": "auto", "inner": 10, "rho": 0.5, "beta0": "auto",
    "schedule": "backtracking", "tol": 1e-3, "max_outer": 500, "algo": "TISTA",
    "extrap": "none", "window": None, "probe": "delta", "max_cycles": 200,
    "omega": None, "epsilon": None, "out": None, "format": "csv",
    "dual_sign": "moreau", "positive_rhs": False, "gradient_adjoint": "on",
    "plots": True,
}


def _float_or_auto(text):
    if text == "auto":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or 'auto', got {text!r}")


def _add_common(p):
    # every default is None so that config-file values can be told apart
    g = p.add_argument_group("data")
    g.add_argument("--image", help="input image (PNG/PPM); default: bundled 64x64 synthetic")
    g.add_argument("--mask-p", type=float, help="fraction of missing pixels (default 0.5)")
    g.add_argument("--mask-image", help="mask image, black = missing")
    g.add_argument("--seed", type=int, help="mask seed (default 42)")
    g.add_argument("--per-entry", action="store_const", const=True,
                   help="mask entries independently instead of whole pixels")
    g = p.add_argument_group("solver")
    g.add_argument("--mu", type=float, help="regularization weight (default per family)")
    g.add_argument("--alpha", type=_float_or_auto, help="outer step size or 'auto'")
    g.add_argument("--inner", type=int, help="dual steps per prox (default 10)")
    g.add_argument("--rho", type=float, help="dual step reduction factor (default 0.5)")
    g.add_argument("--beta0", type=_float_or_auto, help="initial dual step or 'auto'")
    g.add_argument("--schedule", choices=["backtracking", "geometric"])
    g.add_argument("--tol", type=float, help="relative-change stopping threshold (default 1e-3)")
    g.add_argument("--max-outer", type=int, help="outer iteration cap (default 500)")
    g.add_argument("--dual-sign", choices=["moreau", "alg", "proof"],
                   help="form of the dual prox step (default moreau)")
    g.add_argument("--gradient-adjoint", choices=["on", "off"])
    g.add_argument("--omega", choices=["box", "nuclear", "none"],
                   help="constraint set (default: nuclear for TISTA, box for TDPG)")
    g.add_argument("--epsilon", type=float, help="nuclear-ball radius")
    g = p.add_argument_group("extrapolation")
    g.add_argument("--window", type=int, help="window parameter m (default 2 TET, 3 HM)")
    g.add_argument("--probe", choices=["delta", "ones", "random"])
    g.add_argument("--max-cycles", type=int)
    g.add_argument("--positive-rhs", action="store_const", const=True,
                   help="solve the TET weight system as H c = b")
    g = p.add_argument_group("output")
    g.add_argument("--out", help="results file")
    g.add_argument("--format", choices=["csv", "jsonl"])
    g.add_argument("--no-plots", dest="plots", action="store_const", const=False)
    p.add_argument("--config", help="JSON file with option values")


def build_parser():
    parser = argparse.ArgumentParser(prog="tenprox", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("complete", help="complete one image with one algorithm")
    _add_common(p)
    p.add_argument("--algo", type=str.upper, choices=["TISTA", "TDPG"])
    p.add_argument("--extrap", choices=["none", "tet", "hm"])
    p = sub.add_parser("bench", help="run all six algorithms on one masked image")
    _add_common(p)
    p = sub.add_parser("extrapolate-demo", help="extrapolate a synthetic geometric sequence")
    p.add_argument("--window", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    sub.add_parser("selftest", help="run the built-in oracle checks")
    return parser


def effective_options(args):
    """Merge defaults, the ``--config`` file and explicit flags, in that order."""
    opts = dict(DEFAULTS)
    if getattr(args, "config", None):
        path = Path(args.config)
        try:
            data = json.loads(path.read_text())
        except (OSError, ValueError) as exc:
            raise ParameterError(f"cannot read config {path}: {exc}") from exc
        unknown = set(data) - set(DEFAULTS)
        if unknown:
            raise ParameterError(f"unknown config keys: {', '.join(sorted(unknown))}")
        opts.update(data)
    for k, v in vars(args).items():
        if k in DEFAULTS and v is not None:
            opts[k] = v
    return opts


def solver_config(opts):
    inner = InnerLoopConfig(
        max_inner=int(opts["inner"]), rho=float(opts["rho"]), schedule=opts["schedule"],
        beta0=None if opts["beta0"] == "auto" else float(opts["beta0"]),
        dual_sign=opts["dual_sign"])
    return SolverConfig(
        alpha=None if opts["alpha"] == "auto" else float(opts["alpha"]),
        inner=inner, tol=float(opts["tol"]), max_outer=int(opts["max_outer"]),
        gradient_adjoint=opts["gradient_adjoint"] == "on")


def experiment_params(opts):
    return ExperimentParams(
        mu=opts["mu"], omega=opts["omega"], epsilon=opts["epsilon"], window=opts["window"],
        probe=opts["probe"], max_cycles=int(opts["max_cycles"]),
        positive_rhs=bool(opts["positive_rhs"]))


def mask_spec(opts):
    if opts["mask_image"]:
        return MaskSpec(kind="pattern", path=opts["mask_image"], seed=int(opts["seed"]))
    return MaskSpec(p=float(opts["mask_p"]), seed=int(opts["seed"]),
                    per_pixel=not opts["per_entry"])


def _image(opts):
    return bundled_synthetic() if opts["image"] is None else load_image(opts["image"])


def _fmt(v):
    if isinstance(v, float):
        return "inf" if math.isinf(v) else f"{v:.6g}"
    return str(v)


def print_table(records, stream=None):
    stream = stream or sys.stdout
    cols = ["algorithm", "mask_level", "psnr_db", "rel_error", "wall_s", "outer_iters",
            "cycles", "seed", "status"]
    print(",".join(cols), file=stream)
    for r in records:
        row = r.row()
        row["status"] = r.status
        print(",".join(_fmt(row[c]) for c in cols), file=stream)


def _run(opts, algorithms, default_out):
    image = _image(opts)
    spec = mask_spec(opts)
    records = run_completion_experiment(image, spec, algorithms, solver_config(opts),
                                        experiment_params(opts))
    out = Path(opts["out"] or default_out)
    out.parent.mkdir(parents=True, exist_ok=True)
    emit_records(records, out, opts["format"])
    for r in records:
        if r.recovered is not None:
            np.save(out.with_name(f"{out.stem}_{r.algorithm}.npy"), r.recovered)
            save_image(np.clip(r.recovered, 0.0, 1.0),
                       out.with_name(f"{out.stem}_{r.algorithm}.png"))
    mask = make_mask(image.shape, spec)
    print(f"# masked image PSNR {masked_psnr(image, mask):.4f} dB")
    print_table(records)
    if opts["plots"]:
        for path in plot_records(records, out.parent, out.stem):
            print(f"# figure {path}")
    print(f"# records {out}")
    return 0 if all(r.status != "diverged" for r in records) else 1


def cmd_complete(opts):
    algo = opts["algo"].upper()
    if opts["extrap"] != "none":
        algo = f"{algo}-{opts['extrap'].upper()}"
    return _run(opts, [algo], "complete.csv")


def cmd_bench(opts):
    return _run(opts, list(ALGORITHMS), "bench.csv")


def cmd_extrapolate_demo(m, seed):
    """Apply both methods to ``S_n = S* + sum_i lam_i^n G_i`` with `m` modes."""
    rng = np.random.default_rng(seed)
    star = rng.standard_normal((4, 4, 3))
    lams = np.linspace(0.9, 0.3, m)
    gs = [rng.standard_normal(star.shape) for _ in range(m)]
    seq = [star + sum(l ** n * g for l, g in zip(lams, gs)) for n in range(2 * m + 2)]
    rel = lambda x: float(np.linalg.norm(x - star) / np.linalg.norm(star))  # noqa: E731
    print("method,terms,rel_error")
    print(f"last term,{2 * m + 1},{rel(seq[2 * m]):.3e}")
    print(f"GT-TET,{2 * m + 1},{rel(gt_tet(seq[:2 * m + 1], m).value):.3e}")
    # a linear map with m modes needs m + 1 weights for HOSVD-MPE
    print(f"HOSVD-MPE,{m + 2},{rel(hosvd_mpe(seq[:m + 2], m + 1).value):.3e}")
    return 0


def cmd_selftest():
    results = run_selftest()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return 0 if all(ok for _, ok, _ in results) else 1


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "selftest":
            return cmd_selftest()
        if args.command == "extrapolate-demo":
            return cmd_extrapolate_demo(args.window, args.seed)
        opts = effective_options(args)
        if args.command == "complete":
            return cmd_complete(opts)
        return cmd_bench(opts)
    except (ParameterError, OSError) as exc:
        print(f"tenprox: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
