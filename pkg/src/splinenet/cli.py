"""Command line entry point: ``splinenet <command> ...``."""
import argparse
import json
import sys
import warnings

import numpy as np

from . import __version__
from .bench import ExperimentSpec, emit_table, format_table, generate, run_experiment
from .bounds import verify_hinge_bounds, verify_x2_bounds
from .compiler import compile_fs, compile_mars, verify_certificate
from .data import Dataset
from .exceptions import SplinenetError
from .faber_schauder import FsModel, fit_least_squares
from .mars import MarsModel, forward_selection
from .relu_net import save
from .training import TrainConfig, train

_INIT = {"glorot": "glorot_modified", "increasing": "increasing_glorot"}


def _dump(obj, path):
    text = json.dumps(obj, indent=2, allow_nan=True)
    if path in (None, "-"):
        print(text)
    else:
        with open(path, "w") as fh:
            fh.write(text + "\n")


def load_model(path):
    """Read a MARS or Faber-Schauder model file (told apart by their keys)."""
    with open(path) as fh:
        text = fh.read()
    obj = json.loads(text)
    if isinstance(obj, dict) and "coeffs" in obj:
        return FsModel.loads(text)
    return MarsModel.loads(text)


def cmd_compile(args):
    model = load_model(args.model)
    if isinstance(model, FsModel):
        net, cert = compile_fs(model, args.epsilon)
    else:
        net, cert = compile_mars(model, args.epsilon)
    if args.verify_grid:
        verify_certificate(net, cert, model, args.verify_grid)
    save(net, args.out)
    _dump(cert.to_dict(), args.certificate)
    ok = cert.passed if cert.passed is not None else all(cert.checks.values())
    return 0 if ok else 1


def cmd_fit(args):
    data = Dataset.from_csv(args.data)
    if args.method == "fs":
        model = fit_least_squares(data, args.M)
    else:
        mode = "higher_order" if args.method == "homars" else "plain"
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            model = forward_selection(data, args.steps, max_degree=args.K, mode=mode, seed=args.seed)
    with open(args.out, "w") as fh:
        fh.write(model.dumps() + "\n")
    return 0


def cmd_generate(args):
    generate(args.model, args.n, args.d, args.seed).to_csv(args.out)
    return 0


def cmd_train(args):
    data = Dataset.from_csv(args.data)
    widths = tuple(int(w) for w in args.arch.split(","))
    cfg = TrainConfig(
        widths=widths, learning_rate=args.lr, decay=args.decay, epochs=args.epochs,
        batch_size=args.batch, restarts=args.restarts, initializer=_INIT[args.init],
        seed=args.seed, workers=args.workers,
    )
    net, report = train(data, cfg)
    save(net, args.out)
    if args.report:
        _dump(report.to_dict(), args.report)
    print(f"selected restart {report.selected}: loss {report.selected_loss:.3e}", file=sys.stderr)
    return 0


def cmd_verify_bounds(args):
    if args.target == "x2":
        reports = verify_x2_bounds(args.epsilon)
    else:
        reports = verify_hinge_bounds(args.M, fs_M=args.fs_M)
    _dump([r.to_dict() for r in reports], args.out)
    return 0 if all(r.holds is not False for r in reports) else 1


def cmd_bench(args):
    if args.config:
        with open(args.config) as fh:
            spec = ExperimentSpec.from_dict(json.load(fh))
    else:
        params = json.loads(args.params) if args.params else {}
        if args.M is not None:
            params["M"] = args.M
        if args.K is not None:
            params["K"] = args.K
        spec = ExperimentSpec(args.model, args.method, params, d=args.d, repetitions=args.reps,
                              n=args.n, test_n=args.test_n, seed=args.seed)
    summary = run_experiment(spec)
    text = emit_table([summary], args.out if args.out != "-" else None)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        print(format_table([summary]))
    if summary.noisy_risks is not None:
        print(f"noise-inclusive risk: {np.nanmean(summary.noisy_risks):.2e}")
    for f in summary.failures:
        print(f"repetition {f['repetition']} failed: {f['error']}", file=sys.stderr)
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="splinenet", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compile", help="compile a MARS or Faber-Schauder model into a ReLU network")
    c.add_argument("--model", required=True)
    c.add_argument("--epsilon", type=float, required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--certificate", default="-")
    c.add_argument("--verify-grid", type=int, default=0, help="grid points per axis (0: skip)")
    c.set_defaults(func=cmd_compile)

    f = sub.add_parser("fit", help="fit MARS, HO-MARS or Faber-Schauder to a CSV dataset")
    f.add_argument("--data", required=True)
    f.add_argument("--method", choices=("mars", "homars", "fs"), default="mars")
    f.add_argument("--steps", type=int, default=5, help="forward steps M' (2M'+1 functions)")
    f.add_argument("--K", type=int, default=None, help="max factors per product")
    f.add_argument("--M", type=int, default=3, help="Faber-Schauder resolution")
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fit)

    g = sub.add_parser("generate", help="sample a simulation dataset to CSV")
    g.add_argument("--model", required=True)
    g.add_argument("--n", type=int, default=1000)
    g.add_argument("--d", type=int, default=None)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train a dense ReLU network with Adam")
    t.add_argument("--data", required=True)
    t.add_argument("--arch", required=True, help='widths "d,h1,...,1"')
    t.add_argument("--init", choices=tuple(_INIT), default="glorot")
    t.add_argument("--lr", type=float, default=0.001)
    t.add_argument("--decay", type=float, default=0.00021)
    t.add_argument("--epochs", type=int, default=1000)
    t.add_argument("--batch", type=int, default=32)
    t.add_argument("--restarts", type=int, default=5)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--workers", type=int, default=1)
    t.add_argument("--out", required=True)
    t.add_argument("--report", default=None)
    t.set_defaults(func=cmd_train)

    v = sub.add_parser("verify-bounds", help="check approximation bounds numerically")
    v.add_argument("--target", choices=("x2", "hinge"), required=True)
    v.add_argument("--epsilon", type=float, default=1e-4)
    v.add_argument("--M", type=int, default=20)
    v.add_argument("--fs-M", type=int, default=2)
    v.add_argument("--out", default="-")
    v.set_defaults(func=cmd_verify_bounds)

    b = sub.add_parser("bench", help="run one benchmark cell and write a results CSV")
    b.add_argument("--model", default="sim1")
    b.add_argument("--method", choices=("mars", "homars", "fs", "dnn"), default="fs")
    b.add_argument("--M", type=int, default=None)
    b.add_argument("--K", type=int, default=None)
    b.add_argument("--params", default=None, help="JSON object of method parameters")
    b.add_argument("--reps", type=int, default=100)
    b.add_argument("--n", type=int, default=1000)
    b.add_argument("--d", type=int, default=None)
    b.add_argument("--test-n", type=int, default=100_000)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--config", default=None, help="JSON file mirroring ExperimentSpec")
    b.add_argument("--out", default="-")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SplinenetError, ValueError, OSError) as exc:
        print(f"splinenet {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
