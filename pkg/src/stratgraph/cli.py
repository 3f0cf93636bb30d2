"""Command-line interface.

Exit codes: 0 on success, 2 on bad arguments, 1 on runtime failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .constructions import CONSTRUCTIONS
from .datasets import BUNDLE_FORMAT_VERSION, generate_synthetic, load_bundle, make_inductive_split, save_bundle
from .errors import InvalidArgument, StratGraphError
from .experiments import ExperimentConfig, evaluate, run_sweep, summarize, to_csv
from .graph import LinearGraphClassifier
from .response import TRACE_FORMAT_VERSION, ResponseConfig, simulate_dynamics
from .training import MODEL_FORMAT_VERSION, TrainConfig, TrainedModel, load_model, save_model, train

log = logging.getLogger("stratgraph")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _emit(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _response_config(args, bundle=None) -> ResponseConfig:
    meta = (bundle.meta.get("response") if bundle is not None else None) or {}
    tol = args.tol if args.tol is not None else meta.get("tol", 1e-6)
    if args.d is not None:
        return ResponseConfig.from_distance(args.d, tol=tol)
    if args.beta is not None:
        return ResponseConfig(beta=args.beta, tol=tol)
    return ResponseConfig(beta=meta.get("beta", 1.0), tol=tol)


def _model_for(args, bundle_dir) -> LinearGraphClassifier:
    path = Path(args.model) if args.model else Path(bundle_dir) / "model.json"
    if not path.exists():
        raise InvalidArgument(f"no model file at {path}; pass --model")
    return load_model(path).classifier


def cmd_synth(args):
    bundle = generate_synthetic(args.n, args.alpha, args.seed)
    save_bundle(bundle, args.out, binary_features=args.binary)
    print(f"wrote {bundle.n}-node bundle to {args.out}", file=sys.stderr)


def cmd_construct(args):
    kw = {k: v for k, v in (("n", args.n), ("k", args.k)) if v is not None}
    inst = CONSTRUCTIONS[args.name](**kw)
    save_bundle(inst.to_bundle(), args.out)
    save_model(TrainedModel(inst.clf), Path(args.out) / "model.json")
    print(f"wrote construction {inst.name} to {args.out}", file=sys.stderr)


def cmd_train(args):
    bundle = load_bundle(args.bundle)
    if args.inductive:
        bundle = make_inductive_split(bundle, args.inductive)
    rcfg = _response_config(args, bundle)
    cfg = TrainConfig(
        learning_rate=args.lr, weight_decay=args.weight_decay, epochs=args.epochs, T=args.T,
        tau=args.tau, beta=rcfg.beta, tol=rcfg.tol, seed=args.seed, optimizer=args.optimizer,
    )
    model = train(bundle.view("train"), cfg)
    _emit(model.to_json() + "\n", args.out)


def _trace_view(bundle, split):
    view = bundle.view(split)
    names = bundle.meta.get("node_names")
    names = [str(names[i]) for i in view.nodes] if names else [str(i) for i in view.nodes]
    return view, names


def cmd_simulate(args):
    bundle = load_bundle(args.bundle)
    clf = _model_for(args, args.bundle)
    rcfg = _response_config(args, bundle)
    view, names = _trace_view(bundle, args.split)
    trace = simulate_dynamics(clf, view.X, view.W, rcfg, node_names=names)
    _emit(trace.to_json(indent=2) + "\n", args.out)


def cmd_eval(args):
    bundle = load_bundle(args.bundle)
    if args.inductive:
        bundle = make_inductive_split(bundle, args.inductive)
    clf = _model_for(args, args.bundle)
    rcfg = _response_config(args, bundle)
    view = bundle.view(args.split)
    m = evaluate(clf, view, rcfg, strategic=not args.non_strategic)
    doc = {"strategic": not args.non_strategic, "beta": rcfg.beta if np.isfinite(rcfg.beta) else "inf"}
    doc.update(vars(m))
    _emit(json.dumps(doc, indent=2) + "\n", args.out)


def _load_experiment(name):
    p = Path(name)
    if p.exists():
        return ExperimentConfig.load(p)
    preset = resources.files("stratgraph") / "configs" / f"{name}.json"
    if preset.is_file():
        return ExperimentConfig.from_dict(json.loads(preset.read_text()))
    raise InvalidArgument(f"no config file or preset named {name!r}")


def cmd_sweep(args):
    cfg = _load_experiment(args.config)
    doc = cfg.to_dict()
    if args.seeds:
        doc["seeds"] = args.seeds
    if args.bundle:
        doc["dataset"] = {"kind": "bundle", "path": args.bundle}
    if args.n is not None:
        if doc["dataset"]["kind"] != "synthetic":
            raise InvalidArgument("--n applies to synthetic sweeps only")
        doc["dataset"] = {**doc["dataset"], "n": args.n}
    if args.values:
        doc["values"] = args.values
    cfg = ExperimentConfig.from_dict(doc)
    rows = run_sweep(cfg)
    _emit(to_csv(rows), args.out)
    summary = summarize(rows, cfg.arms)
    if args.summary:
        Path(args.summary).write_text(to_csv(summary))
    if args.figure:
        from .plotting import plot_summary

        plot_summary(summary, cfg.arms, args.figure, title=f"{cfg.axis} sweep")


def cmd_version(args):
    print(f"stratgraph {__version__}")
    print(f"bundle format {BUNDLE_FORMAT_VERSION}")
    print(f"model format {MODEL_FORMAT_VERSION}")
    print(f"trace format {TRACE_FORMAT_VERSION}")


def _add_response_args(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--d", type=float, help="maximal moving distance (beta = 2/d)")
    g.add_argument("--beta", type=float, help="cost scale")
    p.add_argument("--tol", type=float, help="projection tolerance")


def build_parser():
    parser = _Parser(prog="stratgraph", description="Strategic responses on graphs: simulate, train, evaluate.")
    parser.add_argument("--version", action="store_true", help="print package and file format versions")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("synth", help="write a synthetic bundle")
    p.add_argument("--n", type=int, default=1000, help="nodes per split")
    p.add_argument("--alpha", type=float, default=0.7)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--binary", action="store_true", help="store features as float32")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("construct", help="write a hand-built instance as a bundle plus model.json")
    p.add_argument("name", choices=sorted(CONSTRUCTIONS))
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("train", help="fit a model on the train split")
    p.add_argument("bundle")
    p.add_argument("--T", type=int, default=3, help="response layers (0 = naive)")
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--lr", type=float, default=0.2)
    p.add_argument("--weight-decay", type=float, default=1.3e-5)
    p.add_argument("--tau", type=float, default=0.05)
    p.add_argument("--optimizer", choices=["adam", "scan"], default="adam")
    p.add_argument("--inductive", type=int, metavar="K", help="drop test nodes within K hops of train")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    _add_response_args(p)
    p.set_defaults(func=cmd_train)

    for name, func, hlp in (("simulate", cmd_simulate, "run the exact dynamics and print the trace"),
                            ("eval", cmd_eval, "accuracy and movement metrics")):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("bundle")
        p.add_argument("--model", help="model JSON (default: BUNDLE/model.json)")
        p.add_argument("--split", choices=["train", "test", "all"], default="test")
        p.add_argument("--out")
        _add_response_args(p)
        if name == "eval":
            p.add_argument("--non-strategic", action="store_true", help="score unmodified features")
            p.add_argument("--inductive", type=int, metavar="K")
        p.set_defaults(func=func)

    p = sub.add_parser("sweep", help="run an experiment sweep and write a CSV")
    p.add_argument("config", help="JSON config file or preset name (synthetic-alpha, synthetic-T, ...)")
    p.add_argument("--seeds", type=int, nargs="+")
    p.add_argument("--values", type=float, nargs="+", help="override the sweep values")
    p.add_argument("--n", type=int, help="override the synthetic size")
    p.add_argument("--bundle", help="run on this bundle instead")
    p.add_argument("--out", help="per-seed CSV (default: stdout)")
    p.add_argument("--summary", help="write mean/standard-error CSV here")
    p.add_argument("--figure", help="render the accuracy summary to this PNG")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"stratgraph: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.version:
        cmd_version(args)
        return 0
    if args.command is None:
        parser.print_help(sys.stderr)
        return 2
    try:
        args.func(args)
    except InvalidArgument as exc:
        print(f"stratgraph: error: {exc}", file=sys.stderr)
        return 2
    except (StratGraphError, OSError, ValueError) as exc:
        print(f"stratgraph: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
