"""Command line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict
from pathlib import Path

import jsonschema
import numpy as np

from .attention import CorrelationCache
from .data import (
    CORRELATIONS_SCHEMA,
    DataError,
    Dataset,
    dumps_graphs,
    load_graph,
    load_json_graphs,
    parse_tudataset,
    save_json_graphs,
)
from .experiments import EXPERIMENTS, eigenmap_graph, graphcovers_dataset
from .graphs import LATTICE_KINDS, GraphError, LatticeSpec, lattice_graph, wl_indistinguishable
from .model import GCNConfig, GCNModel, GTQCConfig, GTQCModel, load_checkpoint, save_checkpoint
from .quantum import (
    CORRELATION_LABELS,
    HAMILTONIAN_KINDS,
    BrokenStateError,
    LanczosError,
    QuantumParams,
    QubitLimitError,
    ising_ground_states,
    measure_correlations,
    prepare_graph_state,
)
from .results import ExportError, NonFiniteHistoryError, RunManifest, export_results, write_manifest
from .training import TrainConfig, TrainingDiverged, evaluate, split_dataset, train

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=0, help="seed for every random choice")
    p.add_argument("--out", type=Path, default=None, help="output file or directory")
    p.add_argument("--config", type=Path, default=None, help="JSON config file")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="gtqc", description=__doc__.splitlines()[0] if __doc__ else None)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    gen = sub.add_parser("gen-dataset", help="write a generated dataset as JSON")
    gsub = gen.add_subparsers(dest="family", parser_class=_Parser, required=True)
    lat = gsub.add_parser("lattice", parents=[common], help="lattice with antiferromagnetic node labels")
    lat.add_argument("--kind", choices=LATTICE_KINDS, default="square")
    lat.add_argument("--rows", type=int, default=2)
    lat.add_argument("--cols", type=int, default=2)
    lat.add_argument("--eigenmaps", type=int, default=0, help="attach this many Laplacian eigenmap features")
    cov = gsub.add_parser("covers", parents=[common], help="1-WL-equivalent lifts of one base graph")
    cov.add_argument("--nodes", type=int, default=21)
    cov.add_argument("--classes", type=int, default=3)
    cov.add_argument("--per-class", type=int, default=2)
    cov.add_argument("--degree", type=int, default=3)

    wl = sub.add_parser("wl-test", parents=[common], help="1-WL verdict for two graph files")
    wl.add_argument("first", type=Path)
    wl.add_argument("second", type=Path)

    gs = sub.add_parser("ground-state", parents=[common], help="Ising ground energy and minimizers")
    gs.add_argument("graph", type=Path)

    cor = sub.add_parser("correlations", parents=[common], help="N x N x 9 correlation tensor as JSON")
    cor.add_argument("graph", type=Path)
    cor.add_argument("--theta", type=str, default=None, help="comma-separated parameters (odd count)")
    cor.add_argument("--kind", choices=HAMILTONIAN_KINDS, default="ising")
    cor.add_argument("--J", type=float, default=1.0)

    tr = sub.add_parser("train", parents=[common], help="train a model on a dataset")
    tr.add_argument("--data", type=Path, default=None, help="graph JSON file or TUDataset directory")
    tr.add_argument("--model", choices=("gtqc", "gcn"), default=None)
    tr.add_argument("--epochs", type=int, default=None)
    tr.add_argument("--lr", type=float, default=None)
    tr.add_argument("--node-cap", type=int, default=20)

    ev = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint on a dataset")
    ev.add_argument("checkpoint", type=Path)
    ev.add_argument("--data", type=Path, required=True)
    ev.add_argument("--node-cap", type=int, default=20)

    rep = sub.add_parser("reproduce", parents=[common], help="run a named experiment")
    rep.add_argument("experiment", choices=sorted(EXPERIMENTS))
    return parser


# -- helpers -------------------------------------------------------------------


def _read_config(path) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise DataError(f"cannot read config {path}: {e}") from None
    if not isinstance(cfg, dict):
        raise DataError(f"config {path} must be a JSON object")
    return cfg


def _load_dataset(path: Path, node_cap: int | None) -> Dataset:
    if path is None:
        raise UsageError("no dataset given (use --data or a config file)")
    path = Path(path)
    if path.is_dir():
        ds = parse_tudataset(path)
    elif path.exists():
        ds = load_json_graphs(path)
    else:
        raise DataError(f"{path} does not exist")
    if node_cap is not None:
        before = len(ds)
        ds = ds.filter_size(node_cap)
        if len(ds) < before:
            print(f"filtered {before - len(ds)} graphs above {node_cap} nodes", file=sys.stderr)
    return ds


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)


# -- commands ---------------------------------------------------------------------


def cmd_gen_dataset(args) -> int:
    if args.family == "lattice":
        g = lattice_graph(LatticeSpec(args.kind, args.rows, args.cols))
        if args.eigenmaps:
            g = eigenmap_graph(g, args.eigenmaps)
        graphs = [g]
    else:
        if args.classes < 1 or args.per_class < 1:
            raise UsageError("--classes and --per-class must be positive")
        try:
            _, ds = graphcovers_dataset(args.seed, args.nodes, args.classes, args.per_class, args.degree)
        except ValueError as e:
            raise UsageError(str(e)) from None
        graphs = ds.graphs
    if args.out is None:
        sys.stdout.write(dumps_graphs(graphs))
    else:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        save_json_graphs(graphs, args.out)
        print(f"wrote {len(graphs)} graphs to {args.out}")
    return EXIT_OK


def cmd_wl_test(args) -> int:
    same = wl_indistinguishable(load_graph(args.first), load_graph(args.second))
    print("indistinguishable" if same else "distinguishable")
    return EXIT_OK


def cmd_ground_state(args) -> int:
    energy, states = ising_ground_states(load_graph(args.graph))
    _emit(json.dumps({"energy": energy, "states": states}) + "\n", args.out)
    return EXIT_OK


def cmd_correlations(args) -> int:
    cfg = _read_config(args.config)
    g = load_graph(args.graph)
    if args.theta is not None:
        try:
            theta = [float(x) for x in args.theta.split(",") if x.strip()]
        except ValueError:
            raise UsageError(f"--theta must be comma-separated numbers, got {args.theta!r}") from None
    else:
        theta = cfg.get("theta", [0.0])
    kind, J = cfg.get("kind", args.kind), float(cfg.get("J", args.J))
    try:
        qp = QuantumParams(np.array(theta, dtype=float))
    except ValueError as e:
        raise UsageError(str(e)) from None
    c = measure_correlations(prepare_graph_state(g, kind, qp, J))
    doc = {
        "n": g.n_nodes,
        "kind": kind,
        "J": J,
        "theta": list(map(float, theta)),
        "components": list(CORRELATION_LABELS),
        "values": c.tolist(),
    }
    jsonschema.validate(doc, CORRELATIONS_SCHEMA)
    _emit(json.dumps(doc) + "\n", args.out)
    return EXIT_OK


def _model_from_config(kind: str, ds: Dataset, mcfg: dict, seed: int):
    base = dict(in_dim=ds.in_dim, task=ds.model_task, level=ds.level, seed=seed)
    base["n_outputs"] = ds.n_classes if ds.model_task == "classification" else mcfg.get("n_outputs", 1)
    base.update(mcfg)
    if kind == "gtqc":
        return GTQCModel.init(GTQCConfig(**base))
    return GCNModel.init(GCNConfig(**base))


def cmd_train(args) -> int:
    cfg = _read_config(args.config)
    data_path = args.data or cfg.get("dataset")
    ds = _load_dataset(data_path, args.node_cap)
    if not ds.is_labeled:
        raise DataError(f"{data_path}: dataset has no labels to train on")
    kind = args.model or cfg.get("model_type", "gtqc")
    tcfg = dict(cfg.get("train", {}))
    tcfg["seed"] = args.seed
    if args.epochs is not None:
        tcfg["epochs"] = args.epochs
    if args.lr is not None:
        tcfg["lr"] = args.lr
    try:
        tc = TrainConfig(**tcfg)
    except (TypeError, ValueError) as e:
        raise UsageError(f"bad train config: {e}") from None
    try:
        model = _model_from_config(kind, ds, cfg.get("model", {}), args.seed)
    except (TypeError, ValueError) as e:
        raise UsageError(f"bad model config: {e}") from None
    if len(ds) >= 10:
        tr, va, _ = split_dataset(ds, args.seed)
    else:
        tr, va = ds, None
    t0 = time.perf_counter()
    model, history = train(model, tr, tc, val=va, cache=CorrelationCache())
    out = args.out or Path("results") / "train"
    manifest = RunManifest(
        "train",
        args.seed,
        {"dataset": str(data_path), "model_type": kind, "model": asdict(model.config), "train": tc.to_dict()},
        timing={"seconds": round(time.perf_counter() - t0, 3)},
    )
    if history:
        export_results(history, manifest, out, label=kind)
    ckpt = Path(out) / f"model_{manifest.config_hash}.json"
    Path(out).mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, ckpt)
    manifest.outputs.append(ckpt.name)
    write_manifest(manifest, out)
    if history:
        last = history[-1]
        print(f"epoch {last['epoch']}: train_loss={last['train_loss']:.6g} train_metric={last['train_metric']:.6g}")
    print(f"results in {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        model = load_checkpoint(args.checkpoint)
    except (OSError, ValueError, KeyError, TypeError) as e:
        raise DataError(f"cannot load checkpoint {args.checkpoint}: {e}") from None
    ds = _load_dataset(args.data, args.node_cap)
    if not ds.is_labeled:
        raise DataError(f"{args.data}: dataset has no labels to evaluate against")
    res = evaluate(model, ds, CorrelationCache())
    _emit(json.dumps(res, sort_keys=True) + "\n", args.out)
    return EXIT_OK


def cmd_reproduce(args) -> int:
    kwargs = _read_config(args.config)
    try:
        result = EXPERIMENTS[args.experiment](seed=args.seed, **kwargs)
    except TypeError as e:
        raise UsageError(f"bad experiment config: {e}") from None
    out = args.out or Path("results") / args.experiment
    manifest = RunManifest(
        result.name, result.seed, result.config, timing={"seconds": round(result.seconds, 3)}, summary=result.summary
    )
    for label, hist in result.histories.items():
        export_results(hist, manifest, out, label=label)
    write_manifest(manifest, out)
    print(json.dumps(result.summary, indent=1, sort_keys=True, default=float))
    print(f"results in {out}")
    return EXIT_OK


COMMANDS = {
    "gen-dataset": cmd_gen_dataset,
    "wl-test": cmd_wl_test,
    "ground-state": cmd_ground_state,
    "correlations": cmd_correlations,
    "train": cmd_train,
    "eval": cmd_eval,
    "reproduce": cmd_reproduce,
}


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except SystemExit as e:  # --help
        return int(e.code or 0)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except (DataError, GraphError, QubitLimitError, jsonschema.ValidationError, OSError, ExportError) as e:
        if isinstance(e, NonFiniteHistoryError):
            print(f"numerical error: {e}", file=sys.stderr)
            return EXIT_NUMERICAL
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (FloatingPointError, LanczosError, BrokenStateError, TrainingDiverged) as e:
        print(f"numerical error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


def main() -> None:
    sys.exit(cli_main())
