"""Command-line entry point.

Stdout carries machine-readable payloads only (JSON or CSV); prose and
structured error records go to stderr. Exit codes: 0 success, 1 validation,
2 numeric divergence, 3 I/O failure, 4 missing training snapshot.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import evalharness
from .bundle_io import BundleValidationError, load_bundle, save_bundle
from .errors import (
    InputError,
    NumericError,
    SnapshotMissingError,
    StateError,
    TrainingDivergenceError,
)
from .fisher import fisher_diag, importance_ratios
from .gcn import TrainConfig, load_model, predict, save_model, train
from .graph import UnlearnRequest, affected_subgraph, build_propagation, remove_request
from .synth import generate_sbm
from .unlearn import EraseConfig, RectifyConfig, mask_baseline, select_threshold, theorem_audit, unlearn

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERIC = 2
EXIT_IO = 3
EXIT_SNAPSHOT = 4


def _emit_error(kind: str, message: str) -> None:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)


def _load_request(path: str) -> UnlearnRequest:
    with open(path) as fh:
        doc = json.load(fh)
    kind = doc.get("kind")
    if kind in ("node", "feature"):
        return UnlearnRequest(kind=kind, node_ids=np.asarray(doc.get("ids", []), dtype=np.int64))
    if kind == "edge":
        edges = np.asarray(doc.get("edges", []), dtype=np.int64).reshape(-1, 2)
        return UnlearnRequest(kind="edge", edge_list=edges)
    raise InputError(f"request kind must be node|edge|feature, got {kind!r}")


def _train_config(args: argparse.Namespace) -> TrainConfig:
    return TrainConfig(
        hidden_dim=args.hidden,
        epochs=args.epochs,
        learning_rate=args.lr,
        weight_decay=args.weight_decay,
        seed=args.seed,
    )


def _add_train_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--hidden", type=int, default=256)
    sub.add_argument("--epochs", type=int, default=100)
    sub.add_argument("--lr", type=float, default=0.05)
    sub.add_argument("--weight-decay", type=float, default=5e-5)
    sub.add_argument("--seed", type=int, default=0)


def cmd_train(args: argparse.Namespace) -> int:
    graph = load_bundle(args.data)
    config = _train_config(args)
    model = train(graph, config)
    save_model(model, args.out)
    preds = predict(graph, model)
    payload = {
        "train_f1": evalharness.micro_f1(preds, graph.labels, graph.train_nodes()),
        "test_f1": evalharness.micro_f1(preds, graph.labels, graph.test_nodes()),
        "config": {
            "hidden": config.hidden_dim,
            "epochs": config.epochs,
            "lr": config.learning_rate,
            "weight_decay": config.weight_decay,
            "seed": config.seed,
        },
        "model": args.out,
    }
    print(json.dumps(payload))
    return EXIT_OK


def cmd_unlearn(args: argparse.Namespace) -> int:
    graph = load_bundle(args.data)
    model = load_model(args.model)
    request = _load_request(args.request)
    if request.is_empty:
        raise InputError("unlearn request is empty")
    erase_cfg = EraseConfig(m_permille=args.m, k_hops=args.k)
    rectify_cfg = RectifyConfig(lam=getattr(args, "lambda"))
    unlearned, report = unlearn(model, graph, request, erase_cfg, rectify_cfg)
    save_model(unlearned, args.out)
    doc = report.to_dict()
    doc["model"] = args.out
    if args.report:
        with open(args.report, "w") as fh:
            json.dump(doc, fh, indent=2)
    print(json.dumps(doc))
    return EXIT_OK


def cmd_retrain(args: argparse.Namespace) -> int:
    graph = load_bundle(args.data)
    request = _load_request(args.request)
    config = _train_config(args)
    model = evalharness.retrain_oracle(graph, request, config)
    save_model(model, args.out)
    remaining, _ = remove_request(graph, request)
    preds = predict(remaining, model)
    print(
        json.dumps(
            {
                "train_f1": evalharness.micro_f1(preds, remaining.labels, remaining.train_nodes()),
                "test_f1": evalharness.micro_f1(preds, remaining.labels, remaining.test_nodes()),
                "model": args.out,
            }
        )
    )
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    import time

    graph = load_bundle(args.data)
    request = _load_request(args.request) if args.request else None
    if request is not None:
        remaining, _ = remove_request(graph, request)
    else:
        remaining = graph
    retrained = load_model(args.retrained) if args.retrained else None

    rows = []
    for method, path, eval_graph in (
        ("vanilla", args.vanilla, graph),
        ("unlearned", args.unlearned, remaining),
        ("retrained", args.retrained, remaining),
    ):
        if path is None:
            continue
        model = load_model(path)
        t0 = time.perf_counter()
        preds = predict(eval_graph, model)
        f1 = evalharness.micro_f1(preds, eval_graph.labels, eval_graph.test_nodes())
        wall = time.perf_counter() - t0
        rms = (
            evalharness.rms_param_distance(model, retrained) if retrained is not None else None
        )
        result = evalharness.EvalResult(micro_f1=f1, rms_param_distance=rms, wall_time_s=wall)
        rows.append(
            {
                "ratio": None,
                "seed": None,
                "method": method,
                "f1": result.micro_f1,
                "rms_dist": result.rms_param_distance,
                "ad": result.grad_ad,
                "rd": result.grad_rd,
                "time_s": result.wall_time_s,
            }
        )
    csv_text = evalharness.rows_to_csv(rows)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(csv_text)
    if args.summary:
        with open(args.summary, "w") as fh:
            json.dump({"experiment": "model-eval", "data": args.data, "rows": rows}, fh, indent=2)
    sys.stdout.write(csv_text)
    return EXIT_OK


def cmd_attack(args: argparse.Namespace) -> int:
    graph = load_bundle(args.data)
    ratios = [float(r) for r in args.ratios.split(",") if r != ""]
    seeds = [int(s) for s in args.seeds.split(",") if s != ""]
    erase_cfg = EraseConfig(m_permille=args.m, k_hops=args.k)
    rectify_cfg = RectifyConfig(lam=getattr(args, "lambda"))

    def run_seed(seed: int):
        config = _train_config(args)
        config = TrainConfig(
            hidden_dim=config.hidden_dim,
            epochs=config.epochs,
            learning_rate=config.learning_rate,
            weight_decay=config.weight_decay,
            seed=seed,
        )
        return evalharness.adversarial_experiment(
            graph, ratios, config, erase_cfg, rectify_cfg, seed=seed
        )

    workers = max(1, int(os.environ.get("ETR_THREADS", "1")))
    if workers == 1 or len(seeds) == 1:
        results = [run_seed(s) for s in seeds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_seed, seeds))
    rows = [row for per_seed in results for row in per_seed]
    csv_text = evalharness.rows_to_csv(rows)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(csv_text)
    if args.summary:
        summary = {
            "experiment": "adversarial-edges",
            "data": args.data,
            "ratios": ratios,
            "seeds": seeds,
            "eval_split": "clean-test",
            "rows": rows,
        }
        with open(args.summary, "w") as fh:
            json.dump(summary, fh, indent=2)
    sys.stdout.write(csv_text)
    return EXIT_OK


def cmd_gen_sbm(args: argparse.Namespace) -> int:
    graph = generate_sbm(
        num_nodes=args.nodes,
        num_classes=args.classes,
        p_in=args.p_in,
        p_out=args.p_out,
        feature_dim=args.dim,
        seed=args.seed,
        name=args.name,
    )
    save_bundle(graph, args.out)
    print(
        json.dumps(
            {
                "out": args.out,
                "num_nodes": graph.num_nodes,
                "num_edges": graph.num_edges,
                "feature_dim": graph.feature_dim,
                "num_classes": graph.num_classes,
            }
        )
    )
    return EXIT_OK


def cmd_audit(args: argparse.Namespace) -> int:
    graph = load_bundle(args.data)
    model = load_model(args.model)
    retrained = load_model(args.retrained)
    request = _load_request(args.request)
    if request.kind != "node":
        raise InputError("theorem audit applies to node-unlearning requests")
    subsets = affected_subgraph(graph, request, args.k)
    if subsets.d_f.size == 0 or subsets.d_r.size == 0:
        raise InputError("audit needs nonempty forget and remaining sets")

    p = build_propagation(graph)
    x, labels = graph.features, graph.labels
    f_d = fisher_diag(p, x, labels, model, graph.train_nodes(), label="D")
    f_df = fisher_diag(p, x, labels, model, subsets.d_f, label="D_f")
    f_dr = fisher_diag(p, x, labels, model, subsets.d_r, label="D_r")
    ratios = importance_ratios(f_df, f_d)
    threshold = select_threshold(ratios, args.m)
    mask_set = np.flatnonzero(ratios >= threshold) if np.isfinite(threshold) else np.empty(0, int)
    record = theorem_audit(model, retrained, f_d, f_df, f_dr, mask_set)
    record["m_permille"] = args.m
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(record, fh, indent=2)
    print(json.dumps(record))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphscrub",
        description="Training-free unlearning for two-layer GCNs.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    sub = subs.add_parser("train", help="train a GCN on a bundle directory")
    sub.add_argument("--data", required=True)
    sub.add_argument("--out", required=True)
    _add_train_flags(sub)
    sub.set_defaults(func=cmd_train)

    sub = subs.add_parser("unlearn", help="run the erase+rectify pipeline")
    sub.add_argument("--model", required=True)
    sub.add_argument("--data", required=True)
    sub.add_argument("--request", required=True)
    sub.add_argument("--out", required=True)
    sub.add_argument("--report")
    sub.add_argument("--m", type=int, default=10, help="top-m permille selection")
    sub.add_argument("--lambda", type=float, default=0.4, dest="lambda")
    sub.add_argument("--k", type=int, default=2)
    sub.set_defaults(func=cmd_unlearn)

    sub = subs.add_parser("retrain", help="retrain from scratch on the remaining graph")
    sub.add_argument("--data", required=True)
    sub.add_argument("--request", required=True)
    sub.add_argument("--out", required=True)
    _add_train_flags(sub)
    sub.set_defaults(func=cmd_retrain)

    sub = subs.add_parser("eval", help="evaluate up to three models, emit CSV")
    sub.add_argument("--data", required=True)
    sub.add_argument("--request")
    sub.add_argument("--vanilla")
    sub.add_argument("--unlearned")
    sub.add_argument("--retrained")
    sub.add_argument("--out")
    sub.add_argument("--summary", help="write a JSON summary to this path")
    sub.set_defaults(func=cmd_eval)

    sub = subs.add_parser("attack", help="adversarial-edge efficacy experiment")
    sub.add_argument("--data", required=True)
    sub.add_argument("--ratios", default="0,0.1,0.2,0.3")
    sub.add_argument("--seeds", default="0")
    sub.add_argument("--m", type=int, default=10)
    sub.add_argument("--lambda", type=float, default=0.4, dest="lambda")
    sub.add_argument("--k", type=int, default=2)
    sub.add_argument("--out")
    sub.add_argument("--summary", help="write a JSON summary to this path")
    _add_train_flags(sub)
    sub.set_defaults(func=cmd_attack)

    sub = subs.add_parser("gen-sbm", help="generate a seeded SBM bundle")
    sub.add_argument("--nodes", type=int, required=True)
    sub.add_argument("--classes", type=int, required=True)
    sub.add_argument("--p-in", type=float, required=True)
    sub.add_argument("--p-out", type=float, required=True)
    sub.add_argument("--dim", type=int, required=True)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--name", default="sbm")
    sub.add_argument("--out", required=True)
    sub.set_defaults(func=cmd_gen_sbm)

    sub = subs.add_parser("audit", help="numeric audit of the masking bound")
    sub.add_argument("--data", required=True)
    sub.add_argument("--model", required=True)
    sub.add_argument("--retrained", required=True)
    sub.add_argument("--request", required=True)
    sub.add_argument("--m", type=int, default=10)
    sub.add_argument("--k", type=int, default=2)
    sub.add_argument("--out")
    sub.set_defaults(func=cmd_audit)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_VALIDATION
    try:
        return args.func(args)
    except SnapshotMissingError as exc:
        _emit_error("snapshot-missing", str(exc))
        return EXIT_SNAPSHOT
    except (InputError, BundleValidationError, StateError, json.JSONDecodeError) as exc:
        _emit_error("validation", str(exc))
        return EXIT_VALIDATION
    except (TrainingDivergenceError, NumericError) as exc:
        _emit_error("numeric", str(exc))
        return EXIT_NUMERIC
    except OSError as exc:
        _emit_error("io", str(exc))
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
