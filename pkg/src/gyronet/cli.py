"""Command-line entry point.

Subcommands: train, eval, cluster, attn-dump, embed, bench-aggregate.
Every run writes ``metrics.json`` into the output directory:

    {"task": str, "accuracy"?: float, "accuracy_std"?: float,
     "nmi"?: float, "nmi_std"?: float, "epochs_run": int,
     "wall_seconds": float, "config": {...}}

Exit codes: 0 success, 2 usage error, 3 data validation error,
4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import gyro
from .clustering import cluster_nmi
from .graphs import DatasetError, GraphDataset, load_dataset, star
from .layer import LayerParams, attention_scores, normalize_attention
from .model import Classifier, TrainConfig, evaluate_accuracy, forward, train


def _add_shared_flags(p: argparse.ArgumentParser, dataset: bool = True) -> None:
    if dataset:
        p.add_argument("--dataset-dir", type=Path, required=True,
                       help="directory with edges.tsv/features.csv/labels.txt/split.json")
        p.add_argument("--raw-features", action="store_true",
                       help="skip L1 row normalization of features")
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--curvature", type=float, default=1.0)
    p.add_argument("--lr", type=float, default=0.005)
    p.add_argument("--weight-decay", type=float, default=5e-4)
    p.add_argument("--dropout", type=float, default=0.6)
    p.add_argument("--max-epochs", type=int, default=1000)
    p.add_argument("--patience", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", type=int, default=1,
                   help="number of consecutive seeds to aggregate over")
    p.add_argument("--agg", choices=("serial", "accelerated"), default="accelerated")
    p.add_argument("--out", type=Path, default=Path("."),
                   help="directory for reports and artifacts")


def _config_from(args) -> TrainConfig:
    return TrainConfig(dim=args.dim, curvature=args.curvature, learning_rate=args.lr,
                       weight_decay=args.weight_decay, max_epochs=args.max_epochs,
                       patience=args.patience, dropout=args.dropout, seed=args.seed,
                       aggregation=args.agg)


def _config_echo(args) -> dict:
    echo = {}
    for key, value in sorted(vars(args).items()):
        if key == "func" or callable(value):
            continue
        echo[key] = str(value) if isinstance(value, Path) else value
    return echo


def _load(args) -> GraphDataset:
    return load_dataset(args.dataset_dir, normalize_features=not args.raw_features)


def _write_metrics(args, task: str, started: float, epochs_run: int, **metrics) -> dict:
    report = {"task": task, "epochs_run": epochs_run,
              "wall_seconds": time.perf_counter() - started,
              "config": _config_echo(args)}
    report.update(metrics)
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / "metrics.json"
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    return report


def save_model(model: Classifier, path: Path) -> None:
    np.savez(path, weight=model.layer.weight, w_out=model.w_out, b_out=model.b_out,
             curvature=np.array(model.layer.curvature),
             aggregation=np.array(model.layer.aggregation))


def load_model(path: Path) -> Classifier:
    if not Path(path).is_file():
        raise DatasetError(f"model file not found: {path}")
    blob = np.load(path, allow_pickle=False)
    layer = LayerParams(weight=blob["weight"], curvature=float(blob["curvature"]),
                        aggregation=str(blob["aggregation"]))
    return Classifier(layer=layer, w_out=blob["w_out"], b_out=blob["b_out"])


def _train_seeds(ds: GraphDataset, args) -> tuple[list[Classifier], list[list], list[float]]:
    models, histories, accs = [], [], []
    for offset in range(args.seeds):
        config = _config_from(args)
        config.seed = args.seed + offset
        model, history = train(ds, config)
        models.append(model)
        histories.append(history)
        accs.append(evaluate_accuracy(model, ds, ds.test_idx))
    return models, histories, accs


def cmd_train(args) -> int:
    started = time.perf_counter()
    if args.seeds < 1:
        raise ValueError("--seeds must be at least 1")
    ds = _load(args)
    models, histories, accs = _train_seeds(ds, args)

    best = int(np.argmax([max(s.val_acc for s in h) for h in histories]))
    args.out.mkdir(parents=True, exist_ok=True)
    save_model(models[best], args.out / "model.npz")
    lines = ["epoch,train_loss,train_acc,val_loss,val_acc"]
    lines += [f"{s.epoch},{s.train_loss!r},{s.train_acc!r},{s.val_loss!r},{s.val_acc!r}"
              for s in histories[best]]
    (args.out / "history.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    metrics = {"accuracy": float(np.mean(accs))}
    if args.seeds > 1:
        metrics["accuracy_std"] = float(np.std(accs))
    report = _write_metrics(args, "train", started,
                            sum(len(h) for h in histories), **metrics)
    print(f"train: mean test accuracy {report['accuracy']:.4f} over {args.seeds} seed(s)")
    return 0


def cmd_eval(args) -> int:
    started = time.perf_counter()
    ds = _load(args)
    model = load_model(args.model)
    mask = {"train": ds.train_idx, "val": ds.val_idx, "test": ds.test_idx}[args.split]
    acc = evaluate_accuracy(model, ds, mask)
    _write_metrics(args, "eval", started, 0, accuracy=acc)
    print(f"eval: {args.split} accuracy {acc:.4f}")
    return 0


def cmd_cluster(args) -> int:
    started = time.perf_counter()
    ds = _load(args)
    if args.model is not None:
        model = load_model(args.model)
        values = [cluster_nmi(model, ds, args.seed)]
        epochs = 0
    else:
        models, histories, _ = _train_seeds(ds, args)
        values = [cluster_nmi(m, ds, args.seed + i) for i, m in enumerate(models)]
        epochs = sum(len(h) for h in histories)
    metrics = {"nmi": float(np.mean(values))}
    if len(values) > 1:
        metrics["nmi_std"] = float(np.std(values))
    _write_metrics(args, "cluster", started, epochs, **metrics)
    print(f"cluster: mean NMI {metrics['nmi']:.4f} over {len(values)} run(s)")
    return 0


def cmd_attn_dump(args) -> int:
    started = time.perf_counter()
    ds = _load(args)
    model = load_model(args.model)
    result = forward(model, ds)
    src, dst = ds.adjacency.edge_src, ds.adjacency.edge_dst
    weights = result.attention.data[:, 0]
    lines = ["node,neighbor,weight"]
    lines += [f"{i},{j},{w!r}" for i, j, w in zip(src.tolist(), dst.tolist(),
                                                  weights.tolist())]
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "attention.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_metrics(args, "attn-dump", started, 0)
    print(f"attn-dump: wrote {len(weights)} edge weights")
    return 0


def cmd_embed(args) -> int:
    started = time.perf_counter()
    ds = _load(args)
    model = load_model(args.model)
    if model.layer.weight.shape[0] != 2:
        raise ValueError("embed requires a model with output dimension 2")
    emb = forward(model, ds).embeddings.data.tolist()
    lines = ["node,label,x,y"]
    lines += [f"{i},{ds.labels[i]},{emb[i][0]!r},{emb[i][1]!r}"
              for i in range(ds.num_nodes)]
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "embedding.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_metrics(args, "embed", started, 0)
    print(f"embed: wrote {ds.num_nodes} points")
    return 0


def _bench_hub(degree: int, dim: int, c: float, repeats: int,
               rng: np.random.Generator) -> tuple[float, float, float]:
    """Median per-run milliseconds for both hub aggregations plus the
    hyperbolic distance between their outputs.

    `degree` counts the hub's aggregated terms including its self-loop, so
    degree 1 is the single-neighbor case where the two paths coincide.
    """
    adj = star(degree - 1)
    n = adj.num_nodes
    direction = rng.standard_normal((n, dim))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    points = direction * (0.7 / np.sqrt(c)) * rng.random((n, 1))
    h = ad.constant(points)
    weights = normalize_attention(attention_scores(h, adj, c), adj)
    hub_slice = slice(adj.indptr[0], adj.indptr[1])
    nbrs = adj.indices[hub_slice]
    w_hub = weights.data[hub_slice]

    def run_serial() -> np.ndarray:
        acc = gyro.mobius_scalar_mul(float(w_hub[0, 0]),
                                     ad.constant(points[nbrs[0]].reshape(1, -1)), c)
        for t in range(1, len(nbrs)):
            v = gyro.mobius_scalar_mul(float(w_hub[t, 0]),
                                       ad.constant(points[nbrs[t]].reshape(1, -1)), c)
            acc = gyro.mobius_add(acc, v, c)
        return ad.elu(acc).data

    def run_accelerated() -> np.ndarray:
        v = gyro.mobius_scalar_mul(ad.constant(w_hub), ad.constant(points[nbrs]), c)
        u = gyro.logmap0(v, c).data.sum(axis=0, keepdims=True)
        return ad.elu(gyro.expmap0(ad.constant(u), c)).data

    def time_path(fn) -> tuple[float, np.ndarray]:
        times = []
        out = None
        for _ in range(repeats):
            t0 = time.perf_counter()
            out = fn()
            times.append((time.perf_counter() - t0) * 1000.0)
        return float(np.median(times)), out

    serial_ms, serial_out = time_path(run_serial)
    accel_ms, accel_out = time_path(run_accelerated)
    divergence = gyro.distance(ad.constant(serial_out), ad.constant(accel_out), c).item()
    return serial_ms, accel_ms, divergence


def cmd_bench_aggregate(args) -> int:
    started = time.perf_counter()
    degrees = [int(tok) for tok in args.degrees.split(",") if tok.strip()]
    if not degrees or any(d < 1 for d in degrees):
        raise ValueError("--degrees must be a comma-separated list of positive ints")
    rng = np.random.default_rng(args.seed)
    rows = ["degree,serial_ms,accelerated_ms,output_divergence"]
    for degree in degrees:
        serial_ms, accel_ms, div = _bench_hub(degree, args.dim, args.curvature,
                                              args.repeats, rng)
        rows.append(f"{degree},{serial_ms!r},{accel_ms!r},{div!r}")
        print(f"degree {degree:>6}: serial {serial_ms:10.3f} ms  "
              f"accelerated {accel_ms:8.3f} ms  divergence {div:.3e}")
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "benchmark.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    _write_metrics(args, "bench-aggregate", started, 0)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gyronet",
                                     description="Hyperbolic graph attention toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a classifier and report test accuracy")
    _add_shared_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a saved model")
    _add_shared_flags(p)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--split", choices=("train", "val", "test"), default="test")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("cluster", help="k-means on tangent embeddings, report NMI")
    _add_shared_flags(p)
    p.add_argument("--model", type=Path, default=None,
                   help="saved model; omit to train per seed")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("attn-dump", help="write per-edge attention weights as CSV")
    _add_shared_flags(p)
    p.add_argument("--model", type=Path, required=True)
    p.set_defaults(func=cmd_attn_dump)

    p = sub.add_parser("embed", help="write 2-D ball coordinates as CSV")
    _add_shared_flags(p)
    p.add_argument("--model", type=Path, required=True)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("bench-aggregate",
                       help="serial vs accelerated hub aggregation timing")
    _add_shared_flags(p, dataset=False)
    p.add_argument("--degrees", type=str,
                   default="16,32,64,128,256,512,1024,2048,4096")
    p.add_argument("--repeats", type=int, default=100)
    p.set_defaults(func=cmd_bench_aggregate)

    return parser


def main(argv=None) -> int:
    from ._alloc import tune_allocator
    tune_allocator()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DatasetError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except FloatingPointError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return 4
    except ValueError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
