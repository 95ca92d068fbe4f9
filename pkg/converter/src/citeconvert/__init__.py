"""One-shot converter from the public citation-benchmark distribution to the
plain-text dataset layout (edges.tsv / features.csv / labels.txt / split.json).

Input layout per dataset `name` (the standard research serialization):

    ind.<name>.x, .tx, .allx   pickled scipy CSR feature matrices
    ind.<name>.y, .ty, .ally   pickled one-hot label arrays
    ind.<name>.graph           pickled {node: [neighbors]} dict
    ind.<name>.test.index      text file of test node ids

Training nodes are the first len(y) rows (20 per class in the published
datasets), validation the next 500, test the canonical test index list.
Some distributions (citeseer) omit isolated test nodes from the test
feature block; the missing rows are filled with zeros, matching the
standard loading protocol.  Feature values are emitted raw; normalization
belongs to the consumer.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import pickle
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

# Published node/class counts; conversion refuses to emit a known dataset
# whose counts disagree.
PUBLISHED = {
    "cora": {"nodes": 2708, "classes": 7},
    "citeseer": {"nodes": 3327, "classes": 6},
    "pubmed": {"nodes": 19717, "classes": 3},
}

VAL_SIZE = 500


class ConversionError(Exception):
    pass


@dataclass
class ConversionManifest:
    dataset: str
    nodes: int
    edges: int
    features: int
    classes: int
    train: int
    val: int
    test: int
    checksums: dict[str, str]


def _unpickle(path: Path):
    if not path.is_file():
        raise ConversionError(f"missing input file: {path}")
    with open(path, "rb") as fh:
        return pickle.load(fh, encoding="latin1")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _fmt(value: float) -> str:
    return repr(int(value)) if float(value).is_integer() else repr(float(value))


def convert(name: str, input_dir, output_dir) -> ConversionManifest:
    """Convert one dataset; writes the four data files plus manifest.json."""
    input_dir, output_dir = Path(input_dir), Path(output_dir)
    parts = {}
    for ext in ("x", "y", "tx", "ty", "allx", "ally", "graph"):
        parts[ext] = _unpickle(input_dir / f"ind.{name}.{ext}")
    test_idx_path = input_dir / f"ind.{name}.test.index"
    if not test_idx_path.is_file():
        raise ConversionError(f"missing input file: {test_idx_path}")
    test_reorder = np.array([int(line) for line in
                             test_idx_path.read_text().split()], dtype=np.int64)
    if len(test_reorder) == 0:
        raise ConversionError("test index file is empty")
    test_range = np.sort(test_reorder)

    allx = sp.csr_matrix(parts["allx"])
    tx = sp.csr_matrix(parts["tx"])
    ally = np.asarray(parts["ally"])
    ty = np.asarray(parts["ty"])
    if allx.shape[1] != tx.shape[1]:
        raise ConversionError("allx and tx disagree on feature width")

    # fill gaps left by isolated test nodes absent from tx/ty
    lo, hi = int(test_range[0]), int(test_range[-1])
    span = hi - lo + 1
    tx_full = sp.lil_matrix((span, tx.shape[1]), dtype=np.float64)
    tx_full[test_reorder - lo] = tx
    ty_full = np.zeros((span, ty.shape[1]))
    ty_full[test_reorder - lo] = ty

    features = sp.vstack([allx, tx_full]).toarray().astype(np.float64)
    onehot = np.vstack([ally, ty_full])
    num_nodes = features.shape[0]
    if lo != allx.shape[0]:
        raise ConversionError(
            f"test block starts at {lo}, expected {allx.shape[0]}")
    labels = np.argmax(onehot, axis=1).astype(np.int64)
    num_classes = onehot.shape[1]

    graph = parts["graph"]
    pairs = set()
    for node, neighbors in graph.items():
        if not 0 <= int(node) < num_nodes:
            raise ConversionError(f"graph node {node} outside [0, {num_nodes})")
        for nb in neighbors:
            nb = int(nb)
            if not 0 <= nb < num_nodes:
                raise ConversionError(
                    f"neighbor {nb} of node {node} outside [0, {num_nodes})")
            if nb != int(node):
                pairs.add((min(int(node), nb), max(int(node), nb)))
    edges = sorted(pairs)

    n_train = len(np.asarray(parts["y"]))
    n_val = min(VAL_SIZE, allx.shape[0] - n_train)
    if n_train == 0 or n_val <= 0:
        raise ConversionError("degenerate split: no training or validation rows")
    train_idx = list(range(n_train))
    val_idx = list(range(n_train, n_train + n_val))
    test_idx = [int(i) for i in test_range]

    published = PUBLISHED.get(name)
    if published is not None:
        if num_nodes != published["nodes"]:
            raise ConversionError(
                f"{name}: expected {published['nodes']} nodes, got {num_nodes}")
        if num_classes != published["classes"]:
            raise ConversionError(
                f"{name}: expected {published['classes']} classes, got {num_classes}")

    output_dir.mkdir(parents=True, exist_ok=True)
    (output_dir / "edges.tsv").write_text(
        "\n".join(f"{i}\t{j}" for i, j in edges) + "\n", encoding="utf-8")
    with open(output_dir / "features.csv", "w", encoding="utf-8") as fh:
        for row in features:
            fh.write(",".join(_fmt(v) for v in row))
            fh.write("\n")
    (output_dir / "labels.txt").write_text(
        "\n".join(str(v) for v in labels.tolist()) + "\n", encoding="utf-8")
    (output_dir / "split.json").write_text(
        json.dumps({"train": train_idx, "val": val_idx, "test": test_idx},
                   indent=0, sort_keys=True) + "\n", encoding="utf-8")

    manifest = ConversionManifest(
        dataset=name, nodes=num_nodes, edges=len(edges),
        features=features.shape[1], classes=num_classes,
        train=len(train_idx), val=len(val_idx), test=len(test_idx),
        checksums={f: _sha256(output_dir / f)
                   for f in ("edges.tsv", "features.csv", "labels.txt",
                             "split.json")})
    (output_dir / "manifest.json").write_text(
        json.dumps(asdict(manifest), indent=2, sort_keys=True) + "\n",
        encoding="utf-8")
    return manifest


@dataclass
class VerifyReport:
    passed: bool
    failures: list[str]


def verify(output_dir) -> VerifyReport:
    """Re-parse emitted files with an independent minimal parser and
    cross-check the manifest."""
    output_dir = Path(output_dir)
    failures: list[str] = []

    def fail(msg: str):
        failures.append(msg)

    try:
        manifest = json.loads((output_dir / "manifest.json").read_text())
    except OSError as e:
        return VerifyReport(False, [f"cannot read manifest.json: {e}"])

    for fname, expected in manifest.get("checksums", {}).items():
        path = output_dir / fname
        if not path.is_file():
            fail(f"missing emitted file {fname}")
        elif _sha256(path) != expected:
            fail(f"checksum mismatch for {fname}")
    if failures:
        return VerifyReport(False, failures)

    feat_rows = 0
    width = None
    for ln, line in enumerate((output_dir / "features.csv")
                              .read_text().splitlines(), 1):
        cols = line.split(",")
        if width is None:
            width = len(cols)
        elif len(cols) != width:
            fail(f"features.csv row {ln} has {len(cols)} columns, expected {width}")
            break
        try:
            for tok in cols:
                float(tok)
        except ValueError:
            fail(f"features.csv row {ln} has a non-numeric value")
            break
        feat_rows += 1

    labels = [int(t) for t in (output_dir / "labels.txt").read_text().split()]
    if len(labels) != manifest["nodes"]:
        fail(f"labels.txt has {len(labels)} rows, manifest says {manifest['nodes']}")
    if labels and not all(0 <= v < manifest["classes"] for v in labels):
        fail("labels.txt contains a class id outside the manifest range")

    if feat_rows != manifest["nodes"]:
        fail(f"features.csv has {feat_rows} rows, manifest says {manifest['nodes']}")
    if width != manifest["features"]:
        fail(f"features.csv width {width} differs from manifest {manifest['features']}")

    edge_count = 0
    seen = set()
    for ln, line in enumerate((output_dir / "edges.tsv")
                              .read_text().splitlines(), 1):
        toks = line.split()
        if len(toks) != 2:
            fail(f"edges.tsv line {ln} does not hold two node ids")
            break
        a, b = int(toks[0]), int(toks[1])
        if not (0 <= a < manifest["nodes"] and 0 <= b < manifest["nodes"]):
            fail(f"edges.tsv line {ln} references a node outside range")
            break
        key = (min(a, b), max(a, b))
        if key in seen:
            fail(f"edges.tsv line {ln} duplicates an edge")
            break
        seen.add(key)
        edge_count += 1
    if edge_count != manifest["edges"]:
        fail(f"edges.tsv has {edge_count} edges, manifest says {manifest['edges']}")

    split = json.loads((output_dir / "split.json").read_text())
    sizes = {k: len(split.get(k, [])) for k in ("train", "val", "test")}
    for key in ("train", "val", "test"):
        if sizes[key] != manifest[key]:
            fail(f"split {key} has {sizes[key]} ids, manifest says {manifest[key]}")
        ids = split.get(key, [])
        if len(set(ids)) != len(ids):
            fail(f"split {key} contains duplicates")
        if ids and not all(0 <= v < manifest["nodes"] for v in ids):
            fail(f"split {key} references a node outside range")
    for a, b in (("train", "val"), ("train", "test"), ("val", "test")):
        if set(split.get(a, [])) & set(split.get(b, [])):
            fail(f"splits {a} and {b} overlap")

    dataset = manifest.get("dataset")
    if dataset in PUBLISHED:
        pub = PUBLISHED[dataset]
        if manifest["nodes"] != pub["nodes"]:
            fail(f"{dataset} node count {manifest['nodes']} != published {pub['nodes']}")
        if manifest["classes"] != pub["classes"]:
            fail(f"{dataset} class count {manifest['classes']} "
                 f"!= published {pub['classes']}")
        if sizes["train"] != 20 * pub["classes"]:
            fail(f"{dataset} train size {sizes['train']} != 20 per class")
        if sizes["val"] != VAL_SIZE:
            fail(f"{dataset} val size {sizes['val']} != {VAL_SIZE}")
        if sizes["test"] != 1000:
            fail(f"{dataset} test size {sizes['test']} != 1000")

    return VerifyReport(passed=not failures, failures=failures)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="citeconvert", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("convert", help="convert a public distribution")
    p.add_argument("name", help="dataset name, e.g. cora / citeseer / pubmed")
    p.add_argument("input_dir", type=Path)
    p.add_argument("output_dir", type=Path)
    p = sub.add_parser("verify", help="re-check an emitted directory")
    p.add_argument("output_dir", type=Path)
    args = parser.parse_args(argv)

    if args.command == "convert":
        try:
            manifest = convert(args.name, args.input_dir, args.output_dir)
        except (ConversionError, pickle.UnpicklingError) as e:
            print(f"conversion failed: {e}", file=sys.stderr)
            return 1
        print(json.dumps(asdict(manifest), indent=2, sort_keys=True))
        return 0

    report = verify(args.output_dir)
    if report.passed:
        print("verify: PASS")
        return 0
    for failure in report.failures:
        print(f"verify: FAIL  {failure}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
