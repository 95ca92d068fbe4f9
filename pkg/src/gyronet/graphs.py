"""Dataset loading, validation, serialization and synthetic generators.

On-disk layout of a dataset directory (UTF-8, LF line endings):

* ``edges.tsv``     one edge per line, two whitespace-separated 0-based node
  ids; ``#`` starts a comment line
* ``features.csv``  N lines of d comma-separated reals
* ``labels.txt``    N lines, one integer class id each
* ``split.json``    object with "train"/"val"/"test" index arrays

Graphs are undirected: edges are symmetrized and deduplicated on load and a
self-loop is added at every node.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class DatasetError(Exception):
    """A dataset file is missing, malformed or violates an invariant."""


@dataclass(frozen=True, eq=False)
class Adjacency:
    """Undirected adjacency in CSR form; neighbor lists are sorted and
    include the node itself.  Compared by identity so instances can key
    caches of derived index structures."""

    indptr: np.ndarray
    indices: np.ndarray

    @property
    def num_nodes(self) -> int:
        return len(self.indptr) - 1

    @property
    def num_entries(self) -> int:
        return len(self.indices)

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    @property
    def edge_src(self) -> np.ndarray:
        """Source node of every CSR entry (repeat of row ids)."""
        return np.repeat(np.arange(self.num_nodes), self.degrees)

    @property
    def edge_dst(self) -> np.ndarray:
        return self.indices

    def num_undirected_edges(self) -> int:
        """Unique undirected non-self edges."""
        return (self.num_entries - self.num_nodes) // 2


def adjacency_from_edges(num_nodes: int, edges: np.ndarray) -> Adjacency:
    """Build CSR from raw (possibly directed/duplicated) edge pairs:
    symmetrize, drop duplicates, add self-loops."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if len(edges) and (edges.min() < 0 or edges.max() >= num_nodes):
        raise DatasetError(
            f"edge endpoint out of range [0, {num_nodes}): "
            f"min {edges.min()}, max {edges.max()}")
    loops = np.arange(num_nodes, dtype=np.int64)
    src = np.concatenate([edges[:, 0], edges[:, 1], loops])
    dst = np.concatenate([edges[:, 1], edges[:, 0], loops])
    keys = src * num_nodes + dst
    order = np.argsort(keys, kind="stable")
    keys = keys[order]
    keep = np.ones(len(keys), dtype=bool)
    keep[1:] = keys[1:] != keys[:-1]
    keys = keys[keep]
    out_src = keys // num_nodes
    out_dst = keys % num_nodes
    indptr = np.zeros(num_nodes + 1, dtype=np.int64)
    np.add.at(indptr, out_src + 1, 1)
    np.cumsum(indptr, out=indptr)
    return Adjacency(indptr=indptr, indices=out_dst)


@dataclass
class GraphDataset:
    features: np.ndarray          # N x d
    labels: np.ndarray            # N ints
    adjacency: Adjacency
    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray
    num_classes: int

    @property
    def num_nodes(self) -> int:
        return self.features.shape[0]

    @property
    def num_features(self) -> int:
        return self.features.shape[1]


def validate(ds: GraphDataset) -> list[str]:
    """Check every dataset invariant; returns human-readable violations."""
    out: list[str] = []
    n = ds.num_nodes
    if ds.labels.shape != (n,):
        out.append(f"labels shape {ds.labels.shape} does not match {n} nodes")
    else:
        bad = np.where((ds.labels < 0) | (ds.labels >= ds.num_classes))[0]
        for i in bad[:10]:
            out.append(f"node {i} has label {ds.labels[i]} outside [0, {ds.num_classes})")
    if not np.all(np.isfinite(ds.features)):
        out.append("features contain non-finite entries")

    adj = ds.adjacency
    if adj.num_nodes != n:
        out.append(f"adjacency has {adj.num_nodes} nodes, features have {n}")
    else:
        for i in range(n):
            nb = adj.neighbors(i)
            if len(nb) and (nb.min() < 0 or nb.max() >= n):
                out.append(f"node {i} has a neighbor outside [0, {n})")
                break
        if any(np.any(np.diff(adj.neighbors(i)) <= 0) for i in range(n)):
            out.append("a neighbor list is unsorted or contains duplicates")
        if any(i not in adj.neighbors(i) for i in range(n)):
            out.append("a node is missing its self-loop")
        # symmetry: the CSR transpose must equal itself
        src, dst = adj.edge_src, adj.edge_dst
        fwd = set(zip(src.tolist(), dst.tolist()))
        if any((j, i) not in fwd for i, j in fwd):
            out.append("adjacency is not symmetric")

    names = ("train", "val", "test")
    splits = (ds.train_idx, ds.val_idx, ds.test_idx)
    for name, idx in zip(names, splits):
        if len(idx) and (idx.min() < 0 or idx.max() >= n):
            out.append(f"{name} split contains an index outside [0, {n})")
        if len(np.unique(idx)) != len(idx):
            out.append(f"{name} split contains duplicate indices")
    for a in range(3):
        for b in range(a + 1, 3):
            overlap = np.intersect1d(splits[a], splits[b])
            if len(overlap):
                out.append(
                    f"{names[a]}/{names[b]} splits overlap at {overlap[:10].tolist()}")
    return out


def _read_lines(path: Path) -> list[str]:
    if not path.is_file():
        raise DatasetError(f"missing file: {path}")
    return path.read_text(encoding="utf-8").splitlines()


def load_dataset(directory, normalize_features: bool = True) -> GraphDataset:
    """Load and validate a dataset directory.

    Features are L1-normalized per row (zero rows stay zero) unless
    `normalize_features` is false.
    """
    directory = Path(directory)

    feature_rows: list[list[float]] = []
    width = None
    for ln, line in enumerate(_read_lines(directory / "features.csv"), 1):
        if not line.strip():
            continue
        try:
            row = [float(tok) for tok in line.split(",")]
        except ValueError as e:
            raise DatasetError(f"features.csv line {ln}: {e}") from None
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise DatasetError(
                f"features.csv line {ln}: expected {width} columns, got {len(row)}")
        feature_rows.append(row)
    if not feature_rows:
        raise DatasetError("features.csv contains no rows")
    features = np.array(feature_rows, dtype=np.float64)
    n = len(features)

    labels_raw = [ln for ln in _read_lines(directory / "labels.txt") if ln.strip()]
    try:
        labels = np.array([int(tok) for tok in labels_raw], dtype=np.int64)
    except ValueError as e:
        raise DatasetError(f"labels.txt: {e}") from None
    if len(labels) != n:
        raise DatasetError(f"labels.txt has {len(labels)} entries for {n} nodes")
    if labels.min() < 0:
        raise DatasetError("labels.txt contains a negative class id")
    num_classes = int(labels.max()) + 1

    edge_pairs = []
    for ln, line in enumerate(_read_lines(directory / "edges.tsv"), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        toks = body.split()
        if len(toks) != 2:
            raise DatasetError(f"edges.tsv line {ln}: expected two node ids")
        try:
            edge_pairs.append((int(toks[0]), int(toks[1])))
        except ValueError:
            raise DatasetError(f"edges.tsv line {ln}: non-integer node id") from None
    edges = np.array(edge_pairs, dtype=np.int64).reshape(-1, 2)
    adjacency = adjacency_from_edges(n, edges)

    split_path = directory / "split.json"
    if not split_path.is_file():
        raise DatasetError(f"missing file: {split_path}")
    try:
        split = json.loads(split_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DatasetError(f"split.json: {e}") from None
    idx = {}
    for key in ("train", "val", "test"):
        if key not in split:
            raise DatasetError(f"split.json missing key '{key}'")
        idx[key] = np.array(split[key], dtype=np.int64)

    if normalize_features:
        sums = features.sum(axis=1, keepdims=True)
        nz = sums[:, 0] != 0.0
        features[nz] /= sums[nz]

    ds = GraphDataset(features=features, labels=labels, adjacency=adjacency,
                      train_idx=idx["train"], val_idx=idx["val"],
                      test_idx=idx["test"], num_classes=num_classes)
    violations = validate(ds)
    if violations:
        raise DatasetError("invalid dataset: " + "; ".join(violations))
    return ds


def save_dataset(ds: GraphDataset, directory) -> None:
    """Write the four dataset files; floats use shortest round-trip decimals."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    src, dst = ds.adjacency.edge_src, ds.adjacency.edge_dst
    lines = [f"{i}\t{j}" for i, j in zip(src.tolist(), dst.tolist()) if i < j]
    (directory / "edges.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    rows = (",".join(repr(v) for v in row) for row in ds.features.tolist())
    (directory / "features.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")

    (directory / "labels.txt").write_text(
        "\n".join(str(v) for v in ds.labels.tolist()) + "\n", encoding="utf-8")

    split = {"train": ds.train_idx.tolist(), "val": ds.val_idx.tolist(),
             "test": ds.test_idx.tolist()}
    (directory / "split.json").write_text(
        json.dumps(split, indent=0, sort_keys=True) + "\n", encoding="utf-8")


# Synthetic generators ---------------------------------------------------------

def _one_hot_features(labels: np.ndarray, num_classes: int, feature_dim: int,
                      rng: np.random.Generator) -> np.ndarray:
    if feature_dim < num_classes:
        raise ValueError(
            f"feature_dim {feature_dim} cannot one-hot encode {num_classes} classes")
    feats = 0.1 * rng.standard_normal((len(labels), feature_dim))
    feats[np.arange(len(labels)), labels] += 1.0
    return feats


def _random_split(n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    perm = rng.permutation(n)
    n_train = max(1, int(0.6 * n))
    n_val = max(1, int(0.2 * n))
    return (np.sort(perm[:n_train]), np.sort(perm[n_train:n_train + n_val]),
            np.sort(perm[n_train + n_val:]))


def balanced_tree(branching: int, depth: int, feature_dim: int, seed: int) -> GraphDataset:
    """Complete tree with `branching` children per node and `depth` levels
    below the root; class = which root subtree a node falls in (root gets 0)."""
    if branching < 1 or depth < 1:
        raise ValueError("branching and depth must be positive")
    rng = np.random.default_rng(seed)
    num_nodes = (branching ** (depth + 1) - 1) // (branching - 1) if branching > 1 \
        else depth + 1
    edges = []
    labels = np.zeros(num_nodes, dtype=np.int64)
    for child in range(1, num_nodes):
        parent = (child - 1) // branching
        edges.append((parent, child))
        labels[child] = labels[parent] if parent != 0 else (child - 1) % branching
    adjacency = adjacency_from_edges(num_nodes, np.array(edges, dtype=np.int64))
    features = _one_hot_features(labels, branching, feature_dim, rng)
    train, val, test = _random_split(num_nodes, rng)
    return GraphDataset(features=features, labels=labels, adjacency=adjacency,
                        train_idx=train, val_idx=val, test_idx=test,
                        num_classes=branching)


def preferential_attachment(n: int, m: int, feature_dim: int, seed: int) -> GraphDataset:
    """Growing graph: an m-clique seed, then each new node attaches to m
    distinct existing nodes with probability proportional to degree.

    Edge count is m*(m-1)/2 + m*(n-m).  New nodes inherit the class of the
    first node they attach to; seed nodes get one class each.
    """
    if m < 1 or n < m:
        raise ValueError(f"need n >= m >= 1, got n={n}, m={m}")
    rng = np.random.default_rng(seed)
    edges: list[tuple[int, int]] = []
    endpoints: list[int] = []
    labels = np.zeros(n, dtype=np.int64)
    for i in range(m):
        labels[i] = i
        for j in range(i + 1, m):
            edges.append((i, j))
            endpoints.extend((i, j))
    if m == 1:
        endpoints.append(0)  # lone seed node is otherwise unreachable by sampling
    for node in range(m, n):
        targets: list[int] = []
        while len(targets) < m:
            pick = endpoints[rng.integers(len(endpoints))]
            if pick not in targets:
                targets.append(pick)
        labels[node] = labels[targets[0]]
        for t in targets:
            edges.append((node, t))
            endpoints.extend((node, t))
    adjacency = adjacency_from_edges(n, np.array(edges, dtype=np.int64))
    features = _one_hot_features(labels, m, feature_dim, rng)
    train, val, test = _random_split(n, rng)
    return GraphDataset(features=features, labels=labels, adjacency=adjacency,
                        train_idx=train, val_idx=val, test_idx=test, num_classes=m)


def generate_synthetic(kind: str, feature_dim: int, seed: int, **params) -> GraphDataset:
    """Dispatch to a named generator: "balanced_tree" or "preferential_attachment"."""
    if kind == "balanced_tree":
        return balanced_tree(feature_dim=feature_dim, seed=seed, **params)
    if kind == "preferential_attachment":
        return preferential_attachment(feature_dim=feature_dim, seed=seed, **params)
    raise ValueError(f"unknown synthetic kind: {kind!r}")


def two_cliques(clique_size: int = 10, feature_dim: int = 8, seed: int = 7,
                train_per_class: int = 4) -> GraphDataset:
    """Linearly separable fixture: two cliques joined by one bridge edge,
    orthogonal class features plus small noise."""
    n = 2 * clique_size
    rng = np.random.default_rng(seed)
    labels = np.array([0] * clique_size + [1] * clique_size, dtype=np.int64)
    edges = [(i, j) for i in range(clique_size) for j in range(i + 1, clique_size)]
    edges += [(clique_size + i, clique_size + j)
              for i in range(clique_size) for j in range(i + 1, clique_size)]
    edges.append((0, clique_size))
    features = np.zeros((n, feature_dim))
    features[:clique_size, 0] = 1.0
    features[clique_size:, 1] = 1.0
    features += 0.05 * rng.standard_normal((n, feature_dim))
    perm0 = rng.permutation(clique_size)
    perm1 = clique_size + rng.permutation(clique_size)
    train = np.sort(np.concatenate([perm0[:train_per_class], perm1[:train_per_class]]))
    rest = np.concatenate([perm0[train_per_class:], perm1[train_per_class:]])
    rest = rng.permutation(rest)
    val = np.sort(rest[:len(rest) // 2])
    test = np.sort(rest[len(rest) // 2:])
    adjacency = adjacency_from_edges(n, np.array(edges, dtype=np.int64))
    return GraphDataset(features=features, labels=labels, adjacency=adjacency,
                        train_idx=train, val_idx=val, test_idx=test, num_classes=2)


def star(num_leaves: int) -> Adjacency:
    """Hub node 0 joined to `num_leaves` leaves (plus self-loops)."""
    edges = np.stack([np.zeros(num_leaves, dtype=np.int64),
                      np.arange(1, num_leaves + 1, dtype=np.int64)], axis=1)
    return adjacency_from_edges(num_leaves + 1, edges)
