"""Graph storage and dataset handling.

Graphs are undirected and unweighted, stored in CSR form with both
directions of every edge materialized. Normalization adds self-loops and
rescales entries to 1/sqrt(deg_r * deg_c), the form consumed by the
propagation step of a pipeline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ptnas.errors import ContractViolation, DatasetLoadError
from ptnas.rng import substream


@dataclass(frozen=True, eq=False)
class SparseGraph:
    """CSR adjacency over `num_nodes` nodes.

    Invariants: row_offsets is non-decreasing with row_offsets[0] == 0 and
    row_offsets[-1] == nnz; column indices are sorted and unique within each
    row; the structure is symmetric ((r, c) stored iff (c, r) stored).
    """

    num_nodes: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray
    normalized: bool = False
    has_self_loops: bool = False

    def __post_init__(self):
        object.__setattr__(self, "row_offsets", np.asarray(self.row_offsets, dtype=np.int64))
        object.__setattr__(self, "col_indices", np.asarray(self.col_indices, dtype=np.int64))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))

    @property
    def nnz(self) -> int:
        return int(self.col_indices.shape[0])

    def num_undirected_edges(self) -> int:
        """Count of unique undirected edges, self-loops excluded."""
        rows = self._row_ids()
        off_diag = int(np.count_nonzero(rows != self.col_indices))
        return off_diag // 2

    def _row_ids(self) -> np.ndarray:
        return np.repeat(np.arange(self.num_nodes, dtype=np.int64), np.diff(self.row_offsets))

    def degrees(self) -> np.ndarray:
        return np.diff(self.row_offsets)

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.num_nodes, self.num_nodes))
        dense[self._row_ids(), self.col_indices] = self.values
        return dense

    def undirected_pairs(self) -> np.ndarray:
        """(E, 2) array of unique undirected edges with u < v, sorted."""
        rows = self._row_ids()
        keep = rows < self.col_indices
        pairs = np.stack([rows[keep], self.col_indices[keep]], axis=1)
        return pairs

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseGraph):
            return NotImplemented
        return (
            self.num_nodes == other.num_nodes
            and self.normalized == other.normalized
            and self.has_self_loops == other.has_self_loops
            and np.array_equal(self.row_offsets, other.row_offsets)
            and np.array_equal(self.col_indices, other.col_indices)
            and np.array_equal(self.values, other.values)
        )

    def validate(self) -> None:
        off, col, val = self.row_offsets, self.col_indices, self.values
        if off.shape != (self.num_nodes + 1,) or off[0] != 0 or off[-1] != col.shape[0]:
            raise ContractViolation("malformed row offsets")
        if np.any(np.diff(off) < 0):
            raise ContractViolation("row offsets must be non-decreasing")
        if col.shape != val.shape:
            raise ContractViolation("col_indices and values length mismatch")
        if col.size and (col.min() < 0 or col.max() >= self.num_nodes):
            raise ContractViolation("column index out of range")
        rows = self._row_ids()
        order = np.lexsort((col, rows))
        if not np.array_equal(order, np.arange(col.size)):
            raise ContractViolation("columns must be sorted within each row")
        if col.size:
            dup = (np.diff(rows) == 0) & (np.diff(col) == 0)
            if np.any(dup):
                raise ContractViolation("duplicate (row, col) entry")
        # structural symmetry
        fwd = rows * self.num_nodes + col
        bwd = col * self.num_nodes + rows
        if not np.array_equal(np.sort(fwd), np.sort(bwd)):
            raise ContractViolation("adjacency structure is not symmetric")
        if self.normalized:
            if not (np.all(np.isfinite(val)) and np.all(val > 0)):
                raise ContractViolation("normalized values must be finite and positive")


def graph_from_pairs(num_nodes: int, pairs: np.ndarray) -> SparseGraph:
    """Build an unnormalized symmetric graph from unique undirected edges.

    `pairs` is an (E, 2) int array; self-loops and duplicate pairs (in either
    orientation) are rejected.
    """
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if pairs.size:
        if pairs.min() < 0 or pairs.max() >= num_nodes:
            raise ContractViolation("edge endpoint out of range")
        if np.any(pairs[:, 0] == pairs[:, 1]):
            raise ContractViolation("self-loops are not allowed in edge input")
    lo = np.minimum(pairs[:, 0], pairs[:, 1])
    hi = np.maximum(pairs[:, 0], pairs[:, 1])
    key = lo * num_nodes + hi
    if np.unique(key).size != key.size:
        raise ContractViolation("duplicate undirected edge in input")
    rows = np.concatenate([lo, hi])
    cols = np.concatenate([hi, lo])
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    offsets = np.zeros(num_nodes + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=num_nodes), out=offsets[1:])
    return SparseGraph(num_nodes, offsets, cols, np.ones(cols.shape[0]), False, False)


def normalize_adjacency(g: SparseGraph) -> SparseGraph:
    """Add self-loops and apply symmetric 1/sqrt(deg) normalization.

    Isolated nodes end up with a single self-loop of value 1. The result is
    symmetric in values exactly, not only in structure.
    """
    if g.normalized or g.has_self_loops:
        raise ContractViolation("normalize_adjacency expects a raw graph")
    n = g.num_nodes
    rows = np.concatenate([g._row_ids(), np.arange(n, dtype=np.int64)])
    cols = np.concatenate([g.col_indices, np.arange(n, dtype=np.int64)])
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=offsets[1:])
    deg = np.diff(offsets).astype(np.float64)
    values = 1.0 / np.sqrt(deg[rows] * deg[cols])
    return SparseGraph(n, offsets, cols, values, normalized=True, has_self_loops=True)


def spmm(a: SparseGraph, h: np.ndarray) -> np.ndarray:
    """Sparse-dense product a @ h for a normalized adjacency."""
    if not a.normalized:
        raise ContractViolation("spmm expects a normalized adjacency")
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 2 or h.shape[0] != a.num_nodes:
        raise ContractViolation(f"spmm shape mismatch: graph has {a.num_nodes} nodes, h is {h.shape}")
    prods = a.values[:, None] * h[a.col_indices]
    # self-loops guarantee every row is non-empty, so reduceat segments are valid
    return np.add.reduceat(prods, a.row_offsets[:-1], axis=0)


@dataclass(frozen=True, eq=False)
class DatasetBundle:
    """A graph plus node features, labels, and train/val/test index lists."""

    graph: SparseGraph
    features: np.ndarray
    labels: np.ndarray
    splits: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "features", np.asarray(self.features, dtype=np.float64))
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.int64))

    @property
    def num_nodes(self) -> int:
        return self.graph.num_nodes

    @property
    def num_features(self) -> int:
        return int(self.features.shape[1])

    @property
    def num_classes(self) -> int:
        return int(self.meta["num_classes"])

    def __eq__(self, other) -> bool:
        if not isinstance(other, DatasetBundle):
            return NotImplemented
        return (
            self.graph == other.graph
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
            and set(self.splits) == set(other.splits)
            and all(np.array_equal(self.splits[k], other.splits[k]) for k in self.splits)
            and self.meta == other.meta
        )


def _validate_bundle(b: DatasetBundle) -> None:
    n, c = b.num_nodes, b.num_classes
    if b.features.shape[0] != n:
        raise DatasetLoadError(f"features have {b.features.shape[0]} rows, graph has {n} nodes")
    if b.labels.shape[0] != n:
        raise DatasetLoadError(f"labels have {b.labels.shape[0]} rows, graph has {n} nodes")
    bad = np.nonzero((b.labels < 0) | (b.labels >= c))[0]
    if bad.size:
        raise DatasetLoadError(f"label out of range [0,{c}) at row {bad[0]}: {b.labels[bad[0]]}")
    seen = np.zeros(n, dtype=bool)
    for name in ("train", "val", "test"):
        idx = b.splits[name]
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise DatasetLoadError(f"{name} split index out of range [0,{n})")
        if np.any(seen[idx]):
            raise DatasetLoadError(f"{name} split overlaps another split")
        seen[idx] = True


def load_dataset(dirpath: str | Path, splits_file: str = "splits.json") -> DatasetBundle:
    """Load the plain-text dataset directory format.

    Expects meta.json, graph.edges, features.csv, labels.csv, and
    splits.json. The adjacency is returned unnormalized and without
    self-loops; edge-list symmetry is materialized here. `splits_file`
    selects an alternate split variant shipped next to the standard one.
    """
    d = Path(dirpath)
    for fname in ("meta.json", "graph.edges", "features.csv", "labels.csv", splits_file):
        if not (d / fname).is_file():
            raise DatasetLoadError(f"missing dataset file: {d / fname}")
    meta = json.loads((d / "meta.json").read_text())
    for key in ("name", "num_nodes", "num_features", "num_classes"):
        if key not in meta:
            raise DatasetLoadError(f"meta.json missing field {key!r}")
    n, dim = int(meta["num_nodes"]), int(meta["num_features"])

    edge_text = (d / "graph.edges").read_text().split()
    if len(edge_text) % 2:
        raise DatasetLoadError("graph.edges has an odd number of tokens")
    pairs = np.array(edge_text, dtype=np.int64).reshape(-1, 2) if edge_text else np.empty((0, 2), np.int64)
    try:
        graph = graph_from_pairs(n, pairs)
    except ContractViolation as exc:
        raise DatasetLoadError(f"bad edge list: {exc}") from exc

    features = _read_float_csv(d / "features.csv", n, dim)
    labels = _read_labels(d / "labels.csv", n)
    raw_splits = json.loads((d / splits_file).read_text())
    try:
        splits = {k: np.asarray(raw_splits[k], dtype=np.int64) for k in ("train", "val", "test")}
    except KeyError as exc:
        raise DatasetLoadError(f"splits.json missing key {exc}") from exc

    bundle = DatasetBundle(graph, features, labels, splits, dict(meta))
    _validate_bundle(bundle)
    return bundle


def _read_float_csv(path: Path, n: int, dim: int) -> np.ndarray:
    out = np.empty((n, dim))
    with path.open() as fh:
        row = -1
        for row, line in enumerate(fh):
            if row >= n:
                raise DatasetLoadError(f"{path.name} has more than {n} rows")
            cells = line.rstrip("\n").split(",")
            if len(cells) != dim:
                raise DatasetLoadError(f"{path.name} row {row} has {len(cells)} columns, expected {dim}")
            try:
                out[row] = [float(c) for c in cells]
            except ValueError as exc:
                raise DatasetLoadError(f"{path.name} row {row}: {exc}") from exc
    if row != n - 1:
        raise DatasetLoadError(f"{path.name} has {row + 1} rows, expected {n}")
    return out


def _read_labels(path: Path, n: int) -> np.ndarray:
    lines = path.read_text().splitlines()
    if len(lines) != n:
        raise DatasetLoadError(f"{path.name} has {len(lines)} rows, expected {n}")
    out = np.empty(n, dtype=np.int64)
    for row, line in enumerate(lines):
        try:
            out[row] = int(line.strip())
        except ValueError as exc:
            raise DatasetLoadError(f"{path.name} row {row}: {exc}") from exc
    return out


def _format_value(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def save_dataset(bundle: DatasetBundle, dirpath: str | Path) -> None:
    """Write a bundle in the plain-text directory format (round-trip exact)."""
    if bundle.graph.normalized or bundle.graph.has_self_loops:
        raise ContractViolation("save_dataset expects an unnormalized graph")
    d = Path(dirpath)
    d.mkdir(parents=True, exist_ok=True)
    meta = {
        "name": bundle.meta.get("name", "unnamed"),
        "num_nodes": bundle.num_nodes,
        "num_features": bundle.num_features,
        "num_classes": bundle.num_classes,
    }
    (d / "meta.json").write_text(json.dumps(meta, indent=1) + "\n")
    pairs = bundle.graph.undirected_pairs()
    (d / "graph.edges").write_text("".join(f"{u} {v}\n" for u, v in pairs))
    with (d / "features.csv").open("w") as fh:
        for row in bundle.features:
            fh.write(",".join(_format_value(v) for v in row) + "\n")
    (d / "labels.csv").write_text("".join(f"{y}\n" for y in bundle.labels))
    splits = {k: [int(i) for i in bundle.splits[k]] for k in ("train", "val", "test")}
    (d / "splits.json").write_text(json.dumps(splits) + "\n")


def gen_sbm(
    blocks: int,
    nodes_per_block: int,
    p_intra: float,
    p_inter: float,
    feature_dim: int,
    seed: int,
) -> DatasetBundle:
    """Stochastic-block-model bundle: block labels, Gaussian features, 60/20/20 splits.

    Features are the node's block mean (itself standard normal per dimension)
    plus unit noise. Splits are stratified per block. Deterministic per seed.
    """
    if blocks < 2:
        raise ContractViolation("gen_sbm requires at least 2 blocks")
    if not (0.0 <= p_intra <= 1.0 and 0.0 <= p_inter <= 1.0):
        raise ContractViolation("edge probabilities must lie in [0,1]")
    rng = substream(seed, "sbm")
    n = blocks * nodes_per_block
    labels = np.repeat(np.arange(blocks), nodes_per_block)

    iu, iv = np.triu_indices(n, k=1)
    prob = np.where(labels[iu] == labels[iv], p_intra, p_inter)
    keep = rng.random(iu.shape[0]) < prob
    pairs = np.stack([iu[keep], iv[keep]], axis=1)
    graph = graph_from_pairs(n, pairs)

    means = rng.standard_normal((blocks, feature_dim))
    features = means[labels] + rng.standard_normal((n, feature_dim))

    splits = {"train": [], "val": [], "test": []}
    for b in range(blocks):
        members = rng.permutation(np.nonzero(labels == b)[0])
        n_train = int(round(0.6 * members.size))
        n_val = int(round(0.2 * members.size))
        splits["train"].append(members[:n_train])
        splits["val"].append(members[n_train : n_train + n_val])
        splits["test"].append(members[n_train + n_val :])
    splits = {k: np.sort(np.concatenate(v)) for k, v in splits.items()}

    meta = {
        "name": f"sbm{blocks}x{nodes_per_block}",
        "num_nodes": n,
        "num_features": feature_dim,
        "num_classes": blocks,
    }
    return DatasetBundle(graph, features, labels, splits, meta)


def drop_edges(bundle: DatasetBundle, fraction: float, seed: int) -> DatasetBundle:
    """Remove each undirected edge independently with probability `fraction`."""
    if bundle.graph.normalized or bundle.graph.has_self_loops:
        raise ContractViolation("drop_edges expects an unnormalized graph")
    if not 0.0 <= fraction <= 1.0:
        raise ContractViolation("fraction must lie in [0,1]")
    rng = substream(seed, "sbm")
    pairs = bundle.graph.undirected_pairs()
    keep = rng.random(pairs.shape[0]) >= fraction
    graph = graph_from_pairs(bundle.num_nodes, pairs[keep])
    return DatasetBundle(graph, bundle.features, bundle.labels, dict(bundle.splits), dict(bundle.meta))
