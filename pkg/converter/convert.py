#!/usr/bin/env python3
"""Convert published Planetoid citation files into the plain-text dataset
directory format (meta.json, graph.edges, features.csv, labels.csv,
splits.json, splits.full.json).

A source directory holds eight files per dataset: ind.<name>.{x,y,tx,ty,
allx,ally,graph,test.index}. Feature blocks are pickled scipy sparse
matrices, label blocks are pickled one-hot arrays, the graph is a pickled
node -> neighbor-list dict, and test.index lists the (shuffled) global ids
of the test rows. Test rows are moved into their canonical positions; ids
missing from a gappy test range (the Citeseer quirk) become zero feature
rows that are excluded from every split.

Two split files are written: `splits.json` follows the source semantics
(labeled rows / next 500 / listed test ids) and `splits.full.json` assigns
every remaining real node to train.

Usage: convert.py --src DIR --name cora --out DIR
Exit code 0 on success, 1 on any conversion error (nothing is written).
"""

from __future__ import annotations

import argparse
import json
import pickle
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp

SUFFIXES = ("x", "y", "tx", "ty", "allx", "ally", "graph", "test.index")
VAL_SIZE = 500


class ConversionError(Exception):
    pass


def _load_pickle(path: Path):
    with path.open("rb") as fh:
        return pickle.load(fh, encoding="latin1")


def _read_sources(src_dir: Path, name: str) -> dict:
    paths = {suffix: src_dir / f"ind.{name}.{suffix}" for suffix in SUFFIXES}
    missing = [str(p) for p in paths.values() if not p.is_file()]
    if missing:
        raise ConversionError(f"missing source files: {', '.join(missing)}")
    objs = {suffix: _load_pickle(paths[suffix]) for suffix in SUFFIXES[:6]}
    objs["graph"] = _load_pickle(paths["graph"])
    objs["test.index"] = [int(line) for line in paths["test.index"].read_text().split()]
    return objs


def _assemble(objs: dict) -> dict:
    allx = sp.csr_matrix(objs["allx"])
    tx = sp.csr_matrix(objs["tx"])
    ally = np.asarray(objs["ally"])
    ty = np.asarray(objs["ty"])
    n_labeled = int(np.asarray(objs["y"]).shape[0])
    n_known = allx.shape[0]
    test_order = np.array(objs["test.index"], dtype=np.int64)
    if test_order.size == 0:
        raise ConversionError("empty test index list")
    test_sorted = np.sort(test_order)
    base = int(test_sorted[0])
    if base != n_known:
        raise ConversionError(f"test ids start at {base}, expected {n_known} (allx rows)")
    span = int(test_sorted[-1]) - base + 1

    # place test rows at their sorted slots inside the (possibly gappy) span,
    # then permute sorted slots back to the file-order ids
    tx_ext = sp.lil_matrix((span, tx.shape[1]))
    tx_ext[test_sorted - base, :] = tx
    ty_ext = np.zeros((span, ty.shape[1]))
    ty_ext[test_sorted - base, :] = ty
    features = sp.vstack((allx, sp.csr_matrix(tx_ext))).tolil()
    features[test_order, :] = features[test_sorted, :]
    onehot = np.vstack((ally, ty_ext))
    onehot[test_order, :] = onehot[test_sorted, :]

    num_nodes = n_known + span
    present = np.zeros(num_nodes, dtype=bool)
    present[:n_known] = True
    present[test_sorted] = True
    missing = np.nonzero(~present)[0]

    labels = onehot.argmax(axis=1).astype(np.int64)
    labels[missing] = 0  # zero-filled rows carry no class; kept out of splits

    train_std = np.arange(n_labeled, dtype=np.int64)
    val_size = min(VAL_SIZE, n_known - n_labeled)
    if val_size <= 0:
        raise ConversionError("no rows left for a validation window")
    val = np.arange(n_labeled, n_labeled + val_size, dtype=np.int64)
    test = test_sorted
    in_val_or_test = np.zeros(num_nodes, dtype=bool)
    in_val_or_test[val] = True
    in_val_or_test[test] = True
    train_full = np.nonzero(~in_val_or_test & present)[0]

    return {
        "features": sp.csr_matrix(features),
        "labels": labels,
        "num_nodes": num_nodes,
        "num_classes": int(onehot.shape[1]),
        "missing": missing,
        "splits": {"train": train_std, "val": val, "test": test},
        "splits_full": {"train": train_full, "val": val, "test": test},
    }


def _collect_edges(graph: dict, num_nodes: int) -> tuple[np.ndarray, int, int, int]:
    raw = 0
    self_loops = 0
    pairs = set()
    for u, neighbors in graph.items():
        u = int(u)
        if not 0 <= u < num_nodes:
            raise ConversionError(f"edge endpoint {u} out of range [0,{num_nodes})")
        for v in neighbors:
            v = int(v)
            if not 0 <= v < num_nodes:
                raise ConversionError(f"edge endpoint {v} out of range [0,{num_nodes})")
            raw += 1
            if u == v:
                self_loops += 1
                continue
            pairs.add((min(u, v), max(u, v)))
    dedup = np.array(sorted(pairs), dtype=np.int64)
    return dedup, raw, self_loops, len(pairs)


def _format_value(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def _write_output(out_dir: Path, name: str, data: dict, edges: np.ndarray) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    meta = {
        "name": name,
        "num_nodes": data["num_nodes"],
        "num_features": int(data["features"].shape[1]),
        "num_classes": data["num_classes"],
    }
    (out_dir / "meta.json").write_text(json.dumps(meta, indent=1) + "\n")
    (out_dir / "graph.edges").write_text("".join(f"{u} {v}\n" for u, v in edges))
    dense_rows = data["features"].toarray()
    with (out_dir / "features.csv").open("w") as fh:
        for row in dense_rows:
            fh.write(",".join(_format_value(v) for v in row) + "\n")
    (out_dir / "labels.csv").write_text("".join(f"{y}\n" for y in data["labels"]))
    for fname, splits in (("splits.json", data["splits"]), ("splits.full.json", data["splits_full"])):
        payload = {k: [int(i) for i in splits[k]] for k in ("train", "val", "test")}
        (out_dir / fname).write_text(json.dumps(payload) + "\n")


def convert_planetoid(src_dir: str | Path, name: str, out_dir: str | Path) -> dict:
    """Convert one dataset; returns the summary dict. Writes nothing on error."""
    objs = _read_sources(Path(src_dir), name)
    data = _assemble(objs)
    edges, raw, self_loops, dedup_count = _collect_edges(objs["graph"], data["num_nodes"])
    _write_output(Path(out_dir), name, data, edges)
    return {
        "name": name,
        "N": data["num_nodes"],
        "E_raw": raw,
        "E_dedup": dedup_count,
        "d": int(data["features"].shape[1]),
        "c": data["num_classes"],
        "self_loops_dropped": self_loops,
        "missing_test_ids": int(data["missing"].size),
        "train_std": int(data["splits"]["train"].size),
        "train_full": int(data["splits_full"]["train"].size),
    }


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--src", required=True, help="directory with the eight ind.<name>.* files")
    parser.add_argument("--name", required=True, choices=["cora", "citeseer", "pubmed"])
    parser.add_argument("--out", required=True, help="output dataset directory")
    args = parser.parse_args(argv)
    try:
        summary = convert_planetoid(args.src, args.name, args.out)
    except (ConversionError, pickle.UnpicklingError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(summary))
    return 0


if __name__ == "__main__":
    sys.exit(main())
