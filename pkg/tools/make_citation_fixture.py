#!/usr/bin/env python3
"""Generate the bundled citation-graph fixture at data/cora/.

Produces a deterministic synthetic stand-in with the published Cora shape:
2708 nodes, 1433 binary bag-of-words features, 7 classes, ~5429 unique
undirected edges, and a 1208/500/1000 train/val/test split covering every
node. The graph is homophilous with heavy-tailed degrees (hub papers), and
features are class-topic indicators plus background noise, so node classes
are learnable from features alone but improve with propagation.

Usage: python3 tools/make_citation_fixture.py [--out data/cora] [--seed 20260810]
"""

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from ptnas.graph import DatasetBundle, graph_from_pairs, save_dataset  # noqa: E402

CLASS_SIZES = [351, 217, 418, 818, 426, 298, 180]  # sums to 2708
NUM_FEATURES = 1433
TARGET_EDGES = 5429
SPLIT_SIZES = {"train": 1208, "val": 500, "test": 1000}  # partitions all nodes

HOMOPHILY = 0.72  # probability a drawn edge stays within its class
TOPIC_POOL = 400  # dims from which class topics are drawn (forces overlap)
TOPIC_DIMS = 40  # topic-word dims per class
P_TOPIC = 0.10  # on-probability for a node's class topic words
P_BASE = 0.011  # background on-probability for every dim
DEGREE_SIGMA = 0.9  # lognormal spread of node attachment weights


def sample_edges(rng, labels, weights, target):
    n = labels.size
    classes = np.unique(labels)
    members = {c: np.nonzero(labels == c)[0] for c in classes}
    member_p = {c: weights[members[c]] / weights[members[c]].sum() for c in classes}
    all_p = weights / weights.sum()
    edges = set()
    attempts = 0
    while len(edges) < target and attempts < 60 * target:
        attempts += 1
        u = int(rng.choice(n, p=all_p))
        if rng.random() < HOMOPHILY:
            c = labels[u]
            v = int(rng.choice(members[c], p=member_p[c]))
        else:
            v = int(rng.choice(n, p=all_p))
        if u == v:
            continue
        edges.add((min(u, v), max(u, v)))
    return np.array(sorted(edges), dtype=np.int64)


def sample_features(rng, labels):
    n = labels.size
    pool = rng.choice(NUM_FEATURES, size=TOPIC_POOL, replace=False)
    topics = [rng.choice(pool, size=TOPIC_DIMS, replace=False) for _ in range(len(CLASS_SIZES))]
    feats = (rng.random((n, NUM_FEATURES)) < P_BASE).astype(np.float64)
    for c, dims in enumerate(topics):
        rows = np.nonzero(labels == c)[0]
        feats[np.ix_(rows, dims)] = (rng.random((rows.size, TOPIC_DIMS)) < P_TOPIC).astype(np.float64)
    return feats


def stratified_split(rng, labels):
    n = labels.size
    order = {name: [] for name in SPLIT_SIZES}
    # largest-remainder allocation per class so the totals land exactly
    fractions = {name: size / n for name, size in SPLIT_SIZES.items()}
    remaining = dict(SPLIT_SIZES)
    class_ids = np.unique(labels)
    for pos, c in enumerate(class_ids):
        members = rng.permutation(np.nonzero(labels == c)[0])
        start = 0
        for name in ("train", "val"):
            if pos == len(class_ids) - 1:
                take = remaining[name]
            else:
                take = int(round(fractions[name] * members.size))
            order[name].append(members[start : start + take])
            remaining[name] -= take
            start += take
        order["test"].append(members[start:])
    return {name: np.sort(np.concatenate(parts)) for name, parts in order.items()}


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "data" / "cora"))
    parser.add_argument("--seed", type=int, default=20260810)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    labels = np.repeat(np.arange(len(CLASS_SIZES)), CLASS_SIZES)
    labels = labels[rng.permutation(labels.size)]

    weights = rng.lognormal(mean=0.0, sigma=DEGREE_SIGMA, size=labels.size)
    pairs = sample_edges(rng, labels, weights, TARGET_EDGES)
    graph = graph_from_pairs(labels.size, pairs)
    features = sample_features(rng, labels)
    splits = stratified_split(rng, labels)

    same = np.mean(labels[pairs[:, 0]] == labels[pairs[:, 1]])
    meta = {
        "name": "cora",
        "num_nodes": int(labels.size),
        "num_features": NUM_FEATURES,
        "num_classes": len(CLASS_SIZES),
    }
    bundle = DatasetBundle(graph, features, labels, splits, meta)
    save_dataset(bundle, args.out)
    print(
        f"wrote {args.out}: N={labels.size} E={len(pairs)} d={NUM_FEATURES} c={len(CLASS_SIZES)} "
        f"homophily={same:.3f} mean_row_sum={features.sum(1).mean():.1f} "
        f"splits={[len(splits[k]) for k in ('train', 'val', 'test')]}"
    )


if __name__ == "__main__":
    main()
