"""Embedding smoothness: how close node embeddings are to collapsing.

A node's smoothness is one minus its mean unit-sphere distance to every
other node; the graph value averages over nodes. 1 means all embeddings
point the same way (fully over-smoothed), 0 means maximal spread.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ptnas.errors import ContractViolation
from ptnas.genome import Genome
from ptnas.graph import DatasetBundle, normalize_adjacency
from ptnas.model import PipelineModel, forward

_NORM_FLOOR = 1e-12
_BLOCK = 512


def node_smoothness(embeddings: np.ndarray) -> np.ndarray:
    """Per-node smoothness S_i = 1 - sum_{j != i} ||e_i^ - e_j^|| / (2N - 2).

    Rows are normalized to unit length with a 1e-12 floor, so all-zero rows
    (common under rectifier activations) are treated as the zero vector
    rather than erroring. Rows that coincide after normalization are grouped
    so their pairwise distance is zero exactly, not merely to rounding.
    """
    e = np.asarray(embeddings, dtype=np.float64)
    if e.ndim != 2 or e.shape[0] < 2:
        raise ContractViolation("node_smoothness needs a 2-D matrix with at least 2 rows")
    n = e.shape[0]
    norms = np.linalg.norm(e, axis=1, keepdims=True)
    unit = e / np.maximum(norms, _NORM_FLOOR)
    uniq, inverse, counts = np.unique(unit, axis=0, return_inverse=True, return_counts=True)
    m = uniq.shape[0]
    if m == 1:
        return np.ones(n)
    sq = (uniq * uniq).sum(axis=1)
    group_sums = np.empty(m)
    for start in range(0, m, _BLOCK):
        stop = min(start + _BLOCK, m)
        gram = uniq[start:stop] @ uniq.T
        d2 = sq[start:stop, None] + sq[None, :] - 2.0 * gram
        d2[np.arange(start, stop) - start, np.arange(start, stop)] = 0.0
        group_sums[start:stop] = np.sqrt(np.maximum(d2, 0.0)) @ counts
    dist_sums = group_sums[inverse]
    return np.clip(1.0 - dist_sums / (2.0 * n - 2.0), 0.0, 1.0)


def graph_smoothness(embeddings: np.ndarray) -> float:
    """Mean node smoothness; exact O(N^2) evaluation."""
    return float(node_smoothness(embeddings).mean())


@dataclass(frozen=True)
class SmoothnessTrace:
    """Graph smoothness after every pipeline layer; index 0 is the raw input."""

    genome: Genome
    values: np.ndarray

    def rows(self) -> list[tuple[int, str, float]]:
        labels = ["input"] + list(self.genome.ops)
        return [(i, labels[i], float(s)) for i, s in enumerate(self.values)]


def smoothness_trace(model: PipelineModel, bundle: DatasetBundle) -> SmoothnessTrace:
    """Evaluate the model in eval mode and record smoothness layer by layer."""
    g = bundle.graph
    a_hat = g if g.normalized else normalize_adjacency(g)
    res = forward(model, a_hat, bundle.features, mode="eval", collect=True)
    res.tape.release()
    values = [graph_smoothness(bundle.features)]
    values.extend(graph_smoothness(out) for out in res.layer_outputs)
    return SmoothnessTrace(model.genome, np.array(values))
