"""Pipeline models: weight layout, initialization, and forward semantics.

A model walks its genome once per forward pass. Layer l produces an output
o[l] from the previous output, starting from o[0] = dropout(X):

* P layers propagate: z[l] = A_hat @ o[l-1]. A run-internal P (one followed
  by another P, or any P with gating disabled) passes z[l] through. When
  gating is enabled and the next op is a T, the layer instead emits a
  per-node convex combination of every propagated embedding produced so far:
  each z[i] is scored by sigmoid(z[i] @ s) with a shared trainable vector s,
  the scores are softmax-normalized per node, and the outputs are mixed with
  those weights. This is what lets different nodes settle at different
  effective propagation depths.

* T layers transform: the input is o[l-1], plus, when skip connections are
  enabled, the outputs of all earlier T layers except the most recent one
  (whose contribution already reached o[l-1] directly). The input is
  dropout-masked and multiplied by the layer's weight matrix; hidden T
  layers apply a rectifier, the final T emits raw logits.

Because gating mixes propagated embeddings from across the whole genome,
every P output must share the hidden width, hence gated genomes must open
with a T (the input-reduction layer).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ptnas import tape as tp
from ptnas.errors import ContractViolation, InvalidGenomeError
from ptnas.genome import PROPAGATE, TRANSFORM, Genome
from ptnas.graph import SparseGraph
from ptnas.rng import substream


@dataclass
class PipelineModel:
    genome: Genome
    weights: list[np.ndarray]
    gate: np.ndarray | None
    gate_enabled: bool
    skip_enabled: bool
    input_dropout: float
    layer_dropout: float
    in_dim: int
    hidden_dim: int
    out_dim: int

    def parameters(self) -> list[np.ndarray]:
        """Trainable arrays: weight matrices in genome order, then the gate vector."""
        params = list(self.weights)
        if self.gate is not None:
            params.append(self.gate)
        return params

    def snapshot(self) -> list[np.ndarray]:
        return [p.copy() for p in self.parameters()]

    def restore(self, saved: list[np.ndarray]) -> None:
        for p, s in zip(self.parameters(), saved):
            p[...] = s


def weight_shapes(genome: Genome, in_dim: int, hidden_dim: int, out_dim: int) -> list[tuple[int, int]]:
    """Shapes of the T-layer weight matrices, chained along the genome."""
    shapes = []
    cur = in_dim
    last = len(genome) - 1
    for l, op in enumerate(genome):
        if op == TRANSFORM:
            out = out_dim if l == last else hidden_dim
            shapes.append((cur, out))
            cur = out
    return shapes


def build_model(
    genome: Genome | str,
    in_dim: int,
    hidden_dim: int,
    out_dim: int,
    *,
    gate_enabled: bool = False,
    skip_enabled: bool = False,
    input_dropout: float = 0.0,
    layer_dropout: float = 0.0,
    seed: int = 0,
) -> PipelineModel:
    """Glorot-initialize a model for `genome`. The gate vector starts at zero."""
    if isinstance(genome, str):
        genome = Genome.parse(genome)
    if gate_enabled and genome.ops[0] == PROPAGATE:
        raise InvalidGenomeError("gated pipelines must start with a T op")
    rng = substream(seed, "init")
    weights = []
    for fan_in, fan_out in weight_shapes(genome, in_dim, hidden_dim, out_dim):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
    gate = np.zeros((hidden_dim, 1)) if gate_enabled else None
    return PipelineModel(
        genome=genome,
        weights=weights,
        gate=gate,
        gate_enabled=gate_enabled,
        skip_enabled=skip_enabled,
        input_dropout=input_dropout,
        layer_dropout=layer_dropout,
        in_dim=in_dim,
        hidden_dim=hidden_dim,
        out_dim=out_dim,
    )


@dataclass
class ForwardResult:
    logits: tp.Tensor
    tape: tp.Tape
    params: list[tp.Tensor]
    layer_outputs: list[np.ndarray] | None = None
    gate_weights: list[np.ndarray] | None = None


def forward(
    model: PipelineModel,
    a_hat: SparseGraph,
    x: np.ndarray,
    *,
    mode: str = "eval",
    rng: np.random.Generator | None = None,
    collect: bool = False,
) -> ForwardResult:
    """Run the pipeline, recording gradients for the model parameters.

    `mode` is "train" (dropout active, drawn from `rng`) or "eval"
    (deterministic, dropout disabled). With `collect`, the per-layer outputs
    and the per-aggregation gate weight matrices are returned as plain
    arrays for inspection.
    """
    if mode not in ("train", "eval"):
        raise ContractViolation(f"unknown mode {mode!r}")
    training = mode == "train"
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != a_hat.num_nodes or x.shape[1] != model.in_dim:
        raise ContractViolation(
            f"feature matrix {x.shape} does not match {a_hat.num_nodes} nodes x {model.in_dim} dims"
        )

    genome = model.genome
    tape = tp.Tape()
    weight_ts = [tape.parameter(w) for w in model.weights]
    gate_t = tape.parameter(model.gate) if model.gate is not None else None
    params = list(weight_ts) + ([gate_t] if gate_t is not None else [])

    o_prev = tp.dropout(tape.constant(x), model.input_dropout, training, rng)
    p_outputs: list[tp.Tensor] = []
    t_outputs: list[tp.Tensor] = []
    layer_outputs: list[np.ndarray] = []
    gate_weights: list[np.ndarray] = []
    t_index = 0
    last = len(genome) - 1

    for l, op in enumerate(genome.ops):
        if op == PROPAGATE:
            z = tp.spmm_const(a_hat, o_prev)
            p_outputs.append(z)
            if model.gate_enabled and genome.ops[l + 1] == TRANSFORM:
                o_prev = _gated_combination(p_outputs, gate_t, gate_weights if collect else None)
            else:
                o_prev = z
        else:
            z = o_prev
            if model.skip_enabled and len(t_outputs) >= 2:
                for earlier in t_outputs[:-1]:
                    z = tp.add(z, earlier)
            z = tp.dropout(z, model.layer_dropout, training, rng)
            h = tp.matmul(z, weight_ts[t_index])
            t_index += 1
            if l == last:
                o_prev = h
            else:
                o_prev = tp.relu(h)
                t_outputs.append(o_prev)
        if collect:
            layer_outputs.append(o_prev.values)

    return ForwardResult(
        logits=o_prev,
        tape=tape,
        params=params,
        layer_outputs=layer_outputs if collect else None,
        gate_weights=gate_weights if collect else None,
    )


def _gated_combination(
    p_outputs: list[tp.Tensor],
    gate_t: tp.Tensor,
    collected: list[np.ndarray] | None,
) -> tp.Tensor:
    scores = [tp.sigmoid(tp.matmul(z, gate_t)) for z in p_outputs]
    weights = tp.row_softmax(tp.concat_cols(scores))
    if collected is not None:
        collected.append(weights.values)
    mixed = None
    for i, z in enumerate(p_outputs):
        term = tp.scale_cols(z, tp.slice_cols(weights, i, i + 1))
        mixed = term if mixed is None else tp.add(mixed, term)
    return mixed
