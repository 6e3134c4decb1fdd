"""Reverse-mode differentiation over dense float64 matrices.

A `Tape` records every operation whose result depends on a parameter, in
execution order. `backward` replays the records once, in reverse, pushing
gradients from a scalar loss back to every registered parameter. Tensors
holding constants (inputs, adjacency products of constants) are computed
eagerly and never recorded, so no gradient work is spent on them.

All arrays are 2-D float64. There is no broadcasting beyond the primitives
defined here.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ptnas.errors import ContractViolation
from ptnas.graph import SparseGraph, spmm


class Tensor:
    """A dense matrix tied to a tape. `grad` is populated by `backward`."""

    __slots__ = ("values", "tape", "node_id", "requires_grad", "grad")

    def __init__(self, values: np.ndarray, tape: "Tape", node_id: int | None, requires_grad: bool):
        self.values = values
        self.tape = tape
        self.node_id = node_id
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def item(self) -> float:
        if self.values.shape != (1, 1):
            raise ContractViolation(f"item() on tensor of shape {self.values.shape}")
        return float(self.values[0, 0])


class Tape:
    """Ordered record of differentiable operations plus the parameter registry."""

    def __init__(self):
        self.records: list[tuple[Tensor, tuple[Tensor, ...], Callable]] = []
        self.params: list[Tensor] = []

    def constant(self, values: np.ndarray) -> Tensor:
        return Tensor(_as_matrix(values), self, None, requires_grad=False)

    def parameter(self, values: np.ndarray) -> Tensor:
        t = Tensor(_as_matrix(values), self, None, requires_grad=True)
        self.params.append(t)
        return t

    def release(self) -> None:
        """Drop the recorded graph.

        Tensors point at their tape and the tape's records point back at the
        tensors, a cycle the reference counter cannot free on its own; the
        captured activation buffers are large enough that waiting for the
        cyclic collector exhausts memory in long training loops. Call this
        once a forward pass (and any backward) is done with.
        """
        self.records.clear()
        self.params.clear()


def _as_matrix(values: np.ndarray) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ContractViolation(f"tensors must be 2-D, got shape {arr.shape}")
    return arr


def _record(tape: Tape, values: np.ndarray, parents: tuple[Tensor, ...], backward_fn: Callable) -> Tensor:
    requires = any(p.requires_grad for p in parents)
    out = Tensor(values, tape, len(tape.records) if requires else None, requires)
    if requires:
        tape.records.append((out, parents, backward_fn))
    return out


def _same_tape(*tensors: Tensor) -> Tape:
    tape = tensors[0].tape
    if any(t.tape is not tape for t in tensors):
        raise ContractViolation("operands live on different tapes")
    return tape


def matmul(a: Tensor, b: Tensor) -> Tensor:
    tape = _same_tape(a, b)
    if a.shape[1] != b.shape[0]:
        raise ContractViolation(f"matmul inner dims differ: {a.shape} @ {b.shape}")
    av, bv = a.values, b.values

    def bwd(g):
        return (g @ bv.T if a.requires_grad else None, av.T @ g if b.requires_grad else None)

    return _record(tape, av @ bv, (a, b), bwd)


def add(a: Tensor, b: Tensor) -> Tensor:
    tape = _same_tape(a, b)
    if a.shape != b.shape:
        raise ContractViolation(f"add shape mismatch: {a.shape} vs {b.shape}")
    return _record(tape, a.values + b.values, (a, b), lambda g: (g, g))


def relu(a: Tensor) -> Tensor:
    mask = a.values > 0
    return _record(a.tape, np.where(mask, a.values, 0.0), (a,), lambda g: (g * mask,))


def sigmoid(a: Tensor) -> Tensor:
    x = a.values
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return _record(a.tape, out, (a,), lambda g: (g * out * (1.0 - out),))


def row_softmax(a: Tensor) -> Tensor:
    shifted = a.values - a.values.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=1, keepdims=True)

    def bwd(g):
        return ((g - (g * out).sum(axis=1, keepdims=True)) * out,)

    return _record(a.tape, out, (a,), bwd)


def scale_cols(a: Tensor, w: Tensor) -> Tensor:
    """Scale every column of `a` by the per-row weights in column vector `w`."""
    tape = _same_tape(a, w)
    if w.shape != (a.shape[0], 1):
        raise ContractViolation(f"scale_cols weight shape {w.shape} does not match rows of {a.shape}")
    av, wv = a.values, w.values

    def bwd(g):
        ga = g * wv if a.requires_grad else None
        gw = (g * av).sum(axis=1, keepdims=True) if w.requires_grad else None
        return (ga, gw)

    return _record(tape, av * wv, (a, w), bwd)


def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    if not parts:
        raise ContractViolation("concat_cols needs at least one tensor")
    tape = _same_tape(*parts)
    rows = parts[0].shape[0]
    if any(p.shape[0] != rows for p in parts):
        raise ContractViolation("concat_cols row counts differ")
    widths = [p.shape[1] for p in parts]
    bounds = np.cumsum([0] + widths)

    def bwd(g):
        return tuple(g[:, bounds[i] : bounds[i + 1]] if p.requires_grad else None for i, p in enumerate(parts))

    return _record(tape, np.concatenate([p.values for p in parts], axis=1), tuple(parts), bwd)


def slice_cols(a: Tensor, start: int, stop: int) -> Tensor:
    if not (0 <= start < stop <= a.shape[1]):
        raise ContractViolation(f"slice_cols [{start}:{stop}] out of range for {a.shape}")

    def bwd(g):
        full = np.zeros_like(a.values)
        full[:, start:stop] = g
        return (full,)

    return _record(a.tape, a.values[:, start:stop], (a,), bwd)


def sum_all(a: Tensor) -> Tensor:
    def bwd(g):
        return (np.full_like(a.values, g[0, 0]),)

    return _record(a.tape, np.array([[a.values.sum()]]), (a,), bwd)


def spmm_const(a: SparseGraph, h: Tensor) -> Tensor:
    """Propagate `h` through the constant normalized adjacency.

    The adjacency carries no gradient; the incoming gradient is propagated
    back through the (symmetric) adjacency itself.
    """
    out = spmm(a, h.values)
    return _record(h.tape, out, (h,), lambda g: (spmm(a, g),))


def dropout(h: Tensor, rate: float, training: bool, rng: np.random.Generator | None) -> Tensor:
    """Inverted dropout: Bernoulli(1-rate) mask with 1/(1-rate) rescaling.

    Identity when `rate` is 0 or in eval mode; those paths draw nothing from
    the stream.
    """
    if not 0.0 <= rate < 1.0:
        raise ContractViolation(f"dropout rate {rate} outside [0,1)")
    if not training or rate == 0.0:
        return h
    if rng is None:
        raise ContractViolation("training-mode dropout needs a random stream")
    mask = (rng.random(h.shape) >= rate) / (1.0 - rate)
    return _record(h.tape, h.values * mask, (h,), lambda g: (g * mask,))


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray, mask: np.ndarray) -> Tensor:
    """Mean negative log-softmax likelihood over the rows listed in `mask`."""
    mask = np.asarray(mask, dtype=np.int64)
    if mask.size == 0:
        raise ContractViolation("softmax_cross_entropy needs a non-empty mask")
    labels = np.asarray(labels, dtype=np.int64)
    picked = labels[mask]
    if picked.min() < 0 or picked.max() >= logits.shape[1]:
        raise ContractViolation("label out of range for logits")
    rows = logits.values[mask]
    shifted = rows - rows.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    nll = lse[:, 0] - shifted[np.arange(mask.size), picked]
    value = np.array([[nll.mean()]])

    def bwd(g):
        probs = np.exp(shifted - lse)
        probs[np.arange(mask.size), picked] -= 1.0
        full = np.zeros_like(logits.values)
        full[mask] = probs * (g[0, 0] / mask.size)
        return (full,)

    return _record(logits.tape, value, (logits,), bwd)


def backward(tape: Tape, loss: Tensor, seed_grad: np.ndarray | None = None) -> None:
    """Install d(loss)/d(param) on every parameter registered with the tape.

    Parameters the loss does not depend on receive a zero gradient. The
    records are visited exactly once, in reverse recording order.
    """
    if loss.tape is not tape:
        raise ContractViolation("loss does not belong to this tape")
    if loss.shape != (1, 1):
        raise ContractViolation(f"loss must be 1x1, got {loss.shape}")
    grads: dict[int, np.ndarray] = {}
    if seed_grad is None:
        seed_grad = np.ones((1, 1))
    grads[id(loss)] = np.asarray(seed_grad, dtype=np.float64).reshape(1, 1)
    for out, parents, backward_fn in reversed(tape.records):
        g = grads.pop(id(out), None)
        if g is None:
            continue
        for parent, pg in zip(parents, backward_fn(g)):
            if pg is None or not parent.requires_grad:
                continue
            acc = grads.get(id(parent))
            if acc is None:
                grads[id(parent)] = pg.copy() if pg is g else pg
            else:
                acc += pg
    for p in tape.params:
        p.grad = grads.get(id(p), np.zeros_like(p.values))
