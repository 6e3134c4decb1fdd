"""Adam with bias correction, plus a central-difference gradient checker."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ptnas.errors import ContractViolation
from ptnas.tape import Tensor, backward


@dataclass
class AdamState:
    """Per-parameter moment estimates. Arrays are aligned with the parameter list."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: Sequence[np.ndarray]) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params])


def adam_step(
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    state: AdamState,
    lr: float,
    weight_decay: float = 0.0,
) -> None:
    """One in-place Adam update. Weight decay is plain L2 added to the gradient."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ContractViolation("params, grads, and state must be aligned")
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ContractViolation("gradient shape does not match parameter")
        if weight_decay:
            g = g + weight_decay * p
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


def finite_diff_check(
    loss_fn: Callable[[], Tensor],
    params: Sequence[np.ndarray],
    eps: float = 1e-5,
) -> float:
    """Max relative error between reverse-mode and central-difference gradients.

    `loss_fn` must rebuild the scalar loss on a fresh tape each call, with its
    registered parameters wrapping the arrays in `params` in the same order
    (no copies), and must be deterministic (dropout disabled). Relative error
    uses denominator max(|analytic|, |numeric|, 1e-8).
    """
    loss = loss_fn()
    backward(loss.tape, loss)
    if len(loss.tape.params) != len(params):
        raise ContractViolation("loss_fn registered a different number of parameters")
    analytic = [p.grad.copy() for p in loss.tape.params]
    loss.tape.release()

    def evaluate() -> float:
        t = loss_fn()
        value = t.item()
        t.tape.release()
        return value

    worst = 0.0
    for arr, grad in zip(params, analytic):
        flat = arr.reshape(-1)
        gflat = grad.reshape(-1)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + eps
            f_plus = evaluate()
            flat[i] = saved - eps
            f_minus = evaluate()
            flat[i] = saved
            numeric = (f_plus - f_minus) / (2.0 * eps)
            denom = max(abs(numeric), abs(gflat[i]), 1e-8)
            worst = max(worst, abs(numeric - gflat[i]) / denom)
    return worst
