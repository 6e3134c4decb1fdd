"""Full-batch training and evaluation of one genome on one dataset."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from ptnas.errors import ContractViolation, TrainingDivergedError
from ptnas.genome import Genome
from ptnas.graph import DatasetBundle, SparseGraph, normalize_adjacency
from ptnas.model import build_model, forward
from ptnas.optim import AdamState, adam_step
from ptnas.rng import substream
from ptnas.smoothness import graph_smoothness
from ptnas.tape import backward, softmax_cross_entropy

# Per-dataset training settings; anything not listed falls back to the
# desk-scale defaults in TrainConfig. The 512-hidden entry resolves the
# pubmed/ogbn sizing ambiguity in favor of pubmed.
DATASET_DEFAULTS: dict[str, dict] = {
    "cora": dict(lr=0.02, hidden=128, input_dropout=0.5, layer_dropout=0.8, epochs=200),
    "citeseer": dict(lr=0.03, hidden=256, input_dropout=0.5, layer_dropout=0.8, epochs=200),
    "pubmed": dict(lr=0.1, hidden=512, input_dropout=0.3, layer_dropout=0.5, epochs=200),
    "ogbn-arxiv": dict(lr=0.001, hidden=128, input_dropout=0.3, layer_dropout=0.5, epochs=500),
}


@dataclass
class TrainConfig:
    lr: float = 0.02
    weight_decay: float = 5e-4
    epochs: int = 200
    hidden: int = 64
    input_dropout: float = 0.1
    layer_dropout: float = 0.1
    gate_enabled: bool = False
    skip_enabled: bool = False
    eval_repeats: int = 1

    def validate(self) -> None:
        if self.epochs < 1:
            raise ContractViolation("epochs must be >= 1")
        for rate in (self.input_dropout, self.layer_dropout):
            if not 0.0 <= rate < 1.0:
                raise ContractViolation(f"dropout rate {rate} outside [0,1)")
        if self.eval_repeats < 1:
            raise ContractViolation("eval_repeats must be >= 1")


def default_config(dataset_name: str, **overrides) -> TrainConfig:
    base = DATASET_DEFAULTS.get(dataset_name.lower(), {})
    return replace(TrainConfig(**base), **overrides)


@dataclass
class EvalResult:
    """Metrics from one training run; test accuracy is read at the best-val epoch."""

    best_val_acc: float
    test_acc_at_best_val: float
    final_train_loss: float
    curve: list[tuple[float, float]]
    final_smoothness: float
    best_epoch: int
    wall_time: float = field(compare=False, default=0.0)
    best_params: list[np.ndarray] | None = field(compare=False, repr=False, default=None)

    def to_dict(self, include_timing: bool = True) -> dict:
        out = {
            "best_val_acc": self.best_val_acc,
            "test_acc_at_best_val": self.test_acc_at_best_val,
            "final_train_loss": self.final_train_loss,
            "curve": [[loss, acc] for loss, acc in self.curve],
            "final_smoothness": self.final_smoothness,
            "best_epoch": self.best_epoch,
        }
        if include_timing:
            out["wall_time"] = self.wall_time
        return out


def accuracy(logits: np.ndarray, labels: np.ndarray, idx: np.ndarray) -> float:
    pred = logits[idx].argmax(axis=1)
    return float(np.mean(pred == labels[idx]))


def prepare_adjacency(bundle: DatasetBundle) -> SparseGraph:
    g = bundle.graph
    return g if g.normalized else normalize_adjacency(g)


def train_eval(
    genome: Genome | str,
    bundle: DatasetBundle,
    cfg: TrainConfig,
    seed: int,
    a_hat: SparseGraph | None = None,
) -> EvalResult:
    """Train with full-batch Adam and report metrics at the best-val epoch.

    Deterministic per seed: weight init draws from the `init` substream,
    dropout masks from `dropout`. Raises TrainingDivergedError when the
    training loss leaves the finite range. Pass a pre-normalized `a_hat`
    to amortize normalization over repeated runs.
    """
    if isinstance(genome, str):
        genome = Genome.parse(genome)
    cfg.validate()
    if a_hat is None:
        a_hat = prepare_adjacency(bundle)
    x, y = bundle.features, bundle.labels
    train_idx, val_idx, test_idx = (bundle.splits[k] for k in ("train", "val", "test"))

    model = build_model(
        genome,
        bundle.num_features,
        cfg.hidden,
        bundle.num_classes,
        gate_enabled=cfg.gate_enabled,
        skip_enabled=cfg.skip_enabled,
        input_dropout=cfg.input_dropout,
        layer_dropout=cfg.layer_dropout,
        seed=seed,
    )
    rng_drop = substream(seed, "dropout")
    state = AdamState.for_params(model.parameters())

    start = time.perf_counter()
    curve: list[tuple[float, float]] = []
    best_val, best_epoch, test_at_best = -1.0, 0, 0.0
    best_params: list[np.ndarray] = model.snapshot()
    for epoch in range(1, cfg.epochs + 1):
        res = forward(model, a_hat, x, mode="train", rng=rng_drop)
        loss_t = softmax_cross_entropy(res.logits, y, train_idx)
        loss = loss_t.item()
        if not np.isfinite(loss):
            res.tape.release()
            raise TrainingDivergedError(epoch)
        backward(res.tape, loss_t)
        adam_step(model.parameters(), [p.grad for p in res.params], state, cfg.lr, cfg.weight_decay)
        res.tape.release()

        eval_res = forward(model, a_hat, x, mode="eval")
        logits = eval_res.logits.values
        eval_res.tape.release()
        val_acc = accuracy(logits, y, val_idx)
        if val_acc > best_val:
            best_val, best_epoch = val_acc, epoch
            test_at_best = accuracy(logits, y, test_idx)
            best_params = model.snapshot()
        curve.append((loss, val_acc))
    wall = time.perf_counter() - start

    model.restore(best_params)
    final_out = forward(model, a_hat, x, mode="eval", collect=True)
    final_smoothness = graph_smoothness(final_out.layer_outputs[-1])
    final_out.tape.release()

    return EvalResult(
        best_val_acc=best_val,
        test_acc_at_best_val=test_at_best,
        final_train_loss=curve[-1][0],
        curve=curve,
        final_smoothness=final_smoothness,
        best_epoch=best_epoch,
        wall_time=wall,
        best_params=best_params,
    )


@dataclass
class RepeatResult:
    mean_test_acc: float
    std_test_acc: float
    results: list[EvalResult]

    def to_dict(self, include_timing: bool = True) -> dict:
        return {
            "mean_test_acc": self.mean_test_acc,
            "std_test_acc": self.std_test_acc,
            "per_seed": [r.to_dict(include_timing) for r in self.results],
        }


def repeat_eval(
    genome: Genome | str,
    bundle: DatasetBundle,
    cfg: TrainConfig,
    seeds: Sequence[int],
) -> RepeatResult:
    """Mean and sample standard deviation of test accuracy across seeds."""
    if len(seeds) < 2:
        raise ContractViolation("repeat_eval needs at least 2 seeds")
    a_hat = prepare_adjacency(bundle)
    results = [train_eval(genome, bundle, cfg, seed, a_hat=a_hat) for seed in seeds]
    accs = np.array([r.test_acc_at_best_val for r in results])
    std = float(accs.std(ddof=1)) if accs.size > 1 else 0.0
    return RepeatResult(float(accs.mean()), std, results)


def fitness_fn(bundle: DatasetBundle, cfg: TrainConfig, seed: int):
    """Search fitness: best validation accuracy, averaged over eval_repeats seeds."""
    a_hat = prepare_adjacency(bundle)

    def fitness(genome: Genome) -> float:
        vals = [
            train_eval(genome, bundle, cfg, seed + r, a_hat=a_hat).best_val_acc
            for r in range(cfg.eval_repeats)
        ]
        return float(np.mean(vals))

    return fitness
