"""Aging evolution over pipeline genomes.

The population is a fixed-size FIFO: every generation evaluates one mutated
child of a tournament-selected parent, appends it, and evicts the oldest
member regardless of fitness. The best individual is tracked over everything
ever evaluated, including evicted members.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from ptnas.errors import ContractViolation, MutationError
from ptnas.genome import PROPAGATE, TRANSFORM, Genome
from ptnas.rng import substream


@dataclass(frozen=True)
class Individual:
    genome: Genome
    fitness: float
    birth_index: int


@dataclass
class SearchConfig:
    k: int = 20
    generations: int = 500
    m: int = 5
    init_min: int = 2
    init_max: int = 8
    max_len: int = 64
    seed: int = 0

    def validate(self) -> None:
        if not 1 <= self.m < self.k:
            raise ContractViolation("tournament size must satisfy 1 <= m < k")
        if self.init_min < 1 or self.init_max < self.init_min:
            raise ContractViolation("bad interior-length bounds")
        if self.max_len < self.init_max + 2:
            raise ContractViolation("max_len must cover the largest initial genome")


def random_genome(rng: np.random.Generator, bounds: tuple[int, int]) -> Genome:
    """T + interior + T, interior length uniform in bounds, ops fair coin flips."""
    lo, hi = bounds
    if lo < 1 or hi < lo:
        raise ContractViolation("bad interior-length bounds")
    length = int(rng.integers(lo, hi + 1))
    interior = "".join(PROPAGATE if rng.integers(2) == 0 else TRANSFORM for _ in range(length))
    return Genome(TRANSFORM + interior + TRANSFORM)


_INSERT_P, _INSERT_T, _P_TO_T, _T_TO_P = range(4)


def mutate(genome: Genome, rng: np.random.Generator, max_len: int) -> Genome:
    """Apply one uniformly chosen applicable edit: insert P, insert T, or flip
    one interior op. Insertions go strictly after the first op and at or
    before the final op, so the leading/trailing T wrapping survives.
    """
    ops = list(genome.ops)
    n = len(ops)
    interior_p = [i for i in range(1, n - 1) if ops[i] == PROPAGATE]
    interior_t = [i for i in range(1, n - 1) if ops[i] == TRANSFORM]
    cases = []
    if n < max_len:
        cases += [_INSERT_P, _INSERT_T]
    if interior_p:
        cases.append(_P_TO_T)
    if interior_t:
        cases.append(_T_TO_P)
    if not cases:
        raise MutationError(f"no applicable mutation for {genome} at max_len={max_len}")
    case = cases[int(rng.integers(len(cases)))]
    if case in (_INSERT_P, _INSERT_T):
        pos = 1 + int(rng.integers(n - 1))
        ops.insert(pos, PROPAGATE if case == _INSERT_P else TRANSFORM)
    elif case == _P_TO_T:
        ops[interior_p[int(rng.integers(len(interior_p)))]] = TRANSFORM
    else:
        ops[interior_t[int(rng.integers(len(interior_t)))]] = PROPAGATE
    return Genome("".join(ops))


def tournament_select(pop: Sequence[Individual], m: int, rng: np.random.Generator) -> Individual:
    """Best of `m` members sampled without replacement; ties go to the oldest."""
    if not 1 <= m <= len(pop):
        raise ContractViolation(f"tournament size {m} out of range for population {len(pop)}")
    picks = rng.choice(len(pop), size=m, replace=False)
    return min((pop[i] for i in picks), key=lambda ind: (-ind.fitness, ind.birth_index))


@dataclass
class SearchResult:
    best: Individual
    history: list[dict] = field(repr=False)
    final_population: list[Individual] = field(repr=False)


def history_line(record: dict) -> str:
    return json.dumps({"gen": record["gen"], "genome": record["genome"], "fitness": record["fitness"], "birth": record["birth"]})


def evolve_search(
    config: SearchConfig,
    eval_fn: Callable[[Genome], float],
    observer: Callable[[int, tuple[Individual, ...]], None] | None = None,
    history_path: str | Path | None = None,
) -> SearchResult:
    """Run the aging-evolution loop.

    `eval_fn` maps a genome to its fitness and must be deterministic for the
    run. `observer`, when given, is called with (generation, population)
    after initialization and after every generation. With `history_path` the
    history is appended line by line as it happens, so an aborted run leaves
    a flushed log behind.
    """
    config.validate()
    rng_mut = substream(config.seed, "mutation")
    rng_tour = substream(config.seed, "tournament")
    pop: deque[Individual] = deque()
    history: list[dict] = []
    best: Individual | None = None
    sink = open(history_path, "w") if history_path is not None else None
    try:
        for birth in range(config.k):
            genome = random_genome(rng_mut, (config.init_min, config.init_max))
            ind = Individual(genome, float(eval_fn(genome)), birth)
            pop.append(ind)
            _log(history, sink, 0, ind, parent=None)
            best = _better(best, ind)
        if observer is not None:
            observer(0, tuple(pop))
        for gen in range(1, config.generations + 1):
            child_genome = None
            for _ in range(10 * config.k):
                parent = tournament_select(pop, config.m, rng_tour)
                try:
                    child_genome = mutate(parent.genome, rng_mut, config.max_len)
                    break
                except MutationError:
                    continue
            if child_genome is None:
                raise MutationError("population contains no mutable genome")
            child = Individual(child_genome, float(eval_fn(child_genome)), config.k + gen - 1)
            pop.append(child)
            pop.popleft()
            _log(history, sink, gen, child, parent=parent.birth_index)
            best = _better(best, child)
            if observer is not None:
                observer(gen, tuple(pop))
    finally:
        if sink is not None:
            sink.close()
    return SearchResult(best=best, history=history, final_population=list(pop))


def _log(history: list[dict], sink, gen: int, ind: Individual, parent: int | None) -> None:
    # the on-disk log keeps the four-key line format; the in-memory history
    # additionally tracks lineage for analysis
    record = {"gen": gen, "genome": str(ind.genome), "fitness": ind.fitness, "birth": ind.birth_index, "parent": parent}
    history.append(record)
    if sink is not None:
        sink.write(history_line(record) + "\n")
        sink.flush()


def _better(best: Individual | None, candidate: Individual) -> Individual:
    if best is None or candidate.fitness > best.fitness:
        return candidate
    return best
