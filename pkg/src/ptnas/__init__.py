"""Deep, flexible GNN pipeline search over propagation/transformation sequences."""

__version__ = "0.1.0"

from ptnas.errors import (
    ContractViolation,
    DatasetLoadError,
    InvalidGenomeError,
    MutationError,
    TrainingDivergedError,
)
from ptnas.genome import Genome
from ptnas.graph import DatasetBundle, SparseGraph, gen_sbm, load_dataset, normalize_adjacency, save_dataset

__all__ = [
    "ContractViolation",
    "DatasetLoadError",
    "InvalidGenomeError",
    "MutationError",
    "TrainingDivergedError",
    "Genome",
    "DatasetBundle",
    "SparseGraph",
    "gen_sbm",
    "load_dataset",
    "normalize_adjacency",
    "save_dataset",
]
