"""Seeded random streams.

All randomness in the package flows from a single integer root seed. Each
feature draws from its own named substream so that, e.g., adding an extra
dropout call never perturbs the mutation sequence of a search run. Stream
names in use: ``init`` (weight initialization), ``dropout`` (training-time
masks), ``mutation`` (genome construction and edits), ``tournament``
(selection sampling), ``sbm`` (synthetic graph generation and edge
perturbation).
"""

import hashlib

import numpy as np


def substream(root_seed: int, name: str) -> np.random.Generator:
    """Return an independent generator for `name` derived from `root_seed`.

    The name is folded in through sha256 so the derivation is stable across
    platforms and Python processes (unlike the builtin salted `hash`).
    """
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    tag = int.from_bytes(digest[:8], "little")
    return np.random.default_rng(np.random.SeedSequence([int(root_seed) & 0xFFFFFFFFFFFFFFFF, tag]))
