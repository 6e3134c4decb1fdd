"""Architecture genomes: sequences over the two pipeline ops P and T."""

from __future__ import annotations

from dataclasses import dataclass

from ptnas.errors import InvalidGenomeError

PROPAGATE = "P"
TRANSFORM = "T"


@dataclass(frozen=True)
class Genome:
    """An op sequence, stored as a compact uppercase string over {P, T}.

    Always non-empty and ending with a T (the classifier head). Whether the
    first op must also be a T depends on the gating flag and is checked at
    model-build time.
    """

    ops: str

    def __post_init__(self):
        if not self.ops:
            raise InvalidGenomeError("genome must be non-empty")
        for i, ch in enumerate(self.ops):
            if ch not in (PROPAGATE, TRANSFORM):
                raise InvalidGenomeError(f"invalid op {ch!r} at position {i}; expected P or T")
        if self.ops[-1] != TRANSFORM:
            raise InvalidGenomeError("genome must end with a T op")

    @classmethod
    def parse(cls, text: str) -> "Genome":
        """Accept compact (`TPPT`) or comma-separated (`T,P,P,T`) form, any case."""
        cleaned = text.strip().upper()
        if "," in cleaned:
            cleaned = "".join(part.strip() for part in cleaned.split(","))
        return cls(cleaned)

    def __str__(self) -> str:
        return self.ops

    def __len__(self) -> int:
        return len(self.ops)

    def __iter__(self):
        return iter(self.ops)

    @property
    def p_layers(self) -> tuple[int, ...]:
        return tuple(i for i, op in enumerate(self.ops) if op == PROPAGATE)

    @property
    def t_layers(self) -> tuple[int, ...]:
        return tuple(i for i, op in enumerate(self.ops) if op == TRANSFORM)

    @property
    def p_count(self) -> int:
        return len(self.p_layers)

    @property
    def t_count(self) -> int:
        return len(self.t_layers)

    def interior(self) -> str:
        return self.ops[1:-1]


def fixed_pattern_space(space: str, max_depth: int) -> list[tuple[int, int, Genome]]:
    """Enumerate one of the three fixed-pipeline baseline spaces.

    Returns (p_depth, t_depth, genome) triples. `p-first` is P^a T^b with the
    classifier counted inside b, `t-first` is T^b P^a plus a trailing
    classifier T, and `alternate` is (PT)^a.
    """
    if max_depth < 1:
        raise InvalidGenomeError("max_depth must be at least 1")
    out: list[tuple[int, int, Genome]] = []
    if space == "p-first":
        for a in range(1, max_depth + 1):
            for b in range(1, max_depth + 1):
                out.append((a, b, Genome("P" * a + "T" * b)))
    elif space == "t-first":
        for b in range(1, max_depth + 1):
            for a in range(1, max_depth + 1):
                out.append((a, b, Genome("T" * b + "P" * a + "T")))
    elif space == "alternate":
        for a in range(1, max_depth + 1):
            out.append((a, a, Genome("PT" * a)))
    else:
        raise InvalidGenomeError(f"unknown architecture space {space!r}")
    return out
