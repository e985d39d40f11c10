"""Canonical score vectors on the bounded 2Δ-lattice.

A vector on the lattice has its maximum at 0 and every entry in
``{0, -2Δ, ..., -2Δk}``. Vectors are stored by *level* (entry ``-2Δ * level``),
sorted so the levels are nondecreasing; all permutations of a canonical vector
are represented once together with their count.
"""

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from typing import List

from .errors import InvalidArgumentError, SizeLimitError


DEFAULT_LATTICE_CAP = 1_000_000


@dataclass(frozen=True)
class LatticeVector:
    """A canonical lattice vector given by its nondecreasing levels."""

    levels: tuple[int, ...]
    delta: float = 1.0

    def __post_init__(self) -> None:
        levels = tuple(int(level) for level in self.levels)
        if not levels or levels[0] != 0 or list(levels) != sorted(levels):
            message = f"Lattice levels must be nondecreasing and start at 0, got {self.levels}"
            raise InvalidArgumentError(message)
        object.__setattr__(self, "levels", levels)

    @property
    def n(self) -> int:
        return len(self.levels)

    @property
    def entries(self) -> tuple[float, ...]:
        spacing = 2.0 * self.delta
        return tuple(-spacing * level if level else 0.0 for level in self.levels)

    @property
    def n_best(self) -> int:
        return self.levels.count(0)

    @property
    def max_level(self) -> int:
        return self.levels[-1]

    @property
    def multiplicity(self) -> int:
        """Number of distinct orderings of this vector."""
        denominator = 1
        for count in Counter(self.levels).values():
            denominator *= math.factorial(count)
        return math.factorial(self.n) // denominator

    def classes(self) -> List[tuple[int, int]]:
        """``(level, count)`` pairs in increasing level order."""
        return sorted(Counter(self.levels).items())

    def moved(self, from_level: int, to_level: int) -> "LatticeVector":
        """Move one entry between levels and re-canonicalize.

        When the move empties level 0 the whole vector is shifted up so its
        maximum is 0 again.
        """
        if from_level not in self.levels:
            message = f"No entry at level {from_level} in {self.levels}"
            raise InvalidArgumentError(message)
        levels = list(self.levels)
        levels.remove(from_level)
        levels.append(to_level)
        top = min(levels)
        return LatticeVector(tuple(sorted(level - top for level in levels)), self.delta)

    def key(self) -> tuple[int, ...]:
        return self.levels


def canonical_count(n: int, k: int) -> int:
    """Number of canonical vectors for ``n`` candidates and depth ``k``."""
    return math.comb(n - 1 + k, k)


def raw_count(n: int, k: int) -> int:
    """Number of lattice vectors counted with all orderings."""
    return (k + 1) ** n - k**n


def enumerate_lattice(
    n: int, k: int, delta: float = 1.0, cap: int = DEFAULT_LATTICE_CAP
) -> List[LatticeVector]:
    """List every canonical vector of the bounded lattice.

    Raises:
        InvalidArgumentError: ``n < 1`` or ``k < 0``.
        SizeLimitError: More than ``cap`` canonical vectors.
    """
    if n < 1 or k < 0:
        message = f"Lattice needs n >= 1 and k >= 0, got n={n}, k={k}"
        raise InvalidArgumentError(message)
    count = canonical_count(n, k)
    if count > cap:
        message = f"Lattice with n={n}, k={k} has {count} canonical vectors (cap {cap})"
        raise SizeLimitError(message, size=count, cap=cap, hint="Reduce n or k")
    return [
        LatticeVector((0, *rest), delta)
        for rest in itertools.combinations_with_replacement(range(k + 1), n - 1)
    ]
