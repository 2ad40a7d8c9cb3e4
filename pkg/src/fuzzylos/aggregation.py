"""Linear convex sums, linear order statistics and the Choquet integral.

Every Choquet evaluation picks a walk through the subset lattice (the
descending sort of the input) and then applies that walk's weight vector
as a plain weighted sum of the sorted inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .measure import FuzzyMeasure


def _vector(h, name="h") -> np.ndarray:
    h = np.asarray(h, dtype=float)
    if h.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    return h


def _check_lengths(w: np.ndarray, h: np.ndarray) -> None:
    if w.shape != h.shape:
        raise ValueError(f"length mismatch: weights {w.shape[0]} vs inputs {h.shape[0]}")


def lcs_eval(w, h) -> float:
    """Weighted sum ``sum_i w_i h_i``."""
    w, h = _vector(w, "w"), _vector(h)
    _check_lengths(w, h)
    return float(np.dot(w, h))


# -- walks --------------------------------------------------------------------


def permutation_rank(perm: Sequence[int]) -> int:
    """Lexicographic rank of a permutation of ``0..n-1`` (factorial base)."""
    n = len(perm)
    remaining = list(range(n))
    rank = 0
    for i, p in enumerate(perm):
        pos = remaining.index(p)
        rank += pos * math.factorial(n - 1 - i)
        remaining.pop(pos)
    return rank


def permutation_unrank(rank: int, n: int) -> tuple[int, ...]:
    if not 0 <= rank < math.factorial(n):
        raise ValueError(f"rank {rank} out of range for n={n}")
    remaining = list(range(n))
    out = []
    for i in range(n - 1, -1, -1):
        pos, rank = divmod(rank, math.factorial(i))
        out.append(remaining.pop(pos))
    return tuple(out)


@dataclass(frozen=True)
class Walk:
    """A sort of the sources: ``perm[j]`` is the index of the j-th largest input."""

    perm: tuple[int, ...]

    def __post_init__(self):
        perm = tuple(int(p) for p in self.perm)
        if sorted(perm) != list(range(len(perm))):
            raise ValueError(f"{perm} is not a permutation of 0..{len(perm) - 1}")
        object.__setattr__(self, "perm", perm)

    @classmethod
    def from_rank(cls, rank: int, n: int) -> Walk:
        return cls(permutation_unrank(rank, n))

    @property
    def n(self) -> int:
        return len(self.perm)

    @property
    def rank(self) -> int:
        return permutation_rank(self.perm)

    def chain(self) -> np.ndarray:
        """Masks of the nested subsets A_1 c A_2 c ... c A_n = X."""
        return np.cumsum([1 << p for p in self.perm])

    def __len__(self) -> int:
        return len(self.perm)


def sort_walk(h) -> Walk:
    """Descending sort of ``h``; equal inputs keep ascending source order."""
    h = _vector(h)
    return Walk(tuple(np.argsort(-h, kind="stable")))


def los_eval(w, h) -> float:
    """Order statistic: weights applied to ``h`` sorted in descending order."""
    w, h = _vector(w, "w"), _vector(h)
    _check_lengths(w, h)
    return float(np.dot(w, h[list(sort_walk(h).perm)]))


def walk_weights(g: FuzzyMeasure, walk: Walk) -> np.ndarray:
    """Consecutive differences of ``g`` along the walk's chain.

    The first difference is taken against ``g(empty set)``.
    """
    if walk.n != g.n:
        raise ValueError(f"walk length {walk.n} does not match measure n={g.n}")
    chain_values = g.values[walk.chain()]
    return np.diff(chain_values, prepend=g.values[0])


def choquet(g: FuzzyMeasure, h) -> float:
    h = _vector(h)
    if h.shape[0] != g.n:
        raise ValueError(f"input length {h.shape[0]} does not match measure n={g.n}")
    walk = sort_walk(h)
    return lcs_eval(walk_weights(g, walk), h[list(walk.perm)])


# -- batched forms used by the learner ----------------------------------------


def sort_walks(H: np.ndarray) -> np.ndarray:
    """Row-wise descending sorts, same tie rule as :func:`sort_walk`."""
    return np.argsort(-np.asarray(H, dtype=float), axis=1, kind="stable")


def chain_masks(perms: np.ndarray) -> np.ndarray:
    return np.cumsum(np.left_shift(1, perms), axis=1)


def choquet_batch(g: FuzzyMeasure | np.ndarray, H: np.ndarray) -> np.ndarray:
    """Choquet integral of every row of ``H``.

    ``g`` may be a measure or a raw value array of length ``2**n``.
    """
    values = g.values if isinstance(g, FuzzyMeasure) else np.asarray(g, dtype=float)
    H = np.atleast_2d(np.asarray(H, dtype=float))
    perms = sort_walks(H)
    chains = chain_masks(perms)
    weights = np.diff(values[chains], axis=1, prepend=values[0])
    hs = np.take_along_axis(H, perms, axis=1)
    return np.einsum("ij,ij->i", hs, weights)
