"""Fuzzy measures stored densely on the subset lattice.

A measure on ``n`` sources is an array of ``2**n`` values indexed by subset
bitmask: bit ``i`` is set when source ``i`` (0-based) belongs to the subset.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from os import PathLike
from typing import Iterable, Sequence

import numpy as np

MAX_SOURCES = 20
TOL = 1e-9


class MeasureError(ValueError):
    """Structural problem with a measure (size, shape, non-finite values)."""


class InvalidMeasureError(MeasureError):
    """A measure flagged as constrained breaks the boundary/monotonicity axioms."""

    def __init__(self, violations: list[Violation]):
        self.violations = violations
        lines = [str(v) for v in violations[:10]]
        if len(violations) > 10:
            lines.append(f"... {len(violations) - 10} more")
        super().__init__("invalid fuzzy measure:\n  " + "\n  ".join(lines))


# -- subset helpers -----------------------------------------------------------


def subset_index(members: Iterable[int], n: int) -> int:
    """Bitmask for a set of 0-based source indices."""
    mask = 0
    for i in members:
        i = int(i)
        if not 0 <= i < n:
            raise ValueError(f"source index {i} out of range for n={n}")
        bit = 1 << i
        if mask & bit:
            raise ValueError(f"duplicate source index {i}")
        mask |= bit
    return mask


def subset_members(mask: int) -> tuple[int, ...]:
    """Sorted 0-based members of a bitmask."""
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


def cardinality(mask: int) -> int:
    return int(mask).bit_count()


def popcounts(n: int) -> np.ndarray:
    """Cardinality of every subset mask ``0 .. 2**n - 1``."""
    masks = np.arange(1 << n)
    counts = np.zeros(1 << n, dtype=np.int64)
    for bit in range(n):
        counts += (masks >> bit) & 1
    return counts


def subsets_by_cardinality(n: int, k: int) -> list[int]:
    """Masks of size ``k`` in cardinality-lexicographic order.

    Subsets are ordered by their sorted member lists, so for n=5, k=2 the
    order starts {0,1}, {0,2}, {0,3}, {0,4}, {1,2}, ...
    """
    return [subset_index(c, n) for c in itertools.combinations(range(n), k)]


def format_subset(mask: int) -> str:
    members = subset_members(mask)
    if not members:
        return "{}"
    return "{" + ",".join(f"x{i + 1}" for i in members) + "}"


# -- lattice closures ---------------------------------------------------------


def max_over_subsets(values: np.ndarray, n: int) -> np.ndarray:
    """``out[A] = max over B subset of A of values[B]`` (including A itself)."""
    out = np.array(values, dtype=float, copy=True)
    masks = np.arange(1 << n)
    for bit in range(n):
        has = (masks >> bit) & 1 == 1
        idx = masks[has]
        out[idx] = np.maximum(out[idx], out[idx ^ (1 << bit)])
    return out


def min_over_supersets(values: np.ndarray, n: int) -> np.ndarray:
    """``out[A] = min over B superset of A of values[B]`` (including A itself)."""
    out = np.array(values, dtype=float, copy=True)
    masks = np.arange(1 << n)
    for bit in range(n):
        lacks = (masks >> bit) & 1 == 0
        idx = masks[lacks]
        out[idx] = np.minimum(out[idx], out[idx | (1 << bit)])
    return out


# -- the measure --------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    kind: str  # "boundary", "normalization" or "monotonicity"
    subset: int
    superset: int | None
    values: tuple[float, ...]

    def __str__(self) -> str:
        if self.kind == "monotonicity":
            a, b = self.values
            return (
                f"monotonicity: g({format_subset(self.subset)})={a!r} > "
                f"g({format_subset(self.superset)})={b!r}"
            )
        return f"{self.kind}: g({format_subset(self.subset)})={self.values[0]!r}"


@dataclass(frozen=True, eq=False)
class FuzzyMeasure:
    """Set function ``g`` on the subsets of ``n`` sources.

    With ``constrained=True`` the boundary condition and monotonicity are
    checked on construction (and ``g(X) = 1`` when ``normalized``).
    ``constrained=False`` is the relaxed regression mode: any finite values.
    """

    n: int
    values: np.ndarray = field(repr=False)
    normalized: bool = True
    constrained: bool = True

    def __post_init__(self):
        n = int(self.n)
        if not 1 <= n <= MAX_SOURCES:
            raise MeasureError(f"n must be in 1..{MAX_SOURCES}, got {n}")
        values = np.array(self.values, dtype=float)
        if values.shape != (1 << n,):
            raise MeasureError(
                f"expected {1 << n} values for n={n}, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise MeasureError("measure values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "values", values)
        if self.constrained:
            violations = validate_measure(self)
            if violations:
                raise InvalidMeasureError(violations)

    def __getitem__(self, mask: int) -> float:
        return float(self.values[mask])

    def __len__(self) -> int:
        return len(self.values)

    def value(self, members: Iterable[int]) -> float:
        return self[subset_index(members, self.n)]

    @property
    def full_mask(self) -> int:
        return (1 << self.n) - 1

    def __eq__(self, other):
        if not isinstance(other, FuzzyMeasure):
            return NotImplemented
        return (
            self.n == other.n
            and self.normalized == other.normalized
            and self.constrained == other.constrained
            and np.array_equal(self.values, other.values)
        )

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "normalized": self.normalized,
            "constrained": self.constrained,
            "values": [float(v) for v in self.values],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> FuzzyMeasure:
        try:
            return cls(
                n=int(doc["n"]),
                values=np.asarray(doc["values"], dtype=float),
                normalized=bool(doc.get("normalized", True)),
                constrained=bool(doc.get("constrained", True)),
            )
        except (KeyError, TypeError) as exc:
            raise MeasureError(f"malformed measure document: {exc}") from exc


def validate_measure(g: FuzzyMeasure, tol: float = TOL) -> list[Violation]:
    """List every axiom violation of ``g``; empty means valid.

    Works on any measure regardless of its ``constrained`` flag. Monotonicity
    is checked on every cover relation ``A \\ {x_k} -> A``.
    """
    values = np.asarray(g.values, dtype=float)
    n = g.n
    if values.shape != (1 << n,):
        raise MeasureError(f"expected {1 << n} values, got {values.shape}")
    out = []
    if abs(values[0]) > tol:
        out.append(Violation("boundary", 0, None, (float(values[0]),)))
    full = (1 << n) - 1
    if g.normalized and abs(values[full] - 1.0) > tol:
        out.append(Violation("normalization", full, None, (float(values[full]),)))
    masks = np.arange(1 << n)
    for bit in range(n):
        sup = masks[(masks >> bit) & 1 == 1]
        sub = sup ^ (1 << bit)
        bad = values[sub] > values[sup] + tol
        for a, b in zip(sub[bad], sup[bad]):
            out.append(
                Violation(
                    "monotonicity", int(a), int(b), (float(values[a]), float(values[b]))
                )
            )
    out.sort(key=lambda v: (v.superset if v.superset is not None else -1, v.subset))
    return out


# -- generators ---------------------------------------------------------------


def reference_measure() -> FuzzyMeasure:
    """Five-source measure with exactly four underlying order statistics.

    Singletons 0.1; the first four pairs (in cardinality-lexicographic order)
    0.2 and the other pairs 0.4; triples 0.6; the first three quadruples 0.6
    and the other two 0.9.
    """
    n = 5
    g = np.zeros(1 << n)
    for k, first, lo, hi in [(1, 5, 0.1, 0.1), (2, 4, 0.2, 0.4), (3, 10, 0.6, 0.6), (4, 3, 0.6, 0.9)]:
        for idx, mask in enumerate(subsets_by_cardinality(n, k)):
            g[mask] = lo if idx < first else hi
    g[-1] = 1.0
    return FuzzyMeasure(n, g)


fig4_measure = reference_measure


def demining_measure() -> FuzzyMeasure:
    """Three-sensor measure: median when source 1 is largest, max otherwise."""
    g = np.ones(8)
    g[0] = 0.0
    g[subset_index([0], 3)] = 0.0
    return FuzzyMeasure(3, g)


def measure_from_los(w: Sequence[float], n: int | None = None, tol: float = TOL) -> FuzzyMeasure:
    """Symmetric measure whose Choquet integral is the order statistic ``w``.

    ``g(A)`` is the sum of the first ``|A|`` weights.
    """
    w = np.asarray(w, dtype=float)
    if n is None:
        n = len(w)
    if w.shape != (n,):
        raise ValueError(f"weight vector must have length {n}")
    if np.any(w < -tol):
        raise ValueError("order-statistic weights must be non-negative")
    if abs(w.sum() - 1.0) > tol:
        raise ValueError(f"order-statistic weights must sum to 1, got {w.sum()!r}")
    partial = np.concatenate([[0.0], np.cumsum(w)])
    partial[-1] = 1.0
    return FuzzyMeasure(n, partial[popcounts(n)])


def named_los(name: str, n: int) -> np.ndarray:
    """Weight vector of a familiar operator: max, min, mean or median."""
    w = np.zeros(n)
    if name == "max":
        w[0] = 1.0
    elif name == "min":
        w[-1] = 1.0
    elif name == "mean":
        w[:] = 1.0 / n
    elif name == "median":
        if n % 2:
            w[n // 2] = 1.0
        else:
            w[n // 2 - 1] = w[n // 2] = 0.5
    else:
        raise ValueError(f"unknown operator {name!r}")
    return w


NAMED_OPERATORS = ("max", "min", "mean", "median")


def max_measure(n: int) -> FuzzyMeasure:
    return measure_from_los(named_los("max", n))


def min_measure(n: int) -> FuzzyMeasure:
    return measure_from_los(named_los("min", n))


def mean_measure(n: int) -> FuzzyMeasure:
    return measure_from_los(named_los("mean", n))


def median_measure(n: int) -> FuzzyMeasure:
    return measure_from_los(named_los("median", n))


def random_monotone_measure(n: int, seed: int | None = None) -> FuzzyMeasure:
    """Random valid normalized measure, deterministic for a given seed.

    Interior values are uniform draws lifted to the maximum over their
    subsets, which makes the lattice monotone while staying inside (0, 1).
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    rng = np.random.default_rng(seed)
    g = np.empty(1 << n)
    g[0] = 0.0
    g[1:-1] = rng.uniform(0.0, 1.0, size=(1 << n) - 2)
    g[-1] = 1.0
    return FuzzyMeasure(n, max_over_subsets(g, n))


# -- file format --------------------------------------------------------------


def save_measure(g: FuzzyMeasure, path: str | PathLike) -> None:
    # repr-based float output round-trips bit-exactly
    with open(path, "w") as fh:
        json.dump(g.to_dict(), fh, indent=1)
        fh.write("\n")


def load_measure(path: str | PathLike) -> FuzzyMeasure:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise MeasureError(f"{path}: not a measure document ({exc})") from exc
    return FuzzyMeasure.from_dict(doc)
