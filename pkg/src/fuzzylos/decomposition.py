"""Decomposing a Choquet integral into a small set of order statistics.

Each walk of the measure contributes one weight vector. Walks are sampled
by how much of their chain the data observed, compared pairwise, ordered
with VAT/iVAT, cut into contiguous blocks, and each block is represented by
its medoid. The result maps every sampled sort to one operator.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from os import PathLike
from typing import Callable, Iterator

import numpy as np

from .aggregation import Walk, chain_masks, permutation_unrank, sort_walk
from .clustering import (
    DEFAULT_K_MAX,
    Partition,
    VatOrdering,
    block_partition,
    ivat_transform,
    vat_order,
)
from .learning import ObservabilityRecord
from .measure import NAMED_OPERATORS, TOL, FuzzyMeasure, named_los

MAX_ENUMERATION = 10
OPERATOR_TOL = 1e-12
DEFAULT_EPSILON = 1e-9


class EmptyResultError(RuntimeError):
    """No walk passed the observability threshold."""


class NormalizationError(ValueError):
    """Theoretical-max scaling requested for weights off the simplex."""


# -- walks and samples --------------------------------------------------------


def _check_enumeration(n: int, force: bool) -> None:
    if n < 1:
        raise ValueError("n must be at least 1")
    if n > MAX_ENUMERATION and not force:
        raise MemoryError(
            f"refusing to enumerate {math.factorial(n)} walks for n={n}; pass force=True"
        )


def enumerate_walks(n: int, force: bool = False) -> Iterator[Walk]:
    """All ``n!`` walks in lexicographic rank order."""
    _check_enumeration(n, force)
    for perm in itertools.permutations(range(n)):
        yield Walk(perm)


def all_permutations(n: int, force: bool = False) -> np.ndarray:
    """``(n!, n)`` array of permutations; row ``k`` has rank ``k``."""
    _check_enumeration(n, force)
    return np.array(list(itertools.permutations(range(n))), dtype=np.int64).reshape(-1, n)


@dataclass(frozen=True)
class WalkSample:
    walk: Walk
    weights: np.ndarray
    unobserved_fraction: float


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Walk weight vectors of the sampled walks, in ascending rank order."""

    source_n: int
    epsilon: float
    ranks: np.ndarray
    perms: np.ndarray
    weights: np.ndarray
    unobserved: np.ndarray

    def __len__(self) -> int:
        return len(self.ranks)

    @property
    def samples(self) -> list[WalkSample]:
        return [
            WalkSample(Walk(tuple(p)), w, float(u))
            for p, w, u in zip(self.perms, self.weights, self.unobserved)
        ]

    def unique(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Distinct weight vectors, ordered by the lowest rank using each.

        Returns ``(vectors, inverse, counts)`` with
        ``vectors[inverse] == weights``.
        """
        if len(self) == 0:
            return np.empty((0, self.source_n)), np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
        vecs, first, inverse, counts = np.unique(
            self.weights, axis=0, return_index=True, return_inverse=True, return_counts=True
        )
        order = np.argsort(first, kind="stable")
        relabel = np.empty_like(order)
        relabel[order] = np.arange(len(order))
        return vecs[order], relabel[inverse.ravel()], counts[order]


def gsamp(
    g: FuzzyMeasure,
    obs: ObservabilityRecord | None = None,
    epsilon: float = DEFAULT_EPSILON,
    force: bool = False,
) -> SampleSet:
    """Weight vectors of every walk whose unobserved fraction is below ``epsilon``.

    ``obs=None`` means every variable is observed. The comparison is strict,
    so ``epsilon=0`` always gives an empty set.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    n = g.n
    if obs is None:
        obs = ObservabilityRecord.full(n)
    elif obs.n != n:
        raise ValueError(f"observability record has n={obs.n}, measure has n={n}")
    perms = all_permutations(n, force)
    chains = chain_masks(perms)
    phi = obs.chain_unobserved(chains)
    keep = phi < epsilon
    values = g.values
    weights = np.diff(values[chains[keep]], axis=1, prepend=values[0])
    return SampleSet(
        source_n=n,
        epsilon=epsilon,
        ranks=np.flatnonzero(keep),
        perms=perms[keep],
        weights=weights,
        unobserved=phi[keep],
    )


# -- operator sets ------------------------------------------------------------


@dataclass(eq=False)
class OperatorSet:
    """Discovered order-statistic operators and which sorts use them."""

    n: int
    operators: np.ndarray
    sort_map: dict[int, int]
    counts: np.ndarray
    coverage: float

    def __post_init__(self):
        self.operators = np.atleast_2d(np.asarray(self.operators, dtype=float)).reshape(-1, self.n)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        self.sort_map = {int(k): int(v) for k, v in self.sort_map.items()}
        k = len(self.operators)
        if k < 1:
            raise ValueError("an operator set needs at least one operator")
        if any(not 0 <= v < k for v in self.sort_map.values()):
            raise ValueError("sort map refers to a missing operator")

    def __len__(self) -> int:
        return len(self.operators)

    @property
    def k(self) -> int:
        return len(self.operators)

    @property
    def stored_weights(self) -> int:
        return int(self.operators.size)

    def operator_for(self, rank: int) -> int | None:
        return self.sort_map.get(int(rank))

    def is_mapped(self, walk: Walk) -> bool:
        return walk.rank in self.sort_map

    def nearest_named(self) -> list[tuple[str, float]]:
        """Closest familiar operator (squared Euclidean) for each operator."""
        refs = {name: named_los(name, self.n) for name in NAMED_OPERATORS}
        out = []
        for w in self.operators:
            dists = [(float(np.sum((w - ref) ** 2)), name) for name, ref in refs.items()]
            d, name = min(dists, key=lambda t: t[0])
            out.append((name, d))
        return out

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "operators": [[float(v) for v in w] for w in self.operators],
            "sort_map": [[r, i] for r, i in sorted(self.sort_map.items())],
            "counts": [int(c) for c in self.counts],
            "coverage": float(self.coverage),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> OperatorSet:
        return cls(
            n=int(doc["n"]),
            operators=np.asarray(doc["operators"], dtype=float),
            sort_map={int(r): int(i) for r, i in doc["sort_map"]},
            counts=np.asarray(doc["counts"], dtype=np.int64),
            coverage=float(doc["coverage"]),
        )


def save_operators(ops: OperatorSet, path: str | PathLike) -> None:
    with open(path, "w") as fh:
        json.dump(ops.to_dict(), fh, indent=1)
        fh.write("\n")


def load_operators(path: str | PathLike) -> OperatorSet:
    with open(path) as fh:
        return OperatorSet.from_dict(json.load(fh))


def naive_discovery(g: FuzzyMeasure, obs: ObservabilityRecord | None = None) -> OperatorSet:
    """Distinct weight vectors among fully observed walks.

    Vectors equal within ``OPERATOR_TOL`` per component count as one
    operator; operators are numbered by the first walk that uses them.
    """
    samples = gsamp(g, obs, epsilon=DEFAULT_EPSILON)
    samples_zero = samples.unobserved == 0
    if not samples_zero.any():
        raise EmptyResultError("no fully observed walk")
    ops: list[np.ndarray] = []
    counts: list[int] = []
    sort_map = {}
    for rank, w in zip(samples.ranks[samples_zero], samples.weights[samples_zero]):
        for i, op in enumerate(ops):
            if np.all(np.abs(op - w) <= OPERATOR_TOL):
                break
        else:
            i = len(ops)
            ops.append(w)
            counts.append(0)
        counts[i] += 1
        sort_map[int(rank)] = i
    return OperatorSet(
        g.n, np.array(ops), sort_map, np.array(counts), len(sort_map) / math.factorial(g.n)
    )


# -- dissimilarity ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DissimilarityMatrix:
    d: np.ndarray
    metric: str = "sqeuclidean"
    p: float = 2.0
    normalization: str | None = None
    constant: float = 1.0
    simplex: bool = True

    def __len__(self) -> int:
        return self.d.shape[0]


def _on_simplex(X: np.ndarray, tol: float = TOL) -> bool:
    return bool(np.all(X >= -tol) and np.all(np.abs(X.sum(axis=1) - 1.0) <= tol))


def pairwise_dissimilarity(samples, metric: str = "sqeuclidean", p: float = 2.0) -> DissimilarityMatrix:
    """Pairwise distances between weight vectors.

    ``samples`` is a :class:`SampleSet` or an array with one vector per row.
    ``metric`` is ``"sqeuclidean"`` or ``"pnorm"`` (the l_p norm for
    ``p >= 1``).
    """
    X = samples.weights if isinstance(samples, SampleSet) else np.atleast_2d(np.asarray(samples, dtype=float))
    if X.shape[0] == 0:
        raise ValueError("no samples to compare")
    diff = X[:, None, :] - X[None, :, :]
    if metric == "sqeuclidean":
        d = np.einsum("ijk,ijk->ij", diff, diff)
    elif metric == "pnorm":
        if p < 1:
            raise ValueError("p must be at least 1")
        d = np.sum(np.abs(diff) ** p, axis=2) ** (1.0 / p)
    else:
        raise ValueError(f"unknown metric {metric!r}")
    d = np.maximum(d, d.T)
    np.fill_diagonal(d, 0.0)
    return DissimilarityMatrix(d, metric, float(p), None, 1.0, _on_simplex(X))


def theoretical_max(metric: str, p: float = 2.0) -> float:
    """Largest distance between two simplex vectors (max vs min operator)."""
    if metric == "sqeuclidean":
        return 2.0
    return 2.0 ** (1.0 / p)


def normalize_dissimilarity(D: DissimilarityMatrix, mode: str = "theoretical-max") -> DissimilarityMatrix:
    """Scale a dissimilarity matrix into [0, 1].

    ``"theoretical-max"`` divides by the largest distance possible between
    two order statistics and is only valid for simplex weight vectors.
    ``"observed-range"`` maps the smallest positive entry to 0 and the
    largest to 1; zero entries stay 0.
    """
    d = D.d
    if mode == "theoretical-max":
        if not D.simplex:
            raise NormalizationError(
                "weights are not on the simplex; use observed-range normalization"
            )
        c = theoretical_max(D.metric, D.p)
        out = np.clip(d / c, 0.0, 1.0)
        return DissimilarityMatrix(out, D.metric, D.p, mode, c, D.simplex)
    if mode == "observed-range":
        pos = d[d > 0]
        if pos.size == 0:
            return DissimilarityMatrix(np.zeros_like(d), D.metric, D.p, mode, 1.0, D.simplex)
        lo, hi = float(pos.min()), float(pos.max())
        if hi > lo:
            out = np.where(d > 0, (d - lo) / (hi - lo), 0.0)
        else:
            out = d / hi
        return DissimilarityMatrix(np.clip(out, 0.0, 1.0), D.metric, D.p, mode, hi - lo or hi, D.simplex)
    raise ValueError(f"unknown normalization {mode!r}")


def cluster_medoid(members, D, ranks=None, multiplicity=None) -> int:
    """Member with the smallest total dissimilarity to the rest of its cluster.

    ``multiplicity[i]`` counts how many samples index ``i`` stands for; ties
    go to the member with the lowest walk rank (``ranks``, default index).
    """
    members = np.asarray(members, dtype=np.int64)
    if members.size == 0:
        raise ValueError("empty cluster")
    d = D.d if isinstance(D, DissimilarityMatrix) else np.asarray(D, dtype=float)
    sub = d[np.ix_(members, members)]
    mult = np.ones(len(members)) if multiplicity is None else np.asarray(multiplicity, dtype=float)[members]
    totals = sub @ mult
    keys = members if ranks is None else np.asarray(ranks)[members]
    best = totals.min()
    tied = np.flatnonzero(totals <= best + 1e-12 * max(1.0, abs(best)))
    return int(members[tied[np.argmin(keys[tied])]])


# -- the full pipeline --------------------------------------------------------


@dataclass(eq=False)
class Decomposition:
    """Every stage of the discovery pipeline, kept for inspection and plotting."""

    samples: SampleSet
    vectors: np.ndarray
    inverse: np.ndarray
    multiplicity: np.ndarray
    dissimilarity: DissimilarityMatrix
    vat: VatOrdering
    ivat: np.ndarray
    partition: Partition
    operators: OperatorSet
    cluster_of: np.ndarray = field(repr=False)

    def expanded_ivat(self) -> np.ndarray:
        """iVAT image over all sampled walks (each vector repeated by multiplicity)."""
        reps = self.multiplicity[self.vat.order]
        idx = np.repeat(np.arange(len(reps)), reps)
        return self.ivat[np.ix_(idx, idx)]


def decompose(
    g: FuzzyMeasure,
    obs: ObservabilityRecord | None = None,
    epsilon: float = DEFAULT_EPSILON,
    metric: str = "sqeuclidean",
    p: float = 2.0,
    normalization: str | None = None,
    k_max: int | None = None,
    partitioner: Callable[..., Partition] | None = None,
    force: bool = False,
) -> Decomposition:
    """Sample, compare, reorder, partition and pick medoids.

    ``normalization=None`` uses theoretical-max scaling for constrained
    measures and observed-range otherwise. Dissimilarities are computed on
    distinct weight vectors; multiplicities weight the partition objective
    and the medoid sums so the result matches working on every walk.
    """
    samples = gsamp(g, obs, epsilon, force=force)
    if len(samples) == 0:
        raise EmptyResultError(f"no walk has unobserved fraction below {epsilon}")
    vectors, inverse, mult = samples.unique()
    first_rank = np.full(len(vectors), np.iinfo(np.int64).max)
    np.minimum.at(first_rank, inverse, samples.ranks)

    if normalization is None:
        normalization = "theoretical-max" if g.constrained else "observed-range"
    D = normalize_dissimilarity(pairwise_dissimilarity(vectors, metric, p), normalization)
    V = vat_order(D.d)
    iv = ivat_transform(V)
    m = len(vectors)
    k_cap = min(m, DEFAULT_K_MAX) if k_max is None else min(k_max, m)
    part = (partitioner or block_partition)(iv, k_cap, weights=mult[V.order])

    cluster_of = np.empty(m, dtype=np.int64)
    medoids, firsts = [], []
    for blk in part.blocks():
        members = V.order[blk.start:blk.stop]
        medoids.append(cluster_medoid(members, D, first_rank, mult))
        firsts.append(first_rank[members].min())
    # number operators by the lowest walk rank they serve
    numbering = np.argsort(firsts, kind="stable")
    op_id = np.empty(len(numbering), dtype=np.int64)
    op_id[numbering] = np.arange(len(numbering))
    for b, blk in enumerate(part.blocks()):
        cluster_of[V.order[blk.start:blk.stop]] = op_id[b]

    operators = vectors[np.array(medoids)[numbering]]
    walk_ops = cluster_of[inverse]
    counts = np.bincount(walk_ops, minlength=len(operators))
    sort_map = dict(zip(samples.ranks.tolist(), walk_ops.tolist()))
    ops = OperatorSet(g.n, operators, sort_map, counts, len(samples) / math.factorial(g.n))
    return Decomposition(samples, vectors, inverse, mult, D, V, iv, part, ops, cluster_of)


def discover_operators(g: FuzzyMeasure, obs: ObservabilityRecord | None = None, epsilon: float = DEFAULT_EPSILON, **options) -> OperatorSet:
    """Operator set from :func:`decompose`; see there for the options."""
    return decompose(g, obs, epsilon, **options).operators


# -- contextual evaluation ----------------------------------------------------


@dataclass(frozen=True)
class Evaluation:
    value: float | None
    operator_id: int | None
    mapped: bool
    imputed: bool = False


def kendall_tau_distance(a, b) -> int:
    """Number of source pairs ordered differently by two permutations."""
    pos = np.empty(len(b), dtype=np.int64)
    pos[np.asarray(b)] = np.arange(len(b))
    seq = pos[np.asarray(a)]
    return int(np.sum(np.triu(seq[:, None] > seq[None, :])))


def evaluate_with_operators(ops: OperatorSet, h, policy: str = "suppress") -> Evaluation:
    """Evaluate ``h`` with the operator mapped to its sort.

    Unseen sorts are suppressed (``value=None``) by default. With
    ``policy="nearest"`` the mapped sort closest in Kendall tau distance
    (lowest rank on ties) lends its operator and the result is flagged
    ``imputed``.
    """
    h = np.asarray(h, dtype=float)
    if h.shape != (ops.n,):
        raise ValueError(f"input length {h.shape} does not match operator set n={ops.n}")
    walk = sort_walk(h)
    sorted_h = h[list(walk.perm)]
    op = ops.operator_for(walk.rank)
    if op is not None:
        return Evaluation(float(np.dot(ops.operators[op], sorted_h)), op, True)
    if policy == "suppress":
        return Evaluation(None, None, False)
    if policy != "nearest":
        raise ValueError(f"unknown policy {policy!r}")
    if not ops.sort_map:
        return Evaluation(None, None, False)
    best = min(
        ops.sort_map,
        key=lambda r: (kendall_tau_distance(walk.perm, permutation_unrank(r, ops.n)), r),
    )
    op = ops.sort_map[best]
    return Evaluation(float(np.dot(ops.operators[op], sorted_h)), op, False, imputed=True)

