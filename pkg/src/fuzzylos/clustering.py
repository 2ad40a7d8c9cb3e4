"""Cluster tendency tools for dissimilarity matrices.

VAT reorders a matrix by Prim-style accretion, iVAT replaces each entry by
its minimax path distance, and :func:`block_partition` cuts the reordered
index sequence into contiguous blocks.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from os import PathLike

import numpy as np


def _square(D) -> np.ndarray:
    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {D.shape}")
    return D


@dataclass(frozen=True, eq=False)
class VatOrdering:
    order: np.ndarray
    reordered: np.ndarray
    # parent[i] = position (in VAT order) of the already-placed index that
    # position i attached to; -1 for the first.
    parent: np.ndarray

    def __len__(self) -> int:
        return len(self.order)


def vat_order(D) -> VatOrdering:
    """Reorder ``D`` so that similar samples sit next to each other.

    Starts from the row index of the first maximal entry and repeatedly
    appends the unplaced index closest to the placed set. Ties go to the
    lowest index.
    """
    D = _square(D)
    m = D.shape[0]
    if m == 0:
        raise ValueError("empty dissimilarity matrix")
    start = int(np.unravel_index(np.argmax(D), D.shape)[0]) if m > 1 else 0
    order = np.empty(m, dtype=np.int64)
    parent = np.full(m, -1, dtype=np.int64)
    placed = np.zeros(m, dtype=bool)
    order[0] = start
    placed[start] = True
    best = D[start].copy()
    best_from = np.zeros(m, dtype=np.int64)
    for pos in range(1, m):
        cand = np.where(placed, np.inf, best)
        nxt = int(np.argmin(cand))
        order[pos] = nxt
        parent[pos] = best_from[nxt]
        placed[nxt] = True
        closer = D[nxt] < best
        best = np.where(closer, D[nxt], best)
        best_from = np.where(closer, pos, best_from)
    return VatOrdering(order, D[np.ix_(order, order)], parent)


def ivat_transform(V: VatOrdering) -> np.ndarray:
    """Minimax path distances of a VAT-ordered matrix (still in VAT order).

    Uses the accretion tree recorded by :func:`vat_order`: the path between
    two samples in a minimum spanning tree carries their minimax distance.
    """
    R = V.reordered
    m = R.shape[0]
    out = np.zeros_like(R)
    for r in range(1, m):
        j = V.parent[r]
        edge = R[r, j]
        row = np.maximum(edge, out[j, :r])
        row[j] = edge
        out[r, :r] = row
        out[:r, r] = row
    return out


def minimax_distance(D) -> np.ndarray:
    """Minimax path distances of ``D`` in its original index order."""
    D = _square(D)
    V = vat_order(D)
    ordered = ivat_transform(V)
    out = np.empty_like(ordered)
    out[np.ix_(V.order, V.order)] = ordered
    return out


# -- contiguous partitioning --------------------------------------------------


@dataclass(frozen=True, eq=False)
class Partition:
    """Contiguous blocks over an ordered index sequence.

    ``cuts`` holds the interior block boundaries, so block ``b`` covers
    ``bounds[b]:bounds[b+1]``. ``objectives[k-1]`` is the best score found
    with exactly ``k`` blocks.
    """

    cuts: tuple[int, ...]
    size: int
    objective: float
    objectives: tuple[float, ...]
    exact: bool = True

    @property
    def k(self) -> int:
        return len(self.cuts) + 1

    @property
    def bounds(self) -> tuple[int, ...]:
        return (0, *self.cuts, self.size)

    def blocks(self) -> list[range]:
        b = self.bounds
        return [range(b[i], b[i + 1]) for i in range(self.k)]

    def labels(self) -> np.ndarray:
        out = np.empty(self.size, dtype=np.int64)
        for i, blk in enumerate(self.blocks()):
            out[blk.start:blk.stop] = i
        return out


def partition_objective(D, cuts, weights=None) -> float:
    """Mean between-block entry minus mean within-block off-diagonal entry.

    ``weights`` are per-index multiplicities: index ``i`` stands for
    ``weights[i]`` identical samples, so pairs are weighted by the product of
    multiplicities and a block's own repeated samples count as zero-distance
    within pairs. A single block, or a partition with no within-block pairs,
    scores 0.
    """
    D = _square(D)
    m = D.shape[0]
    wts = np.ones(m) if weights is None else np.asarray(weights, dtype=float)
    labels = np.zeros(m, dtype=np.int64)
    for c in cuts:
        labels[c:] += 1
    same = labels[:, None] == labels[None, :]
    W = np.outer(wts, wts) * D
    total = wts.sum()
    masses = np.bincount(labels, weights=wts)
    n_within = float(np.sum(masses * masses - masses))
    n_between = total * total - total - n_within
    if n_within <= 0 or n_between <= 0:
        return 0.0
    return float(W[~same].sum() / n_between - W[same].sum() / n_within)


DEFAULT_K_MAX = 10
# largest (k_max * prefixes * pair-count) table the exact solver will build
EXACT_BUDGET = 20_000_000


class _Blocks:
    """Prefix sums for weighted block sums and pair counts."""

    def __init__(self, D, mult):
        m = D.shape[0]
        W = np.outer(mult, mult).astype(float) * D
        self.P = np.zeros((m + 1, m + 1))
        self.P[1:, 1:] = W.cumsum(0).cumsum(1)
        self.mass = np.concatenate([[0], np.cumsum(mult)])
        total = int(self.mass[-1])
        self.n_pairs = total * (total - 1)  # ordered off-diagonal pairs
        self.s_total = float(self.P[m, m])

    def sum(self, i, j):
        P = self.P
        return P[j, j] - P[i, j] - P[j, i] + P[i, i]

    def pairs(self, i, j):
        b = int(self.mass[j] - self.mass[i])
        return b * (b - 1) // 2  # unordered

    def score(self, s_within, c_within):
        """Objective from within sum and unordered within pair count."""
        n_w = 2.0 * c_within
        n_b = self.n_pairs - n_w
        if n_w <= 0 or n_b <= 0:
            return 0.0
        return (self.s_total - s_within) / n_b - s_within / n_w


def _multiplicities(weights, m):
    if weights is None:
        return np.ones(m, dtype=np.int64)
    mult = np.asarray(weights)
    if mult.shape != (m,) or np.any(mult < 1) or np.any(mult != np.round(mult)):
        raise ValueError("weights must be positive integers, one per index")
    return mult.astype(np.int64)


def _exact_dp(blk: _Blocks, m: int, k_max: int):
    """Per block count: (objective, cuts), exact."""
    size = blk.n_pairs // 2 + 1
    c_axis = np.arange(size)
    n_w = 2.0 * c_axis
    n_b = blk.n_pairs - n_w
    usable = (n_w > 0) & (n_b > 0)

    def best_of(row):
        vals = np.full(size, -np.inf)
        ok = usable & np.isfinite(row)
        vals[ok] = (blk.s_total - row[ok]) / n_b[ok] - row[ok] / n_w[ok]
        c = int(np.argmax(vals))
        return (float(vals[c]), c) if np.isfinite(vals[c]) else (0.0, None)

    # prev[j, c]: min within sum over the first j indices in b blocks
    # holding c unordered within pairs
    prev = np.full((m + 1, size), np.inf)
    for j in range(1, m + 1):
        prev[j, blk.pairs(0, j)] = blk.sum(0, j)
    back = {}
    found = {1: (0.0, None)}
    for b in range(2, k_max + 1):
        cur = np.full((m + 1, size), np.inf)
        arg = np.full((m + 1, size), -1, dtype=np.int32)
        for j in range(b, m + 1):
            tgt_row, arg_row = cur[j], arg[j]
            for i in range(b - 1, j):
                c0 = blk.pairs(i, j)
                cand = prev[i, : size - c0] + blk.sum(i, j)
                tgt = tgt_row[c0:]
                better = cand < tgt
                if better.any():
                    tgt[better] = cand[better]
                    arg_row[c0:][better] = i
        back[b] = arg
        found[b] = best_of(cur[m])
        prev = cur

    out = {1: (0.0, ())}
    for b in range(2, k_max + 1):
        val, c = found[b]
        if c is None:
            out[b] = (0.0, None)
            continue
        cuts, j = [], m
        for bb in range(b, 1, -1):
            i = int(back[bb][j, c])
            cuts.append(i)
            c -= blk.pairs(i, j)
            j = i
        out[b] = (val, tuple(reversed(cuts)))
    return out


def _linear_dp(blk: _Blocks, m: int, b: int, coef_s: float, coef_c: float):
    """Contiguous b-block partition maximizing coef_s*S + coef_c*C."""
    best = np.full((b + 1, m + 1), -np.inf)
    arg = np.zeros((b + 1, m + 1), dtype=np.int64)
    best[0, 0] = 0.0
    for bb in range(1, b + 1):
        for j in range(bb, m + 1):
            for i in range(bb - 1, j):
                if not np.isfinite(best[bb - 1, i]):
                    continue
                v = best[bb - 1, i] + coef_s * blk.sum(i, j) + coef_c * blk.pairs(i, j)
                if v > best[bb, j]:
                    best[bb, j], arg[bb, j] = v, i
    cuts, j = [], m
    for bb in range(b, 1, -1):
        j = int(arg[bb, j])
        cuts.append(j)
    return tuple(reversed(cuts))


def _cut_stats(blk: _Blocks, m: int, cuts):
    bounds = (0, *cuts, m)
    s = sum(blk.sum(bounds[i], bounds[i + 1]) for i in range(len(bounds) - 1))
    c = sum(blk.pairs(bounds[i], bounds[i + 1]) for i in range(len(bounds) - 1))
    return s, c


def _linearized(blk: _Blocks, m: int, k_max: int, max_rounds: int = 50):
    """Heuristic for large matrices: repeatedly maximize a linearization."""
    out = {1: (0.0, ())}
    for b in range(2, k_max + 1):
        cuts = tuple(round(i * m / b) for i in range(1, b))
        best = (blk.score(*_cut_stats(blk, m, cuts)), cuts)
        seen = {cuts}
        for _ in range(max_rounds):
            s, c = _cut_stats(blk, m, cuts)
            n_w = max(2.0 * c, 1.0)
            n_b = max(blk.n_pairs - 2.0 * c, 1.0)
            coef_s = -1.0 / n_b - 1.0 / n_w
            coef_c = 2.0 * ((blk.s_total - s) / n_b**2 + s / n_w**2)
            cuts = _linear_dp(blk, m, b, coef_s, coef_c)
            if cuts in seen:
                break
            seen.add(cuts)
            val = blk.score(*_cut_stats(blk, m, cuts))
            if val > best[0]:
                best = (val, cuts)
        out[b] = best
    return out


def block_partition(D, k_max: int | None = None, weights=None, exact: bool | None = None) -> Partition:
    """Best contiguous partition of an ordered matrix over ``k = 1..k_max``.

    Maximizes :func:`partition_objective`. The objective depends on a
    partition only through the total within-block sum ``S`` and pair count
    ``C`` and increases with ``C`` at fixed ``S``, so the exact solver keeps,
    per prefix, block count and achievable ``C``, the smallest ``S``. Ties
    between block counts go to the smaller count.

    ``weights`` are positive integer multiplicities. ``k_max`` defaults to
    ``min(size, 10)``. When the exact table would exceed ``EXACT_BUDGET``
    entries (or ``exact=False``) a linearization heuristic is used instead
    and the result is flagged ``exact=False``.
    """
    D = _square(D)
    m = D.shape[0]
    if m == 0:
        raise ValueError("empty matrix")
    if k_max is None:
        k_max = min(m, DEFAULT_K_MAX)
    if not 1 <= k_max <= m:
        raise ValueError(f"k_max must be in 1..{m}, got {k_max}")
    blk = _Blocks(D, _multiplicities(weights, m))
    table = k_max * (m + 1) * (blk.n_pairs // 2 + 1)
    if exact is None:
        exact = table <= EXACT_BUDGET
    found = _exact_dp(blk, m, k_max) if exact else _linearized(blk, m, k_max)

    best_k = 1
    for b in range(2, k_max + 1):
        if found[b][1] is not None and found[b][0] > found[best_k][0] + 1e-12:
            best_k = b
    objectives = tuple(found[b][0] for b in range(1, k_max + 1))
    val, cuts = found[best_k]
    return Partition(cuts, m, val, objectives, exact)


def exhaustive_partition(D, k_max: int | None = None, weights=None) -> Partition:
    """Brute-force reference for :func:`block_partition` (small matrices only)."""
    D = _square(D)
    m = D.shape[0]
    if k_max is None:
        k_max = m
    best = {1: (0.0, ())}
    for k in range(2, k_max + 1):
        for cuts in itertools.combinations(range(1, m), k - 1):
            val = partition_objective(D, cuts, weights)
            if k not in best or val > best[k][0]:
                best[k] = (val, cuts)
    objectives = tuple(best[k][0] if k in best else 0.0 for k in range(1, k_max + 1))
    best_k = 1
    for k in range(2, k_max + 1):
        if k in best and best[k][0] > best[best_k][0] + 1e-12:
            best_k = k
    return Partition(best[best_k][1], m, best[best_k][0], objectives)


# -- rendering ----------------------------------------------------------------


def render_grayscale(D, dark_similar: bool = False) -> np.ndarray:
    """8-bit image of a matrix with entries in [0, 1].

    Pixel value is ``round(255 * (1 - d))``; ``dark_similar=True`` inverts it
    to ``round(255 * d)``.
    """
    D = _square(D)
    if np.any(D < 0) or np.any(D > 1) or not np.all(np.isfinite(D)):
        raise ValueError("entries must lie in [0, 1]; normalize the matrix first")
    level = D if dark_similar else 1.0 - D
    return np.rint(255.0 * level).astype(np.uint8)


def pgm_bytes(image: np.ndarray) -> bytes:
    """Binary PGM (P5, maxval 255), row-major."""
    image = np.asarray(image, dtype=np.uint8)
    if image.ndim != 2:
        raise ValueError("image must be two-dimensional")
    h, w = image.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + image.tobytes()


def read_pgm(data: bytes) -> np.ndarray:
    """Parse a binary PGM as written by :func:`pgm_bytes` (no comments)."""
    fields, pos = [], 0
    while len(fields) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    pos += 1  # single whitespace byte before the raster
    if fields[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h, maxval = (int(f) for f in fields[1:])
    if maxval != 255:
        raise ValueError("only maxval 255 is supported")
    return np.frombuffer(data, dtype=np.uint8, count=w * h, offset=pos).reshape(h, w)


def write_pgm(path: str | PathLike, image: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(pgm_bytes(image))


def write_matrix_csv(path: str | PathLike, D) -> None:
    np.savetxt(path, np.asarray(D, dtype=float), delimiter=",", fmt="%.17g")
