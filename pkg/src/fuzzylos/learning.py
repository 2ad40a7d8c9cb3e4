"""Learning a fuzzy measure from data and tracking what the data supports.

The Choquet integral is linear in the measure values, so each training row
becomes one sparse row of a design matrix with a nonzero for every subset on
the row's walk. Fitting is projected gradient descent with backtracking.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from os import PathLike
from typing import Sequence

import numpy as np
from scipy import sparse

from .aggregation import Walk, chain_masks, choquet_batch, permutation_unrank, sort_walks
from .measure import MAX_SOURCES, FuzzyMeasure, max_over_subsets, min_over_supersets, popcounts


class NumericalError(RuntimeError):
    """The solver produced a non-finite objective."""


# -- observability ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ObservabilityRecord:
    """Per-subset "seen in training data" flags (``2**n`` booleans)."""

    n: int
    seen: np.ndarray

    def __post_init__(self):
        seen = np.array(self.seen, dtype=bool)
        if seen.shape != (1 << self.n,):
            raise ValueError(f"expected {1 << self.n} flags, got {seen.shape}")
        seen.setflags(write=False)
        object.__setattr__(self, "seen", seen)

    @classmethod
    def full(cls, n: int) -> ObservabilityRecord:
        return cls(n, np.ones(1 << n, dtype=bool))

    @classmethod
    def empty(cls, n: int) -> ObservabilityRecord:
        seen = np.zeros(1 << n, dtype=bool)
        seen[0] = True
        return cls(n, seen)

    @classmethod
    def from_walks(cls, n: int, walks: Sequence[Walk]) -> ObservabilityRecord:
        seen = np.zeros(1 << n, dtype=bool)
        seen[0] = True
        for w in walks:
            seen[w.chain()] = True
        return cls(n, seen)

    def chain_unobserved(self, chains: np.ndarray) -> np.ndarray:
        """Unobserved fraction for each row of a ``(k, n)`` array of chain masks."""
        return 1.0 - self.seen[chains].mean(axis=1)

    @property
    def n_seen(self) -> int:
        return int(self.seen.sum())

    def to_dict(self) -> dict:
        return {"n": self.n, "seen": [int(s) for s in self.seen]}

    @classmethod
    def from_dict(cls, doc: dict) -> ObservabilityRecord:
        return cls(int(doc["n"]), np.asarray(doc["seen"], dtype=bool))


def track_observability(data: Dataset) -> ObservabilityRecord:
    """Mark every subset lying on the walk of some training row."""
    seen = np.zeros(1 << data.n, dtype=bool)
    seen[0] = True
    if len(data):
        seen[chain_masks(sort_walks(data.X)).ravel()] = True
    return ObservabilityRecord(data.n, seen)


def walk_unobserved_fraction(walk: Walk, obs: ObservabilityRecord) -> float:
    """Fraction of the walk's ``n`` chain variables (empty set excluded) never seen."""
    if walk.n != obs.n:
        raise ValueError(f"walk length {walk.n} does not match record n={obs.n}")
    return float(1.0 - obs.seen[walk.chain()].mean())


@dataclass(frozen=True, eq=False)
class Intervals:
    lower: np.ndarray
    upper: np.ndarray
    seen: np.ndarray

    def __getitem__(self, mask: int) -> tuple[float, float]:
        return float(self.lower[mask]), float(self.upper[mask])

    def unseen(self) -> dict[int, tuple[float, float]]:
        return {int(a): self[a] for a in np.flatnonzero(~self.seen)}

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower


def interval_of_uncertainty(g: FuzzyMeasure, obs: ObservabilityRecord) -> Intervals:
    """Range each unseen variable could take given the seen ones.

    The empty set and (for normalized measures) the full set are treated as
    known. An unseen variable is bounded below by the largest known value on
    a subset and above by the smallest known value on a superset.
    """
    if not g.constrained:
        raise ValueError("intervals of uncertainty need a constrained measure")
    if obs.n != g.n:
        raise ValueError("observability record and measure sizes differ")
    known = obs.seen.copy()
    known[0] = True
    if g.normalized:
        known[-1] = True
    lower = max_over_subsets(np.where(known, g.values, -np.inf), g.n)
    top = g.values[-1] if g.normalized else np.inf
    upper = min_over_supersets(np.where(known, g.values, top), g.n)
    lower = np.where(known, g.values, lower)
    upper = np.where(known, g.values, upper)
    return Intervals(lower, upper, known)


# -- datasets -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Dataset:
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=float).ravel()
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"{X.shape[0]} input rows but {y.shape[0]} targets")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("dataset values must be finite")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[1]

    def __len__(self) -> int:
        return self.X.shape[0]

    def rows(self):
        return zip(self.X, self.y)


def save_dataset(data: Dataset, path: str | PathLike) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"h{i + 1}" for i in range(data.n)] + ["y"])
        for x, y in data.rows():
            writer.writerow([repr(float(v)) for v in x] + [repr(float(y))])


def load_dataset(path: str | PathLike) -> Dataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[-1].strip() != "y":
            raise ValueError(f"{path}: expected header h1,...,hN,y")
        n = len(header) - 1
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != n + 1:
                raise ValueError(f"{path}:{lineno}: expected {n + 1} fields, got {len(row)}")
            rows.append([float(v) for v in row])
    arr = np.array(rows, dtype=float).reshape(-1, n + 1)
    return Dataset(arr[:, :n], arr[:, n])


@dataclass
class DatasetSpec:
    """Recipe for a synthetic dataset labelled by a known measure.

    ``coverage`` selects how inputs are drawn: ``"uniform"`` draws ``m`` rows
    uniformly from the unit cube, ``"quota"`` draws ``quota`` rows for every
    walk, and ``"subset"`` cycles ``m`` rows over the walk ranks listed in
    ``walks``. Labels get additive Gaussian noise with std ``sigma``.
    """

    measure: FuzzyMeasure
    m: int = 0
    sigma: float = 0.0
    seed: int | None = None
    coverage: str = "uniform"
    quota: int = 1
    walks: Sequence[int] | None = None


def _inputs_for_walks(ranks: Sequence[int], n: int, rng: np.random.Generator) -> np.ndarray:
    X = np.empty((len(ranks), n))
    vals = -np.sort(-rng.uniform(0.0, 1.0, size=(len(ranks), n)), axis=1)
    for row, rank in enumerate(ranks):
        X[row, list(permutation_unrank(int(rank), n))] = vals[row]
    return X


def generate_dataset(spec: DatasetSpec) -> Dataset:
    g = spec.measure
    n = g.n
    if spec.sigma < 0:
        raise ValueError("sigma must be non-negative")
    rng = np.random.default_rng(spec.seed)
    if spec.coverage == "uniform":
        if spec.m < 0:
            raise ValueError("m must be non-negative")
        X = rng.uniform(0.0, 1.0, size=(spec.m, n))
    elif spec.coverage == "quota":
        if spec.quota < 1:
            raise ValueError("quota must be at least 1")
        ranks = np.repeat(np.arange(math.factorial(n)), spec.quota)
        X = _inputs_for_walks(ranks, n, rng)
    elif spec.coverage == "subset":
        walks = list(spec.walks or [])
        if not walks:
            raise ValueError("restricted walk subset is empty")
        m = spec.m if spec.m > 0 else len(walks)
        ranks = [walks[i % len(walks)] for i in range(m)]
        X = _inputs_for_walks(ranks, n, rng)
    else:
        raise ValueError(f"unknown coverage mode {spec.coverage!r}")
    y = choquet_batch(g, X)
    if spec.sigma > 0:
        y = y + rng.normal(0.0, spec.sigma, size=y.shape)
    return Dataset(X, y)


# -- fitting ------------------------------------------------------------------


@dataclass
class FitOptions:
    constrained: bool = True
    reg_p: float | None = None
    reg_lambda: float = 0.0
    bias: bool = False
    max_iterations: int = 20_000
    step_size: float | None = None
    tol: float = 1e-14
    seed: int | None = None

    def __post_init__(self):
        if self.reg_lambda < 0:
            raise ValueError("regularization weight must be non-negative")
        if self.reg_p is not None and self.reg_p not in (1, 2):
            raise ValueError("only l1 and l2 penalties are supported")
        if self.bias and self.constrained:
            raise ValueError("a bias term is only available in relaxed mode")


@dataclass
class FitResult:
    measure: FuzzyMeasure
    bias: float
    iterations: int
    sse: float
    objective: float
    converged: bool
    observability: ObservabilityRecord
    history: list[float] = field(repr=False, default_factory=list)

    def predict(self, X) -> np.ndarray:
        return choquet_batch(self.measure, np.atleast_2d(X)) + self.bias

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "sse": self.sse,
            "objective": self.objective,
            "converged": self.converged,
            "bias": self.bias,
            "observability": self.observability.to_dict(),
        }


def design_matrix(X: np.ndarray) -> sparse.csr_matrix:
    """Rows ``a`` with ``a @ g`` equal to the Choquet integral of each input.

    For a walk with sorted inputs ``s_1 >= ... >= s_n`` the coefficient of
    ``g(A_j)`` is ``s_j - s_{j+1}`` (with ``s_{n+1} = 0``) and that of
    ``g(empty)`` is ``-s_1``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    m, n = X.shape
    perms = sort_walks(X)
    chains = chain_masks(perms)
    s = np.take_along_axis(X, perms, axis=1)
    coef = s - np.concatenate([s[:, 1:], np.zeros((m, 1))], axis=1)
    rows = np.repeat(np.arange(m), n + 1)
    cols = np.concatenate([np.zeros((m, 1), dtype=np.int64), chains], axis=1).ravel()
    vals = np.concatenate([-s[:, :1], coef], axis=1).ravel()
    return sparse.csr_matrix((vals, (rows, cols)), shape=(m, 1 << n))


def project_monotone(values: np.ndarray, n: int, normalized: bool = True) -> np.ndarray:
    """Repair a value vector into a valid measure.

    Boundaries are clamped (and interior values clipped into [0, g(X)]),
    then each value is raised to the max over its subsets and lowered to
    the min over its supersets until nothing changes.
    """
    g = np.array(values, dtype=float)
    g[0] = 0.0
    if normalized:
        g[-1] = 1.0
    top = g[-1] = max(g[-1], 0.0)
    g[1:-1] = np.clip(g[1:-1], 0.0, top)
    while True:
        lifted = max_over_subsets(g, n)
        fixed = min_over_supersets(lifted, n)
        if np.array_equal(fixed, g):
            return g
        g = fixed


def project_lattice(
    values: np.ndarray, n: int, normalized: bool = True, tol: float = 1e-13, max_sweeps: int = 20_000
) -> np.ndarray:
    """Closest valid measure in the Euclidean sense (Dykstra's method).

    The cover constraints ``g(A - {k}) <= g(A)`` for a fixed ``k`` involve
    disjoint pairs, so each is projected onto at once by averaging the
    violating pairs. Cycling through the ``n`` groups and the boundary
    conditions with Dykstra's corrections converges to the projection; a
    final :func:`project_monotone` pass removes the residual violations.
    """
    x = np.array(values, dtype=float)
    masks = np.arange(1 << n)
    groups = []
    for k in range(n):
        hi = masks[(masks >> k) & 1 == 1]
        groups.append((hi ^ (1 << k), hi))
    fixed = [0, (1 << n) - 1] if normalized else [0]
    targets = np.array([0.0, 1.0][: len(fixed)])
    corr = [np.zeros_like(x) for _ in range(n + 1)]
    for _ in range(max_sweeps):
        start = x.copy()
        for i, (lo, hi) in enumerate(groups):
            y = x + corr[i]
            x = y.copy()
            bad = y[lo] > y[hi]
            mid = 0.5 * (y[lo[bad]] + y[hi[bad]])
            x[lo[bad]] = mid
            x[hi[bad]] = mid
            corr[i] = y - x
        y = x + corr[n]
        x = y.copy()
        x[fixed] = targets
        corr[n] = y - x
        if np.max(np.abs(x - start)) <= tol:
            break
    return project_monotone(x, n, normalized)


def _lipschitz(A, with_bias: bool) -> float:
    """Largest eigenvalue of the Gram matrix by power iteration."""
    rng = np.random.default_rng(0)
    dim = A.shape[1] + (1 if with_bias else 0)
    v = rng.normal(size=dim)
    lam = 1.0
    for _ in range(100):
        v /= np.linalg.norm(v)
        if with_bias:
            r = A @ v[:-1] + v[-1]
            u = np.concatenate([A.T @ r, [r.sum()]])
        else:
            u = A.T @ (A @ v)
        new = float(np.linalg.norm(u))
        v = u
        if abs(new - lam) <= 1e-10 * max(new, 1.0):
            lam = new
            break
        lam = new
    return max(lam, 1e-12)


def fit_measure(data: Dataset, opts: FitOptions | None = None) -> FitResult:
    """Least-squares fit of a measure (plus optional bias) to ``data``.

    Minimizes ``sum (C_g(h) + b - y)^2 + lambda * sum |g(A)|^p``. In
    constrained mode the iterate is repaired with :func:`project_monotone`
    after each step and starts from the mean measure; relaxed mode starts at
    zero with ``g(empty) = 0`` held fixed and no monotonicity. Variables no
    row touches receive no data gradient and stay at their start value unless
    the projection or the penalty moves them.
    """
    opts = opts or FitOptions()
    if len(data) == 0:
        raise ValueError("cannot fit an empty dataset")
    n = data.n
    if n > MAX_SOURCES:
        raise ValueError(f"n={n} exceeds the lattice cap {MAX_SOURCES}")
    A = design_matrix(data.X)
    y = data.y
    size = 1 << n

    free = np.ones(size, dtype=bool)
    free[0] = False
    if opts.constrained:
        free[-1] = False
        g = popcounts(n) / n
    else:
        g = np.zeros(size)
    b = 0.0
    lam = opts.reg_lambda if opts.reg_p is not None else 0.0
    p = opts.reg_p

    def sse_of(g, b):
        r = A @ g + b - y
        return float(r @ r), r

    def objective_of(g, sse):
        if lam == 0.0:
            return sse
        return sse + lam * float(np.sum(np.abs(g[free]) ** p))

    def project(g):
        if opts.constrained:
            return project_monotone(g, n)
        g = g.copy()
        g[0] = 0.0
        return g

    def exact(g):
        return project_lattice(g, n)

    g = project(g)
    sse, r = sse_of(g, b)
    obj = objective_of(g, sse)
    history = [sse]
    step0 = opts.step_size or 1.0 / (2.0 * _lipschitz(A, opts.bias))
    step = step0
    # The cheap repair is tried first. It is not a true projection and can
    # stall at active constraints, so once it stops making progress every
    # step uses the exact projection instead.
    projections = (project, exact) if opts.constrained else (project,)
    converged = False
    it = 0
    for it in range(1, opts.max_iterations + 1):
        grad = 2.0 * (A.T @ r)
        if lam:
            if p == 1:
                grad = grad + lam * np.sign(g)
            else:
                grad = grad + 2.0 * lam * g
        grad[~free] = 0.0
        gb = 2.0 * float(r.sum()) if opts.bias else 0.0
        accepted = False
        base = step
        for proj in projections:
            step = base
            for _ in range(40):
                g_new = proj(g - step * grad)
                b_new = b - step * gb
                sse_new, r_new = sse_of(g_new, b_new)
                obj_new = objective_of(g_new, sse_new)
                if not math.isfinite(obj_new):
                    raise NumericalError(
                        f"non-finite objective at iteration {it} (step {step:g}, "
                        f"last objective {obj:g})"
                    )
                if obj_new < obj:
                    accepted = True
                    break
                step *= 0.5
            if accepted:
                break
        if not accepted:
            converged = True
            break
        decrease = obj - obj_new
        moved = max(float(np.max(np.abs(g_new - g))), abs(b_new - b))
        g, b, r, sse, obj = g_new, b_new, r_new, sse_new, obj_new
        history.append(sse)
        stalled = moved <= 1e-13 or decrease <= opts.tol * max(obj, 1e-300)
        if stalled and proj is projections[-1] and step >= step0:
            converged = True
            break
        if stalled:
            # retry from a full-size step before concluding anything
            projections = projections[-1:]
            step = step0
        else:
            step *= 1.5

    if not math.isfinite(sse):
        raise NumericalError("fit produced a non-finite SSE")
    measure = FuzzyMeasure(n, g, normalized=opts.constrained, constrained=opts.constrained)
    return FitResult(
        measure=measure,
        bias=float(b),
        iterations=it,
        sse=sse,
        objective=obj,
        converged=converged,
        observability=track_observability(data),
        history=history,
    )


def save_report(result: FitResult, path: str | PathLike) -> None:
    with open(path, "w") as fh:
        json.dump(result.to_dict(), fh, indent=1)
        fh.write("\n")


def load_observability(path: str | PathLike) -> ObservabilityRecord:
    """Read an observability record, bare or embedded in a fit report."""
    with open(path) as fh:
        doc = json.load(fh)
    if "observability" in doc:
        doc = doc["observability"]
    return ObservabilityRecord.from_dict(doc)
