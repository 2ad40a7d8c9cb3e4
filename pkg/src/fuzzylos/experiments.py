"""Synthetic noise and sampling sweeps.

A noise sweep labels inputs with a known measure plus Gaussian noise, fits a
measure back and counts the operators the fit decomposes into. A sampling
sweep restricts training inputs to a fraction of the walks and compares the
decomposition of the whole fitted measure with the one restricted to walks
the data observed.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from os import PathLike
from pathlib import Path
from typing import Sequence

import numpy as np

from .decomposition import DEFAULT_EPSILON, OperatorSet, decompose, naive_discovery
from .learning import DatasetSpec, FitOptions, fit_measure, generate_dataset
from .measure import (
    FuzzyMeasure,
    demining_measure,
    load_measure,
    measure_from_los,
    named_los,
    random_monotone_measure,
    reference_measure,
)

NOISE_COLUMNS = ["kind", "sigma", "seed", "k", "recovery_error", "sse", "coverage"]
SAMPLING_COLUMNS = [
    "kind", "walk_fraction", "seed", "k", "k_full", "recovery_error", "sse",
    "coverage", "identical",
]


class ConfigError(ValueError):
    pass


def recovery_error(found: np.ndarray, truth: np.ndarray) -> float:
    """Worst-case componentwise distance from a true operator to its closest match."""
    found = np.atleast_2d(found)
    truth = np.atleast_2d(truth)
    gaps = np.abs(truth[:, None, :] - found[None, :, :]).max(axis=2)
    return float(gaps.min(axis=1).max())


def same_operators(a: OperatorSet, b: OperatorSet) -> bool:
    return (
        a.k == b.k
        and np.array_equal(a.operators, b.operators)
        and a.sort_map == b.sort_map
        and np.array_equal(a.counts, b.counts)
    )


def resolve_measure(source: str, n: int = 5, seed: int | None = None) -> FuzzyMeasure:
    """Measure by name (``reference`` or its alias ``fig4``, ``demining``, ``random``, a familiar operator) or file path."""
    if source in ("reference", "fig4"):
        return reference_measure()
    if source == "demining":
        return demining_measure()
    if source == "random":
        if seed is None:
            raise ConfigError("a random measure needs a seed")
        return random_monotone_measure(n, seed)
    if source in ("max", "min", "mean", "median"):
        return measure_from_los(named_los(source, n))
    return load_measure(source)


@dataclass
class ExperimentConfig:
    kind: str
    measure: str = "reference"
    measure_n: int = 5
    measure_seed: int | None = None
    sigmas: list[float] = field(default_factory=lambda: [0.0])
    walk_fractions: list[float] = field(default_factory=lambda: [1.0])
    seeds: list[int] = field(default_factory=lambda: [0])
    rows_per_walk: int = 1
    sigma: float = 0.0
    epsilon: float = DEFAULT_EPSILON
    k_max: int | None = None
    reg_p: float | None = None
    reg_lambda: float = 0.0
    max_iterations: int = 20_000
    output_dir: str | None = None

    def __post_init__(self):
        if self.kind not in ("noise-sweep", "sampling-sweep"):
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.kind == "noise-sweep" and not self.sigmas:
            raise ConfigError("noise sweep needs a non-empty sigma list")
        if self.kind == "sampling-sweep" and not self.walk_fractions:
            raise ConfigError("sampling sweep needs a non-empty walk fraction list")
        if any(s < 0 for s in self.sigmas) or self.sigma < 0:
            raise ConfigError("noise levels must be non-negative")
        if any(not 0 < f <= 1 for f in self.walk_fractions):
            raise ConfigError("walk fractions must lie in (0, 1]")
        if self.rows_per_walk < 1:
            raise ConfigError("rows_per_walk must be at least 1")

    @classmethod
    def from_dict(cls, doc: dict) -> ExperimentConfig:
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path: str | PathLike) -> ExperimentConfig:
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(doc)

    def fit_options(self) -> FitOptions:
        return FitOptions(
            reg_p=self.reg_p, reg_lambda=self.reg_lambda, max_iterations=self.max_iterations
        )


def noise_sweep(cfg: ExperimentConfig) -> list[dict]:
    g = resolve_measure(cfg.measure, cfg.measure_n, cfg.measure_seed)
    truth = naive_discovery(g).operators
    rows = []
    for sigma in cfg.sigmas:
        for seed in cfg.seeds:
            data = generate_dataset(
                DatasetSpec(g, sigma=sigma, seed=seed, coverage="quota", quota=cfg.rows_per_walk)
            )
            fit = fit_measure(data, cfg.fit_options())
            ops = decompose(fit.measure, epsilon=cfg.epsilon, k_max=cfg.k_max).operators
            rows.append({
                "kind": cfg.kind,
                "sigma": sigma,
                "seed": seed,
                "k": ops.k,
                "recovery_error": recovery_error(ops.operators, truth),
                "sse": fit.sse,
                "coverage": ops.coverage,
            })
    return rows


def sampling_sweep(cfg: ExperimentConfig) -> list[dict]:
    g = resolve_measure(cfg.measure, cfg.measure_n, cfg.measure_seed)
    n_walks = math.factorial(g.n)
    truth = naive_discovery(g).operators
    rows = []
    for frac in cfg.walk_fractions:
        for seed in cfg.seeds:
            rng = np.random.default_rng(seed)
            n_keep = max(1, round(frac * n_walks))
            walks = np.sort(rng.choice(n_walks, size=n_keep, replace=False))
            data = generate_dataset(
                DatasetSpec(
                    g, m=n_keep * cfg.rows_per_walk, sigma=cfg.sigma, seed=seed,
                    coverage="subset", walks=walks.tolist(),
                )
            )
            fit = fit_measure(data, cfg.fit_options())
            full = decompose(fit.measure, epsilon=cfg.epsilon, k_max=cfg.k_max).operators
            seen = decompose(
                fit.measure, fit.observability, epsilon=cfg.epsilon, k_max=cfg.k_max
            ).operators
            rows.append({
                "kind": cfg.kind,
                "walk_fraction": frac,
                "seed": seed,
                "k": seen.k,
                "k_full": full.k,
                "recovery_error": recovery_error(full.operators, truth),
                "sse": fit.sse,
                "coverage": seen.coverage,
                "identical": same_operators(full, seen),
            })
    return rows


def run_experiment(cfg: ExperimentConfig) -> list[dict]:
    if cfg.kind == "noise-sweep":
        return noise_sweep(cfg)
    return sampling_sweep(cfg)


def write_report(rows: Sequence[dict], path: str | PathLike, kind: str) -> None:
    columns = NOISE_COLUMNS if kind == "noise-sweep" else SAMPLING_COLUMNS
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def median_k(rows: Sequence[dict], key: str, value: float) -> float:
    return float(np.median([r["k"] for r in rows if r[key] == value]))
