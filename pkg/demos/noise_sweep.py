"""How label noise inflates the number of operators a fitted measure holds.

One training row per walk is labelled by the reference measure plus
Gaussian noise, a measure is fitted back and decomposed. Without noise the
four true operators come back; with noise the count scatters. The count
tends to be either small (noise merged into broad blocks) or capped at
k_max (every walk drifted apart), so medians over many seeds are the
meaningful summary.
"""

import sys

from fuzzylos.experiments import ExperimentConfig, median_k, run_experiment

seeds = int(sys.argv[1]) if len(sys.argv) > 1 else 8
cfg = ExperimentConfig(kind="noise-sweep", sigmas=[0.0, 0.025, 0.05, 0.1], seeds=list(range(seeds)))
rows = run_experiment(cfg)
print("sigma  seed  k  recovery_error")
for r in rows:
    print(f"{r['sigma']:<6} {r['seed']:>4} {r['k']:>2}  {r['recovery_error']:.3g}")
for sigma in cfg.sigmas:
    print(f"sigma={sigma}: median k = {median_k(rows, 'sigma', sigma):g}")
