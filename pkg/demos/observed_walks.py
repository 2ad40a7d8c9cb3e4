"""Decomposing only the walks the training data actually supports.

Training rows are drawn from a random 15% of the sorts. Variables on the
remaining walks never receive a gradient and stay at their starting value,
so operators read off those walks describe the initialisation rather than
the data. Restricting the decomposition to fully observed walks avoids that.
"""

import numpy as np

from fuzzylos import DatasetSpec, decompose, fit_measure, generate_dataset, reference_measure
from fuzzylos.learning import interval_of_uncertainty

g = reference_measure()
rng = np.random.default_rng(1)
walks = sorted(rng.choice(120, size=18, replace=False).tolist())
data = generate_dataset(DatasetSpec(g, m=36, seed=1, coverage="subset", walks=walks))
fit = fit_measure(data)
obs = fit.observability
print(f"{obs.n_seen} of 32 measure variables touched by {len(data)} rows")

iv = interval_of_uncertainty(fit.measure, obs)
wide = np.sort(iv.width[~iv.seen])[::-1]
print(f"widest uncertainty intervals among unseen variables: {np.round(wide[:5], 3)}")

full = decompose(fit.measure)
seen = decompose(fit.measure, obs)
print(f"all walks:      {full.operators.k} operators over {len(full.samples)} walks")
print(f"observed walks: {seen.operators.k} operators over {len(seen.samples)} walks "
      f"(coverage {seen.operators.coverage:.2f})")
