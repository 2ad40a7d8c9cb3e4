"""Using the integral as a regression model without measure constraints.

Targets come from an unnormalised set function (total weight 1.2, so the
walk weights leave the simplex) plus an offset of 0.2. Relaxed fitting
drops monotonicity and normalisation and learns a free bias. The fitted
function is then decomposed; weights off the simplex force observed-range
scaling of the dissimilarities.
"""

import numpy as np

from fuzzylos import Dataset, FitOptions, FuzzyMeasure, choquet_batch, decompose, fit_measure

# source 0 present -> 1.2; otherwise 0.3 per source
truth = FuzzyMeasure(3, [0.0, 1.2, 0.3, 1.2, 0.3, 1.2, 0.6, 1.2], normalized=False, constrained=False)
rng = np.random.default_rng(3)
X = rng.uniform(size=(300, 3))
y = choquet_batch(truth, X) + 0.2

fit = fit_measure(Dataset(X, y), FitOptions(constrained=False, bias=True, max_iterations=100_000))
print(f"bias {fit.bias:.4f}, sse {fit.sse:.2e}, {fit.iterations} iterations")
print(f"largest value error {np.abs(fit.measure.values - truth.values).max():.2e}")

dec = decompose(fit.measure)
print(f"dissimilarity scaling: {dec.dissimilarity.normalization}")
for w, c in zip(dec.operators.operators, dec.operators.counts):
    print(f"operator {np.round(w, 3) + 0.0} on {c} sorts")
