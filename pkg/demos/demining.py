"""Three-sensor fusion where one sensor is trusted unless it disagrees.

Source 0 on its own carries no weight, sources 1 and 2 are each fully
trusted, and any pair is. When source 0 reads highest the integral takes
the median; otherwise it takes the maximum.
"""

from fuzzylos import choquet, demining_measure, discover_operators

g = demining_measure()
ops = discover_operators(g)
for (name, _), w, c in zip(ops.nearest_named(), ops.operators, ops.counts):
    print(f"{name:>6}: weights {w.tolist()} on {c} of 6 sorts")

for h in ([0.9, 0.2, 0.1], [0.1, 0.9, 0.2]):
    print(f"inputs {h} -> {choquet(g, h)}")
