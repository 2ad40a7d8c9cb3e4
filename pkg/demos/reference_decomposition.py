"""Walk through the decomposition of the five-source reference measure.

The measure gives every singleton 0.1 and every triple 0.6; pairs and
4-subsets vary. Its 120 walks collapse to four distinct order statistics.
Run from the repository root:

    python3 demos/reference_decomposition.py [output-dir]
"""

import sys
from pathlib import Path

import numpy as np

from fuzzylos import choquet, decompose, evaluate_with_operators, reference_measure
from fuzzylos.clustering import render_grayscale, write_pgm

out_dir = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output")
out_dir.mkdir(exist_ok=True)

g = reference_measure()
dec = decompose(g)
ops = dec.operators

print(f"{len(dec.samples)} walks, {len(dec.vectors)} distinct weight vectors")
print(f"partition objective by block count: {np.round(dec.partition.objectives, 3)}")
for i, (w, c) in enumerate(zip(ops.operators, ops.counts)):
    print(f"operator {i}: {np.round(w, 3)} used by {c} walks")

# Every walk collapses onto its medoid exactly, so the compressed form
# (20 numbers plus the sort map) reproduces all 32 measure values' behaviour.
rng = np.random.default_rng(0)
worst = max(
    abs(evaluate_with_operators(ops, h).value - choquet(g, h))
    for h in rng.uniform(size=(2000, 5))
)
print(f"largest gap between operator evaluation and the integral: {worst:.2e}")

image = out_dir / "reference_ivat.pgm"
write_pgm(image, render_grayscale(dec.expanded_ivat(), dark_similar=True))
print(f"iVAT image (similar walks dark) written to {image}")
