"""How the measure comparison depends on the assumed perturbation scale.

Counterfactual distance is fixed by the classifier alone; flip
probability also depends on how large the real perturbations are.
Sweeping the covariance scale shows the two measures agree best at one
intermediate scale, determined by the classifier, and drift apart on
both sides of it.
"""

from pathlib import Path

import numpy as np

import rwrobust as rw
from rwrobust import dataio

points, _, _ = rw.ranking_divergence_set()
data = rw.dataio.Dataset(
    features=points,
    labels=np.array(["?"] * len(points), dtype=object),
    columns=("x1", "x2"),
    kinds=(rw.FeatureKind("continuous"),) * 2,
)
f = rw.CornerClassifier(a1=0.0, a2=0.0)
base = rw.PerturbationModel(gaussian=rw.CovarianceSpec(np.eye(2)))

scales = list(np.logspace(-1.5, 1.5, 7))
curve = rw.scale_sweep(f, data, base, scales, 10_000, seed=42)

print(f"{'scale':>9} {'pearson':>9} {'spearman':>9} {'defined':>8}")
for p in curve:
    print(f"{p.scale:9.4f} {p.pearson:9.4f} {p.spearman:9.4f} {p.n_defined:8d}")

best = max(curve, key=lambda p: p.spearman)
print()
print(f"rank agreement peaks at scale {best.scale:.3g}, an interior value:")
print("too little noise and every point looks perfectly robust, too much and")
print("the flip probabilities wash out; either way the ranking decouples from")
print("boundary distance")

out = Path("demo_out")
out.mkdir(exist_ok=True)
dataio.atomic_write(out / "sweep.csv", dataio.render_sweep(curve))
print(f"wrote {out / 'sweep.csv'}")
