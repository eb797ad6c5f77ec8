"""Measuring a model that lives in another process.

Any model reachable by a command line can be measured: the estimator
writes feature lines to the child's standard input and reads one label
per line back.  Here the 'external model' is a tiny inline script; real
models are served the same way by the rwrobust-adapter package, which
wraps any pickled object with a predict method.
"""

import sys
import textwrap
from pathlib import Path

import numpy as np

import rwrobust as rw

out = Path("demo_out")
out.mkdir(exist_ok=True)
child_path = out / "band_model.py"
child_path.write_text(textwrap.dedent("""
    # predicts "in" for points inside the unit band around the x1 axis
    import sys
    for line in sys.stdin:
        x1, x2 = map(float, line.split(","))
        print("in" if abs(x2) < 1.0 else "out", flush=True)
""").strip() + "\n")

command = f"{sys.executable} {child_path}"
print(f"child command: {command}")

with rw.ExternalClassifier(command, n_features=2) as f:
    f.self_test(np.random.default_rng(0).normal(size=(16, 2)))
    print("determinism self-test passed")

    iso = rw.PerturbationModel(gaussian=rw.CovarianceSpec(np.eye(2)))
    print(f"{'x2':>6} {'p_r':>8}   (band edges at |x2| = 1)")
    for k, x2 in enumerate([0.0, 0.7, 1.0, 1.4, 3.0]):
        est = rw.estimate(f, np.array([0.0, x2]), iso, 20_000, rw.SampleStream(5, k))
        print(f"{x2:6.2f} {est.p_r:8.4f}")

print()
print("points near the band edge are fragile from both sides; the center of")
print("the band is the locally most robust place, yet still capped well below")
print("1 because the boundary is close in two directions")
