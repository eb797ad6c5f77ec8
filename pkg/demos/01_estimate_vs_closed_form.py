"""Monte-Carlo robustness vs the exact closed forms.

For the two analytically solvable classifiers (a linear rule and a
right-angle corner rule) the keep probability under Gaussian noise has an
exact expression.  This script estimates the same quantity by sampling
and shows the agreement, which is the core correctness argument for the
estimator.
"""

import numpy as np

import rwrobust as rw

iso = rw.PerturbationModel(gaussian=rw.CovarianceSpec(np.eye(2)))
unit = rw.GaussianUncertainty2D(1.0, 1.0)
n = 100_000

print("linear rule: predict 1 iff x2 > 0.5, unit isotropic noise")
print(f"{'x2':>6} {'exact':>10} {'monte-carlo':>12} {'stderr':>9}")
f = rw.LinearClassifier(w=(0.0, 1.0), b=0.0)
for k, x2 in enumerate([-1.0, 0.5, 0.8, 1.5, 3.0]):
    x = np.array([0.0, x2])
    exact = rw.exact_pr_linear((0.0, 1.0), 0.0, x, unit)
    est = rw.estimate(f, x, iso, n, rw.SampleStream(1, k))
    print(f"{x2:6.2f} {exact:10.5f} {est.p_r:12.5f} {est.stderr:9.5f}")

print()
print("corner rule: predict 1 iff x1 > 0 and x2 > 0")
print(f"{'point':>14} {'exact':>10} {'monte-carlo':>12}")
g = rw.CornerClassifier(a1=0.0, a2=0.0)
for k, point in enumerate([(0.0, 0.0), (1.0, 1.0), (2.0, 0.3), (-1.0, -1.0), (0.5, 4.0)]):
    x = np.array(point)
    exact = rw.exact_pr_corner((0.0, 0.0), x, unit)
    est = rw.estimate(g, x, iso, n, rw.SampleStream(2, k))
    print(f"{str(point):>14} {exact:10.5f} {est.p_r:12.5f}")

print()
print("note how the corner point keeps its label with probability 3/4:")
print("noise crosses the boundary in three of the four quadrants' worth of mass")
