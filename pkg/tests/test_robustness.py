import math

import numpy as np
import pytest

import rwrobust as rw
from rwrobust.errors import EstimationError, InvariantViolation

from conftest import plain_dataset

ISO2 = rw.PerturbationModel(gaussian=rw.CovarianceSpec(np.eye(2)))


class IdentityRegressor:
    """Returns the first coordinate; a minimal regression-mode model."""

    def predict(self, x):
        return np.asarray(x, dtype=float)[:, 0]


class RelabeledClassifier:
    """Wraps a classifier and renames its label tokens."""

    def __init__(self, inner, mapping):
        self.inner = inner
        self.mapping = mapping

    def predict(self, x):
        return np.array([self.mapping[str(t)] for t in self.inner.predict(x)], dtype=object)


def test_flip_indicator_zero_perturbation():
    f = rw.LinearClassifier(w=(0.0, 1.0))
    x = np.array([0.3, 0.9])
    assert rw.flip_indicator(f, x, x) == 0


def test_flip_indicator_linear_flip():
    f = rw.LinearClassifier(w=(0.0, 1.0), b=0.0)
    assert rw.flip_indicator(f, np.array([0.0, 1.0]), np.array([0.0, 0.2])) == 1


def test_flip_indicator_regression_threshold():
    cfg = rw.FlipConfig(mode="regression", gamma=1.0)
    f = IdentityRegressor()
    assert rw.flip_indicator(f, np.array([0.0]), np.array([0.5]), cfg) == 0
    assert rw.flip_indicator(f, np.array([0.0]), np.array([1.5]), cfg) == 1
    # exact equality with gamma counts as unchanged
    assert rw.flip_indicator(f, np.array([0.0]), np.array([1.0]), cfg) == 0


def test_flip_config_validation():
    with pytest.raises(InvariantViolation):
        rw.FlipConfig(mode="regression")
    with pytest.raises(InvariantViolation):
        rw.FlipConfig(mode="classification", gamma=1.0)
    with pytest.raises(InvariantViolation):
        rw.FlipConfig(mode="nonsense")


def test_estimate_zero_scale_is_fully_robust():
    model = rw.PerturbationModel(gaussian=rw.CovarianceSpec(np.eye(2), scale=0.0))
    f = rw.LinearClassifier(w=(1.0, 1.0), b=0.1)
    est = rw.estimate(f, np.array([5.0, -3.0]), model, 1000, rw.SampleStream(0, 0))
    assert est.p_r == 1.0
    assert est.p_flip == 0.0
    assert est.rule_of_three == 3.0 / 1000


def test_estimate_on_boundary_is_half():
    f = rw.LinearClassifier(w=(0.0, 1.0), b=0.0)
    est = rw.estimate(f, np.array([0.0, 0.5]), ISO2, 10_000, rw.SampleStream(1, 0))
    assert est.p_r == pytest.approx(0.5, abs=0.015)


def test_estimate_matches_normal_cdf_at_unit_distance():
    # oracle: the exact keep probability is Phi(1), computed via math.erf
    phi1 = 0.5 * (1.0 + math.erf(1.0 / math.sqrt(2.0)))
    f = rw.LinearClassifier(w=(0.0, 1.0), b=0.0)
    est = rw.estimate(f, np.array([0.0, 1.5]), ISO2, 10_000, rw.SampleStream(2, 0))
    assert est.p_r == pytest.approx(phi1, abs=0.015)


def test_estimate_corner_product_of_cdfs():
    phi1 = 0.5 * (1.0 + math.erf(1.0 / math.sqrt(2.0)))
    f = rw.CornerClassifier(a1=1.0, a2=2.0)
    est = rw.estimate(f, np.array([2.0, 3.0]), ISO2, 10_000, rw.SampleStream(3, 0))
    assert est.p_r == pytest.approx(phi1**2, abs=0.015)


def test_estimate_identities_and_stderr():
    f = rw.CornerClassifier(a1=0.0, a2=0.0)
    est = rw.estimate(f, np.array([0.4, 0.2]), ISO2, 7_500, rw.SampleStream(4, 9))
    assert est.p_r + est.p_flip == 1.0
    assert est.stderr == pytest.approx(
        math.sqrt(est.p_flip * (1.0 - est.p_flip) / est.n_samples)
    )
    assert est.point_index == 9
    assert est.master_seed == 4
    assert est.rule_of_three is None


def test_estimate_deterministic_and_seed_sensitive():
    f = rw.LinearClassifier(w=(0.0, 1.0))
    x = np.array([0.0, 1.0])
    a = rw.estimate(f, x, ISO2, 5000, rw.SampleStream(10, 0))
    b = rw.estimate(f, x, ISO2, 5000, rw.SampleStream(10, 0))
    c = rw.estimate(f, x, ISO2, 5000, rw.SampleStream(11, 0))
    assert a == b
    assert a.p_flip != c.p_flip


def test_estimate_relabeling_invariance():
    f = rw.LinearClassifier(w=(0.0, 1.0))
    swapped = RelabeledClassifier(f, {"0": "neg", "1": "pos"})
    x = np.array([0.2, 0.8])
    a = rw.estimate(f, x, ISO2, 4000, rw.SampleStream(5, 0))
    b = rw.estimate(swapped, x, ISO2, 4000, rw.SampleStream(5, 0))
    assert a.p_flip == b.p_flip


def test_regression_gamma_to_infinity_is_robust():
    cfg = rw.FlipConfig(mode="regression", gamma=1e12)
    model = rw.PerturbationModel(gaussian=rw.CovarianceSpec(np.eye(1)))
    est = rw.estimate(IdentityRegressor(), np.zeros(1), model, 2000, rw.SampleStream(6, 0), cfg)
    assert est.p_r == 1.0


def test_estimate_dataset_constant_classifier():
    data = plain_dataset([(0.0, 0.0), (1.0, 2.0), (-3.0, 0.5)])
    ests, failures = rw.estimate_dataset(
        rw.ConstantClassifier("x"), data, ISO2, 1000, master_seed=0
    )
    assert failures == []
    assert [e.p_r for e in ests] == [1.0, 1.0, 1.0]


def test_estimate_dataset_worker_counts_identical():
    data = plain_dataset(np.random.default_rng(0).normal(size=(12, 2)))
    f = rw.CornerClassifier(a1=0.0, a2=0.0)
    one, _ = rw.estimate_dataset(f, data, ISO2, 2000, 42, workers=1)
    eight, _ = rw.estimate_dataset(f, data, ISO2, 2000, 42, workers=8)
    assert one == eight


def test_estimate_dataset_shuffle_invariance():
    data = plain_dataset(np.random.default_rng(1).normal(size=(10, 2)))
    f = rw.LinearClassifier(w=(1.0, -0.5), b=0.2)
    plain, _ = rw.estimate_dataset(f, data, ISO2, 2000, 7)
    shuffled_rows = np.array([7, 2, 9, 0, 4, 1, 8, 3, 6, 5])
    shuffled, _ = rw.estimate_dataset(f, data.take(shuffled_rows), ISO2, 2000, 7)
    by_index = {e.point_index: e for e in shuffled}
    assert all(by_index[e.point_index] == e for e in plain)


def test_estimate_dataset_collects_failures():
    class FailsOnMarkedPoint:
        # trips only on the exact base point (3, 0); perturbed samples
        # around it never reproduce it exactly
        def predict(self, x):
            if (np.asarray(x) == np.array([3.0, 0.0])).all(axis=1).any():
                raise RuntimeError("boom")
            return rw.ConstantClassifier("c").predict(x)

    data = plain_dataset([(0.0, 0.0), (3.0, 0.0), (1.0, 1.0)])
    ests, failures = rw.estimate_dataset(FailsOnMarkedPoint(), data, ISO2, 100, 0)
    assert len(ests) == 2 and len(failures) == 1
    assert failures[0].point_index == 1

    class AlwaysFails:
        def predict(self, x):
            raise RuntimeError("dead")

    with pytest.raises(EstimationError):
        rw.estimate_dataset(AlwaysFails(), data, ISO2, 100, 0)


def test_convergence_identical_seeds_correlate_exactly(convergence_setup):
    tree, data, model = convergence_setup
    report = rw.convergence_check(tree, data, model, 500, [3, 3])
    assert report.pairwise[0, 1] == 1.0
    assert report.min_correlation == 1.0


def test_convergence_degenerate_run_flagged():
    data = plain_dataset([(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)])
    report = rw.convergence_check(
        rw.ConstantClassifier("c"), data, ISO2, 200, [1, 2, 3]
    )
    assert report.degenerate_runs == (0, 1, 2)
    assert math.isnan(report.min_correlation)
    off_diag = report.pairwise[~np.eye(3, dtype=bool)]
    assert np.isnan(off_diag).all()


def test_convergence_requires_enough_points():
    data = plain_dataset([(0.0, 0.0), (1.0, 1.0)])
    with pytest.raises(InvariantViolation):
        rw.convergence_check(rw.ConstantClassifier("c"), data, ISO2, 100, [1, 2])


def test_monotone_consistency_large_n_closer():
    # at n=1e5 the estimate must be within the 4-sigma band of the exact
    # value; at n=100 it will usually be farther in absolute terms
    phi = lambda z: 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))
    f = rw.LinearClassifier(w=(0.0, 1.0))
    x = np.array([0.0, 1.2])
    exact = phi(0.7)
    big = rw.estimate(f, x, ISO2, 100_000, rw.SampleStream(8, 0))
    band = 4.0 * math.sqrt(exact * (1.0 - exact) / 100_000)
    assert abs(big.p_r - exact) <= band
