import numpy as np
import pytest

import rwrobust as rw
from rwrobust.errors import InvariantViolation, LayoutError


def test_linear_rule_examples():
    f = rw.LinearClassifier(w=(0.0, 1.0), b=0.0)
    assert f.predict([(7.3, 1.5)])[0] == "1"  # 1.5 > 0.5
    assert f.predict([(7.3, 0.2)])[0] == "0"
    # boundary tie predicts 0
    assert f.predict([(0.0, 0.5)])[0] == "0"


def test_linear_flip_exactly_at_sign_change():
    f = rw.LinearClassifier(w=(2.0, -1.0), b=0.25)
    rng = np.random.default_rng(4)
    x = rng.normal(size=(500, 2))
    score = x @ np.array([2.0, -1.0]) + 0.25
    expected = np.where(score > 0.5, "1", "0")
    assert (f.predict(x) == expected).all()


def test_linear_rejects_zero_weights():
    with pytest.raises(InvariantViolation):
        rw.LinearClassifier(w=(0.0, 0.0))


def test_corner_rule_examples():
    f = rw.CornerClassifier(a1=1.0, a2=2.0)
    assert f.predict([(0.5, 5.0)])[0] == "0"  # x1 <= a1
    assert f.predict([(3.0, 5.0)])[0] == "1"
    assert f.predict([(1.0, 2.0)])[0] == "0"  # exactly on the corner
    assert f.predict([(3.0, 2.0)])[0] == "0"  # on the horizontal arm


def test_corner_needs_distinct_indices():
    with pytest.raises(InvariantViolation):
        rw.CornerClassifier(a1=0.0, a2=0.0, idx=(1, 1))


def test_constant_classifier():
    f = rw.ConstantClassifier(label="only")
    assert list(f.predict(np.zeros((3, 4)))) == ["only"] * 3


def test_knn_nearest_neighbor_example():
    f = rw.KnnClassifier(1, [(0.0, 0.0), (10.0, 10.0)], ["a", "b"])
    assert f.predict([(1.0, 1.0)])[0] == "a"
    assert f.predict([(9.0, 9.5)])[0] == "b"


def test_knn_majority_and_tie_rules():
    x = [(0.0,), (1.0,), (2.0,), (10.0,), (11.0,)]
    y = ["a", "b", "b", "c", "c"]
    f = rw.KnnClassifier(3, x, y)
    assert f.predict([(1.0,)])[0] == "b"
    # vote tie among {"b", "c"} at k=3 around x=6 resolves lexicographically
    g = rw.KnnClassifier(3, [(5.0,), (7.0,), (7.0,)], ["b", "c", "c"])
    assert g.predict([(6.0,)])[0] == "c"


def test_knn_validation():
    with pytest.raises(InvariantViolation):
        rw.KnnClassifier(2, [(0.0,), (1.0,)], ["a", "b"])  # even k
    with pytest.raises(InvariantViolation):
        rw.KnnClassifier(5, [(0.0,), (1.0,)], ["a", "b"])  # k > points


def test_tree_separable_1d():
    x = np.concatenate([np.linspace(-2, -0.1, 10), np.linspace(0.1, 2, 10)])[:, None]
    y = np.array(["a"] * 10 + ["b"] * 10, dtype=object)
    tree = rw.fit_tree((x, y), max_depth=3)
    assert tree.depth() == 1
    assert abs(tree.root["threshold"]) < 0.11
    assert (tree.predict(x) == y).all()


def test_tree_shatters_xor_at_depth_2():
    # asymmetric cluster sizes give the greedy splitter a first-cut gain;
    # exhaustive check: the fitted depth-2 axis splits label all points
    x = np.array(
        [(1.0, 1.0)] * 7 + [(-1.0, -1.0)] * 5 + [(1.0, -1.0)] * 4 + [(-1.0, 1.0)] * 4
    )
    y = np.array(["a"] * 12 + ["b"] * 8, dtype=object)
    tree = rw.fit_tree((x, y), max_depth=2)
    assert (tree.predict(x) == y).all()
    assert tree.depth() == 2


def test_tree_single_class_is_flagged_constant():
    x = np.arange(6, dtype=float)[:, None]
    y = np.array(["same"] * 6, dtype=object)
    tree = rw.fit_tree((x, y), max_depth=3)
    assert tree.constant
    assert tree.depth() == 0
    assert (tree.predict(x) == "same").all()


def test_tree_regions_match_corner_geometry():
    # two features, max_depth 2, labels from a corner rule: the fitted tree
    # must reproduce the right-angle decision regions
    rng = rw.SampleStream(31).generator()
    x = rng.uniform(-2, 2, size=(300, 2))
    corner = rw.CornerClassifier(a1=0.5, a2=-0.5)
    y = corner.predict(x)
    tree = rw.fit_tree((x, y), max_depth=2)
    grid = np.array([(a, b) for a in np.linspace(-1.9, 1.9, 21) for b in np.linspace(-1.9, 1.9, 21)])
    agree = (tree.predict(grid) == corner.predict(grid)).mean()
    assert agree > 0.97


def test_tree_json_round_trip():
    x = np.array([(0.0, 0.0), (1.0, 1.0), (0.0, 1.0), (1.0, 0.0)] * 3)
    y = np.array((["a", "a", "b", "b"] * 3), dtype=object)
    tree = rw.fit_tree((x, y), max_depth=2)
    clone = rw.DecisionTreeClassifier.from_json(tree.to_json())
    probe = np.random.default_rng(0).uniform(-1, 2, size=(50, 2))
    assert (tree.predict(probe) == clone.predict(probe)).all()


def test_tree_needs_two_samples():
    with pytest.raises(InvariantViolation):
        rw.fit_tree((np.zeros((1, 1)), np.array(["a"], dtype=object)), max_depth=1)


def test_predict_is_pure():
    f = rw.LinearClassifier(w=(1.0, 1.0), b=-0.3)
    x = np.random.default_rng(9).normal(size=(100, 2))
    assert (f.predict(x) == f.predict(x)).all()


def test_label_token_validation():
    assert rw.validate_label_token("ok-token_1") == "ok-token_1"
    for bad in ("", "two words", "a,b", "line\nbreak"):
        with pytest.raises(InvariantViolation):
            rw.validate_label_token(bad)


def test_feature_count_checks():
    f = rw.LinearClassifier(w=(0.0, 1.0))
    with pytest.raises(LayoutError):
        f.predict(np.zeros((2, 3)))
