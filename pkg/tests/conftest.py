"""Shared fixtures: frozen synthetic setups and child-process model scripts."""

from __future__ import annotations

import textwrap

import numpy as np
import pytest

import rwrobust as rw


def make_convergence_setup():
    """Frozen 50-point synthetic setup with a depth-3 tree classifier.

    Training labels follow a corner rule plus a vertical wall, so a
    depth-3 CART fits them exactly.  The test points sit in four designed
    clusters (near-corner inside/outside, near-wall, deep-cell) giving a
    wide spread of robustness values, which is what makes run-to-run
    correlations informative.
    """
    rng = rw.SampleStream(7070).generator()
    x_train = rng.uniform(-2.5, 2.5, size=(400, 2))
    y_train = np.where(
        ((x_train[:, 0] > 0) & (x_train[:, 1] > 0)) | (x_train[:, 0] < -1.5), "a", "b"
    )
    tree = rw.fit_tree((x_train, y_train), max_depth=3)

    rng2 = rw.SampleStream(7171).generator()
    inside = np.column_stack(
        [rng2.uniform(0.05, 0.30, 20), rng2.uniform(0.05, 0.30, 20)]
    )
    outside = np.column_stack(
        [rng2.uniform(-0.30, -0.05, 5), rng2.uniform(-0.30, 0.30, 5)]
    )
    wall = np.column_stack([rng2.uniform(-1.7, -1.3, 5), rng2.uniform(-2.0, 2.0, 5)])
    deep = np.vstack(
        [
            np.column_stack([rng2.uniform(1.5, 2.3, 10), rng2.uniform(1.5, 2.3, 10)]),
            np.column_stack([rng2.uniform(-0.9, -0.4, 10), rng2.uniform(-2.2, -1.2, 10)]),
        ]
    )
    points = np.vstack([inside, outside, wall, deep])
    data = rw.Dataset(
        features=points,
        labels=tree.predict(points),
        columns=("x1", "x2"),
        kinds=(rw.FeatureKind("continuous"),) * 2,
    )
    model = rw.PerturbationModel(
        gaussian=rw.trace_normalize(rw.CovarianceSpec(np.eye(2))).scaled(0.25)
    )
    return tree, data, model


@pytest.fixture(scope="session")
def convergence_setup():
    return make_convergence_setup()


def plain_dataset(points):
    points = np.asarray(points, dtype=float)
    return rw.Dataset(
        features=points,
        labels=np.array(["?"] * len(points), dtype=object),
        columns=tuple(f"x{i + 1}" for i in range(points.shape[1])),
        kinds=(rw.FeatureKind("continuous"),) * points.shape[1],
    )


CHILD_SCRIPTS = {
    # threshold on the second feature, mirroring builtin linear w=(0,1), b=0
    "threshold": """
        import sys
        for line in sys.stdin:
            x2 = float(line.split(",")[1])
            print("1" if x2 > 0.5 else "0", flush=True)
    """,
    "crash_after_5": """
        import sys
        n = 0
        for line in sys.stdin:
            n += 1
            if n > 5:
                sys.exit(1)
            print("0", flush=True)
    """,
    "malformed": """
        import sys
        for line in sys.stdin:
            print("label with spaces", flush=True)
    """,
    "sleepy": """
        import sys, time
        for line in sys.stdin:
            time.sleep(60)
            print("0", flush=True)
    """,
    "random": """
        import sys, random
        for line in sys.stdin:
            print(random.choice("01"), flush=True)
    """,
    "identity_regression": """
        import sys
        for line in sys.stdin:
            print(line.split(",")[0].strip(), flush=True)
    """,
}


@pytest.fixture(scope="session")
def child(tmp_path_factory):
    """Map a child-model name to a runnable script path."""
    base = tmp_path_factory.mktemp("children")
    paths = {}
    for name, body in CHILD_SCRIPTS.items():
        path = base / f"{name}.py"
        path.write_text(textwrap.dedent(body).strip() + "\n")
        paths[name] = path

    def get(name):
        return str(paths[name])

    return get
