"""Model artifacts the adapter can serve."""

from __future__ import annotations

import pickle
from pathlib import Path

import numpy as np


class ThresholdModel:
    """Predicts class 1 when one feature exceeds a cutoff (ties predict 0).

    Mirrors a linear rule with a single active weight; mainly useful as a
    pickleable reference model for protocol checks.
    """

    def __init__(self, feature: int = 1, cutoff: float = 0.5):
        self.feature = int(feature)
        self.cutoff = float(cutoff)

    def predict(self, x):
        x = np.asarray(x, dtype=float)
        return (x[:, self.feature] > self.cutoff).astype(int)


def load_model(path):
    """Unpickle a model artifact and check it exposes batch predict."""
    path = Path(path)
    if path.suffix == ".joblib":
        import joblib

        model = joblib.load(path)
    else:
        with open(path, "rb") as fh:
            model = pickle.load(fh)
    if not callable(getattr(model, "predict", None)):
        raise TypeError(f"{path}: loaded object has no predict() method")
    return model
