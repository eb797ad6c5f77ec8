"""Serve a trained model over the robustness tool's line protocol.

The adapter loads a serialized model (anything with a batch ``predict``),
reads feature lines from standard input, and answers exactly one label
token per line on standard output, so the robustness estimator can treat
the model as a black box child process.
"""

from .models import ThresholdModel, load_model
from .serve import AdapterConfig, serve

__version__ = "0.1.0"
