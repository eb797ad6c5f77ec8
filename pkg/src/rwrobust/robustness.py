"""Monte-Carlo estimation of per-point prediction robustness.

For a test point x_t with prediction f(x_t), the flip probability P is the
probability that a perturbation drawn from the point's perturbation model
changes the prediction; the robustness of the prediction is P_r = 1 - P.
P is estimated as the fraction of N perturbed samples whose prediction
differs from the unperturbed one (the plain expectation of the flip
indicator under the perturbation distribution).

Sampling within a point is split into fixed-size batches, each keyed by
its own stream counter, so results are bit-identical for any worker count
and any evaluation order.
"""

from __future__ import annotations

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import EstimationError, InvariantViolation
from .perturbation import PerturbationModel, SampleStream, sample

# Samples per sub-batch.  Fixed: changing it would change which stream
# counter produces which sample and thereby the estimates.
BATCH_SIZE = 4096

# Counter namespace reserved for the counterfactual search so that its
# draws never collide with estimation batches (which use small counters).
SEARCH_COUNTER = 1 << 30


@dataclass(frozen=True)
class FlipConfig:
    """Flip-comparison mode: label inequality, or |delta| > gamma for regression.

    In regression mode a perturbed output counts as changed only when it
    differs from the base output by strictly more than ``gamma``; exact
    equality with ``gamma`` counts as unchanged.
    """

    mode: str = "classification"
    gamma: float | None = None

    def __post_init__(self):
        if self.mode not in ("classification", "regression"):
            raise InvariantViolation(f"unknown mode {self.mode!r}")
        if self.mode == "regression":
            if self.gamma is None or not self.gamma > 0:
                raise InvariantViolation("regression mode needs gamma > 0")
        elif self.gamma is not None:
            raise InvariantViolation("gamma only applies to regression mode")


@dataclass(frozen=True)
class RobustnessEstimate:
    """Monte-Carlo estimate of the flip probability for one test point.

    ``p_flip`` is the fraction of perturbed samples whose prediction
    changed, ``p_r = 1 - p_flip``, ``stderr`` the binomial standard error
    sqrt(p(1-p)/N).  When the flip count is exactly 0 or N the plug-in
    standard error is 0; ``rule_of_three`` then carries the 3/N bound on
    the unobserved side.
    """

    point_index: int
    base_label: str
    p_flip: float
    p_r: float
    stderr: float
    n_samples: int
    master_seed: int
    rule_of_three: float | None = None


@dataclass(frozen=True)
class ConvergenceReport:
    """Pairwise agreement of repeated estimation runs.

    ``pairwise`` holds Pearson correlations between the runs' robustness
    vectors (unit diagonal); pairs involving a zero-variance run are NaN
    and the runs in question are listed in ``degenerate_runs`` rather than
    being given a fabricated correlation.
    """

    n_repeats: int
    pairwise: np.ndarray
    min_correlation: float
    degenerate_runs: tuple[int, ...] = ()


def pearson(a, b) -> float:
    """Pearson correlation; NaN if either input has zero variance."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    da = a - a.mean()
    db = b - b.mean()
    va = np.dot(da, da)
    vb = np.dot(db, db)
    if va == 0.0 or vb == 0.0:
        return float("nan")
    return float(np.dot(da, db) / math.sqrt(va * vb))


def _base_value(label):
    return float(label)


def flip_indicator(f, x_t, x_hat, cfg: FlipConfig = FlipConfig(), base=None) -> int:
    """1 if the prediction for x_hat differs from the one for x_t, else 0.

    ``base`` short-circuits re-evaluating f(x_t) when the base prediction
    is already cached.
    """
    x_t = np.asarray(x_t, dtype=float)
    x_hat = np.asarray(x_hat, dtype=float)
    if base is None:
        base = f.predict(x_t[None])[0]
    pred = f.predict(x_hat[None])[0]
    if cfg.mode == "classification":
        return int(str(pred) != str(base))
    return int(abs(_base_value(pred) - _base_value(base)) > cfg.gamma)


def _count_flips(preds, base, cfg: FlipConfig) -> int:
    if cfg.mode == "classification":
        return int(np.count_nonzero(preds.astype(str) != str(base)))
    values = np.asarray(preds, dtype=float)
    return int(np.count_nonzero(np.abs(values - _base_value(base)) > cfg.gamma))


def estimate(
    f,
    x_t,
    model: PerturbationModel,
    n: int,
    stream: SampleStream,
    cfg: FlipConfig = FlipConfig(),
) -> RobustnessEstimate:
    """Estimate the flip probability for one point from n perturbed samples.

    The base prediction f(x_t) is evaluated once and every perturbed
    prediction is compared against it.  Deterministic given
    ``(model, x_t, stream, n)``.
    """
    if n < 1:
        raise InvariantViolation(f"sample count must be >= 1, got {n}")
    x_t = np.asarray(x_t, dtype=float)
    base = f.predict(x_t[None])[0]
    flips = 0
    done = 0
    batch_no = 0
    while done < n:
        k = min(BATCH_SIZE, n - done)
        xs = sample(model, x_t, stream.with_counter(batch_no), k)
        flips += _count_flips(f.predict(xs), base, cfg)
        done += k
        batch_no += 1
    p_flip = flips / n
    return RobustnessEstimate(
        point_index=stream.point_index,
        base_label=str(base),
        p_flip=p_flip,
        p_r=1.0 - p_flip,
        stderr=math.sqrt(p_flip * (1.0 - p_flip) / n),
        n_samples=n,
        master_seed=stream.master_seed,
        rule_of_three=3.0 / n if flips in (0, n) else None,
    )


def estimate_dataset(
    f,
    dataset,
    model: PerturbationModel,
    n: int,
    master_seed: int,
    cfg: FlipConfig = FlipConfig(),
    workers: int = 1,
    classifier_provider=None,
):
    """Estimate robustness for every point of a dataset.

    Each point uses its own substream keyed by the point's index (the
    dataset's retained source row when present), so the result does not
    depend on row order, evaluation order, or worker count.

    Returns ``(estimates, failures)``: per-point errors are collected as
    ``EstimationError`` entries instead of aborting the run.  Only when
    every point fails is the first error raised.

    ``classifier_provider``, when given, is called once per worker thread
    to obtain that worker's classifier (needed for external models, whose
    handles serialize requests).
    """
    features = np.asarray(dataset.features, dtype=float)
    if features.shape[0] == 0:
        raise InvariantViolation("dataset is empty")
    indices = getattr(dataset, "source_rows", None)
    if indices is None:
        indices = np.arange(features.shape[0])
    indices = np.asarray(indices, dtype=int)

    local = threading.local()

    def classifier():
        if classifier_provider is None:
            return f
        c = getattr(local, "classifier", None)
        if c is None:
            c = classifier_provider()
            local.classifier = c
        return c

    def one(row):
        point_index = int(indices[row])
        stream = SampleStream(master_seed, point_index)
        try:
            return estimate(classifier(), features[row], model, n, stream, cfg)
        except Exception as exc:  # collected, reported per point
            return EstimationError(point_index, exc)

    if workers <= 1:
        results = [one(row) for row in range(features.shape[0])]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(features.shape[0])))

    estimates = [r for r in results if isinstance(r, RobustnessEstimate)]
    failures = [r for r in results if isinstance(r, EstimationError)]
    if failures and not estimates:
        raise failures[0]
    return estimates, failures


def convergence_check(
    f,
    dataset,
    model: PerturbationModel,
    n: int,
    seeds,
    cfg: FlipConfig = FlipConfig(),
    workers: int = 1,
    classifier_provider=None,
) -> ConvergenceReport:
    """Repeat the dataset estimation once per seed and correlate the runs.

    A converged Monte-Carlo setup shows pairwise Pearson correlations of
    the per-point robustness vectors close to 1; a low minimum indicates
    the sample count is too small.  Runs whose robustness vector has zero
    variance (all points equally robust) make the correlation undefined;
    they are flagged and their pairs reported as NaN.
    """
    seeds = [int(s) for s in seeds]
    if len(seeds) < 2:
        raise InvariantViolation("need at least two repeat seeds")
    if np.asarray(dataset.features).shape[0] < 3:
        raise InvariantViolation("need at least 3 points for a convergence check")

    vectors = []
    for seed in seeds:
        ests, failures = estimate_dataset(
            f, dataset, model, n, seed, cfg, workers, classifier_provider
        )
        if failures:
            raise failures[0]
        vectors.append(np.array([e.p_r for e in ests]))

    m = len(vectors)
    degenerate = tuple(i for i, v in enumerate(vectors) if np.ptp(v) == 0.0)
    pairwise = np.eye(m)
    for i in range(m):
        for j in range(i + 1, m):
            pairwise[i, j] = pairwise[j, i] = pearson(vectors[i], vectors[j])
    off_diag = pairwise[~np.eye(m, dtype=bool)]
    defined = off_diag[~np.isnan(off_diag)]
    min_corr = float(defined.min()) if defined.size else float("nan")
    return ConvergenceReport(
        n_repeats=m,
        pairwise=pairwise,
        min_correlation=min_corr,
        degenerate_runs=degenerate,
    )
