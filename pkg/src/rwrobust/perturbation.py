"""Perturbation models and seeded sampling around test points.

The uncertainty of a test point is modeled as a multivariate normal
distribution over its continuous features, described by a covariance
matrix (conventionally trace-normalized so it carries only correlation
structure) plus a scalar scale, and, for categorical features, by
per-feature transition matrices whose rows give the probability of a
category value being replaced by each other value.

All types are immutable after construction.  Sampling is a pure function
of ``(model, point, stream)``, so it can run concurrently from any number
of workers without coordination.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateCovarianceError,
    InvariantViolation,
    LayoutError,
)

# Relative tolerance for the positive-semi-definiteness check: eigenvalues
# may undershoot zero by at most this fraction of the largest eigenvalue.
PSD_RTOL = 1e-10

ROW_SUM_TOL = 1e-9


@dataclass(frozen=True)
class SampleStream:
    """Deterministic random stream keyed by (master_seed, point_index, counter).

    Streams for distinct point indices (and distinct counters) are
    statistically independent, so per-point work can be distributed over
    workers in any order without changing the drawn samples.

    Parameters
    ----------
    master_seed : int
        Nonnegative 64-bit seed for the whole run.
    point_index : int
        Index of the test point this stream belongs to.
    counter : int
        Sub-stream counter, used to key independent batches within a point.
    """

    master_seed: int
    point_index: int = 0
    counter: int = 0

    def __post_init__(self):
        if self.master_seed < 0 or self.point_index < 0 or self.counter < 0:
            raise InvariantViolation("stream keys must be nonnegative integers")

    def generator(self) -> np.random.Generator:
        """Fresh generator for this (seed, point, counter) triple."""
        seq = np.random.SeedSequence(
            entropy=self.master_seed,
            spawn_key=(self.point_index, self.counter),
        )
        return np.random.default_rng(seq)

    def for_point(self, point_index: int) -> SampleStream:
        return replace(self, point_index=point_index, counter=0)

    def with_counter(self, counter: int) -> SampleStream:
        return replace(self, counter=counter)


@dataclass(frozen=True)
class CovarianceSpec:
    """Covariance of the Gaussian perturbation, with a separate scalar scale.

    The effective covariance of the sampled noise is ``scale * matrix``.
    Keeping the scale separate lets one matrix (typically trace 1) describe
    the correlation structure while the scale sets the overall perturbation
    magnitude.

    Invariants enforced at construction: the matrix is square, exactly
    symmetric as stored, and positive semi-definite up to ``PSD_RTOL``
    relative to its largest eigenvalue; the scale is nonnegative (zero
    gives the degenerate no-noise distribution).
    """

    matrix: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
            raise InvariantViolation(f"covariance must be square, got shape {m.shape}")
        if not np.array_equal(m, m.T):
            raise InvariantViolation("covariance matrix must be symmetric")
        if not np.isfinite(m).all():
            raise InvariantViolation("covariance matrix must be finite")
        if not np.isfinite(self.scale) or self.scale < 0:
            raise InvariantViolation("scale must be a finite nonnegative number")
        eig = np.linalg.eigvalsh(m)
        if eig[0] < -PSD_RTOL * max(eig[-1], 0.0):
            raise InvariantViolation(
                f"covariance matrix is not positive semi-definite "
                f"(min eigenvalue {eig[0]:g})"
            )
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "scale", float(self.scale))

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def scaled(self, factor: float) -> CovarianceSpec:
        """Same correlation structure with the scale multiplied by ``factor``."""
        if factor < 0:
            raise InvariantViolation("scale factor must be nonnegative")
        return CovarianceSpec(matrix=self.matrix, scale=self.scale * factor)


def trace_normalize(c: CovarianceSpec) -> CovarianceSpec:
    """Rescale the matrix to trace 1, leaving the scale untouched.

    Raises
    ------
    DegenerateCovarianceError
        If the trace is zero or negative (nothing to normalize).
    """
    tr = float(np.trace(c.matrix))
    if tr <= 0.0:
        raise DegenerateCovarianceError(f"trace must be positive, got {tr:g}")
    return CovarianceSpec(matrix=c.matrix / tr, scale=c.scale)


def make_random_covariance(n: int, stream: SampleStream) -> CovarianceSpec:
    """Random trace-1 covariance matrix built as A.T @ A.

    ``A`` has i.i.d. standard-normal entries drawn from ``stream``, which
    makes the product symmetric and positive semi-definite by construction;
    the result is then trace-normalized.
    """
    if n < 1:
        raise InvariantViolation(f"dimension must be >= 1, got {n}")
    a = stream.generator().standard_normal((n, n))
    c = a.T @ a
    c = (c + c.T) / 2.0  # force exact symmetry against BLAS rounding
    return trace_normalize(CovarianceSpec(matrix=c, scale=1.0))


def factorize(c: CovarianceSpec) -> np.ndarray:
    """Matrix square root L of the effective covariance: L @ L.T = scale * matrix.

    Uses Cholesky when the matrix is positive definite.  Singular matrices
    (rank-deficient products, or scale 0) fall back to a jittered Cholesky
    and finally to an eigen-decomposition with negative eigenvalues clamped
    to zero; in those cases L is not triangular but still reconstructs the
    input within 1e-9 in max-norm.
    """
    if not np.array_equal(c.matrix, c.matrix.T):
        raise InvariantViolation("covariance matrix must be symmetric")
    m = c.scale * c.matrix
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        pass
    jitter = 1e-12 * float(np.trace(m))
    if jitter > 0.0:
        try:
            return np.linalg.cholesky(m + jitter * np.eye(m.shape[0]))
        except np.linalg.LinAlgError:
            pass
    w, v = np.linalg.eigh(m)
    return v * np.sqrt(np.clip(w, 0.0, None))


@dataclass(frozen=True)
class CategoricalTransition:
    """Transition probabilities for one categorical feature.

    ``matrix[i, j]`` is the probability that stored value ``i`` is perturbed
    into value ``j``.  Rows are probability distributions (entries in [0, 1],
    each row summing to 1 within ``ROW_SUM_TOL``); symmetry is not required.
    """

    feature: int
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
            raise InvariantViolation(
                f"transition matrix must be square, got shape {m.shape}"
            )
        if (m < 0.0).any() or (m > 1.0).any():
            raise InvariantViolation("transition probabilities must lie in [0, 1]")
        sums = m.sum(axis=1)
        if np.abs(sums - 1.0).max() > ROW_SUM_TOL:
            bad = int(np.abs(sums - 1.0).argmax())
            raise InvariantViolation(
                f"transition row {bad} sums to {sums[bad]:.12g}, expected 1"
            )
        if self.feature < 0:
            raise InvariantViolation("feature index must be nonnegative")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def n_values(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class PerturbationModel:
    """Per-point perturbation distribution over a mixed feature space.

    ``gaussian`` covers the continuous coordinates (all features not named
    by a categorical transition, unless ``continuous_idx`` pins them
    explicitly).  ``per_point`` switches to per-point mode: one covariance
    per test point, selected by the stream's ``point_index``; the global
    ``gaussian`` is then ignored.
    """

    gaussian: CovarianceSpec | None = None
    categorical: tuple[CategoricalTransition, ...] = ()
    continuous_idx: tuple[int, ...] | None = None
    per_point: tuple[CovarianceSpec, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "categorical", tuple(self.categorical))
        if self.per_point is not None:
            object.__setattr__(self, "per_point", tuple(self.per_point))
        if self.continuous_idx is not None:
            object.__setattr__(
                self, "continuous_idx", tuple(int(i) for i in self.continuous_idx)
            )
        cats = [t.feature for t in self.categorical]
        if len(set(cats)) != len(cats):
            raise InvariantViolation("duplicate categorical feature index")

    def layout(self, n_features: int) -> tuple[np.ndarray, tuple[CategoricalTransition, ...]]:
        """Resolve and validate the continuous/categorical partition.

        The two index sets must be disjoint and together cover
        ``range(n_features)`` exactly.
        """
        cat_idx = {t.feature for t in self.categorical}
        if cat_idx and max(cat_idx) >= n_features:
            raise LayoutError(
                f"categorical feature {max(cat_idx)} out of range for "
                f"{n_features} features"
            )
        if self.continuous_idx is None:
            cont = np.array(sorted(set(range(n_features)) - cat_idx), dtype=int)
        else:
            cont = np.array(self.continuous_idx, dtype=int)
            if set(cont) & cat_idx:
                raise LayoutError("continuous and categorical indices overlap")
            if set(cont) | cat_idx != set(range(n_features)):
                raise LayoutError(
                    "continuous and categorical indices must cover all features"
                )
        cats = tuple(sorted(self.categorical, key=lambda t: t.feature))
        return cont, cats

    def covariance_for(self, point_index: int) -> CovarianceSpec | None:
        if self.per_point is not None:
            if not 0 <= point_index < len(self.per_point):
                raise LayoutError(
                    f"no per-point covariance for point {point_index} "
                    f"({len(self.per_point)} provided)"
                )
            return self.per_point[point_index]
        return self.gaussian

    def scaled(self, factor: float) -> PerturbationModel:
        """Multiply every covariance scale by ``factor`` (transitions untouched)."""
        return PerturbationModel(
            gaussian=None if self.gaussian is None else self.gaussian.scaled(factor),
            categorical=self.categorical,
            continuous_idx=self.continuous_idx,
            per_point=None
            if self.per_point is None
            else tuple(c.scaled(factor) for c in self.per_point),
        )


def sample(
    model: PerturbationModel,
    x_t: np.ndarray,
    stream: SampleStream,
    k: int,
) -> np.ndarray:
    """Draw ``k`` i.i.d. perturbed copies of ``x_t``.

    Continuous coordinates receive correlated Gaussian noise ``L @ z`` with
    ``L`` the covariance factor; each categorical coordinate is resampled
    from its transition-matrix row for the point's current value.  The
    result is a ``(k, n_features)`` array, fully determined by
    ``(model, x_t, stream, k)``.
    """
    if k < 1:
        raise InvariantViolation(f"sample count must be >= 1, got {k}")
    x_t = np.asarray(x_t, dtype=float)
    if x_t.ndim != 1:
        raise LayoutError(f"test point must be 1-D, got shape {x_t.shape}")
    n = x_t.shape[0]
    cont, cats = model.layout(n)
    cov = model.covariance_for(stream.point_index)
    if cov is not None and cont.size and cov.n != cont.size:
        raise LayoutError(
            f"covariance is {cov.n}x{cov.n} but there are {cont.size} "
            f"continuous features"
        )

    rng = stream.generator()
    out = np.tile(x_t, (k, 1))
    if cov is not None and cont.size:
        factor = factorize(cov)
        z = rng.standard_normal((k, cont.size))
        out[:, cont] += z @ factor.T
    for tr in cats:
        current = x_t[tr.feature]
        value = int(round(current))
        if value != current or not 0 <= value < tr.n_values:
            raise LayoutError(
                f"feature {tr.feature} value {current!r} is not a category "
                f"in [0, {tr.n_values})"
            )
        out[:, tr.feature] = rng.choice(tr.n_values, size=k, p=tr.matrix[value])
    return out


def load_perturbation_model(
    path: str | Path,
    kinds=None,
    n_features: int | None = None,
) -> PerturbationModel:
    """Build a PerturbationModel from its JSON config file.

    Config schema::

        {"continuous": {"covariance": [[...]], "scale": s,
                        "random": {"seed": u64}},
         "categorical": [{"feature": i, "matrix": [[...]]}],
         "per_point_covariances": "path.csv"}

    The continuous block takes either an explicit ``covariance`` or a
    ``random`` seed (the matrix is then generated like
    :func:`make_random_covariance`, which needs the continuous dimension
    from ``kinds`` or ``n_features``).  The per-point CSV holds one row per
    test point with n*n columns, row-major; its path is resolved relative
    to the config file.  ``kinds`` is the dataset's feature-kind list and,
    when given, is used to validate the partition and category counts.
    """
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)

    transitions = []
    for entry in raw.get("categorical", []):
        transitions.append(
            CategoricalTransition(feature=int(entry["feature"]), matrix=entry["matrix"])
        )

    cat_idx = {t.feature for t in transitions}
    if kinds is not None:
        n_features = len(kinds)
        declared_cats = {i for i, kind in enumerate(kinds) if kind.is_categorical}
        if cat_idx - declared_cats:
            raise LayoutError(
                f"transition given for non-categorical feature(s) "
                f"{sorted(cat_idx - declared_cats)}"
            )
        for t in transitions:
            m = kinds[t.feature].categories
            if t.n_values != m:
                raise LayoutError(
                    f"feature {t.feature} has {m} categories but the "
                    f"transition matrix is {t.n_values}x{t.n_values}"
                )
        n_cont = n_features - len(declared_cats)
        cont_idx = tuple(i for i, kind in enumerate(kinds) if not kind.is_categorical)
    elif n_features is not None:
        n_cont = n_features - len(cat_idx)
        cont_idx = tuple(i for i in range(n_features) if i not in cat_idx)
    else:
        n_cont = None
        cont_idx = None

    gaussian = None
    scale = 1.0
    cont_block = raw.get("continuous")
    if cont_block is not None:
        scale = float(cont_block.get("scale", 1.0))
        has_explicit = "covariance" in cont_block
        has_random = "random" in cont_block
        if has_explicit and has_random:
            raise InvariantViolation(
                "continuous block gives both an explicit and a random covariance"
            )
        if has_explicit:
            gaussian = CovarianceSpec(matrix=cont_block["covariance"], scale=scale)
        elif has_random:
            if n_cont is None:
                raise LayoutError(
                    "random covariance needs the feature layout to fix its dimension"
                )
            seed = int(cont_block["random"]["seed"])
            gaussian = make_random_covariance(n_cont, SampleStream(seed)).scaled(scale)

    per_point = None
    pp_path = raw.get("per_point_covariances")
    if pp_path is not None:
        if gaussian is not None:
            raise InvariantViolation(
                "config gives both a global covariance and per-point covariances"
            )
        per_point = _load_per_point(path.parent / pp_path, scale)

    return PerturbationModel(
        gaussian=gaussian,
        categorical=tuple(transitions),
        continuous_idx=cont_idx,
        per_point=per_point,
    )


def _load_per_point(path: Path, scale: float) -> tuple[CovarianceSpec, ...]:
    specs = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row_no, row in enumerate(csv.reader(fh)):
            if not row:
                continue
            values = np.array([float(v) for v in row])
            n = int(round(np.sqrt(values.size)))
            if n * n != values.size:
                raise LayoutError(
                    f"{path}: row {row_no + 1} has {values.size} values, "
                    f"not a square count"
                )
            specs.append(CovarianceSpec(matrix=values.reshape(n, n), scale=scale))
    if not specs:
        raise LayoutError(f"{path}: no covariance rows found")
    return tuple(specs)
