"""Dataset loading, normalization, splitting, and comparison reports.

CSV datasets are plain comma-separated text with a mandatory header row
and a ``.`` decimal point.  A JSON schema names the label column and the
categorical columns with their category counts; every other column is a
continuous feature::

    {"label": "species", "categorical": {"color": 3}}

Report files serialize floating-point values with 9 significant digits;
that precision is the defined round-trip contract.
"""

from __future__ import annotations

import csv
import os
import tempfile
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .classifiers import validate_label_token
from .counterfactual import (
    AdversarialRobustness,
    SearchConfig,
    adversarial_scores,
    find_counterfactual,
)
from .errors import DataFormatError, InvariantViolation, LayoutError
from .perturbation import PerturbationModel, SampleStream
from .robustness import SEARCH_COUNTER, FlipConfig, estimate_dataset, pearson


@dataclass(frozen=True)
class FeatureKind:
    """Column kind: continuous, or categorical with ``categories`` values."""

    kind: str
    categories: int | None = None

    def __post_init__(self):
        if self.kind not in ("continuous", "categorical"):
            raise InvariantViolation(f"unknown feature kind {self.kind!r}")
        if self.kind == "categorical" and (self.categories is None or self.categories < 2):
            raise InvariantViolation("categorical features need >= 2 categories")
        if self.kind == "continuous" and self.categories is not None:
            raise InvariantViolation("continuous features carry no category count")

    @property
    def is_categorical(self) -> bool:
        return self.kind == "categorical"


CONTINUOUS = FeatureKind("continuous")


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with label tokens and per-column kinds.

    ``source_rows`` retains each row's index in the file (or parent
    dataset) it came from; estimation uses it as the per-point stream key,
    so shuffles and splits do not change any point's estimate.
    """

    features: np.ndarray
    labels: np.ndarray
    columns: tuple[str, ...]
    kinds: tuple[FeatureKind, ...]
    source_rows: np.ndarray | None = None

    def __post_init__(self):
        features = np.asarray(self.features, dtype=float)
        if features.ndim != 2:
            raise LayoutError(f"features must be 2-D, got shape {features.shape}")
        labels = np.asarray(self.labels, dtype=object)
        if labels.shape[0] != features.shape[0]:
            raise LayoutError("label count differs from row count")
        if len(self.columns) != features.shape[1] or len(self.kinds) != features.shape[1]:
            raise LayoutError("column names/kinds differ from feature count")
        for j, kind in enumerate(self.kinds):
            if kind.is_categorical:
                col = features[:, j]
                if ((col != np.round(col)) | (col < 0) | (col >= kind.categories)).any():
                    raise DataFormatError(
                        f"column '{self.columns[j]}' has values outside "
                        f"[0, {kind.categories})"
                    )
        rows = self.source_rows
        if rows is None:
            rows = np.arange(features.shape[0])
        rows = np.asarray(rows, dtype=int)
        if rows.shape[0] != features.shape[0]:
            raise LayoutError("source_rows length differs from row count")
        features.setflags(write=False)
        labels.setflags(write=False)
        rows.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "kinds", tuple(self.kinds))
        object.__setattr__(self, "source_rows", rows)

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def continuous_indices(self) -> tuple[int, ...]:
        return tuple(i for i, k in enumerate(self.kinds) if not k.is_categorical)

    def take(self, rows) -> Dataset:
        rows = np.asarray(rows, dtype=int)
        return Dataset(
            features=self.features[rows],
            labels=self.labels[rows],
            columns=self.columns,
            kinds=self.kinds,
            source_rows=self.source_rows[rows],
        )


def load_csv(path, schema) -> Dataset:
    """Parse a headed CSV into a Dataset using the given schema dict.

    Malformed cells raise :class:`DataFormatError` naming the 1-based data
    row and the column.
    """
    label_col = schema["label"]
    categorical = {str(k): int(v) for k, v in schema.get("categorical", {}).items()}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file, header required") from None
        header = [h.strip() for h in header]
        if label_col not in header:
            raise DataFormatError(f"{path}: missing label column '{label_col}'")
        unknown = set(categorical) - set(header)
        if unknown:
            raise DataFormatError(f"{path}: categorical column(s) {sorted(unknown)} not in header")
        label_pos = header.index(label_col)
        feature_cols = [h for h in header if h != label_col]
        kinds = tuple(
            FeatureKind("categorical", categorical[c]) if c in categorical else CONTINUOUS
            for c in feature_cols
        )

        rows, labels = [], []
        for row_no, cells in enumerate(reader, start=1):
            if not cells:
                continue
            if len(cells) != len(header):
                raise DataFormatError(
                    f"{path}: row {row_no} has {len(cells)} cells, expected {len(header)}"
                )
            try:
                labels.append(validate_label_token(cells[label_pos].strip()))
            except InvariantViolation as exc:
                raise DataFormatError(
                    f"{path}: row {row_no}, column '{label_col}': {exc}"
                ) from None
            values = []
            for name, kind, cell in zip(
                feature_cols,
                kinds,
                (c for i, c in enumerate(cells) if i != label_pos),
            ):
                cell = cell.strip()
                try:
                    value = float(cell)
                except ValueError:
                    raise DataFormatError(
                        f"{path}: row {row_no}, column '{name}': "
                        f"cannot parse {cell!r} as a number"
                    ) from None
                if kind.is_categorical and not (
                    value == int(value) and 0 <= value < kind.categories
                ):
                    raise DataFormatError(
                        f"{path}: row {row_no}, column '{name}': value {cell!r} "
                        f"outside categories [0, {kind.categories})"
                    )
                values.append(value)
            rows.append(values)
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    return Dataset(
        features=np.array(rows, dtype=float),
        labels=np.array(labels, dtype=object),
        columns=tuple(feature_cols),
        kinds=kinds,
    )


def filter_labels(data: Dataset, keep) -> Dataset:
    """Rows whose label is in ``keep`` (e.g. reduce a 3-class set to binary)."""
    keep = {str(k) for k in keep}
    mask = np.array([str(t) in keep for t in data.labels])
    return data.take(np.nonzero(mask)[0])


def split(data: Dataset, train_fraction: float = 2 / 3, stream: SampleStream = None):
    """Seeded uniform shuffle, then split; both parts keep their source rows."""
    if data.n_rows < 3:
        raise InvariantViolation("need at least 3 rows to split")
    if not 0.0 < train_fraction < 1.0:
        raise InvariantViolation("train_fraction must lie in (0, 1)")
    if stream is None:
        stream = SampleStream(0)
    perm = stream.generator().permutation(data.n_rows)
    n_train = min(max(int(data.n_rows * train_fraction), 1), data.n_rows - 1)
    return data.take(perm[:n_train]), data.take(perm[n_train:])


@dataclass(frozen=True)
class NormalizationParams:
    """Affine standardization learned on a training split.

    Continuous columns are centered and scaled to unit sample standard
    deviation (n-1 denominator); constant columns are flagged and left
    unscaled.  Categorical columns are never touched.
    """

    column_indices: tuple[int, ...]
    mean: np.ndarray
    std: np.ndarray
    constant: tuple[int, ...] = ()


def fit_normalizer(train: Dataset) -> NormalizationParams:
    idx = train.continuous_indices()
    block = train.features[:, idx]
    mean = block.mean(axis=0)
    std = block.std(axis=0, ddof=1) if train.n_rows > 1 else np.zeros(len(idx))
    constant = tuple(int(idx[j]) for j in np.nonzero(std == 0.0)[0])
    for col in constant:
        warnings.warn(
            f"column '{train.columns[col]}' is constant on the training split; "
            f"left unscaled"
        )
    mean = np.where(std == 0.0, 0.0, mean)
    std = np.where(std == 0.0, 1.0, std)
    return NormalizationParams(
        column_indices=tuple(int(i) for i in idx),
        mean=mean,
        std=std,
        constant=constant,
    )


def apply_normalizer(params: NormalizationParams, data: Dataset) -> Dataset:
    features = data.features.copy()
    idx = list(params.column_indices)
    features[:, idx] = (features[:, idx] - params.mean) / params.std
    return replace(data, features=features)


@dataclass(frozen=True)
class ComparisonReport:
    """Per-point robustness vs normalized counterfactual distance.

    Aggregates: Pearson and Spearman correlation between the two measures
    and the number of strictly discordant pairs (rank inversions), all
    computed over the points with a converged counterfactual
    (``n_defined`` of them).  Zero variance in either measure makes the
    correlations NaN.
    """

    point_index: np.ndarray
    p_r: np.ndarray
    stderr: np.ndarray
    d_cf: np.ndarray
    r_adv: np.ndarray
    converged: np.ndarray
    pearson: float
    spearman: float
    inversions: int
    n_defined: int


def spearman(a, b) -> float:
    """Spearman rank correlation with average ranks on ties."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return pearson(rankdata(a, method="average"), rankdata(b, method="average"))


def _inversions(a, b) -> int:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    da = np.sign(a[:, None] - a[None, :])
    db = np.sign(b[:, None] - b[None, :])
    discordant = (da * db) < 0
    return int(np.triu(discordant, k=1).sum())


def compare_report(robustness, adversarial: AdversarialRobustness) -> ComparisonReport:
    """Join per-point robustness estimates with adversarial scores.

    Inputs must describe the same points in the same order.
    """
    robustness = list(robustness)
    if len(robustness) != len(adversarial.d):
        raise LayoutError("estimate and counterfactual lists differ in length")
    p_r = np.array([e.p_r for e in robustness])
    stderr = np.array([e.stderr for e in robustness])
    point_index = np.array([e.point_index for e in robustness], dtype=int)
    mask = adversarial.converged
    defined_pr = p_r[mask]
    defined_r = adversarial.r[mask]
    return ComparisonReport(
        point_index=point_index,
        p_r=p_r,
        stderr=stderr,
        d_cf=adversarial.d,
        r_adv=adversarial.r,
        converged=mask,
        pearson=pearson(defined_pr, defined_r) if mask.sum() >= 2 else float("nan"),
        spearman=spearman(defined_pr, defined_r) if mask.sum() >= 2 else float("nan"),
        inversions=_inversions(defined_pr, defined_r),
        n_defined=int(mask.sum()),
    )


@dataclass(frozen=True)
class SweepPoint:
    """One scale step of a perturbation-scale sweep."""

    scale: float
    pearson: float
    spearman: float
    n_defined: int


def scale_sweep(
    f,
    test: Dataset,
    base_model: PerturbationModel,
    scales,
    n: int,
    seed: int,
    cfg: FlipConfig = FlipConfig(),
    adversarial: AdversarialRobustness = None,
    search_cfg=None,
    workers: int = 1,
) -> list[SweepPoint]:
    """Correlation between the two measures as the perturbation scale varies.

    The covariance scale is multiplied by each sweep value in turn and the
    robustness re-estimated with the same seed; the adversarial scores are
    scale-independent and computed once (or passed in).  Degenerate steps
    where a correlation is undefined are reported as NaN, not dropped.
    """
    scales = [float(s) for s in scales]
    if any(s <= 0 for s in scales) or sorted(scales) != scales:
        raise InvariantViolation("scales must be positive and ascending")
    if adversarial is None:
        search_cfg = search_cfg or SearchConfig()
        results = [
            find_counterfactual(
                f,
                test.features[i],
                search_cfg,
                SampleStream(seed, int(test.source_rows[i]), SEARCH_COUNTER),
                continuous_idx=test.continuous_indices(),
            )
            for i in range(test.n_rows)
        ]
        adversarial = adversarial_scores(results)

    curve = []
    for s in scales:
        ests, failures = estimate_dataset(
            f, test, base_model.scaled(s), n, seed, cfg, workers
        )
        if failures:
            raise failures[0]
        report = compare_report(ests, adversarial)
        curve.append(
            SweepPoint(
                scale=s,
                pearson=report.pearson,
                spearman=report.spearman,
                n_defined=report.n_defined,
            )
        )
    return curve


# --- report files -----------------------------------------------------------

REPORT_HEADER = "point_index,base_label,p_r,p_flip,stderr,n_samples,seed"
COMPARE_HEADER = REPORT_HEADER + ",d_cf,r_adv,cf_converged"
SWEEP_HEADER = "scale,pearson,spearman,n_defined"
GRID_HEADER = "x1,x2,p_r,d_cf"


def fmt9(x: float) -> str:
    """Serialize a float with 9 significant digits (the report precision)."""
    return format(float(x), ".9g")


def atomic_write(path, text: str):
    """Write via a temp file and rename, so partial reports never appear."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def render_report(estimates) -> str:
    lines = [REPORT_HEADER]
    for e in estimates:
        lines.append(
            f"{e.point_index},{e.base_label},{fmt9(e.p_r)},{fmt9(e.p_flip)},"
            f"{fmt9(e.stderr)},{e.n_samples},{e.master_seed}"
        )
    return "\n".join(lines) + "\n"


def render_compare_report(report: ComparisonReport, estimates) -> str:
    lines = [COMPARE_HEADER]
    for i, e in enumerate(estimates):
        flag = "true" if report.converged[i] else "false"
        lines.append(
            f"{e.point_index},{e.base_label},{fmt9(e.p_r)},{fmt9(e.p_flip)},"
            f"{fmt9(e.stderr)},{e.n_samples},{e.master_seed},"
            f"{fmt9(report.d_cf[i])},{fmt9(report.r_adv[i])},{flag}"
        )
    return "\n".join(lines) + "\n"


def render_sweep(curve) -> str:
    lines = [SWEEP_HEADER]
    for p in curve:
        lines.append(f"{fmt9(p.scale)},{fmt9(p.pearson)},{fmt9(p.spearman)},{p.n_defined}")
    return "\n".join(lines) + "\n"


def render_grid(x1, x2, p_r, d_cf) -> str:
    lines = [GRID_HEADER]
    for a, b, p, d in zip(x1, x2, p_r, d_cf):
        lines.append(f"{fmt9(a)},{fmt9(b)},{fmt9(p)},{fmt9(d)}")
    return "\n".join(lines) + "\n"


def render_convergence(report) -> str:
    lines = ["run_i,run_j,pearson"]
    m = report.n_repeats
    for i in range(m):
        for j in range(i + 1, m):
            lines.append(f"{i},{j},{fmt9(report.pairwise[i, j])}")
    return "\n".join(lines) + "\n"


def read_report(path):
    """Parse a report CSV back into a list of per-row dicts (floats parsed)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for row in reader:
            parsed = {}
            for key, value in row.items():
                if key in ("point_index", "n_samples", "seed"):
                    parsed[key] = int(value)
                elif key in ("base_label", "cf_converged"):
                    parsed[key] = value
                else:
                    parsed[key] = float(value)
            rows.append(parsed)
    return rows
