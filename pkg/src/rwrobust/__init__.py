"""Per-prediction robustness of classifiers under modeled input perturbations.

Estimates, for each test point, the probability that the model's
prediction survives the perturbations the application actually expects
(measurement noise, sensor error, processing jitter), by Monte-Carlo
sampling from a per-point perturbation model and querying the classifier
as a black box.  Ships the counterfactual-distance baseline it is
compared against, closed-form two-dimensional oracles for validation,
simple built-in classifiers, and a line protocol for external models.
"""

from .analytic import (
    CornerCase,
    GaussianUncertainty2D,
    LinearCase,
    ScenarioPoints,
    exact_dcf,
    exact_pr,
    exact_pr_corner,
    exact_pr_linear,
    grid_eval,
    ranking_divergence_set,
    scenario_points,
)
from .classifiers import (
    ConstantClassifier,
    CornerClassifier,
    DecisionTreeClassifier,
    ExternalClassifier,
    KnnClassifier,
    LinearClassifier,
    fit_tree,
    validate_label_token,
)
from .counterfactual import (
    AdversarialRobustness,
    CounterfactualResult,
    SearchConfig,
    adversarial_scores,
    find_counterfactual,
)
from .dataio import (
    ComparisonReport,
    Dataset,
    FeatureKind,
    NormalizationParams,
    SweepPoint,
    apply_normalizer,
    compare_report,
    filter_labels,
    fit_normalizer,
    load_csv,
    scale_sweep,
    spearman,
    split,
)
from .errors import (
    DataFormatError,
    DegenerateCovarianceError,
    EstimationError,
    ExternalModelError,
    InvariantViolation,
    LayoutError,
    NoCounterfactualsError,
    RwRobustError,
)
from .perturbation import (
    CategoricalTransition,
    CovarianceSpec,
    PerturbationModel,
    SampleStream,
    factorize,
    load_perturbation_model,
    make_random_covariance,
    sample,
    trace_normalize,
)
from .robustness import (
    ConvergenceReport,
    FlipConfig,
    RobustnessEstimate,
    convergence_check,
    estimate,
    estimate_dataset,
    flip_indicator,
    pearson,
)

__version__ = "0.1.0"
