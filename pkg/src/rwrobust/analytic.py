"""Closed-form robustness and boundary-distance oracles in two dimensions.

Two exactly solvable binary classifiers validate the Monte-Carlo engine
and the counterfactual search: a linear rule (predict 1 iff
w1*x1 + w2*x2 + b > 1/2) and a right-angle corner rule (predict 1 iff
x1 > a1 and x2 > a2), both under axis-aligned Gaussian uncertainty.

For the linear rule the probability of keeping the label is the Gaussian
mass on the point's side of the hyperplane,

    P_r = Phi(|w . x + b - 1/2| / sigma_proj),   sigma_proj^2 = w1^2 s1^2 + w2^2 s2^2,

with Phi the standard normal CDF.  For the corner rule the mass of the
1-region factorizes into a product of two one-dimensional tail masses.
Points exactly on a boundary predict 0 (ties lose), which makes the
functions total; that choice is invisible to continuous perturbations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import InvariantViolation


@dataclass(frozen=True)
class GaussianUncertainty2D:
    """Axis-aligned Gaussian noise with standard deviations (sigma1, sigma2)."""

    sigma1: float
    sigma2: float

    def __post_init__(self):
        if not (self.sigma1 > 0 and self.sigma2 > 0):
            raise InvariantViolation("standard deviations must be positive")


@dataclass(frozen=True)
class LinearCase:
    """Parameters of the analytic linear rule."""

    w1: float
    w2: float
    b: float = 0.0

    def __post_init__(self):
        if self.w1 == 0.0 and self.w2 == 0.0:
            raise InvariantViolation("weight vector must be nonzero")

    def label(self, x) -> int:
        return int(self.w1 * x[0] + self.w2 * x[1] + self.b > 0.5)


@dataclass(frozen=True)
class CornerCase:
    """Parameters of the analytic right-angle rule."""

    a1: float
    a2: float

    def label(self, x) -> int:
        return int(x[0] > self.a1 and x[1] > self.a2)


AnalyticCase = LinearCase | CornerCase


def exact_pr_linear(w, b: float, x, u: GaussianUncertainty2D) -> float:
    """Probability that Gaussian noise keeps the linear rule's label.

    Degenerate noise (zero variance along the weight direction) keeps the
    label with certainty off the boundary; on the boundary the value is
    1/2 by symmetry.
    """
    w1, w2 = (float(v) for v in w)
    if w1 == 0.0 and w2 == 0.0:
        raise InvariantViolation("weight vector must be nonzero")
    signed = w1 * x[0] + w2 * x[1] + b - 0.5
    sigma_proj = math.hypot(w1 * u.sigma1, w2 * u.sigma2)
    if sigma_proj == 0.0:
        return 0.5 if signed == 0.0 else 1.0
    return float(ndtr(abs(signed) / sigma_proj))


def exact_pr_corner(a, x, u: GaussianUncertainty2D) -> float:
    """Probability that Gaussian noise keeps the corner rule's label.

    The chance of landing in the 1-region factorizes into
    Phi((x1-a1)/sigma1) * Phi((x2-a2)/sigma2); the result is that product
    for points labeled 1 and its complement for points labeled 0.
    """
    a1, a2 = (float(v) for v in a)
    q = float(ndtr((x[0] - a1) / u.sigma1) * ndtr((x[1] - a2) / u.sigma2))
    if x[0] > a1 and x[1] > a2:
        return q
    return 1.0 - q


def exact_dcf(case: AnalyticCase, x) -> float:
    """Euclidean distance from x to the case's decision boundary.

    Linear: perpendicular distance |w . x + b - 1/2| / ||w||.  Corner:
    inside the 1-region the smaller axis distance; beside the corner the
    single separating axis distance; diagonally opposite, the distance to
    the corner point itself.
    """
    if isinstance(case, LinearCase):
        signed = case.w1 * x[0] + case.w2 * x[1] + case.b - 0.5
        return abs(signed) / math.hypot(case.w1, case.w2)
    d1 = x[0] - case.a1
    d2 = x[1] - case.a2
    if d1 > 0 and d2 > 0:
        return min(d1, d2)
    if d1 > 0:
        return -d2
    if d2 > 0:
        return -d1
    return math.hypot(d1, d2)


def exact_pr(case: AnalyticCase, x, u: GaussianUncertainty2D) -> float:
    if isinstance(case, LinearCase):
        return exact_pr_linear((case.w1, case.w2), case.b, x, u)
    return exact_pr_corner((case.a1, case.a2), x, u)


def grid_eval(
    case: AnalyticCase,
    u: GaussianUncertainty2D,
    x_range,
    y_range,
    resolution,
):
    """Evaluate robustness and boundary distance on a row-major grid.

    ``resolution`` is the number of points per axis (one value or an
    (nx, ny) pair, each >= 2).  Returns ``(x1, x2, p_r, d_cf)`` as flat
    arrays of length nx * ny, ordered row-major (x2 varies fastest), ready
    for CSV emission and heatmap rendering by external tools.
    """
    if np.isscalar(resolution):
        nx = ny = int(resolution)
    else:
        nx, ny = (int(v) for v in resolution)
    if nx < 2 or ny < 2:
        raise InvariantViolation("grid resolution must be >= 2 per axis")
    xs = np.linspace(x_range[0], x_range[1], nx)
    ys = np.linspace(y_range[0], y_range[1], ny)
    x1 = np.repeat(xs, ny)
    x2 = np.tile(ys, nx)
    p_r = np.array([exact_pr(case, (a, b), u) for a, b in zip(x1, x2)])
    d_cf = np.array([exact_dcf(case, (a, b)) for a, b in zip(x1, x2)])
    return x1, x2, p_r, d_cf


@dataclass(frozen=True)
class ScenarioPoints:
    """Two constructed points with equal robustness but unequal boundary distance."""

    case: CornerCase
    uncertainty: GaussianUncertainty2D
    point_a: tuple[float, float]
    point_b: tuple[float, float]
    p_r: float
    d_a: float
    d_b: float

    @property
    def distance_ratio(self) -> float:
        return self.d_a / self.d_b


def scenario_points(
    t: float = 1.0, sigma: float = 1.0, far_offset: float = 6.0
) -> ScenarioPoints:
    """Construct the two-point case where boundary distance misranks robustness.

    For the corner rule at (0, 0) with isotropic noise sigma, point A sits
    on the diagonal at (t, t): both boundary arms are near, so its keep
    probability is Phi(t/sigma)^2 while its boundary distance is t.  Point
    B = (s, far_offset*sigma) sees effectively one boundary arm; choosing
    s = sigma * PhiInverse(Phi(t/sigma)^2) matches A's keep probability
    within the negligible mass beyond the far arm (< 1e-9 for
    far_offset >= 6), yet its boundary distance s is markedly smaller.
    Requires Phi(t/sigma)^2 > 1/2 (t/sigma > 0.5449) so that s > 0.
    """
    if t <= 0 or sigma <= 0:
        raise InvariantViolation("t and sigma must be positive")
    if far_offset < 6.0:
        raise InvariantViolation("far_offset must be >= 6 standard deviations")
    q = float(ndtr(t / sigma)) ** 2
    if q <= 0.5:
        raise InvariantViolation(
            f"t/sigma={t / sigma:g} too small: the matched point would "
            f"cross the boundary"
        )
    s = sigma * float(ndtri(q))
    u = GaussianUncertainty2D(sigma, sigma)
    return ScenarioPoints(
        case=CornerCase(0.0, 0.0),
        uncertainty=u,
        point_a=(t, t),
        point_b=(s, far_offset * sigma),
        p_r=q,
        d_a=t,
        d_b=s,
    )


def ranking_divergence_set(
    t_values=None, sigma: float = 1.0, far_offset: float = 6.0
):
    """Designed test set of scenario pairs around the corner.

    Each t yields a pair (diagonal point, matched near-axis point) with
    equal robustness and different boundary distance, so ranking the set
    by boundary distance cannot reproduce the robustness ranking.  Returns
    ``(points, case, uncertainty)`` with points as an (2*len(t), 2) array.
    """
    if t_values is None:
        t_values = np.linspace(0.8, 2.3, 10)
    points = []
    case = None
    u = None
    for t in t_values:
        sc = scenario_points(float(t), sigma, far_offset)
        points.append(sc.point_a)
        points.append(sc.point_b)
        case = sc.case
        u = sc.uncertainty
    return np.array(points), case, u
