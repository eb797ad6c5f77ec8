"""Derivative-free search for the closest point with a different prediction.

The search needs nothing but predictions, so it works on any black box:
it probes a fan of unit directions around the test point (the coordinate
axes plus directions drawn uniformly on the sphere), expands the radius
geometrically along each direction until the prediction flips, bisects
the bracketing interval, and keeps the closest flip point.

A coarse fan alone limits accuracy to the angular gap between directions,
so the scan is followed by a few refinement rounds that re-scan a
progressively narrower cone around the best direction (evenly spaced in
2-D, stream-driven in higher dimensions).  The returned distance is an
upper bound on the true minimum: a flip region thinner than the probe
ladder can be missed, as with any sampling-based boundary search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvariantViolation, NoCounterfactualsError


@dataclass(frozen=True)
class SearchConfig:
    """Knobs of the directional boundary search.

    ``n_directions`` counts the initial fan (axis pairs included when
    ``include_axes``); each of the ``refine_rounds`` refinement rounds
    probes ``refine_directions`` extra directions in a shrinking cone.
    ``bisection_tolerance`` bounds the radius gap between the returned
    flip point and the last same-label point.
    """

    n_directions: int = 256
    max_radius: float = 10.0
    bisection_tolerance: float = 1e-6
    include_axes: bool = True
    refine_rounds: int = 3
    refine_directions: int = 32

    def __post_init__(self):
        if (
            self.n_directions < 2
            or self.max_radius <= 0
            or self.bisection_tolerance <= 0
            or self.refine_rounds < 0
            or self.refine_directions < 2
        ):
            raise InvariantViolation("search parameters must be positive")


@dataclass(frozen=True)
class CounterfactualResult:
    """Closest found flip point for one test point.

    When ``converged`` is false no direction flipped within ``max_radius``
    and ``distance`` carries ``max_radius`` as a lower bound on the true
    counterfactual distance.
    """

    x_c: np.ndarray
    distance: float
    converged: bool
    directions_tried: int
    bracket_low: float = 0.0


@dataclass(frozen=True)
class AdversarialRobustness:
    """Counterfactual distances normalized to (0, 1] by the set maximum.

    Non-converged points are excluded from the maximum; their score is NaN
    and ``converged`` is false there.
    """

    d: np.ndarray
    r: np.ndarray
    converged: np.ndarray


def _scan(flip, dirs, r_start, r_cap, tol):
    """Expand then bisect along each direction; returns (lo, hi, found).

    ``flip`` maps an (m, d) offset block to a boolean flip mask.  For each
    direction the radius ladder r_start * 2^j (capped at r_cap, with r_cap
    itself probed last) runs until the first flip; the bracket
    [last same-label radius, first flip radius] is then bisected to
    ``tol``.  All probes are batched across directions.
    """
    m = dirs.shape[0]
    lo = np.zeros(m)
    hi = np.full(m, np.nan)
    active = np.ones(m, dtype=bool)

    radii = []
    r = r_start
    while r < r_cap:
        radii.append(r)
        r *= 2.0
    radii.append(r_cap)

    for r in radii:
        if not active.any():
            break
        idx = np.nonzero(active)[0]
        flipped = flip(dirs[idx] * r)
        hi[idx[flipped]] = r
        active[idx[flipped]] = False
        lo[idx[~flipped]] = r

    found = ~np.isnan(hi)
    while True:
        wide = found & (hi - lo > tol)
        if not wide.any():
            break
        idx = np.nonzero(wide)[0]
        mid = (lo[idx] + hi[idx]) / 2.0
        flipped = flip(dirs[idx] * mid[:, None])
        hi[idx[flipped]] = mid[flipped]
        lo[idx[~flipped]] = mid[~flipped]
    return lo, hi, found


def _cone_directions(center, window, count, rng):
    """Directions within ``window`` radians of ``center`` (center included)."""
    d = center.shape[0]
    if d == 1:
        return center[None, :]
    if d == 2:
        phi = math.atan2(center[1], center[0])
        angles = phi + np.linspace(-window, window, count + 1)
        return np.column_stack([np.cos(angles), np.sin(angles)])
    g = rng.standard_normal((count, d))
    g -= (g @ center)[:, None] * center
    norms = np.linalg.norm(g, axis=1)
    norms[norms == 0.0] = 1.0
    tangents = g / norms[:, None]
    theta = rng.uniform(0.0, window, size=count)
    cand = np.cos(theta)[:, None] * center + np.sin(theta)[:, None] * tangents
    return np.vstack([center[None, :], cand])


def find_counterfactual(
    f,
    x_t,
    cfg: SearchConfig = SearchConfig(),
    stream=None,
    continuous_idx=None,
) -> CounterfactualResult:
    """Search for the closest input whose prediction differs from f(x_t).

    The search moves only along the continuous coordinates
    (``continuous_idx``; all coordinates by default).  Points with no
    continuous coordinates cannot be searched and come back non-converged.
    The label comparison is by token equality, so the search applies to
    classification only.
    """
    x_t = np.asarray(x_t, dtype=float)
    base = str(f.predict(x_t[None])[0])
    n = x_t.shape[0]
    if continuous_idx is None:
        cont = np.arange(n)
    else:
        cont = np.asarray(sorted(int(i) for i in continuous_idx), dtype=int)
    if cont.size == 0:
        return CounterfactualResult(
            x_c=x_t.copy(),
            distance=float(cfg.max_radius),
            converged=False,
            directions_tried=0,
        )
    d = int(cont.size)
    if cfg.include_axes and cfg.n_directions < 2 * d:
        raise InvariantViolation(
            f"n_directions={cfg.n_directions} cannot include both axis "
            f"directions for {d} dimensions"
        )
    rng = (stream.generator() if stream is not None else np.random.default_rng(0))

    def flip(offsets):
        pts = np.tile(x_t, (offsets.shape[0], 1))
        pts[:, cont] += offsets
        return f.predict(pts).astype(str) != base

    blocks = []
    if cfg.include_axes:
        eye = np.eye(d)
        blocks.append(np.repeat(eye, 2, axis=0) * np.tile([1.0, -1.0], d)[:, None])
    n_random = cfg.n_directions - (2 * d if cfg.include_axes else 0)
    if n_random > 0:
        g = rng.standard_normal((n_random, d))
        norms = np.linalg.norm(g, axis=1)
        norms[norms == 0.0] = 1.0
        blocks.append(g / norms[:, None])
    dirs = np.vstack(blocks)

    r_floor = 1e-3 * cfg.max_radius
    tol = cfg.bisection_tolerance
    lo, hi, found = _scan(flip, dirs, r_floor, cfg.max_radius, tol)
    tried = dirs.shape[0]
    if not found.any():
        return CounterfactualResult(
            x_c=x_t.copy(),
            distance=float(cfg.max_radius),
            converged=False,
            directions_tried=tried,
        )
    dist = np.where(found, hi, np.inf)
    best = int(np.argmin(dist))
    best_r, best_lo, best_u = float(hi[best]), float(lo[best]), dirs[best].copy()

    window = math.pi / 8.0
    for _ in range(cfg.refine_rounds):
        cand = _cone_directions(best_u, window, cfg.refine_directions, rng)
        lo2, hi2, found2 = _scan(flip, cand, min(r_floor, best_r * 1e-3), best_r, tol)
        tried += cand.shape[0]
        if found2.any():
            dist2 = np.where(found2, hi2, np.inf)
            i2 = int(np.argmin(dist2))
            if hi2[i2] < best_r:
                best_r, best_lo, best_u = float(hi2[i2]), float(lo2[i2]), cand[i2].copy()
        window = 4.0 * window / cfg.refine_directions

    x_c = x_t.copy()
    x_c[cont] += best_u * best_r
    if str(f.predict(x_c[None])[0]) == base:
        raise InvariantViolation(
            "final counterfactual no longer flips; classifier is nondeterministic"
        )
    return CounterfactualResult(
        x_c=x_c,
        distance=best_r,
        converged=True,
        directions_tried=tried,
        bracket_low=best_lo,
    )


def adversarial_scores(results) -> AdversarialRobustness:
    """Normalize counterfactual distances by the largest converged one.

    The score r_i = d_i / max_j d_j lies in (0, 1] and is coupled to the
    evaluated point set through the maximum: adding or removing points
    rescales every score.
    """
    results = list(results)
    converged = np.array([r.converged for r in results], dtype=bool)
    d = np.array([r.distance for r in results], dtype=float)
    if not converged.any():
        raise NoCounterfactualsError("no counterfactuals found")
    d_max = d[converged].max()
    r = np.where(converged, d / d_max, np.nan)
    return AdversarialRobustness(d=d, r=r, converged=converged)
