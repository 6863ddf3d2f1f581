"""Synthetic online clustering harness with interpolated seeding.

Each round presents a fresh clustering instance (a 2-D Gaussian mixture
sample with ground-truth labels).  For a grid of seeding exponents
``a`` in [0, alpha_max], seeds are drawn with probability proportional
to d_min(x)**a -- interpolating uniform seeding (a = 0) through
squared-distance seeding (a = 2) toward farthest-first traversal
(a -> inf) -- followed by a fixed number of Lloyd iterations.  The round's
utility is the fraction of points assigned consistently with the target
labels (maximized over cluster-label matchings), which is a
piecewise-constant function of the exponent; the grid step function is
rescaled onto the domain [0, 1].

Seed draws use common random numbers across the grid so that adjacent
cells that make identical seeding choices produce exactly equal payoffs:
the piecewise-constant structure in the exponent is genuine.  The grid
is an approximation of the true cell boundaries; refine grid_n to
tighten it.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .environments import UtilityStream
from .errors import ParameterError, ValidationError
from .piecewise import PiecewiseConstant

__all__ = [
    "ClusteringInstance",
    "gaussian_mixture_instance",
    "seeding_payoff_curve",
    "clustering_stream",
    "load_points_csv",
    "instance_stream",
]

SCENARIOS = ("two_phase", "k_shift", "static")


@dataclass
class ClusteringInstance:
    """2-D points with target cluster labels in 0..k-1."""

    points: np.ndarray
    target_labels: np.ndarray
    k: int

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        labels = np.asarray(self.target_labels, dtype=np.int64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValidationError("points must have shape (n, 2)")
        if labels.shape != (pts.shape[0],):
            raise ValidationError("one label per point required")
        if not 2 <= self.k <= pts.shape[0]:
            raise ValidationError(f"need 2 <= k <= n_points, got k={self.k}")
        self.points = pts
        self.target_labels = labels

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    def n_distinct_points(self) -> int:
        return np.unique(self.points, axis=0).shape[0]


def _component_means(n_components: int, separation: float) -> np.ndarray:
    """Even components on an outer circle, odd components on a tighter inner one."""
    angles = 2.0 * math.pi * np.arange(n_components) / n_components
    radius = np.where(np.arange(n_components) % 2 == 0, separation, 0.5 * separation)
    return np.stack([radius * np.cos(angles), radius * np.sin(angles)], axis=1)


def gaussian_mixture_instance(rng: np.random.Generator, means: np.ndarray,
                              active: np.ndarray, n_points: int,
                              cluster_std: float = 1.0,
                              outlier_frac: float = 0.0,
                              weights=None) -> ClusteringInstance:
    """Sample points from the active mixture components.

    Labels index the active components 0..k-1.  ``weights`` sets the
    component proportions (uniform when None); unbalanced components are
    where low-exponent seeding struggles.  A fraction of points may be
    displaced far from all means (outliers keep the label of their source
    component); outliers derail farthest-first style seeding without
    moving the target clustering.
    """
    k = active.size
    if weights is None:
        comp = rng.integers(0, k, size=n_points)
    else:
        w = np.asarray(weights, dtype=np.float64)
        comp = rng.choice(k, size=n_points, p=w / w.sum())
    pts = means[active[comp]] + cluster_std * rng.standard_normal((n_points, 2))
    if outlier_frac > 0.0:
        n_out = int(round(outlier_frac * n_points))
        if n_out:
            idx = rng.choice(n_points, size=n_out, replace=False)
            angles = 2.0 * math.pi * rng.random(n_out)
            radius = 6.0 * np.abs(means).max() * (1.0 + rng.random(n_out))
            pts[idx] = np.stack([radius * np.cos(angles), radius * np.sin(angles)], axis=1)
    return ClusteringInstance(pts, comp, k)


def _seed_indices(points: np.ndarray, k: int, exponent: float,
                  first: int, draws: np.ndarray) -> np.ndarray:
    """Interpolated seeding with pre-drawn uniforms (common random numbers)."""
    n = points.shape[0]
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = first
    d_min = np.sum((points - points[first]) ** 2, axis=1)
    for r in range(1, k):
        weights = d_min ** (0.5 * exponent)
        total = weights.sum()
        if total <= 0.0:
            # Every point coincides with a seed; fall back to uniform.
            weights = np.ones(n)
            total = float(n)
        cum = np.cumsum(weights)
        idx = int(np.searchsorted(cum, draws[r - 1] * total, side="right"))
        idx = min(idx, n - 1)
        chosen[r] = idx
        d_min = np.minimum(d_min, np.sum((points - points[idx]) ** 2, axis=1))
    return chosen


def _lloyd_assignment(points: np.ndarray, centers: np.ndarray, iters: int):
    assign = None
    for _ in range(iters):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        assign = np.argmin(d2, axis=1)
        for j in range(centers.shape[0]):
            members = points[assign == j]
            if members.size:
                centers[j] = members.mean(axis=0)
    d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1)


def _matched_fraction(assign: np.ndarray, labels: np.ndarray, k: int) -> float:
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (assign, labels), 1)
    rows, cols = linear_sum_assignment(-confusion)
    return float(confusion[rows, cols].sum()) / assign.size


def seeding_payoff_curve(instance: ClusteringInstance, exponents,
                         rng: np.random.Generator, lloyd_iters: int = 2) -> np.ndarray:
    """Payoff (1 - optimal-matching Hamming cost) per seeding exponent.

    The first seed index and the k-1 seeding uniforms are drawn once and
    shared across all exponents; the d_min**a inverse-cdf selection,
    Lloyd iterations, and label matching are deterministic given them.
    """
    exps = np.asarray(exponents, dtype=np.float64)
    pts, labels, k = instance.points, instance.target_labels, instance.k
    first = int(rng.integers(0, instance.n_points))
    draws = rng.random(k - 1)
    payoffs = np.empty(exps.size)
    for i, a in enumerate(exps):
        seeds = _seed_indices(pts, k, float(a), first, draws)
        assign = _lloyd_assignment(pts, pts[seeds].copy(), lloyd_iters)
        payoffs[i] = _matched_fraction(assign, labels, k)
    return payoffs


def _phase_schedule(scenario: str, t: int, T: int, n_components: int,
                    outlier_frac: float, satellite_frac: float):
    """(active component ids, component weights, outlier fraction) for round t.

    two_phase (and static) phases favor opposite ends of the exponent
    range: one dominant component plus small far satellites punishes
    uniform seeding, while balanced components plus extreme outliers
    punish farthest-first seeding.
    """
    ids = np.arange(n_components)
    evens = ids[ids % 2 == 0]
    unbalanced = np.asarray(
        [1.0 - (evens.size - 1) * satellite_frac]
        + [satellite_frac] * (evens.size - 1))
    if scenario == "two_phase":
        if t <= T // 2:
            return evens, unbalanced, 0.0
        return ids[ids % 2 == 1], None, outlier_frac
    if scenario == "static":
        return evens, unbalanced, 0.0
    if scenario == "k_shift":
        block = max(1, T // n_components)
        omitted = ((t - 1) // block) % n_components
        return ids[ids != omitted], None, 0.0
    raise ParameterError(f"unknown scenario {scenario!r}; choose from {SCENARIOS}")


def clustering_stream(scenario: str, T: int, grid_n: int,
                      rng: np.random.Generator, *, n_components: int = 8,
                      n_points: int = 100, separation: float = 6.0,
                      cluster_std: float = 0.7, outlier_frac: float = 0.06,
                      satellite_frac: float = 0.05, alpha_max: float = 10.0,
                      lloyd_iters: int = 2, max_redraws: int = 50) -> UtilityStream:
    """A stream of clustering payoff curves over the seeding exponent.

    scenario 'two_phase' draws from the even mixture components (one
    dominant plus small satellites: high exponents win) for the first
    half of the rounds and from the odd components plus extreme outliers
    (low exponents win) afterwards, so the optimal seeding exponent
    genuinely shifts at T/2; 'k_shift' rotates one omitted balanced
    component every T // n_components rounds; 'static' keeps the
    first-phase distribution throughout.  Exponent cell i of grid_n
    covers [i, i+1] * alpha_max / grid_n, evaluated at its center and
    rescaled onto the domain [0, 1].  Degenerate instances (fewer
    distinct points than clusters) are redrawn from the following rng
    substream.
    """
    if scenario not in SCENARIOS:
        raise ParameterError(f"unknown scenario {scenario!r}; choose from {SCENARIOS}")
    if grid_n < 64:
        raise ParameterError(f"grid_n must be >= 64, got {grid_n}")
    if T < 1:
        raise ParameterError(f"T must be >= 1, got {T}")
    means = _component_means(n_components, separation)
    exponents = alpha_max * (np.arange(grid_n) + 0.5) / grid_n
    breakpoints = np.arange(1, grid_n) / grid_n

    fns = []
    for t in range(1, T + 1):
        active, weights, ofrac = _phase_schedule(
            scenario, t, T, n_components, outlier_frac, satellite_frac)
        instance = None
        for _ in range(max_redraws):
            candidate = gaussian_mixture_instance(
                rng, means, active, n_points, cluster_std, ofrac, weights)
            if candidate.n_distinct_points() >= candidate.k:
                instance = candidate
                break
        if instance is None:
            raise ValidationError("could not draw a non-degenerate instance")
        payoffs = seeding_payoff_curve(instance, exponents, rng, lloyd_iters)
        fns.append(PiecewiseConstant(breakpoints, payoffs))

    return UtilityStream(
        fns,
        declared_beta=0.5,
        provenance={
            "generator": "clustering", "scenario": scenario, "T": T,
            "grid_n": grid_n, "n_components": n_components,
            "n_points": n_points, "separation": separation,
            "cluster_std": cluster_std, "outlier_frac": outlier_frac,
            "satellite_frac": satellite_frac,
            "alpha_max": alpha_max, "lloyd_iters": lloyd_iters,
        },
    )


def instance_stream(instances, T: int, grid_n: int, rng: np.random.Generator,
                    *, subset_size: int | None = None, alpha_max: float = 10.0,
                    lloyd_iters: int = 2) -> UtilityStream:
    """Stream built from user-supplied instances (e.g. loaded from CSV).

    Round t uses instances[(t-1) % len(instances)], optionally
    subsampling ``subset_size`` points per round.
    """
    instances = list(instances)
    if not instances:
        raise ParameterError("need at least one instance")
    if grid_n < 64:
        raise ParameterError(f"grid_n must be >= 64, got {grid_n}")
    exponents = alpha_max * (np.arange(grid_n) + 0.5) / grid_n
    breakpoints = np.arange(1, grid_n) / grid_n
    fns = []
    for t in range(T):
        inst = instances[t % len(instances)]
        if subset_size is not None and subset_size < inst.n_points:
            idx = rng.choice(inst.n_points, size=subset_size, replace=False)
            inst = ClusteringInstance(inst.points[idx], inst.target_labels[idx], inst.k)
        payoffs = seeding_payoff_curve(inst, exponents, rng, lloyd_iters)
        fns.append(PiecewiseConstant(breakpoints, payoffs))
    return UtilityStream(
        fns, declared_beta=0.5,
        provenance={"generator": "instance_stream", "T": T, "grid_n": grid_n,
                    "alpha_max": alpha_max, "n_instances": len(instances)},
    )


def load_points_csv(path) -> ClusteringInstance:
    """Load a point set from CSV rows ``x,y,label`` (header row optional).

    Labels are remapped to 0..k-1 in sorted order of first appearance.
    """
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            try:
                rows.append((float(row[0]), float(row[1]), row[2].strip()))
            except (ValueError, IndexError):
                if rows:
                    raise ValidationError(f"malformed CSV row: {row!r}") from None
                # tolerate a single header row
    if not rows:
        raise ValidationError(f"no data rows in {path}")
    pts = np.asarray([(x, y) for x, y, _ in rows])
    raw_labels = [lab for _, _, lab in rows]
    mapping = {lab: i for i, lab in enumerate(sorted(set(raw_labels)))}
    labels = np.asarray([mapping[lab] for lab in raw_labels], dtype=np.int64)
    return ClusteringInstance(pts, labels, k=len(mapping))
