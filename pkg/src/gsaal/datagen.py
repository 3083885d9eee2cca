"""Synthetic datasets with subspace structure and inlier-assumption outliers.

Shapes live in the first two columns; every further column is i.i.d.
standard Gaussian noise. ``noise_scale`` multiplies the shape jitter
(0 puts every point exactly on its curve) and leaves the noise columns alone.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np

from .baselines import LofModel, lof_score, pairwise_distances
from .errors import ConfigError, DomainError, GenerationError, ShapeError

MAX_REJECTION_DRAWS = 10**6


class Shape(str, enum.Enum):
    BANANA = "banana"
    SPIRAL = "spiral"
    STAR = "star"
    CIRCLE = "circle"
    L = "l"


class InlierDistribution(str, enum.Enum):
    GAUSSIAN = "gaussian"
    GAUSSIAN_MIXTURE = "gaussian_mixture"
    UNIFORM_BOX = "uniform_box"
    RING = "ring"


class OutlierType(str, enum.Enum):
    LOCAL = "local"
    CLUSTER = "cluster"


class Reference(str, enum.Enum):
    LOF = "lof"
    CLUSTER_SHIFT = "cluster_shift"


@dataclass(frozen=True)
class ShapeSpec:
    shape: Shape
    n_points: int
    noise_features: int = 58
    seed: int = 42
    noise_scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "shape", Shape(self.shape))
        if self.n_points < 1:
            raise ValueError("n_points must be >= 1")
        if self.noise_features < 0:
            raise ValueError("noise_features must be >= 0")


@dataclass(frozen=True)
class IaSpec:
    """Inlier population plus outlier batches built against a reference model.

    ``cluster_shift`` is the distance of each outlier cluster's mean from the
    inlier mean, in units of the inlier per-feature standard deviation.
    """

    inlier_distribution: InlierDistribution = InlierDistribution.GAUSSIAN
    outlier_type: OutlierType = OutlierType.CLUSTER
    n_inliers: int = 2000
    n_outliers: int = 400
    d: int = 20
    seed: int = 42
    n_batches: int = 10
    train_fraction: float = 0.8
    cluster_shift: float = 6.0
    n_clusters: int = 4
    lof_threshold: float = 1.5
    lof_neighbors: int = 20
    box_inflation: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "inlier_distribution", InlierDistribution(self.inlier_distribution))
        object.__setattr__(self, "outlier_type", OutlierType(self.outlier_type))
        if min(self.n_inliers, self.n_outliers, self.d, self.n_batches, self.n_clusters) < 1:
            raise ValueError("counts and dimension must be positive")
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must be in (0, 1)")


@dataclass
class LabeledDataset:
    points: np.ndarray
    labels: np.ndarray
    feature_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64).ravel()
        if self.points.ndim != 2:
            raise ShapeError("points must be a matrix")
        if self.labels.size != self.points.shape[0]:
            raise ShapeError(f"{self.labels.size} labels for {self.points.shape[0]} rows")
        if not self.feature_names:
            self.feature_names = feature_names(self.points.shape[1])

    def __len__(self):
        return self.points.shape[0]


def feature_names(d: int) -> list[str]:
    return [f"x{i + 1}" for i in range(d)]


def shape_curve(shape: Shape | str, n: int, rng: np.random.Generator, noise_scale: float = 1.0) -> np.ndarray:
    """``(n, 2)`` points of one of the five planar shapes."""
    shape = Shape(shape)

    def jitter(size):
        return rng.uniform(0.0, 0.1, size) * noise_scale

    if shape is Shape.BANANA:
        s = np.sin(rng.uniform(0.0, np.pi, n))
        return np.column_stack([s + jitter(n), s**3 + jitter(n)])
    if shape is Shape.SPIRAL:
        theta = rng.uniform(0.0, 4 * np.pi, n)
        r = theta / (4 * np.pi)
        return np.column_stack([r * np.cos(theta) + jitter(n), r * np.sin(theta)])
    if shape is Shape.STAR:
        # theta restricted to the five lobes where sin(5 theta) >= 0
        lobe = rng.integers(0, 5, n)
        theta = 2 * np.pi * lobe / 5 + rng.uniform(0.0, np.pi / 5, n)
        r = np.maximum(np.sin(5 * theta), 0.4)
        return np.column_stack([r * np.cos(theta) + jitter(n), r * np.sin(theta) + jitter(n)])
    if shape is Shape.CIRCLE:
        theta = rng.uniform(0.0, 2 * np.pi, n)
        return np.column_stack([np.cos(theta) + jitter(n), np.sin(theta) + jitter(n)])
    # L: a vertical arm then a horizontal arm; N(0, 0.1) means variance 0.1
    n1 = (n + 1) // 2
    n2 = n - n1
    sd = np.sqrt(0.1) * noise_scale
    x = np.concatenate([rng.normal(0.0, 1.0, n1) * sd, rng.uniform(0.0, 5.0, n2)])
    y = np.concatenate([rng.uniform(-5.0, 0.0, n1), rng.normal(0.0, 1.0, n2) * sd])
    return np.column_stack([x, y])


def generate_shape(spec: ShapeSpec) -> LabeledDataset:
    """All-inlier dataset: the shape in columns 1-2, Gaussian noise after."""
    rng = np.random.default_rng(spec.seed)
    curve = shape_curve(spec.shape, spec.n_points, rng, spec.noise_scale)
    noise = rng.standard_normal((spec.n_points, spec.noise_features))
    points = np.hstack([curve, noise])
    return LabeledDataset(points, np.zeros(spec.n_points, dtype=np.int64))


def off_curve_points(
    shape: Shape | str, count: int, d: int, seed: int, margin: float = 0.3
) -> np.ndarray:
    """Points in the shape's bounding box, at least ``margin`` from the curve.

    Only the first two coordinates are set; the remaining ``d - 2`` are zero.
    Distance is measured to the jitter-centred noiseless curve.
    """
    rng = np.random.default_rng(seed)
    curve = shape_curve(shape, 20_000, rng, noise_scale=0.0)
    if Shape(shape) is not Shape.L:
        curve = curve + 0.05
    lo, hi = curve.min(axis=0) - 0.05, curve.max(axis=0) + 0.05
    kept: list[np.ndarray] = []
    drawn = 0
    while sum(len(k) for k in kept) < count:
        if drawn > MAX_REJECTION_DRAWS:
            raise GenerationError("could not place off-curve points; lower the margin")
        cand = rng.uniform(lo, hi, size=(1000, 2))
        drawn += 1000
        near = pairwise_distances(cand, curve).min(axis=1)
        kept.append(cand[near >= margin])
    out = np.zeros((count, d))
    out[:, :2] = np.vstack(kept)[:count]
    return out


# --- inlier-assumption datasets ----------------------------------------------


def _sample_inliers(dist: InlierDistribution, n: int, d: int, rng: np.random.Generator, centers=None):
    if dist is InlierDistribution.GAUSSIAN:
        return rng.standard_normal((n, d))
    if dist is InlierDistribution.GAUSSIAN_MIXTURE:
        comp = rng.integers(0, len(centers), n)
        return centers[comp] + rng.standard_normal((n, d))
    if dist is InlierDistribution.UNIFORM_BOX:
        # unit variance per feature
        return rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), (n, d))
    # ring of radius 3 in the first two features, Gaussian noise elsewhere
    theta = rng.uniform(0.0, 2 * np.pi, n)
    radius = 3.0 + 0.1 * rng.standard_normal(n)
    rest = rng.standard_normal((n, d - 2)) if d > 2 else np.empty((n, 0))
    return np.column_stack([radius * np.cos(theta), radius * np.sin(theta), rest])


def _local_outliers(spec: IaSpec, inliers: np.ndarray, ref: LofModel, rng: np.random.Generator):
    lo, hi = inliers.min(axis=0), inliers.max(axis=0)
    pad = 0.5 * spec.box_inflation * (hi - lo)
    lo, hi = lo - pad, hi + pad
    kept, total, drawn = [], 0, 0
    while total < spec.n_outliers:
        if drawn >= MAX_REJECTION_DRAWS:
            raise GenerationError(
                f"only {total} of {spec.n_outliers} local outliers after {drawn} draws; "
                f"lower lof_threshold (currently {spec.lof_threshold})"
            )
        cand = rng.uniform(lo, hi, size=(2000, spec.d))
        drawn += cand.shape[0]
        hit = cand[lof_score(ref, cand) > spec.lof_threshold]
        kept.append(hit)
        total += hit.shape[0]
    return np.vstack(kept)[: spec.n_outliers]


def _cluster_outliers(spec: IaSpec, rng: np.random.Generator, centers, scale: np.ndarray):
    sizes = np.full(spec.n_clusters, spec.n_outliers // spec.n_clusters)
    sizes[: spec.n_outliers % spec.n_clusters] += 1
    parts = []
    for size in sizes:
        direction = rng.standard_normal(spec.d)
        direction /= np.linalg.norm(direction)
        shift = spec.cluster_shift * scale * direction
        parts.append(_sample_inliers(spec.inlier_distribution, int(size), spec.d, rng, centers) + shift)
    return np.vstack(parts)


def generate_ia_dataset(spec: IaSpec, reference: Reference | str | None = None):
    """Inlier training split plus ``spec.n_batches`` labelled test sets.

    Returns ``(train, tests)``: ``train`` holds ``train_fraction`` of the
    inliers, and every test set is the remaining inliers stacked on top of
    one fresh outlier batch (label 1).
    """
    expected = Reference.LOF if spec.outlier_type is OutlierType.LOCAL else Reference.CLUSTER_SHIFT
    reference = expected if reference is None else Reference(reference)
    if reference is not expected:
        raise ConfigError(f"outlier type {spec.outlier_type.value} requires reference {expected.value}")
    if spec.outlier_type is OutlierType.CLUSTER and spec.cluster_shift == 0:
        warnings.warn("cluster_shift=0: outlier clusters follow the inlier distribution", stacklevel=2)

    rng = np.random.default_rng(spec.seed)
    centers = None
    if spec.inlier_distribution is InlierDistribution.GAUSSIAN_MIXTURE:
        centers = rng.normal(0.0, 3.0, (3, spec.d))
    inliers = _sample_inliers(spec.inlier_distribution, spec.n_inliers, spec.d, rng, centers)

    ref = None
    if reference is Reference.LOF:
        ref = LofModel(inliers, min(spec.lof_neighbors, spec.n_inliers - 1))
    scale = inliers.std(axis=0)

    perm = rng.permutation(spec.n_inliers)
    n_train = int(round(spec.train_fraction * spec.n_inliers))
    train, held_out = inliers[perm[:n_train]], inliers[perm[n_train:]]

    tests = []
    for _ in range(spec.n_batches):
        if ref is not None:
            outliers = _local_outliers(spec, inliers, ref, rng)
        else:
            outliers = _cluster_outliers(spec, rng, centers, scale)
        points = np.vstack([held_out, outliers])
        labels = np.concatenate([np.zeros(len(held_out)), np.ones(len(outliers))])
        tests.append(LabeledDataset(points, labels))
    return train, tests


# --- myopicity check -----------------------------------------------------------


def mmd_linear(sample_a: np.ndarray, sample_b: np.ndarray) -> float:
    """Linear-kernel MMD^2: squared distance between the two sample means."""
    a = np.atleast_2d(np.asarray(sample_a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(sample_b, dtype=np.float64))
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise DomainError("mmd_linear needs non-empty samples")
    if a.shape[1] != b.shape[1]:
        raise ShapeError(f"column counts differ: {a.shape[1]} vs {b.shape[1]}")
    diff = a.mean(axis=0) - b.mean(axis=0)
    return float(diff @ diff)


def myopic_population(kind: str, n: int, rng: np.random.Generator) -> np.ndarray:
    """Three-feature population: correlated (x1, x2) plus a third feature.

    ``kind="myopic"`` makes x3 independent Gaussian noise; ``kind="quadratic"``
    sets x3 = x1**2 so the third feature carries information.
    """
    x1 = rng.standard_normal(n)
    x2 = x1 + 0.1 * rng.standard_normal(n)
    if kind == "myopic":
        x3 = rng.standard_normal(n)
    elif kind == "quadratic":
        x3 = x1**2
    else:
        raise ValueError(f"unknown population {kind!r}")
    return np.column_stack([x1, x2, x3])


def myopicity_mmd(kind: str, n: int = 2000, seed: int = 42, mask=(1, 1, 0)) -> float:
    """MMD^2 between a sample of x and an independent sample of the masked view u x.

    The view keeps the full dimension with unselected features set to zero.
    """
    rng = np.random.default_rng(seed)
    full = myopic_population(kind, n, rng)
    view = myopic_population(kind, n, rng) * np.asarray(mask, dtype=np.float64)
    return mmd_linear(full, view)
