"""Exact nearest-neighbour baselines: kNN distance and Local Outlier Factor.

Neighbour search is brute force over the full pairwise distance matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ConfigError, ShapeError

DIST_FLOOR = 1e-12


def pairwise_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Euclidean distances between rows of ``a`` and rows of ``b``."""
    return cdist(a, b)


def _check_points(points, d: int) -> np.ndarray:
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != d:
        raise ShapeError(f"points have shape {x.shape}, model expects {d} columns")
    return x


def _sorted_neighbours(dist: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Indices and distances of the ``k`` closest columns per row, ascending.

    Ties are broken by column index so results are deterministic.
    """
    idx = np.argsort(dist, axis=1, kind="stable")[:, :k]
    return idx, np.take_along_axis(dist, idx, axis=1)


@dataclass(frozen=True)
class KnnModel:
    training_points: np.ndarray
    k_neighbors: int = 5

    def __post_init__(self):
        x = np.asarray(self.training_points, dtype=np.float64)
        object.__setattr__(self, "training_points", x)
        if x.ndim != 2:
            raise ShapeError("training_points must be a matrix")
        if not 1 <= self.k_neighbors < x.shape[0]:
            raise ConfigError(f"k_neighbors={self.k_neighbors} must be in [1, n) with n={x.shape[0]}")


def knn_score(model: KnnModel, points) -> np.ndarray:
    """Distance from each query to its k-th nearest training point."""
    x = _check_points(points, model.training_points.shape[1])
    if x.shape[0] == 0:
        return np.empty(0)
    dist = pairwise_distances(x, model.training_points)
    return np.partition(dist, model.k_neighbors - 1, axis=1)[:, model.k_neighbors - 1]


@dataclass(frozen=True)
class LofModel:
    """LOF reference set with cached neighbourhoods of every training point.

    A training point's neighbourhood excludes the point itself.
    """

    training_points: np.ndarray
    k_neighbors: int = 20
    k_distance: np.ndarray = field(init=False, repr=False)
    lrd: np.ndarray = field(init=False, repr=False)
    _neighbours: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        x = np.asarray(self.training_points, dtype=np.float64)
        object.__setattr__(self, "training_points", x)
        if x.ndim != 2:
            raise ShapeError("training_points must be a matrix")
        n, k = x.shape[0], self.k_neighbors
        if not 1 <= k < n:
            raise ConfigError(f"k_neighbors={k} must be in [1, n) with n={n}")
        dist = pairwise_distances(x, x)
        np.fill_diagonal(dist, np.inf)
        idx, nd = _sorted_neighbours(dist, k)
        kdist = nd[:, -1]
        reach = np.maximum(kdist[idx], nd)
        lrd = 1.0 / np.maximum(reach.mean(axis=1), DIST_FLOOR)
        object.__setattr__(self, "k_distance", kdist)
        object.__setattr__(self, "lrd", lrd)
        object.__setattr__(self, "_neighbours", idx)

    def training_scores(self) -> np.ndarray:
        """In-sample LOF of every training point."""
        return self.lrd[self._neighbours].mean(axis=1) / self.lrd


def lof_score(model: LofModel, points) -> np.ndarray:
    """LOF of new query points against the training set (about 1 for inliers)."""
    x = _check_points(points, model.training_points.shape[1])
    if x.shape[0] == 0:
        return np.empty(0)
    idx, nd = _sorted_neighbours(pairwise_distances(x, model.training_points), model.k_neighbors)
    reach = np.maximum(model.k_distance[idx], nd)
    lrd = 1.0 / np.maximum(reach.mean(axis=1), DIST_FLOOR)
    return model.lrd[idx].mean(axis=1) / lrd
