"""Experiment harness: one-class splits, ROC AUC, k sweeps and timing runs."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.stats import rankdata

from . import csvio
from .datagen import LabeledDataset
from .errors import DomainError, SplitError
from .model import GsaalModel, TrainConfig, fit, score, score_grid
from .subspace import draw_masks

TIMING_HEADER = ["n", "d", "k", "fit_s", "score_s", "per_point_s"]
REPORT_HEADER = ["dataset", "method", "auc", "seed"]


@dataclass
class OccSplit:
    train: np.ndarray
    test_points: np.ndarray
    test_labels: np.ndarray


@dataclass
class EvalReport:
    method_name: str
    auc: float
    n_train: int
    d: int
    k_used: int | None = None
    wall_times: dict = field(default_factory=dict)


def occ_split(data: LabeledDataset, train_fraction: float = 0.8, seed: int = 42) -> OccSplit:
    """Train on a random ``train_fraction`` of the inliers; test on the rest plus all outliers."""
    labels = data.labels
    inlier_idx = np.flatnonzero(labels == 0)
    outlier_idx = np.flatnonzero(labels == 1)
    if inlier_idx.size == 0 or outlier_idx.size == 0:
        raise SplitError("need at least one inlier and one outlier")
    rng = np.random.default_rng(seed)
    shuffled = rng.permutation(inlier_idx)
    n_train = int(round(train_fraction * inlier_idx.size))
    train_idx = np.sort(shuffled[:n_train])
    test_idx = np.concatenate([np.sort(shuffled[n_train:]), outlier_idx])
    return OccSplit(data.points[train_idx], data.points[test_idx], labels[test_idx])


def roc_auc(scores, labels) -> float:
    """ROC AUC as the Mann-Whitney statistic, ties counted half (average ranks)."""
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise DomainError("scores and labels differ in length")
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DomainError("roc_auc needs both classes")
    ranks = rankdata(s)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def evaluate_gsaal(split: OccSplit, k: int, cfg: TrainConfig, mask_seed: int | None = None):
    """Fit on ``split.train`` with ``k`` fresh masks; returns ``(EvalReport, model)``."""
    n, d = split.train.shape
    masks = draw_masks(d, k, cfg.seed if mask_seed is None else mask_seed)
    t0 = time.perf_counter()
    model, _ = fit(split.train, masks, cfg)
    t1 = time.perf_counter()
    s = score(model, split.test_points)
    t2 = time.perf_counter()
    report = EvalReport(
        "gsaal",
        roc_auc(s, split.test_labels),
        n,
        d,
        k,
        {"fit_seconds": t1 - t0, "score_seconds": t2 - t1, "per_point_seconds": (t2 - t1) / len(s)},
    )
    return report, model


def evaluate_baseline(split: OccSplit, name: str, k_neighbors: int | None = None) -> EvalReport:
    from .baselines import KnnModel, LofModel, knn_score, lof_score

    n, d = split.train.shape
    t0 = time.perf_counter()
    if name == "knn":
        m = KnnModel(split.train, k_neighbors or 5)
        t1 = time.perf_counter()
        s = knn_score(m, split.test_points)
    elif name == "lof":
        m = LofModel(split.train, k_neighbors or 20)
        t1 = time.perf_counter()
        s = lof_score(m, split.test_points)
    else:
        raise ValueError(f"unknown baseline {name!r}")
    t2 = time.perf_counter()
    times = {"fit_seconds": t1 - t0, "score_seconds": t2 - t1, "per_point_seconds": (t2 - t1) / len(s)}
    return EvalReport(name, roc_auc(s, split.test_labels), n, d, None, times)


def sensitivity_sweep(split: OccSplit, k_values: Sequence[int], cfg: TrainConfig) -> list[EvalReport]:
    """One fit per k on a shared split. Masks are drawn afresh per k from ``cfg.seed + k``."""
    return [evaluate_gsaal(split, k, cfg, mask_seed=cfg.seed + k)[0] for k in k_values]


def time_scoring(model: GsaalModel, points: np.ndarray, repeats: int = 3) -> float:
    """Median wall time of scoring ``points``."""
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        score(model, points)
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def scalability_run(
    n_values: Sequence[int] = (),
    d_values: Sequence[int] = (),
    k: int = 30,
    n_test: int = 10_000,
    *,
    fixed_d: int = 100,
    fixed_n: int = 500,
    epochs: int = 1,
    repeats: int = 3,
    seed: int = 42,
    progress: Callable[[dict], None] | None = None,
) -> list[dict]:
    """Inference-time table over an n-sweep (d fixed) and a d-sweep (n fixed).

    Training and test points are uniform random. Only inference time matters
    here, so models are trained for ``epochs`` epochs (one by default).
    """
    if not n_values and not d_values:
        raise ValueError("need at least one of n_values, d_values")
    cells = [(n, fixed_d) for n in n_values] + [(fixed_n, d) for d in d_values]
    rows = []
    for n, d in cells:
        rng = np.random.default_rng([seed, n, d])
        train = rng.random((n, d))
        test = rng.random((n_test, d))
        t0 = time.perf_counter()
        model, _ = fit(train, draw_masks(d, k, seed), TrainConfig(epochs=epochs, seed=seed))
        fit_s = time.perf_counter() - t0
        score_s = time_scoring(model, test, repeats)
        row = {"n": n, "d": d, "k": k, "fit_s": fit_s, "score_s": score_s, "per_point_s": score_s / n_test}
        rows.append(row)
        if progress:
            progress(row)
    return rows


def write_timing_csv(path, rows: list[dict]) -> None:
    csvio.write_rows(path, TIMING_HEADER, ([r[c] for c in TIMING_HEADER] for r in rows))


def write_report_csv(path, rows: Sequence[tuple]) -> None:
    csvio.write_rows(path, REPORT_HEADER, rows)


def grid_axes(bounds: Sequence[float], resolution: int) -> tuple[np.ndarray, np.ndarray]:
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    x1_lo, x1_hi, x2_lo, x2_hi = bounds
    return np.linspace(x1_lo, x1_hi, resolution), np.linspace(x2_lo, x2_hi, resolution)


def export_grid_csv(model: GsaalModel, bounds: Sequence[float], resolution: int, path) -> np.ndarray:
    """Write ``x1,x2,score`` rows over the grid; returns the score matrix.

    ``bounds`` is ``(x1_min, x1_max, x2_min, x2_max)``; rows run over x1 then x2.
    """
    g1, g2 = grid_axes(bounds, resolution)
    grid = score_grid(model, g1, g2)
    rows = ((a, b, grid[i, j]) for i, a in enumerate(g1) for j, b in enumerate(g2))
    try:
        csvio.write_rows(path, ["x1", "x2", "score"], rows)
    except OSError as exc:
        raise OSError(f"cannot write grid to {path}: {exc}") from exc
    return grid
