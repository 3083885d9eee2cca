import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gsaal.baselines import KnnModel, LofModel, knn_score, lof_score
from gsaal.datagen import (
    IaSpec,
    InlierDistribution,
    LabeledDataset,
    OutlierType,
    Shape,
    ShapeSpec,
    generate_ia_dataset,
    generate_shape,
    mmd_linear,
    myopicity_mmd,
    off_curve_points,
    shape_curve,
)
from gsaal.errors import ConfigError, DomainError, GenerationError, ShapeError
from gsaal.evaluation import roc_auc


def _curve_residual(shape, pts):
    x, y = pts[:, 0], pts[:, 1]
    if shape is Shape.BANANA:
        return np.abs(y - x**3)
    if shape is Shape.SPIRAL:
        r = np.hypot(x, y)
        theta = 4 * np.pi * r
        return np.hypot(x - r * np.cos(theta), y - r * np.sin(theta))
    if shape is Shape.STAR:
        r = np.hypot(x, y)
        theta = np.arctan2(y, x) % (2 * np.pi)
        return np.abs(r - np.maximum(np.sin(5 * theta), 0.4))
    if shape is Shape.CIRCLE:
        return np.abs(np.hypot(x, y) - 1)
    return np.minimum(np.abs(x), np.abs(y))


@pytest.mark.parametrize("shape", [s for s in Shape if s is not Shape.L])
def test_zero_noise_lies_on_curve(shape):
    pts = shape_curve(shape, 500, np.random.default_rng(0), noise_scale=0.0)
    assert np.max(_curve_residual(shape, pts)) < 1e-12


def test_l_shape_zero_noise_on_axes():
    pts = shape_curve(Shape.L, 200, np.random.default_rng(0), noise_scale=0.0)
    assert np.all((pts[:, 0] == 0) | (pts[:, 1] == 0))


def test_banana_peak():
    # theta = pi/2 gives sin = sin^3 = 1; every zero-noise banana point is (s, s^3), s <= 1
    pts = shape_curve(Shape.BANANA, 20_000, np.random.default_rng(1), noise_scale=0.0)
    top = pts[np.argmax(pts[:, 0])]
    np.testing.assert_allclose(top, [1.0, 1.0], atol=1e-6)


def test_banana_jitter_range():
    pts = shape_curve(Shape.BANANA, 5000, np.random.default_rng(2))
    assert pts[:, 0].min() >= 0 and pts[:, 0].max() <= 1.1


@pytest.mark.parametrize("shape", list(Shape))
def test_noise_columns_moments(shape):
    data = generate_shape(ShapeSpec(shape, 2000, noise_features=5, seed=3))
    noise = data.points[:, 2:]
    assert data.points.shape == (2000, 7)
    assert np.all(np.abs(noise.mean(axis=0)) < 0.1)
    assert np.all((noise.var(axis=0) > 0.8) & (noise.var(axis=0) < 1.2))
    np.testing.assert_array_equal(data.labels, 0)


def test_banana_d60():
    data = generate_shape(ShapeSpec("banana", 960))
    assert data.points.shape == (960, 60)
    assert data.feature_names[0] == "x1" and data.feature_names[-1] == "x60"


def test_generation_is_deterministic():
    a = generate_shape(ShapeSpec("star", 100, 3, seed=9)).points
    b = generate_shape(ShapeSpec("star", 100, 3, seed=9)).points
    assert a.tobytes() == b.tobytes()


def test_single_point():
    assert generate_shape(ShapeSpec("circle", 1)).points.shape == (1, 60)


def test_shape_spec_validation():
    with pytest.raises(ValueError):
        ShapeSpec("banana", 0)
    with pytest.raises(ValueError):
        ShapeSpec("hexagon", 10)


def test_off_curve_points_respect_margin():
    pts = off_curve_points("banana", 200, 5, seed=4, margin=0.3)
    curve = shape_curve("banana", 20_000, np.random.default_rng(0), noise_scale=0.0) + 0.05
    d = np.min(np.hypot(pts[:, None, 0] - curve[None, :, 0], pts[:, None, 1] - curve[None, :, 1]), axis=1)
    assert d.min() >= 0.3 - 0.01
    np.testing.assert_array_equal(pts[:, 2:], 0.0)


def test_off_curve_impossible_margin():
    with pytest.raises(GenerationError):
        off_curve_points("circle", 5, 3, seed=0, margin=10.0)


# --- inlier-assumption datasets ----------------------------------------------


def test_ia_step_counts():
    train, tests = generate_ia_dataset(IaSpec(n_inliers=500, n_outliers=40, d=5, seed=1))
    assert train.shape == (400, 5)
    assert len(tests) == 10
    for t in tests:
        assert len(t) == 100 + 40
        assert t.labels.sum() == 40


def test_ia_cluster_outliers_are_easy_for_knn():
    train, tests = generate_ia_dataset(IaSpec(d=20, seed=5))
    knn = KnnModel(train, 5)
    auc = np.mean([roc_auc(knn_score(knn, t.points), t.labels) for t in tests])
    assert auc > 0.9


def test_ia_local_outliers_pass_threshold():
    spec = IaSpec(outlier_type=OutlierType.LOCAL, n_inliers=300, n_outliers=30, d=3, n_batches=2, seed=6)
    train, tests = generate_ia_dataset(spec)
    inliers = np.vstack([train, tests[0].points[tests[0].labels == 0]])
    ref = LofModel(inliers, 20)
    for t in tests:
        assert np.all(lof_score(ref, t.points[t.labels == 1]) > 1.5)


@pytest.mark.parametrize("dist", list(InlierDistribution))
def test_ia_inlier_families(dist):
    train, tests = generate_ia_dataset(IaSpec(inlier_distribution=dist, n_inliers=200, n_outliers=20, d=4, n_batches=1))
    assert np.all(np.isfinite(train)) and np.all(np.isfinite(tests[0].points))


def test_ia_reference_must_match_type():
    with pytest.raises(ConfigError):
        generate_ia_dataset(IaSpec(n_inliers=50, n_outliers=5, d=3), reference="lof")


def test_ia_zero_shift_warns():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        generate_ia_dataset(IaSpec(n_inliers=50, n_outliers=5, d=3, n_batches=1, cluster_shift=0.0))
    assert any("cluster_shift=0" in str(w.message) for w in caught)


def test_ia_rejection_budget():
    spec = IaSpec(outlier_type=OutlierType.LOCAL, n_inliers=60, n_outliers=5, d=2, n_batches=1, lof_threshold=1e6)
    with pytest.raises(GenerationError, match="lof_threshold"):
        generate_ia_dataset(spec)


def test_ia_deterministic():
    a = generate_ia_dataset(IaSpec(n_inliers=100, n_outliers=10, d=3, n_batches=2, seed=8))
    b = generate_ia_dataset(IaSpec(n_inliers=100, n_outliers=10, d=3, n_batches=2, seed=8))
    assert a[0].tobytes() == b[0].tobytes()
    assert a[1][1].points.tobytes() == b[1][1].points.tobytes()


def test_labeled_dataset_validation():
    with pytest.raises(ShapeError):
        LabeledDataset(np.zeros((3, 2)), np.zeros(2))


# --- MMD ------------------------------------------------------------------------


def test_mmd_identical_is_zero():
    x = np.random.default_rng(0).normal(size=(20, 3))
    assert mmd_linear(x, x) == 0.0


def test_mmd_exact_means():
    a = np.zeros((4, 2))
    b = np.tile([3.0, 4.0], (5, 1))
    assert mmd_linear(a, b) == 25.0


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 20), st.integers(1, 20), st.integers(1, 4), st.integers(0, 3), st.integers(0, 1000))
def test_mmd_symmetric_and_padding_invariant(na, nb, d, pad, seed):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=(na, d)), rng.normal(size=(nb, d))
    assert mmd_linear(a, b) == pytest.approx(mmd_linear(b, a), abs=1e-15)
    assert mmd_linear(a, b) >= 0
    padded = mmd_linear(np.hstack([a, np.zeros((na, pad))]), np.hstack([b, np.zeros((nb, pad))]))
    assert padded == pytest.approx(mmd_linear(a, b), rel=1e-12, abs=1e-15)


def test_mmd_errors():
    with pytest.raises(DomainError):
        mmd_linear(np.empty((0, 2)), np.zeros((1, 2)))
    with pytest.raises(ShapeError):
        mmd_linear(np.zeros((1, 2)), np.zeros((1, 3)))


def test_myopicity_contrast():
    myopic = myopicity_mmd("myopic", 2000, seed=42)
    quad = myopicity_mmd("quadratic", 2000, seed=42)
    assert myopic < 0.05
    assert quad >= 3 * myopic
