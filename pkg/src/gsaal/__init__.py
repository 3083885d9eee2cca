"""Generative subspace adversarial active learning for outlier detection."""

from .baselines import KnnModel, LofModel, knn_score, lof_score
from .datagen import IaSpec, LabeledDataset, ShapeSpec, generate_ia_dataset, generate_shape
from .errors import GsaalError
from .evaluation import occ_split, roc_auc, scalability_run
from .model import GsaalModel, TrainConfig, fit, load_model, save_model, score
from .subspace import MaskSet, SubspaceMask, default_k, draw_masks

__all__ = [
    "GsaalError",
    "GsaalModel",
    "IaSpec",
    "KnnModel",
    "LabeledDataset",
    "LofModel",
    "MaskSet",
    "ShapeSpec",
    "SubspaceMask",
    "TrainConfig",
    "default_k",
    "draw_masks",
    "fit",
    "generate_ia_dataset",
    "generate_shape",
    "knn_score",
    "load_model",
    "lof_score",
    "occ_split",
    "roc_auc",
    "save_model",
    "scalability_run",
    "score",
]
