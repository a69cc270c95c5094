"""Glue between data, augmentation, model building and training.

Only the training split ever reaches augmentation; validation samples are
carved out of the training split before expansion, and test data is only
rescaled.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .augment import AugmentParams, augment_split
from .checkpoint import load_backbone
from .config import PipelineConfig
from .data import SplitData
from .errors import AugmentationLeak, EmptyDataset
from .imageproc import rescale
from .metrics import EvaluationReport, evaluate_predictions
from .nn.model import Model, build_model, preset
from .train import train_model

logger = logging.getLogger(__name__)


def stratified_split(items, fraction: float, seed: int):
    """Split (image, label) items per class; returns (train, validation)."""
    rng = np.random.default_rng([seed, 7])
    labels = np.array([lbl for _, lbl in items])
    train_idx, val_idx = [], []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(idx.size)]
        n_val = int(round(fraction * idx.size))
        n_val = min(max(n_val, 1), idx.size - 1) if idx.size > 1 else 0
        val_idx.extend(idx[:n_val].tolist())
        train_idx.extend(idx[n_val:].tolist())
    train_idx.sort()
    val_idx.sort()
    return [items[i] for i in train_idx], [items[i] for i in val_idx]


def to_arrays(items, dtype=np.float32):
    """Stack (GrayImage, label) items into ((N, 1, H, W) in [0, 1], labels)."""
    if not items:
        raise EmptyDataset("no images")
    x = np.stack([rescale(img, dtype).data for img, _ in items])
    y = np.array([lbl for _, lbl in items], dtype=np.int64)
    return x, y


@dataclass
class PreparedData:
    train: tuple
    val: tuple
    n_original: int
    n_augmented: int


def prepare_training_data(train_split: SplitData, params: AugmentParams, copies_per_image: int,
                          validation_fraction: float, seed: int, workers: int = 1) -> PreparedData:
    if train_split.split != "training":
        raise AugmentationLeak(f"refusing to train on the {train_split.split!r} split")
    fit_items, val_items = stratified_split(train_split.items, validation_fraction, seed)
    if not fit_items or not val_items:
        raise EmptyDataset("training split too small for a validation hold-out")
    expanded = augment_split(SplitData("training", fit_items), params, copies_per_image,
                             seed=seed, workers=workers)
    return PreparedData(to_arrays(expanded), to_arrays(val_items), len(fit_items), len(expanded))


def model_config_for(cfg: PipelineConfig):
    return preset(cfg.model_preset, input_size=cfg.image_size, backbone_frozen=cfg.backbone_frozen)


@dataclass
class BranchResult:
    model: Model
    checkpoint: object
    history: list
    data: PreparedData


def train_branch(cfg: PipelineConfig, train_split: SplitData, workers: int = 1) -> BranchResult:
    """Augment, fit and restore the best-validation-loss parameters."""
    data = prepare_training_data(train_split, cfg.augment, cfg.copies_per_image,
                                 cfg.train.validation_fraction, cfg.seed, workers)
    model = build_model(model_config_for(cfg), np.random.default_rng([cfg.seed, 1]))
    if cfg.backbone_weights:
        load_backbone(model, cfg.backbone_weights)
    logger.info("%s: %d originals -> %d training images, %d validation",
                cfg.drawing_type, data.n_original, data.n_augmented, len(data.val[1]))
    best, history = train_model(model, data.train, data.val, replace(cfg.train, seed=cfg.seed))
    best.load_into(model)
    return BranchResult(model, best, history, data)


def evaluate_split(model, split: SplitData, name: str = "") -> EvaluationReport:
    x, y = to_arrays(split.items, model.dtype)
    return evaluate_predictions(y, model.predict(x), model.cfg.num_classes, name)
