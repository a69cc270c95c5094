"""Loss, Adam and the epoch loop with best-validation-loss checkpointing."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .checkpoint import Checkpoint, save_checkpoint
from .errors import (DivergedLoss, EmptyDataset, InvalidConfig, NonFiniteGradient,
                     NotDistribution, ShapeMismatch)
from .tensor import Tensor, backward, maximum, no_grad

logger = logging.getLogger(__name__)

LOG_CLAMP = 1e-12
DEFAULT_LR = {"spiral": 0.0005, "wave": 0.0001}


def categorical_cross_entropy(pred: Tensor, target) -> Tensor:
    """Mean over the batch of ``-sum_k target_k * log(max(pred_k, 1e-12))``."""
    target = target.data if isinstance(target, Tensor) else np.asarray(target)
    if pred.ndim != 2 or pred.shape != target.shape:
        raise ShapeMismatch(f"prediction {pred.shape} vs target {target.shape}")
    if not np.all(np.abs(pred.data.sum(axis=1) - 1) <= 1e-4):
        raise NotDistribution("prediction rows must sum to 1")
    if not (np.all((target == 0) | (target == 1)) and np.all(target.sum(axis=1) == 1)):
        raise NotDistribution("targets must be one-hot")
    logp = maximum(pred, LOG_CLAMP).log()
    t = Tensor(target, dtype=pred.dtype)
    return -(t * logp).sum(axis=1).mean()


def one_hot(labels, k: int, dtype=np.float32) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.size, k), dtype=dtype)
    out[np.arange(labels.size), labels] = 1
    return out


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(params: dict, grads: dict, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    """One bias-corrected Adam update, in place on ``params`` (name -> array)."""
    for name, g in grads.items():
        if name not in params or params[name].shape != g.shape:
            raise ShapeMismatch(f"gradient {name} does not match its parameter")
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(f"gradient {name} contains NaN or Inf")
    state.t += 1
    bc1 = 1 - beta1 ** state.t
    bc2 = 1 - beta2 ** state.t
    for name, g in grads.items():
        theta = params[name]
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(theta)
            state.v[name] = np.zeros_like(theta)
        v = state.v[name]
        m *= beta1
        m += (1 - beta1) * g
        v *= beta2
        v += (1 - beta2) * (g * g)
        m_hat = m / bc1
        v_hat = v / bc2
        theta -= (lr * m_hat / (np.sqrt(v_hat) + eps)).astype(theta.dtype, copy=False)


class Adam:
    """Adam over a dict of tracked tensors."""

    def __init__(self, params: dict, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.state = AdamState()

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    def step(self):
        arrays = {k: p.data for k, p in self.params.items()}
        grads = {k: p.grad for k, p in self.params.items() if p.grad is not None}
        adam_step(arrays, grads, self.state, self.lr, self.beta1, self.beta2, self.eps)


@dataclass
class TrainConfig:
    learning_rate: float = 0.0005
    epochs: int = 150
    batch_size: int = 32
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    validation_fraction: float = 0.2
    checkpoint_path: str | None = None

    @classmethod
    def for_drawing(cls, drawing_type: str, **kw) -> "TrainConfig":
        kw.setdefault("learning_rate", DEFAULT_LR[drawing_type])
        return cls(**kw).validate()

    def validate(self) -> "TrainConfig":
        if not self.learning_rate > 0:
            raise InvalidConfig("learning_rate must be > 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise InvalidConfig("epochs and batch_size must be >= 1")
        if not 0 < self.validation_fraction < 1:
            raise InvalidConfig("validation_fraction must lie in (0, 1)")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and self.epsilon > 0):
            raise InvalidConfig("invalid Adam hyperparameters")
        return self


class BestCheckpointTracker:
    """Keeps the parameters from the epoch with the lowest validation loss."""

    def __init__(self, model, path=None):
        self.model = model
        self.path = path
        self.best: Checkpoint | None = None

    def update(self, epoch: int, val_loss: float) -> bool:
        if self.best is not None and not val_loss < self.best.best_val_loss:
            return False
        self.best = Checkpoint.from_model(self.model, val_loss, epoch)
        if self.path:
            save_checkpoint(self.best, self.path)
        return True


def evaluate_loss(model, x: np.ndarray, y: np.ndarray, batch_size: int = 64):
    """Mean loss and accuracy in inference mode."""
    probs = model.predict_proba(x, batch_size)
    target = one_hot(y, model.cfg.num_classes, probs.dtype)
    with no_grad():
        loss = categorical_cross_entropy(Tensor(probs), target).item()
    acc = float(np.mean(np.argmax(probs, axis=1) == y))
    return loss, acc


def train_model(model, train_set, val_set, cfg: TrainConfig):
    """Fit ``model``; return the best-validation checkpoint and per-epoch history.

    ``train_set`` / ``val_set`` are ``(images (N,C,H,W), labels (N,))``.
    """
    cfg.validate()
    x, y = (np.asarray(a) for a in train_set)
    xv, yv = (np.asarray(a) for a in val_set)
    if len(x) == 0 or len(xv) == 0:
        raise EmptyDataset("training and validation sets must be non-empty")
    if len(x) != len(y) or len(xv) != len(yv):
        raise ShapeMismatch("image and label counts differ")
    k = model.cfg.num_classes
    if y.min() < 0 or y.max() >= k or yv.min() < 0 or yv.max() >= k:
        raise InvalidConfig(f"labels must lie in [0, {k})")
    x = x.astype(model.dtype, copy=False)
    targets = one_hot(y, k, model.dtype)

    seeds = np.random.SeedSequence(cfg.seed).spawn(2)
    shuffle_rng = np.random.default_rng(seeds[0])
    dropout_rng = np.random.default_rng(seeds[1])
    opt = Adam(model.trainable_parameters(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon)
    tracker = BestCheckpointTracker(model, cfg.checkpoint_path)
    history = []

    for epoch in range(1, cfg.epochs + 1):
        order = shuffle_rng.permutation(len(x))
        total_loss, correct = 0.0, 0
        for start in range(0, len(x), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            probs = model.forward(x[idx], mode="train", rng=dropout_rng)
            loss = categorical_cross_entropy(probs, targets[idx])
            value = loss.item()
            if not math.isfinite(value):
                raise DivergedLoss(f"non-finite loss {value} at epoch {epoch}, batch starting {start}")
            opt.zero_grad()
            backward(loss)
            opt.step()
            total_loss += value * len(idx)
            correct += int(np.sum(np.argmax(probs.data, axis=1) == y[idx]))
        val_loss, val_acc = evaluate_loss(model, xv, yv, cfg.batch_size)
        if not math.isfinite(val_loss):
            raise DivergedLoss(f"non-finite validation loss at epoch {epoch}")
        improved = tracker.update(epoch, val_loss)
        row = {"epoch": epoch, "train_loss": total_loss / len(x), "train_acc": correct / len(x),
               "val_loss": val_loss, "val_acc": val_acc}
        history.append(row)
        logger.info("epoch %d train_loss %.4f train_acc %.3f val_loss %.4f val_acc %.3f%s",
                    epoch, row["train_loss"], row["train_acc"], val_loss, val_acc,
                    " *" if improved else "")
    return tracker.best, history


HISTORY_FIELDS = ("epoch", "train_loss", "train_acc", "val_loss", "val_acc")


def write_history(history, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=HISTORY_FIELDS)
        w.writeheader()
        for row in history:
            w.writerow({k: (repr(row[k]) if isinstance(row[k], float) else row[k])
                        for k in HISTORY_FIELDS})


def read_history(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        return [{"epoch": int(r["epoch"]), **{k: float(r[k]) for k in HISTORY_FIELDS[1:]}}
                for r in csv.DictReader(fh)]
