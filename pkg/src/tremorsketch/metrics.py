"""Confusion matrices, per-class and weighted metrics, hard voting."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (EmptyMatrix, EmptyVote, LabelOutOfRange, LengthMismatch, MissingPairing,
                     ShapeMismatch)

CLASS_NAMES = ("healthy", "parkinson")


def confusion_matrix(true_labels, predicted_labels, k: int = 2) -> np.ndarray:
    """K x K counts; rows are true classes, columns predicted classes."""
    t = np.asarray(true_labels, dtype=np.int64).ravel()
    p = np.asarray(predicted_labels, dtype=np.int64).ravel()
    if t.size != p.size:
        raise LengthMismatch(f"{t.size} true labels vs {p.size} predictions")
    if t.size and (min(t.min(), p.min()) < 0 or max(t.max(), p.max()) >= k):
        raise LabelOutOfRange(f"labels must lie in [0, {k})")
    cm = np.zeros((k, k), dtype=np.int64)
    np.add.at(cm, (t, p), 1)
    return cm


def _safe_div(num, den):
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    return np.divide(num, den, out=np.zeros_like(num), where=den != 0)


@dataclass
class EvaluationReport:
    confusion: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    accuracy: float
    name: str = ""
    extra: dict = field(default_factory=dict)

    def to_dict(self, digits: int = 4) -> dict:
        r = lambda v: round(float(v), digits)  # noqa: E731
        return {
            "name": self.name,
            "confusion_matrix": self.confusion.tolist(),
            "accuracy": r(self.accuracy),
            "precision": [r(v) for v in self.precision],
            "recall": [r(v) for v in self.recall],
            "f1": [r(v) for v in self.f1],
            "support": [int(v) for v in self.support],
            "weighted_precision": r(self.weighted_precision),
            "weighted_recall": r(self.weighted_recall),
            "weighted_f1": r(self.weighted_f1),
            **self.extra,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self) -> str:
        k = len(self.precision)
        names = [CLASS_NAMES[i] if k == 2 else str(i) for i in range(k)]
        width = max(len(n) for n in names + ["weighted avg"])
        lines = []
        if self.name:
            lines.append(f"== {self.name} ==")
        lines.append(f"{'':{width}}  precision  recall  f1-score  support")
        for i, n in enumerate(names):
            lines.append(f"{n:{width}}  {self.precision[i]:9.4f}  {self.recall[i]:6.4f}"
                         f"  {self.f1[i]:8.4f}  {int(self.support[i]):7d}")
        lines.append(f"{'weighted avg':{width}}  {self.weighted_precision:9.4f}  "
                     f"{self.weighted_recall:6.4f}  {self.weighted_f1:8.4f}  {int(self.support.sum()):7d}")
        lines.append(f"accuracy {self.accuracy:.4f}")
        lines.append("confusion matrix (rows true, cols predicted):")
        for row in self.confusion:
            lines.append("  " + " ".join(f"{int(v):5d}" for v in row))
        return "\n".join(lines)


def classification_metrics(cm, name: str = "") -> EvaluationReport:
    cm = np.asarray(cm, dtype=np.int64)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1]:
        raise ShapeMismatch(f"confusion matrix must be square, got {cm.shape}")
    total = cm.sum()
    if total <= 0:
        raise EmptyMatrix("confusion matrix has no samples")
    diag = np.diag(cm)
    support = cm.sum(axis=1)
    precision = _safe_div(diag, cm.sum(axis=0))
    recall = _safe_div(diag, support)
    f1 = _safe_div(2 * precision * recall, precision + recall)
    w = support / total
    return EvaluationReport(
        confusion=cm, precision=precision, recall=recall, f1=f1, support=support,
        weighted_precision=float(w @ precision), weighted_recall=float(w @ recall),
        weighted_f1=float(w @ f1), accuracy=float(diag.sum() / total), name=name)


def evaluate_predictions(true_labels, predicted_labels, k: int = 2, name: str = "") -> EvaluationReport:
    return classification_metrics(confusion_matrix(true_labels, predicted_labels, k), name=name)


def hard_vote(predictions, confidences) -> int:
    """Majority label; ties go to the larger summed probability, then the lower label."""
    preds = [int(p) for p in predictions]
    if not preds:
        raise EmptyVote("no votes")
    conf = np.asarray(confidences, dtype=np.float64)
    if conf.ndim != 2 or conf.shape[0] != len(preds):
        raise ShapeMismatch("need one probability vector per voter")
    counts = np.bincount(preds, minlength=conf.shape[1])
    if counts.size != conf.shape[1]:
        raise ShapeMismatch("vote label outside the probability vector")
    tied = np.flatnonzero(counts == counts.max())
    if tied.size == 1:
        return int(tied[0])
    sums = conf[:, tied].sum(axis=0)
    return int(tied[np.flatnonzero(sums == sums.max())[0]])


def write_pgm_heatmap(cm, path, cell: int = 32) -> None:
    """Confusion matrix as a binary PGM; darker cells hold more samples."""
    cm = np.asarray(cm, dtype=np.float64)
    peak = cm.max() if cm.max() > 0 else 1.0
    shades = (255 - np.round(cm / peak * 255)).astype(np.uint8)
    img = np.kron(shades, np.ones((cell, cell), dtype=np.uint8))
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def write_report(report: EvaluationReport, stem) -> tuple:
    """Write ``<stem>.txt`` and ``<stem>.json``; returns both paths."""
    txt, js = f"{stem}.txt", f"{stem}.json"
    with open(txt, "w", encoding="utf-8") as fh:
        fh.write(report.to_text() + "\n")
    with open(js, "w", encoding="utf-8") as fh:
        fh.write(report.to_json() + "\n")
    return txt, js


def pair_by_class_index(spiral_labels, wave_labels) -> list:
    """Pair samples by (class, rank within class) in the given order."""
    s = np.asarray(spiral_labels)
    w = np.asarray(wave_labels)
    pairs = []
    for c in np.union1d(s, w):
        si, wi = np.flatnonzero(s == c), np.flatnonzero(w == c)
        if si.size != wi.size:
            raise MissingPairing(f"class {c}: {si.size} spiral vs {wi.size} wave samples")
        pairs.extend(zip(si.tolist(), wi.tolist()))
    return sorted(pairs)


@dataclass
class EnsembleResult:
    ensemble: EvaluationReport
    spiral: EvaluationReport
    wave: EvaluationReport
    mode: str

    def to_dict(self) -> dict:
        return {"mode": self.mode, "ensemble": self.ensemble.to_dict(),
                "spiral": self.spiral.to_dict(), "wave": self.wave.to_dict()}


def ensemble_from_probabilities(spiral_probs, spiral_labels, wave_probs, wave_labels,
                                mode: str = "paired") -> EnsembleResult:
    """Combine branch outputs.

    ``paired`` hard-votes each (spiral, wave) pair matched by class and rank;
    ``pooled`` scores both branches' predictions as one joint sample set.
    """
    sp, wp = np.asarray(spiral_probs), np.asarray(wave_probs)
    sl, wl = np.asarray(spiral_labels), np.asarray(wave_labels)
    k = sp.shape[1]
    spiral = evaluate_predictions(sl, sp.argmax(axis=1), k, "spiral")
    wave = evaluate_predictions(wl, wp.argmax(axis=1), k, "wave")
    if mode == "pooled":
        # the joint set is simply the union of both branch evaluations
        cm = spiral.confusion + wave.confusion
    elif mode == "paired":
        pairs = pair_by_class_index(sl, wl)
        if not pairs:
            raise MissingPairing("no samples to pair")
        truth, votes = [], []
        for i, j in pairs:
            preds = [int(sp[i].argmax()), int(wp[j].argmax())]
            votes.append(hard_vote(preds, [sp[i], wp[j]]))
            truth.append(int(sl[i]))
        cm = confusion_matrix(truth, votes, k)
    else:
        raise ValueError(f"unknown ensemble mode {mode!r}")
    report = classification_metrics(cm, name=f"ensemble ({mode})")
    return EnsembleResult(report, spiral, wave, mode)


def ensemble_evaluate(spiral_model, wave_model, spiral_test, wave_test,
                      mode: str = "paired") -> EnsembleResult:
    """Run both branches on their own test images and combine by hard voting.

    Models only need ``predict_proba(images) -> (N, K)``; test sets are
    ``(images, labels)``.
    """
    sx, sl = spiral_test
    wx, wl = wave_test
    return ensemble_from_probabilities(spiral_model.predict_proba(sx), sl,
                                       wave_model.predict_proba(wx), wl, mode)


def ensemble_evaluate_pairs(spiral_model, wave_model, paired_test_set) -> EnsembleResult:
    """Paired voting over explicit ``(spiral image, wave image, label)`` triples."""
    if not paired_test_set:
        raise MissingPairing("empty paired test set")
    sx = np.stack([np.asarray(s) for s, _, _ in paired_test_set])
    wx = np.stack([np.asarray(w) for _, w, _ in paired_test_set])
    labels = np.array([int(lbl) for _, _, lbl in paired_test_set])
    sp, wp = spiral_model.predict_proba(sx), wave_model.predict_proba(wx)
    k = sp.shape[1]
    votes = [hard_vote([sp[i].argmax(), wp[i].argmax()], [sp[i], wp[i]]) for i in range(len(labels))]
    return EnsembleResult(evaluate_predictions(labels, votes, k, "ensemble (paired)"),
                          evaluate_predictions(labels, sp.argmax(axis=1), k, "spiral"),
                          evaluate_predictions(labels, wp.argmax(axis=1), k, "wave"),
                          "paired")
