"""Confusion matrices, per-class precision/recall/F1, and report rendering.

Zero-denominator cases (class never predicted, or absent from the test set)
are defined as 0 and flagged with a warning; rounding happens only at render
time, internal values keep full precision.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .data import LabelMap


@dataclass(frozen=True)
class ConfusionMatrix:
    """K x K counts, entry [true][pred]."""

    counts: np.ndarray

    def __post_init__(self):
        c = self.counts
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError(f"confusion matrix must be square, got {c.shape}")
        if (c < 0).any():
            raise ValueError("negative count")

    @property
    def k(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def true_positives(self) -> np.ndarray:
        return np.diagonal(self.counts).copy()

    def false_positives(self) -> np.ndarray:
        return self.counts.sum(axis=0) - np.diagonal(self.counts)

    def false_negatives(self) -> np.ndarray:
        return self.counts.sum(axis=1) - np.diagonal(self.counts)


def confusion(true_labels, pred_labels, k: int) -> ConfusionMatrix:
    t = np.asarray(true_labels, dtype=np.int64)
    p = np.asarray(pred_labels, dtype=np.int64)
    if t.shape != p.shape or t.ndim != 1:
        raise ValueError(f"label sequences must be equal-length 1-D, got {t.shape} vs {p.shape}")
    if len(t) and (t.min() < 0 or t.max() >= k or p.min() < 0 or p.max() >= k):
        raise ValueError(f"label outside 0..{k - 1}")
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (t, p), 1)
    return ConfusionMatrix(counts)


@dataclass(frozen=True)
class ClassificationReport:
    precision: np.ndarray   # [k]
    recall: np.ndarray      # [k]
    f1: np.ndarray          # [k]
    support: np.ndarray     # [k] true-label counts
    accuracy: float
    macro: tuple[float, float, float]     # unweighted means of P, R, F1
    weighted: tuple[float, float, float]  # support-weighted means


def report(cm: ConfusionMatrix, label_map: LabelMap | None = None) -> ClassificationReport:
    if cm.total == 0:
        raise ValueError("empty confusion matrix")
    if label_map is not None and len(label_map) != cm.k:
        raise ValueError(f"label map has {len(label_map)} names for a {cm.k}-class matrix")
    tp = cm.true_positives().astype(np.float64)
    fp = cm.false_positives().astype(np.float64)
    fn = cm.false_negatives().astype(np.float64)
    support = cm.counts.sum(axis=1)

    degenerate = np.flatnonzero(((tp + fp) == 0) | ((tp + fn) == 0))
    if len(degenerate):
        names = ([label_map.names[i] for i in degenerate] if label_map
                 else degenerate.tolist())
        warnings.warn(f"zero-denominator classes reported as 0: {names}",
                      stacklevel=2)

    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(tp + fp > 0, tp / (tp + fp), 0.0)
        recall = np.where(tp + fn > 0, tp / (tp + fn), 0.0)
        pr = precision + recall
        f1 = np.where(pr > 0, 2 * precision * recall / np.where(pr > 0, pr, 1.0), 0.0)

    acc = float(tp.sum() / cm.total)
    w = support / cm.total
    return ClassificationReport(
        precision=precision, recall=recall, f1=f1, support=support,
        accuracy=acc,
        macro=(float(precision.mean()), float(recall.mean()), float(f1.mean())),
        weighted=(float(precision @ w), float(recall @ w), float(f1 @ w)),
    )


def render_report(rep: ClassificationReport, label_map: LabelMap) -> str:
    """Plain-text table: one row per class, then accuracy/macro/weighted."""
    if len(label_map) != len(rep.precision):
        raise ValueError("label map size does not match report")
    name_w = max(len(label_map.display(i)) for i in range(len(label_map)))
    name_w = max(name_w, len("weighted avg"))
    lines = [f"{'':<{name_w}}  precision  recall  f1-score  support"]
    for i in range(len(label_map)):
        lines.append(
            f"{label_map.display(i):<{name_w}}  {rep.precision[i]:>9.2f}  "
            f"{rep.recall[i]:>6.2f}  {rep.f1[i]:>8.2f}  {int(rep.support[i]):>7d}")
    total = int(rep.support.sum())
    lines.append("")
    lines.append(f"{'accuracy':<{name_w}}  {'':>9}  {'':>6}  {rep.accuracy:>8.2f}  {total:>7d}")
    for tag, (p, r, f) in (("macro avg", rep.macro), ("weighted avg", rep.weighted)):
        lines.append(f"{tag:<{name_w}}  {p:>9.2f}  {r:>6.2f}  {f:>8.2f}  {total:>7d}")
    return "\n".join(lines)


def render_report_csv(rep: ClassificationReport, label_map: LabelMap) -> str:
    """Machine-readable variant: full-precision comma-separated rows."""
    lines = ["class,precision,recall,f1,support"]
    for i, name in enumerate(label_map.names):
        lines.append(f"{name},{float(rep.precision[i])!r},{float(rep.recall[i])!r},"
                     f"{float(rep.f1[i])!r},{int(rep.support[i])}")
    total = int(rep.support.sum())
    lines.append(f"accuracy,{rep.accuracy!r},,,{total}")
    lines.append(f"macro,{rep.macro[0]!r},{rep.macro[1]!r},{rep.macro[2]!r},{total}")
    lines.append(f"weighted,{rep.weighted[0]!r},{rep.weighted[1]!r},"
                 f"{rep.weighted[2]!r},{total}")
    return "\n".join(lines)
