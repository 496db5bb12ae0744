"""Stance classification metrics, evidence precision@k, and heuristic baselines."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ShapeError
from .memnet import N_CLASSES, StanceLabel, rank_evidence

UNRELATED = int(StanceLabel.UNRELATED)


def _check(gold, pred) -> tuple[np.ndarray, np.ndarray]:
    g = np.asarray([int(x) for x in gold], dtype=np.int64)
    p = np.asarray([int(x) for x in pred], dtype=np.int64)
    if g.shape != p.shape:
        raise ShapeError(f"gold has {len(g)} labels, predictions have {len(p)}")
    if g.size == 0:
        raise ShapeError("metrics need at least one example")
    if g.min() < 0 or g.max() >= N_CLASSES or p.min() < 0 or p.max() >= N_CLASSES:
        raise ShapeError("labels must be stance indices 0..3")
    return g, p


def confusion_matrix(gold, pred) -> np.ndarray:
    """4x4 counts, rows = gold, columns = predicted."""
    g, p = _check(gold, pred)
    cm = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    np.add.at(cm, (g, p), 1)
    return cm


def accuracy(gold, pred) -> float:
    g, p = _check(gold, pred)
    return int((g == p).sum()) / len(g)


def per_class_f1(cm: np.ndarray) -> list[float]:
    out = []
    for k in range(N_CLASSES):
        tp = int(cm[k, k])
        fp = int(cm[:, k].sum()) - tp
        fn = int(cm[k, :].sum()) - tp
        denom = 2 * tp + fp + fn
        out.append(2 * tp / denom if denom else 0.0)
    return out


def macro_f1(gold, pred) -> tuple[float, list[float]]:
    """Unweighted mean of the four per-class F1 scores (empty classes score 0)."""
    f1 = per_class_f1(confusion_matrix(gold, pred))
    return sum(f1) / N_CLASSES, f1


def weighted_accuracy(gold, pred) -> float:
    """FNC hierarchical score: 0.25 for relatedness, +0.75 for the exact related class."""
    g, p = _check(gold, pred)
    g_rel = g != UNRELATED
    p_rel = p != UNRELATED
    rel_ok = g_rel == p_rel
    exact = g_rel & (g == p)
    earned = 0.25 * int(rel_ok.sum()) + 0.75 * int(exact.sum())
    best = 0.25 * len(g) + 0.75 * int(g_rel.sum())
    return earned / best


def precision_at_k(p_cnn: Sequence[np.ndarray], para_masks: Sequence[np.ndarray],
                   rationales: Sequence[np.ndarray | None], ks: Sequence[int] = (1, 2, 3, 4, 5),
                   mode: str = "hit") -> dict[int, float]:
    """Evidence precision over examples that carry rationale flags.

    ``mode="hit"`` counts an example when any gold paragraph is in its top k;
    ``mode="fraction"`` averages the share of the top k that are gold.  k is capped
    at each example's real paragraph count.
    """
    if mode not in ("hit", "fraction"):
        raise ValueError(f"unknown precision mode {mode!r}")
    if any(k < 1 for k in ks):
        raise ValueError("k must be >= 1")
    scores = {k: [] for k in ks}
    for scores_j, mask, gold in zip(p_cnn, para_masks, rationales):
        if gold is None or not np.any(gold):
            continue
        ranking = rank_evidence(np.asarray(scores_j), np.asarray(mask, dtype=bool))
        if not ranking:
            continue
        for k in ks:
            top = ranking[:min(k, len(ranking))]
            hits = sum(bool(gold[j]) for j in top)
            scores[k].append(float(hits > 0) if mode == "hit" else hits / len(top))
    return {k: (sum(v) / len(v) if v else 0.0) for k, v in scores.items()}


def random_precision_at_1(para_masks, rationales) -> float:
    """Expected P@1 of a uniformly random ranking: mean |gold| / |real paragraphs|."""
    vals = []
    for mask, gold in zip(para_masks, rationales):
        if gold is None or not np.any(gold):
            continue
        mask = np.asarray(mask, dtype=bool)
        vals.append(int(np.sum(np.asarray(gold, dtype=bool) & mask)) / int(mask.sum()))
    return sum(vals) / len(vals) if vals else 0.0


@dataclass
class MetricReport:
    accuracy: float
    macro_f1: float
    weighted_accuracy: float
    per_class_f1: list[float]
    confusion: list[list[int]]
    precision_at_k: dict[int, float] | None = field(default=None)

    @property
    def n_examples(self) -> int:
        return int(sum(map(sum, self.confusion)))

    def to_dict(self) -> dict:
        d = {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "weighted_accuracy": self.weighted_accuracy,
            "per_class_f1": dict(zip((str(s) for s in StanceLabel), self.per_class_f1)),
            "confusion": self.confusion,
            "n_examples": self.n_examples,
            "display": {
                "weighted_accuracy": f"{100 * self.weighted_accuracy:.1f}",
                "accuracy": f"{100 * self.accuracy:.1f}",
                "macro_f1": f"{100 * self.macro_f1:.1f}",
                "f1": " / ".join(f"{100 * x:.1f}" for x in self.per_class_f1),
            },
        }
        if self.precision_at_k is not None:
            d["precision_at_k"] = {str(k): v for k, v in sorted(self.precision_at_k.items())}
            d["display"]["precision_at_k"] = " / ".join(
                f"{100 * v:.1f}" for _, v in sorted(self.precision_at_k.items()))
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def evaluate(gold, pred, precision: dict[int, float] | None = None) -> MetricReport:
    macro, f1 = macro_f1(gold, pred)
    return MetricReport(
        accuracy=accuracy(gold, pred), macro_f1=macro, weighted_accuracy=weighted_accuracy(gold, pred),
        per_class_f1=f1, confusion=confusion_matrix(gold, pred).tolist(), precision_at_k=precision)


def heuristic_baselines(gold) -> tuple[MetricReport, MetricReport]:
    """Reports for predicting every example as unrelated, and as agree."""
    n = len(gold)
    return (evaluate(gold, [UNRELATED] * n), evaluate(gold, [int(StanceLabel.AGREE)] * n))
