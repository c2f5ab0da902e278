"""Position-level accuracy and macro precision/recall for recovered traces."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .logs import Alphabet, Dataset, DKTrace, argmax_decode, decode_dk

__all__ = ["ClassMetrics", "MetricsReport", "compute_metrics", "run_baseline_argmax"]


@dataclass(frozen=True)
class ClassMetrics:
    index: int
    true_positives: int
    false_positives: int
    false_negatives: int

    @property
    def support(self) -> int:
        return self.true_positives + self.false_negatives

    @property
    def precision(self) -> float:
        predicted = self.true_positives + self.false_positives
        return self.true_positives / predicted if predicted else 0.0

    @property
    def recall(self) -> float:
        return self.true_positives / self.support if self.support else 0.0


@dataclass(frozen=True)
class MetricsReport:
    """Micro accuracy plus unweighted class means of precision and recall.

    Macro averages run over classes that appear in the truth or the
    predictions; classes absent from both are excluded rather than counted
    as vacuous perfection. Ratios with an empty denominator score 0.
    """

    accuracy: float
    macro_precision: float
    macro_recall: float
    per_class: tuple[ClassMetrics, ...]
    total_positions: int
    correct_positions: int

    def rows(self, alphabet: Alphabet | None = None) -> list[dict]:
        out = []
        for cm in self.per_class:
            label = alphabet.label(cm.index) if alphabet is not None else str(cm.index)
            out.append(
                {
                    "class": label,
                    "precision": cm.precision,
                    "recall": cm.recall,
                    "support": cm.support,
                }
            )
        return out


def compute_metrics(predictions: Sequence[DKTrace], truths: Sequence[DKTrace]) -> MetricsReport:
    """Score aligned prediction/truth lists position by position."""
    if len(predictions) != len(truths):
        raise ValueError(f"{len(predictions)} predictions vs {len(truths)} ground-truth traces")
    if len(truths) == 0:
        raise ValueError("cannot score an empty test set")
    counts: dict[int, list[int]] = {}  # index -> [tp, fp, fn]
    total = correct = 0
    for predicted, truth in zip(predictions, truths):
        if predicted.case_id != truth.case_id:
            raise ValueError(f"case order mismatch: {predicted.case_id!r} vs {truth.case_id!r}")
        if len(predicted) != len(truth):
            raise ValueError(f"case {truth.case_id!r}: prediction length {len(predicted)} != truth length {len(truth)}")
        for p, t in zip(predicted.activities, truth.activities):
            total += 1
            if p == t:
                correct += 1
                counts.setdefault(t, [0, 0, 0])[0] += 1
            else:
                counts.setdefault(p, [0, 0, 0])[1] += 1
                counts.setdefault(t, [0, 0, 0])[2] += 1
    per_class = tuple(
        ClassMetrics(index, tp, fp, fn) for index, (tp, fp, fn) in sorted(counts.items())
    )
    return MetricsReport(
        accuracy=correct / total,
        macro_precision=float(np.mean([cm.precision for cm in per_class])),
        macro_recall=float(np.mean([cm.recall for cm in per_class])),
        per_class=per_class,
        total_positions=total,
        correct_positions=correct,
    )


def run_baseline_argmax(test: Dataset) -> MetricsReport:
    """Decode each SK trace by per-event argmax and score against the DK truth."""
    predictions = [argmax_decode(sk) for _, sk in test]
    truths = [decode_dk(dk) for dk, _ in test]
    return compute_metrics(predictions, truths)
