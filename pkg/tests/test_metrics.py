"""Accuracy and macro-average scoring rules."""

from __future__ import annotations

import numpy as np
import pytest

from tracediff import (
    DKTrace,
    SKTrace,
    build_dataset,
    compute_metrics,
    run_baseline_argmax,
)
from tests.conftest import EXAMPLE_ARGMAX, EXAMPLE_DK_ACTIVITIES


def _trace(case_id, labels, alphabet):
    return DKTrace(case_id, tuple(alphabet.index(l) for l in labels))


class TestComputeMetrics:
    def test_worked_example_scores_four_of_six(self, example_alphabet):
        prediction = _trace("1", EXAMPLE_ARGMAX, example_alphabet)
        truth = _trace("1", EXAMPLE_DK_ACTIVITIES, example_alphabet)
        report = compute_metrics([prediction], [truth])
        assert report.accuracy == pytest.approx(4.0 / 6.0)
        assert report.total_positions == 6
        assert report.correct_positions == 4

    def test_perfect_predictions(self, example_alphabet):
        truth = _trace("1", EXAMPLE_DK_ACTIVITIES, example_alphabet)
        report = compute_metrics([truth], [truth])
        assert report.accuracy == 1.0
        assert report.macro_precision == 1.0
        assert report.macro_recall == 1.0

    def test_single_class_truth_macro_precision(self, example_alphabet):
        truth = DKTrace("1", (2, 2, 2))
        report = compute_metrics([truth], [truth])
        assert report.macro_precision == 1.0
        assert len(report.per_class) == 1
        assert report.per_class[0].index == 2

    def test_absent_classes_are_excluded_from_macro_averages(self, example_alphabet):
        # class 4 never appears in truth or prediction and must not dilute macros
        truth = DKTrace("1", (0, 1))
        prediction = DKTrace("1", (0, 2))
        report = compute_metrics([prediction], [truth])
        involved = {cm.index for cm in report.per_class}
        assert involved == {0, 1, 2}
        # class 1: missed (recall 0); class 2: spurious (precision 0); class 0: perfect
        assert report.macro_precision == pytest.approx((1.0 + 0.0 + 0.0) / 3.0)
        assert report.macro_recall == pytest.approx((1.0 + 0.0 + 0.0) / 3.0)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="length"):
            compute_metrics([DKTrace("1", (0, 1))], [DKTrace("1", (0, 1, 2))])

    def test_list_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="predictions vs"):
            compute_metrics([DKTrace("1", (0,))], [])

    def test_case_order_mismatch_rejected(self):
        with pytest.raises(ValueError, match="case order"):
            compute_metrics([DKTrace("a", (0,))], [DKTrace("b", (0,))])

    def test_permutation_invariance(self, example_alphabet):
        rng = np.random.default_rng(3)
        truths = [DKTrace(f"c{i}", tuple(int(a) for a in rng.integers(0, 5, 6))) for i in range(10)]
        predictions = [DKTrace(f"c{i}", tuple(int(a) for a in rng.integers(0, 5, 6))) for i in range(10)]
        forward = compute_metrics(predictions, truths)
        order = rng.permutation(10)
        shuffled = compute_metrics([predictions[i] for i in order], [truths[i] for i in order])
        assert shuffled.accuracy == forward.accuracy
        assert shuffled.macro_precision == forward.macro_precision
        assert shuffled.macro_recall == forward.macro_recall


class TestArgmaxBaseline:
    def test_zero_noise_scores_one(self, example_alphabet):
        rng = np.random.default_rng(1)
        dks, sks = [], []
        for i in range(8):
            activities = tuple(int(a) for a in rng.integers(0, 5, 5))
            dks.append(DKTrace(f"c{i}", activities))
            sks.append(SKTrace(f"c{i}", np.eye(5)[list(activities)]))
        dataset = build_dataset(dks, sks, example_alphabet, 5)
        assert run_baseline_argmax(dataset).accuracy == 1.0

    def test_worked_example_as_single_pair(self, example_alphabet, example_dk, example_sk):
        dataset = build_dataset([example_dk], [example_sk], example_alphabet, 6)
        report = run_baseline_argmax(dataset)
        assert report.accuracy == pytest.approx(4.0 / 6.0)

    def test_pure_noise_is_near_chance(self, example_alphabet):
        from tracediff.noise import DirichletParams, NoiseProfile, synthesize_sk_log
        from tracediff.logs import encode

        rng = np.random.default_rng(2)
        matrices = [
            encode(DKTrace(f"c{i}", tuple(int(a) for a in rng.integers(0, 5, 12))), example_alphabet, 12)
            for i in range(200)
        ]
        dataset = synthesize_sk_log(
            matrices, NoiseProfile(1.0), DirichletParams.uniform(1.0, 5, seed=4), example_alphabet
        )
        report = run_baseline_argmax(dataset)
        # chance level 1/K = 0.2; 2400 positions give SE ~ 0.008
        assert abs(report.accuracy - 0.2) < 0.03
