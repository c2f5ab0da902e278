"""Shared fixtures: the worked five-activity example and small builders."""

from __future__ import annotations

import numpy as np
import pytest

from tracediff import Alphabet, DKTrace, SKTrace

# The worked example used throughout: a five-activity process A..E with a
# six-event case. The SK columns are per-event probability vectors; argmax
# over them disagrees with the truth at positions 1 and 3.
EXAMPLE_LABELS = ("A", "B", "C", "D", "E")
EXAMPLE_DK_ACTIVITIES = ("A", "B", "E", "C", "D", "E")
EXAMPLE_SK_COLUMNS = np.array(
    [
        [0.33, 0.03, 0.15, 0.15, 0.34],
        [0.20, 0.25, 0.15, 0.20, 0.20],
        [0.50, 0.10, 0.10, 0.10, 0.20],
        [0.05, 0.15, 0.55, 0.05, 0.20],
        [0.10, 0.05, 0.25, 0.45, 0.15],
        [0.10, 0.05, 0.25, 0.25, 0.35],
    ]
)
EXAMPLE_ARGMAX = ("E", "B", "A", "C", "D", "E")


@pytest.fixture
def example_alphabet() -> Alphabet:
    return Alphabet(EXAMPLE_LABELS)


@pytest.fixture
def example_dk(example_alphabet) -> DKTrace:
    return DKTrace("1", tuple(example_alphabet.index(a) for a in EXAMPLE_DK_ACTIVITIES))


@pytest.fixture
def example_sk() -> SKTrace:
    return SKTrace("1", EXAMPLE_SK_COLUMNS)
