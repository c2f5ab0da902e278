"""Tiny synthetic process for demos and end-to-end runs.

The generated process has five activities with both a choice and a loop:
every case starts with A, runs one or more (B-or-C, D) rounds, and ends
with E. The true directly-follows structure is known, so recovered traces
and mined flow matrices can be checked against ground truth.
"""

from __future__ import annotations

import numpy as np

from .flows import FlowMatrix
from .logs import Alphabet, DKTrace

__all__ = ["CHOICE_LOOP_ACTIVITIES", "choice_loop_alphabet", "choice_loop_flow", "sample_choice_loop_log"]

CHOICE_LOOP_ACTIVITIES = ("A", "B", "C", "D", "E")

_EDGES = (("A", "B"), ("A", "C"), ("B", "D"), ("C", "D"), ("D", "B"), ("D", "C"), ("D", "E"))


def choice_loop_alphabet() -> Alphabet:
    return Alphabet(CHOICE_LOOP_ACTIVITIES)


def choice_loop_flow(alphabet: Alphabet | None = None) -> FlowMatrix:
    """Ground-truth directly-follows matrix of the choice-loop process."""
    alphabet = alphabet or choice_loop_alphabet()
    data = np.zeros((alphabet.size, alphabet.size))
    for source, target in _EDGES:
        data[alphabet.index(source), alphabet.index(target)] = 1.0
    return FlowMatrix(data)


def sample_choice_loop_log(
    n_traces: int,
    seed: int,
    p_loop: float = 0.4,
    max_len: int = 32,
) -> tuple[list[DKTrace], Alphabet]:
    """Sample cases of the form A (B|C) D [(B|C) D]* E, capped at ``max_len`` events."""
    if n_traces < 1:
        raise ValueError(f"n_traces must be at least 1, got {n_traces}")
    if not 0.0 <= p_loop < 1.0:
        raise ValueError(f"p_loop must lie in [0, 1), got {p_loop}")
    if max_len < 4:
        raise ValueError(f"max_len must be at least 4 (shortest trace is A,B|C,D,E), got {max_len}")
    alphabet = choice_loop_alphabet()
    a, b, c, d, e = (alphabet.index(label) for label in CHOICE_LOOP_ACTIVITIES)
    max_rounds = (max_len - 2) // 2
    rng = np.random.default_rng(seed)
    traces = []
    for i in range(n_traces):
        activities = [a]
        rounds = 0
        while True:
            activities.append(b if rng.random() < 0.5 else c)
            activities.append(d)
            rounds += 1
            if rounds >= max_rounds or rng.random() >= p_loop:
                break
        activities.append(e)
        traces.append(DKTrace(case_id=f"case-{i + 1:04d}", activities=tuple(activities)))
    return traces, alphabet
