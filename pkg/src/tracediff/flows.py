"""Activity-level flow matrices: directly-follows mining and CSV import/export.

Entry (j, k) is 1 when activity j can be directly followed by activity k.
This is the structured process signal consumed by the model-aware denoiser
and reconstructed by its flow head.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .logs import Alphabet, DKTrace

__all__ = ["FlowMatrix", "mine_dfg_flow_matrix", "load_flow_matrix", "write_flow_matrix"]


@dataclass(frozen=True, eq=False)
class FlowMatrix:
    """Square directly-follows structure aligned with an alphabet's order."""

    data: np.ndarray  # (K, K) with entries in [0, 1]; ground truth is binary

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise ValueError(f"flow matrix must be square, got shape {data.shape}")
        if np.any((data < 0.0) | (data > 1.0)):
            raise ValueError("flow matrix entries must lie in [0, 1]")
        data = data.copy()
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def size(self) -> int:
        return self.data.shape[0]

    @property
    def is_binary(self) -> bool:
        return bool(np.all((self.data == 0.0) | (self.data == 1.0)))

    def edges(self, alphabet: Alphabet) -> list[tuple[str, str]]:
        rows, cols = np.nonzero(self.data)
        return [(alphabet.label(int(j)), alphabet.label(int(k))) for j, k in zip(rows, cols)]


def mine_dfg_flow_matrix(train: Sequence[DKTrace], alphabet: Alphabet) -> FlowMatrix:
    """Mark every adjacent activity pair observed in the training traces."""
    if len(train) == 0:
        raise ValueError("cannot mine a flow matrix from an empty log")
    data = np.zeros((alphabet.size, alphabet.size))
    for trace in train:
        for a, b in zip(trace.activities, trace.activities[1:]):
            if a >= alphabet.size or b >= alphabet.size:
                raise ValueError(f"trace {trace.case_id!r} uses an index outside the alphabet")
            data[a, b] = 1.0
    return FlowMatrix(data)


def load_flow_matrix(path: str | Path, alphabet: Alphabet) -> FlowMatrix:
    """Read a labeled K x K CSV and realign it to the alphabet's order.

    The first row and column carry activity labels; body entries must be
    exactly 0 or 1.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as handle:
        rows = [row for row in csv.reader(handle) if row]
    if not rows:
        raise ValueError(f"{path}: empty flow matrix file")
    header = [cell.strip() for cell in rows[0][1:]]
    if sorted(header) != sorted(alphabet.activities):
        unknown = [label for label in header if label not in alphabet]
        if unknown:
            raise ValueError(f"{path}: unknown activity labels {unknown}")
        raise ValueError(f"{path}: header labels {header} do not cover the alphabet {list(alphabet.activities)}")
    if len(rows) != alphabet.size + 1:
        raise ValueError(f"{path}: expected {alphabet.size} data rows, found {len(rows) - 1}")
    data = np.zeros((alphabet.size, alphabet.size))
    seen_rows: set[str] = set()
    for row in rows[1:]:
        if len(row) != alphabet.size + 1:
            raise ValueError(f"{path}: row {row[:1]} has {len(row) - 1} entries, expected {alphabet.size}")
        row_label = row[0].strip()
        if row_label not in alphabet:
            raise ValueError(f"{path}: unknown activity labels ['{row_label}']")
        if row_label in seen_rows:
            raise ValueError(f"{path}: duplicate row label {row_label!r}")
        seen_rows.add(row_label)
        j = alphabet.index(row_label)
        for col_label, cell in zip(header, row[1:]):
            value = cell.strip()
            if value not in ("0", "1"):
                raise ValueError(f"{path}: entry ({row_label}, {col_label}) is {value!r}, expected 0 or 1")
            data[j, alphabet.index(col_label)] = float(value)
    return FlowMatrix(data)


def write_flow_matrix(flow: FlowMatrix, alphabet: Alphabet, path: str | Path) -> None:
    if flow.size != alphabet.size:
        raise ValueError(f"flow matrix size {flow.size} != alphabet size {alphabet.size}")
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow([""] + list(alphabet.activities))
        for j, label in enumerate(alphabet.activities):
            writer.writerow([label] + [str(int(v)) for v in flow.data[j]])
