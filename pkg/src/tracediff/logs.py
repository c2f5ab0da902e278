"""Event-log data model: deterministic and stochastic traces, matrix encodings, log files.

A deterministically-known (DK) trace is a sequence of activity indices; a
stochastically-known (SK) trace carries one probability vector over the
activity alphabet per event. Both encode to K x max_len column matrices
with an explicit padding mask. File formats are line-oriented: DK logs are
CSV (``case_id,event_no,activity``), SK logs are JSON lines with one object
per case.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "LogParseError",
    "Alphabet",
    "DKTrace",
    "SKTrace",
    "TraceMatrix",
    "Dataset",
    "parse_dk_log",
    "parse_sk_log",
    "write_dk_log",
    "write_sk_log",
    "encode",
    "argmax_decode",
    "decode_dk",
    "build_dataset",
    "split_train_test",
]

DK_HEADER = ("case_id", "event_no", "activity")
SK_COLUMN_TOLERANCE = 1e-6


class LogParseError(ValueError):
    """Malformed log file; message carries the offending location."""


_EVENT_NO = re.compile(r"^\D*?(\d+)$")


def _parse_event_no(raw: str) -> int:
    """Event numbers are integers, optionally prefixed (``3`` or ``e3``)."""
    match = _EVENT_NO.match(raw)
    if match is None:
        raise ValueError(raw)
    return int(match.group(1))


def _freeze(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Alphabet:
    """Ordered activity vocabulary plus a reserved padding index.

    The padding index equals ``size`` and never appears in traces, metrics,
    or SK probability mass; it only exists so fixed-width encodings can mark
    positions beyond a trace's end.
    """

    activities: tuple[str, ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.activities) < 2:
            raise ValueError(f"alphabet needs at least 2 activities, got {len(self.activities)}")
        if any(not label for label in self.activities):
            raise ValueError("alphabet labels must be non-empty")
        if len(set(self.activities)) != len(self.activities):
            raise ValueError("alphabet labels must be unique")
        object.__setattr__(self, "activities", tuple(self.activities))
        object.__setattr__(self, "_index", {label: i for i, label in enumerate(self.activities)})

    @classmethod
    def from_labels(cls, labels: Iterable[str]) -> "Alphabet":
        """Build an alphabet in first-appearance order."""
        seen: dict[str, None] = {}
        for label in labels:
            seen.setdefault(label, None)
        return cls(tuple(seen))

    @property
    def size(self) -> int:
        return len(self.activities)

    @property
    def pad_index(self) -> int:
        return len(self.activities)

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise KeyError(f"unknown activity label {label!r}") from None

    def label(self, index: int) -> str:
        return self.activities[index]

    def __contains__(self, label: str) -> bool:
        return label in self._index


@dataclass(frozen=True)
class DKTrace:
    """One deterministic case: an ordered sequence of activity indices."""

    case_id: str
    activities: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "activities", tuple(int(a) for a in self.activities))
        if len(self.activities) == 0:
            raise ValueError(f"trace {self.case_id!r} is empty")
        if any(a < 0 for a in self.activities):
            raise ValueError(f"trace {self.case_id!r} contains a negative activity index")

    def __len__(self) -> int:
        return len(self.activities)

    def labels(self, alphabet: Alphabet) -> tuple[str, ...]:
        return tuple(alphabet.label(a) for a in self.activities)


@dataclass(frozen=True, eq=False)
class SKTrace:
    """One stochastic case: per event, a probability vector over activities."""

    case_id: str
    columns: np.ndarray  # (T, K), rows are per-event distributions

    def __post_init__(self):
        cols = np.asarray(self.columns, dtype=np.float64)
        if cols.ndim != 2 or cols.shape[0] == 0:
            raise ValueError(f"trace {self.case_id!r}: columns must be a non-empty (T, K) array")
        if np.any(cols < 0):
            raise ValueError(f"trace {self.case_id!r}: negative probability")
        sums = cols.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-9):
            worst = int(np.argmax(np.abs(sums - 1.0)))
            raise ValueError(f"trace {self.case_id!r}: event {worst + 1} sums to {sums[worst]:.12f}, not 1")
        object.__setattr__(self, "columns", _freeze(cols))

    def __len__(self) -> int:
        return self.columns.shape[0]


_KINDS = ("dk", "sk", "logits")


@dataclass(frozen=True, eq=False)
class TraceMatrix:
    """A K x max_len column matrix with a padding mask.

    Masked-true columns hold the trace content (one-hot for ``dk``,
    distributions for ``sk``, arbitrary reals for ``logits``); masked-false
    columns are padding and must be all-zero except for ``logits``.
    """

    data: np.ndarray  # (K, max_len)
    mask: np.ndarray  # (max_len,) bool
    kind: str
    case_id: str

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        mask = np.asarray(self.mask, dtype=bool)
        if self.kind not in _KINDS:
            raise ValueError(f"unknown matrix kind {self.kind!r}")
        if data.ndim != 2:
            raise ValueError(f"matrix data must be 2-D, got shape {data.shape}")
        if mask.shape != (data.shape[1],):
            raise ValueError(f"mask shape {mask.shape} does not match {data.shape[1]} columns")
        if not mask.any():
            raise ValueError(f"trace {self.case_id!r}: mask selects no columns")
        length = int(mask.sum())
        if not np.array_equal(mask, np.arange(mask.size) < length):
            raise ValueError(f"trace {self.case_id!r}: padding must be a suffix")
        if self.kind != "logits" and np.any(data[:, ~mask] != 0.0):
            raise ValueError(f"trace {self.case_id!r}: padding columns must be zero")
        if self.kind == "dk":
            real = data[:, mask]
            if not (np.all((real == 0.0) | (real == 1.0)) and np.all(real.sum(axis=0) == 1.0)):
                raise ValueError(f"trace {self.case_id!r}: dk columns must be one-hot")
        elif self.kind == "sk":
            real = data[:, mask]
            if np.any(real < 0):
                raise ValueError(f"trace {self.case_id!r}: negative probability")
            sums = real.sum(axis=0)
            if np.any(np.abs(sums - 1.0) > 1e-9):
                raise ValueError(f"trace {self.case_id!r}: sk column sums deviate from 1 beyond 1e-9")
        object.__setattr__(self, "data", _freeze(data))
        object.__setattr__(self, "mask", _freeze(mask))

    @property
    def num_activities(self) -> int:
        return self.data.shape[0]

    @property
    def max_len(self) -> int:
        return self.data.shape[1]

    @property
    def length(self) -> int:
        return int(self.mask.sum())


@dataclass(frozen=True, eq=False)
class Dataset:
    """Aligned (DK, SK) matrix pairs over one alphabet and padded length."""

    pairs: tuple[tuple[TraceMatrix, TraceMatrix], ...]
    alphabet: Alphabet
    max_len: int

    def __post_init__(self):
        if len(self.pairs) == 0:
            raise ValueError("dataset must contain at least one pair")
        for dk, sk in self.pairs:
            if dk.kind != "dk" or sk.kind != "sk":
                raise ValueError(f"pair {dk.case_id!r}: expected (dk, sk) kinds, got ({dk.kind}, {sk.kind})")
            if dk.case_id != sk.case_id:
                raise ValueError(f"pair case ids differ: {dk.case_id!r} vs {sk.case_id!r}")
            if dk.max_len != self.max_len or sk.max_len != self.max_len:
                raise ValueError(f"pair {dk.case_id!r}: padded length differs from dataset max_len {self.max_len}")
            if dk.num_activities != self.alphabet.size or sk.num_activities != self.alphabet.size:
                raise ValueError(f"pair {dk.case_id!r}: matrix height differs from alphabet size {self.alphabet.size}")
            if not np.array_equal(dk.mask, sk.mask):
                raise ValueError(f"pair {dk.case_id!r}: dk and sk masks differ")
        object.__setattr__(self, "pairs", tuple(self.pairs))

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    @property
    def case_ids(self) -> tuple[str, ...]:
        return tuple(dk.case_id for dk, _ in self.pairs)


# -- parsing and writing ---------------------------------------------------


def parse_dk_log(path: str | Path) -> tuple[list[DKTrace], Alphabet]:
    """Read a DK log CSV; the alphabet is built in first-appearance order.

    Rows must be grouped by case and strictly ordered by event number
    within each case.
    """
    path = Path(path)
    events: dict[str, list[tuple[int, str]]] = {}
    order: list[str] = []
    labels: list[str] = []
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise LogParseError(f"{path}: file is empty") from None
        if tuple(cell.strip() for cell in header) != DK_HEADER:
            raise LogParseError(f"{path}:1: expected header {','.join(DK_HEADER)}")
        previous_case: str | None = None
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise LogParseError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            case_id, event_no_raw, activity = (cell.strip() for cell in row)
            if not case_id or not activity:
                raise LogParseError(f"{path}:{lineno}: empty case id or activity")
            try:
                event_no = _parse_event_no(event_no_raw)
            except ValueError:
                raise LogParseError(f"{path}:{lineno}: event_no {event_no_raw!r} carries no event number") from None
            if case_id in events:
                if previous_case != case_id:
                    raise LogParseError(f"{path}:{lineno}: rows for case {case_id!r} are not contiguous")
                if any(event_no == existing for existing, _ in events[case_id]):
                    raise LogParseError(f"{path}:{lineno}: duplicate event {event_no} in case {case_id!r}")
                if event_no <= events[case_id][-1][0]:
                    raise LogParseError(f"{path}:{lineno}: event numbers in case {case_id!r} must increase")
            else:
                events[case_id] = []
                order.append(case_id)
            events[case_id].append((event_no, activity))
            labels.append(activity)
            previous_case = case_id
    if not events:
        raise LogParseError(f"{path}: no event rows")
    alphabet = Alphabet.from_labels(labels)
    traces = [
        DKTrace(case_id, tuple(alphabet.index(label) for _, label in events[case_id]))
        for case_id in order
    ]
    return traces, alphabet


def write_dk_log(traces: Sequence[DKTrace], alphabet: Alphabet, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(DK_HEADER)
        for trace in traces:
            for event_no, activity in enumerate(trace.activities, start=1):
                writer.writerow([trace.case_id, event_no, alphabet.label(activity)])


def parse_sk_log(path: str | Path, alphabet: Alphabet) -> list[SKTrace]:
    """Read an SK log (JSON lines, one ``{"case_id", "events"}`` object per case).

    Event vectors must have exactly ``alphabet.size`` non-negative entries
    summing to 1 within 1e-6; columns are renormalized so stored traces
    satisfy the tighter internal tolerance.
    """
    path = Path(path)
    traces: list[SKTrace] = []
    seen: set[str] = set()
    with path.open(encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LogParseError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(record, dict) or "case_id" not in record or "events" not in record:
                raise LogParseError(f"{path}:{lineno}: expected an object with case_id and events")
            case_id = str(record["case_id"])
            if case_id in seen:
                raise LogParseError(f"{path}:{lineno}: duplicate case {case_id!r}")
            seen.add(case_id)
            events = record["events"]
            if not isinstance(events, list) or not events:
                raise LogParseError(f"{path}:{lineno}: case {case_id!r} has no events")
            columns = np.zeros((len(events), alphabet.size))
            for i, vector in enumerate(events):
                if not isinstance(vector, list) or len(vector) != alphabet.size:
                    raise LogParseError(
                        f"{path}:{lineno}: case {case_id!r} event {i + 1} needs {alphabet.size} probabilities"
                    )
                values = np.asarray(vector, dtype=np.float64)
                if np.any(values < 0):
                    raise LogParseError(f"{path}:{lineno}: case {case_id!r} event {i + 1} has a negative probability")
                total = values.sum()
                if abs(total - 1.0) > SK_COLUMN_TOLERANCE:
                    raise LogParseError(
                        f"{path}:{lineno}: case {case_id!r} event {i + 1} sums to {total:.8f}, not 1"
                    )
                columns[i] = values / total
            traces.append(SKTrace(case_id, columns))
    if not traces:
        raise LogParseError(f"{path}: no case records")
    return traces


def write_sk_log(traces: Sequence[SKTrace], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        for trace in traces:
            record = {"case_id": trace.case_id, "events": [list(row) for row in trace.columns]}
            handle.write(json.dumps(record) + "\n")


# -- encoding ----------------------------------------------------------------


def encode(trace: DKTrace | SKTrace, alphabet: Alphabet, max_len: int) -> TraceMatrix:
    """Encode a trace as a K x max_len matrix; padding columns are zero."""
    length = len(trace)
    if length > max_len:
        raise ValueError(f"trace {trace.case_id!r} has length {length} > max_len {max_len}; refusing to truncate")
    mask = np.arange(max_len) < length
    data = np.zeros((alphabet.size, max_len))
    if isinstance(trace, DKTrace):
        for position, activity in enumerate(trace.activities):
            if activity >= alphabet.size:
                raise ValueError(f"trace {trace.case_id!r}: activity index {activity} outside alphabet of size {alphabet.size}")
            data[activity, position] = 1.0
        kind = "dk"
    else:
        if trace.columns.shape[1] != alphabet.size:
            raise ValueError(f"trace {trace.case_id!r}: column width {trace.columns.shape[1]} != alphabet size {alphabet.size}")
        data[:, :length] = trace.columns.T
        kind = "sk"
    return TraceMatrix(data=data, mask=mask, kind=kind, case_id=trace.case_id)


def argmax_decode(matrix: TraceMatrix) -> DKTrace:
    """Pick the highest-scoring activity per real column; ties go to the lowest index."""
    if matrix.kind not in ("sk", "logits"):
        raise ValueError(f"argmax_decode expects an sk or logits matrix, got kind {matrix.kind!r}")
    picks = np.argmax(matrix.data[:, matrix.mask], axis=0)
    return DKTrace(matrix.case_id, tuple(int(p) for p in picks))


def decode_dk(matrix: TraceMatrix) -> DKTrace:
    """Recover the activity sequence from a one-hot DK matrix."""
    if matrix.kind != "dk":
        raise ValueError(f"decode_dk expects a dk matrix, got kind {matrix.kind!r}")
    picks = np.argmax(matrix.data[:, matrix.mask], axis=0)
    return DKTrace(matrix.case_id, tuple(int(p) for p in picks))


def build_dataset(
    dk_traces: Sequence[DKTrace],
    sk_traces: Sequence[SKTrace],
    alphabet: Alphabet,
    max_len: int | None = None,
) -> Dataset:
    """Pair DK and SK traces by case id and encode them to matrices."""
    sk_by_case = {trace.case_id: trace for trace in sk_traces}
    if len(sk_by_case) != len(sk_traces):
        raise ValueError("duplicate case ids among SK traces")
    missing = [t.case_id for t in dk_traces if t.case_id not in sk_by_case]
    if missing:
        raise ValueError(f"no SK trace for cases: {missing[:5]}")
    extra = set(sk_by_case) - {t.case_id for t in dk_traces}
    if extra:
        raise ValueError(f"SK traces without DK counterpart: {sorted(extra)[:5]}")
    if max_len is None:
        max_len = max(len(t) for t in dk_traces)
    pairs = []
    for dk in dk_traces:
        sk = sk_by_case[dk.case_id]
        if len(sk) != len(dk):
            raise ValueError(f"case {dk.case_id!r}: DK length {len(dk)} != SK length {len(sk)}")
        pairs.append((encode(dk, alphabet, max_len), encode(sk, alphabet, max_len)))
    return Dataset(pairs=tuple(pairs), alphabet=alphabet, max_len=max_len)


def split_train_test(dataset: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Disjoint, exhaustive random split; deterministic for a fixed seed."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    n = len(dataset)
    n_train = int(n * train_fraction)
    if n_train == 0 or n_train == n:
        raise ValueError(f"split of {n} pairs at fraction {train_fraction} leaves an empty side")
    permutation = np.random.default_rng(seed).permutation(n)
    train_pairs = tuple(dataset.pairs[i] for i in permutation[:n_train])
    test_pairs = tuple(dataset.pairs[i] for i in permutation[n_train:])
    return (
        Dataset(pairs=train_pairs, alphabet=dataset.alphabet, max_len=dataset.max_len),
        Dataset(pairs=test_pairs, alphabet=dataset.alphabet, max_len=dataset.max_len),
    )
