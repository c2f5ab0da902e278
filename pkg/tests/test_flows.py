"""Directly-follows mining and flow-matrix CSV round trips."""

from __future__ import annotations

import numpy as np
import pytest

from tracediff import (
    Alphabet,
    DKTrace,
    FlowMatrix,
    load_flow_matrix,
    mine_dfg_flow_matrix,
    write_flow_matrix,
)


@pytest.fixture
def abc_alphabet():
    return Alphabet(("A", "B", "C"))


class TestMining:
    def test_hand_enumerated_edges(self, abc_alphabet):
        traces = [DKTrace("1", (0, 1, 2)), DKTrace("2", (0, 2))]  # (A,B,C), (A,C)
        flow = mine_dfg_flow_matrix(traces, abc_alphabet)
        expected = np.zeros((3, 3))
        expected[0, 1] = expected[1, 2] = expected[0, 2] = 1.0  # A->B, B->C, A->C
        assert np.array_equal(flow.data, expected)

    def test_single_event_trace_yields_zero_matrix(self, abc_alphabet):
        flow = mine_dfg_flow_matrix([DKTrace("1", (0,))], abc_alphabet)
        assert np.all(flow.data == 0.0)

    def test_repeated_activity_gives_self_loop(self, abc_alphabet):
        flow = mine_dfg_flow_matrix([DKTrace("1", (0, 0))], abc_alphabet)
        assert flow.data[0, 0] == 1.0
        assert flow.data.sum() == 1.0

    def test_empty_log_rejected(self, abc_alphabet):
        with pytest.raises(ValueError, match="empty"):
            mine_dfg_flow_matrix([], abc_alphabet)

    def test_mining_is_idempotent_under_log_union(self, abc_alphabet):
        traces = [DKTrace("1", (0, 1, 2)), DKTrace("2", (2, 1))]
        once = mine_dfg_flow_matrix(traces, abc_alphabet)
        doubled = mine_dfg_flow_matrix(traces + traces, abc_alphabet)
        assert np.array_equal(once.data, doubled.data)

    def test_every_training_trace_replays_on_its_matrix(self):
        rng = np.random.default_rng(17)
        alphabet = Alphabet(("A", "B", "C", "D"))
        traces = [
            DKTrace(f"c{i}", tuple(int(a) for a in rng.integers(0, 4, size=rng.integers(1, 9))))
            for i in range(40)
        ]
        flow = mine_dfg_flow_matrix(traces, alphabet)
        for trace in traces:
            for a, b in zip(trace.activities, trace.activities[1:]):
                assert flow.data[a, b] == 1.0


class TestCsvRoundTrip:
    def test_write_then_load(self, tmp_path, abc_alphabet):
        flow = mine_dfg_flow_matrix([DKTrace("1", (0, 1, 2, 0))], abc_alphabet)
        path = tmp_path / "flow.csv"
        write_flow_matrix(flow, abc_alphabet, path)
        back = load_flow_matrix(path, abc_alphabet)
        assert np.array_equal(back.data, flow.data)

    def test_load_realigns_permuted_labels(self, tmp_path, abc_alphabet):
        path = tmp_path / "flow.csv"
        path.write_text(",C,A,B\nC,0,0,0\nA,1,0,1\nB,1,0,0\n")
        flow = load_flow_matrix(path, abc_alphabet)
        # file says A->C, A->B, B->C in permuted order
        assert flow.data[0, 2] == 1.0 and flow.data[0, 1] == 1.0 and flow.data[1, 2] == 1.0
        assert flow.data.sum() == 3.0

    def test_unknown_label_rejected(self, tmp_path, abc_alphabet):
        path = tmp_path / "flow.csv"
        path.write_text(",A,B,F\nA,0,0,0\nB,0,0,0\nF,0,0,0\n")
        with pytest.raises(ValueError, match="unknown activity labels"):
            load_flow_matrix(path, abc_alphabet)

    def test_fractional_entry_rejected(self, tmp_path, abc_alphabet):
        path = tmp_path / "flow.csv"
        path.write_text(",A,B,C\nA,0,0.5,0\nB,0,0,0\nC,0,0,0\n")
        with pytest.raises(ValueError, match="expected 0 or 1"):
            load_flow_matrix(path, abc_alphabet)

    def test_dimension_mismatch_rejected(self, tmp_path, abc_alphabet):
        path = tmp_path / "flow.csv"
        path.write_text(",A,B\nA,0,1\nB,0,0\n")
        with pytest.raises(ValueError, match="do not cover"):
            load_flow_matrix(path, abc_alphabet)


class TestFlowMatrixType:
    def test_is_binary_flag(self):
        assert FlowMatrix(np.eye(3)).is_binary
        assert not FlowMatrix(np.full((2, 2), 0.5)).is_binary

    def test_out_of_range_entries_rejected(self):
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            FlowMatrix(np.full((2, 2), 1.5))

    def test_non_square_rejected(self):
        with pytest.raises(ValueError, match="square"):
            FlowMatrix(np.zeros((2, 3)))
