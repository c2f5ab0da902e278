"""Dirichlet sampling statistics and the mixture-corruption identities."""

from __future__ import annotations

import numpy as np
import pytest

from tracediff import (
    DirichletParams,
    DKTrace,
    NoiseProfile,
    argmax_decode,
    decode_dk,
    encode,
    noise_sweep_levels,
    sample_dirichlet,
    synthesize_sk_log,
    synthesize_sk_trace,
)


class TestSampleDirichlet:
    def test_uniform_concentration_matches_analytic_mean(self):
        # Dirichlet(1,...,1) has per-coordinate mean 1/K; check within 3 SE.
        k, n = 5, 20_000
        samples = sample_dirichlet(DirichletParams.uniform(1.0, k, seed=123), n)
        # per-coordinate variance of Dirichlet(1*K): mean(1-mean)/(sum+1)
        mean = 1.0 / k
        se = np.sqrt(mean * (1 - mean) / (k + 1) / n)
        assert np.all(np.abs(samples.mean(axis=0) - mean) < 3 * se)

    def test_sparse_concentration_is_near_one_hot(self):
        # Monte Carlo truth for the mean max coordinate at K=5, alpha=0.05 is
        # ~0.888 (cross-checked against numpy's own dirichlet sampler), so the
        # assertions pin near-sparsity without overstating it.
        samples = sample_dirichlet(DirichletParams.uniform(0.05, 5, seed=7), 10_000)
        max_coords = samples.max(axis=1)
        assert max_coords.mean() > 0.85
        assert np.median(max_coords) > 0.97

    def test_rows_sum_to_one_exactly(self):
        samples = sample_dirichlet(DirichletParams.uniform(0.3, 7, seed=5), 4_000)
        assert np.all(samples >= 0.0)
        assert np.all(samples.sum(axis=1) == 1.0)

    def test_deterministic_for_fixed_seed(self):
        params = DirichletParams.uniform(0.5, 4, seed=11)
        assert np.array_equal(sample_dirichlet(params, 50), sample_dirichlet(params, 50))

    def test_nonpositive_concentration_rejected(self):
        with pytest.raises(ValueError, match="positive"):
            DirichletParams(concentration=(0.5, 0.0, 0.5))

    def test_count_must_be_positive(self):
        with pytest.raises(ValueError, match="count"):
            sample_dirichlet(DirichletParams.uniform(1.0, 3), 0)


@pytest.fixture
def dk_matrix(example_alphabet):
    trace = DKTrace("c1", (0, 1, 4, 2, 3, 4))
    return encode(trace, example_alphabet, 8)


class TestSynthesizeTrace:
    def test_lambda_zero_reproduces_dk_exactly(self, dk_matrix):
        sk = synthesize_sk_trace(dk_matrix, NoiseProfile(0.0), DirichletParams.uniform(0.05, 5, seed=3))
        assert np.array_equal(sk.data, dk_matrix.data)

    def test_lambda_one_reproduces_noise_exactly(self, dk_matrix):
        params = DirichletParams.uniform(0.05, 5, seed=3)
        sk = synthesize_sk_trace(dk_matrix, NoiseProfile(1.0), params)
        noise = sample_dirichlet(params, dk_matrix.length).T
        assert np.array_equal(sk.data[:, : dk_matrix.length], noise)

    def test_half_mixture_with_injected_uniform_noise(self, dk_matrix):
        # (1-0.5)*(1,0,0,0,0) + 0.5*(0.2,...) = (0.6, 0.1, 0.1, 0.1, 0.1);
        # the column already sums to 1, so normalization is a no-op
        noise = np.full((5, dk_matrix.length), 0.2)
        sk = synthesize_sk_trace(
            dk_matrix, NoiseProfile(0.5), DirichletParams.uniform(0.05, 5, seed=0), noise=noise
        )
        assert dk_matrix.data[0, 0] == 1.0
        assert np.allclose(sk.data[:, 0], [0.6, 0.1, 0.1, 0.1, 0.1], atol=1e-15)

    def test_padding_columns_untouched(self, dk_matrix):
        sk = synthesize_sk_trace(dk_matrix, NoiseProfile(0.7), DirichletParams.uniform(0.05, 5, seed=9))
        assert np.all(sk.data[:, ~sk.mask] == 0.0)
        assert np.array_equal(sk.mask, dk_matrix.mask)

    def test_per_position_profile_must_match_length(self, dk_matrix):
        with pytest.raises(ValueError, match="levels but the trace"):
            synthesize_sk_trace(dk_matrix, NoiseProfile((0.1, 0.2)), DirichletParams.uniform(0.05, 5))

    def test_lambda_outside_unit_interval_rejected(self):
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            NoiseProfile(1.5)

    def test_source_dk_never_mutated(self, dk_matrix):
        before = np.array(dk_matrix.data)
        synthesize_sk_trace(dk_matrix, NoiseProfile(0.9), DirichletParams.uniform(0.05, 5, seed=2))
        assert np.array_equal(dk_matrix.data, before)

    def test_prenormalization_sums_identity_over_many_columns(self, example_alphabet):
        # 10^4 columns; the synthesizer asserts max |colsum - 1| < 1e-12 internally
        rng = np.random.default_rng(4)
        total_columns = 0
        for i in range(100):
            trace = DKTrace(f"c{i}", tuple(int(a) for a in rng.integers(0, 5, size=100)))
            matrix = encode(trace, example_alphabet, 100)
            synthesize_sk_trace(matrix, NoiseProfile(0.37), DirichletParams.uniform(0.05, 5, seed=i))
            total_columns += 100
        assert total_columns == 10_000


class TestSynthesizeLog:
    def _matrices(self, example_alphabet, n=12, seed=0):
        rng = np.random.default_rng(seed)
        return [
            encode(
                DKTrace(f"c{i}", tuple(int(a) for a in rng.integers(0, 5, size=6))),
                example_alphabet,
                8,
            )
            for i in range(n)
        ]

    def test_pairs_and_determinism(self, example_alphabet):
        matrices = self._matrices(example_alphabet)
        params = DirichletParams.uniform(0.05, 5, seed=21)
        first = synthesize_sk_log(matrices, NoiseProfile(0.6), params, example_alphabet)
        second = synthesize_sk_log(matrices, NoiseProfile(0.6), params, example_alphabet)
        assert len(first) == len(matrices)
        for (dk_a, sk_a), (dk_b, sk_b) in zip(first, second):
            assert dk_a is dk_b is not None
            assert np.array_equal(sk_a.data, sk_b.data)

    def test_different_seeds_change_sk_only(self, example_alphabet):
        matrices = self._matrices(example_alphabet)
        a = synthesize_sk_log(matrices, NoiseProfile(0.6), DirichletParams.uniform(0.05, 5, seed=1), example_alphabet)
        b = synthesize_sk_log(matrices, NoiseProfile(0.6), DirichletParams.uniform(0.05, 5, seed=2), example_alphabet)
        assert any(not np.array_equal(sa.data, sb.data) for (_, sa), (_, sb) in zip(a, b))
        for (da, _), (db, _) in zip(a, b):
            assert np.array_equal(da.data, db.data)

    def test_noise_is_independent_per_trace(self, example_alphabet):
        # identical DK traces must not receive identical noise
        trace = DKTrace("x", (0, 1, 2, 3))
        matrices = [
            encode(DKTrace(f"x{i}", trace.activities), example_alphabet, 4) for i in range(2)
        ]
        dataset = synthesize_sk_log(matrices, NoiseProfile(0.8), DirichletParams.uniform(0.05, 5, seed=5), example_alphabet)
        (_, sk0), (_, sk1) = dataset.pairs
        assert not np.array_equal(sk0.data, sk1.data)

    def test_zero_level_log_equals_dk(self, example_alphabet):
        matrices = self._matrices(example_alphabet, n=3)
        dataset = synthesize_sk_log(matrices, NoiseProfile(0.0), DirichletParams.uniform(0.05, 5, seed=8), example_alphabet)
        for dk, sk in dataset:
            assert np.array_equal(dk.data, sk.data)

    def test_empty_position_list_falls_back_to_zero(self, example_alphabet):
        matrices = self._matrices(example_alphabet, n=3)
        dataset = synthesize_sk_log(matrices, NoiseProfile(()), DirichletParams.uniform(0.05, 5, seed=8), example_alphabet)
        for dk, sk in dataset:
            assert np.array_equal(dk.data, sk.data)

    def test_empty_input_rejected(self, example_alphabet):
        with pytest.raises(ValueError, match="at least one"):
            synthesize_sk_log([], NoiseProfile(0.5), DirichletParams.uniform(0.05, 5), example_alphabet)

    def test_monotone_corruption_of_argmax_accuracy(self, example_alphabet):
        # argmax accuracy against the source DK is non-increasing in lambda
        rng = np.random.default_rng(13)
        matrices = [
            encode(
                DKTrace(f"c{i}", tuple(int(a) for a in rng.integers(0, 5, size=10))),
                example_alphabet,
                12,
            )
            for i in range(150)
        ]
        accuracies = []
        for level in (0.0, 0.25, 0.5, 0.75, 1.0):
            dataset = synthesize_sk_log(
                matrices, NoiseProfile(level), DirichletParams.uniform(0.05, 5, seed=31), example_alphabet
            )
            hits = total = 0
            for dk, sk in dataset:
                truth = decode_dk(dk).activities
                guess = argmax_decode(sk).activities
                hits += sum(1 for g, t in zip(guess, truth) if g == t)
                total += len(truth)
            accuracies.append(hits / total)
        assert accuracies[0] == 1.0
        for earlier, later in zip(accuracies, accuracies[1:]):
            assert later <= earlier + 0.02


class TestSweepLevels:
    def test_paper_range_ten_levels(self):
        levels = noise_sweep_levels(0.53, 0.62, 10)
        values = [p.lambdas for p in levels]
        assert len(values) == 10
        assert values[0] == pytest.approx(0.53)
        assert values[-1] == pytest.approx(0.62)
        assert np.allclose(np.diff(values), 0.01)

    def test_single_level(self):
        (only,) = noise_sweep_levels(0.6, 0.6, 1)
        assert only.lambdas == 0.6

    def test_bad_bounds_rejected(self):
        with pytest.raises(ValueError, match="lo"):
            noise_sweep_levels(0.7, 0.5, 3)
        with pytest.raises(ValueError, match="steps"):
            noise_sweep_levels(0.1, 0.2, 0)
        with pytest.raises(ValueError, match="single step"):
            noise_sweep_levels(0.1, 0.2, 1)
