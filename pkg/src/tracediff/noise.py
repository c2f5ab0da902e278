"""Synthetic SK generation: mix one-hot DK columns with Dirichlet noise.

Each event column becomes ``(1 - lambda) * dk + lambda * pi`` with
``pi ~ Dirichlet(concentration)``, followed by column renormalization.
In exact arithmetic the mixture already sums to one, so the renormalization
only cancels float round-off; the synthesizer asserts this before dividing.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .logs import Alphabet, Dataset, TraceMatrix

__all__ = [
    "DirichletParams",
    "NoiseProfile",
    "sample_dirichlet",
    "synthesize_sk_trace",
    "synthesize_sk_log",
    "noise_sweep_levels",
]


def _derived_seed(seed: int, *parts) -> int:
    digest = hashlib.sha256(":".join(str(p) for p in (seed, *parts)).encode()).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass(frozen=True)
class DirichletParams:
    """Concentration vector and seed for the per-event noise draws."""

    concentration: tuple[float, ...]
    seed: int = 0

    def __post_init__(self):
        conc = tuple(float(c) for c in self.concentration)
        if len(conc) == 0 or any(c <= 0 for c in conc):
            raise ValueError("concentration entries must all be positive")
        object.__setattr__(self, "concentration", conc)

    @classmethod
    def uniform(cls, alpha: float, size: int, seed: int = 0) -> "DirichletParams":
        return cls(concentration=(float(alpha),) * size, seed=seed)

    @property
    def size(self) -> int:
        return len(self.concentration)


@dataclass(frozen=True)
class NoiseProfile:
    """Mixture level per event: a constant or an explicit per-position list.

    An empty per-position list falls back to the constant 0 (no corruption).
    """

    lambdas: float | tuple[float, ...]

    def __post_init__(self):
        if isinstance(self.lambdas, (int, float)):
            values: tuple[float, ...] | float = float(self.lambdas)
            if not 0.0 <= values <= 1.0:
                raise ValueError(f"lambda {values} outside [0, 1]")
        else:
            values = tuple(float(v) for v in self.lambdas)
            if not values:
                values = 0.0
            elif any(not 0.0 <= v <= 1.0 for v in values):
                raise ValueError("every per-position lambda must lie in [0, 1]")
        object.__setattr__(self, "lambdas", values)

    def resolve(self, length: int) -> np.ndarray:
        if isinstance(self.lambdas, float):
            return np.full(length, self.lambdas)
        if len(self.lambdas) != length:
            raise ValueError(f"profile has {len(self.lambdas)} levels but the trace has {length} events")
        return np.asarray(self.lambdas)


def _settle_row(row: np.ndarray, max_rounds: int = 12) -> bool:
    """Nudge one coordinate until the float row sum is exactly 1.0.

    Single-coordinate corrections probe large-to-small entries because
    pairwise-summation rounding can skip 1.0 for any particular leaf; some
    coordinate always lands in practice.
    """
    for _ in range(max_rounds):
        total = row.sum()
        if total == 1.0:
            return True
        residual = 1.0 - total
        for i in np.argsort(row)[::-1]:
            old = row[i]
            new = old + residual
            if new <= 0.0 or new == old:
                continue
            row[i] = new
            if row.sum() == 1.0:
                return True
            row[i] = old
        row[int(np.argmax(row))] += residual
    return bool(row.sum() == 1.0)


def _settle_row_sums(rows: np.ndarray) -> np.ndarray:
    """Make every float row sum exactly 1; rows arrive within a few ulp already."""
    for r in np.flatnonzero(rows.sum(axis=1) != 1.0):
        if not _settle_row(rows[r]):
            raise AssertionError("could not settle a probability row to an exact unit sum")
    return rows


def sample_dirichlet(params: DirichletParams, count: int) -> np.ndarray:
    """Draw ``count`` Dirichlet vectors as normalized independent Gamma variates.

    Deterministic for a fixed ``params.seed``; rows are non-negative and sum
    to one exactly.
    """
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")
    rng = np.random.default_rng(params.seed)
    gammas = rng.gamma(shape=np.asarray(params.concentration), scale=1.0, size=(count, params.size))
    totals = gammas.sum(axis=1, keepdims=True)
    if np.any(totals == 0.0):
        raise ValueError("degenerate Dirichlet draw (all-zero gamma variates)")
    return _settle_row_sums(gammas / totals)


def synthesize_sk_trace(
    dk: TraceMatrix,
    profile: NoiseProfile,
    params: DirichletParams,
    noise: np.ndarray | None = None,
) -> TraceMatrix:
    """Corrupt one DK matrix into an SK matrix; padding columns stay zero.

    ``noise`` injects explicit (K, T_real) noise columns instead of drawing
    Dirichlet samples; each injected column must already be a distribution.
    """
    if dk.kind != "dk":
        raise ValueError(f"synthesize_sk_trace expects a dk matrix, got kind {dk.kind!r}")
    if params.size != dk.num_activities:
        raise ValueError(f"concentration length {params.size} != alphabet size {dk.num_activities}")
    length = dk.length
    lambdas = profile.resolve(length)
    if noise is None:
        noise = sample_dirichlet(params, length).T  # (K, T_real)
    else:
        noise = np.asarray(noise, dtype=np.float64)
        if noise.shape != (dk.num_activities, length):
            raise ValueError(f"injected noise has shape {noise.shape}, expected {(dk.num_activities, length)}")
        if np.any(noise < 0) or np.max(np.abs(noise.sum(axis=0) - 1.0)) > 1e-9:
            raise ValueError("injected noise columns must be probability distributions")
    real = dk.data[:, :length]
    mixed = (1.0 - lambdas) * real + lambdas * noise
    sums = mixed.sum(axis=0)
    deviation = float(np.max(np.abs(sums - 1.0)))
    if deviation >= 1e-12:
        raise AssertionError(f"pre-normalization column sums deviate by {deviation:.3e}; mixture identity broken")
    normalized = mixed / sums
    data = np.zeros_like(dk.data)
    data[:, :length] = normalized
    return TraceMatrix(data=data, mask=np.array(dk.mask), kind="sk", case_id=dk.case_id)


def synthesize_sk_log(
    dk_matrices: Sequence[TraceMatrix],
    profile: NoiseProfile,
    params: DirichletParams,
    alphabet: Alphabet,
) -> Dataset:
    """Corrupt a DK log into paired (DK, SK) data; noise is independent per trace and event."""
    if len(dk_matrices) == 0:
        raise ValueError("need at least one DK trace")
    pairs = []
    for index, dk in enumerate(dk_matrices):
        trace_params = replace(params, seed=_derived_seed(params.seed, "trace", index))
        pairs.append((dk, synthesize_sk_trace(dk, profile, trace_params)))
    return Dataset(pairs=tuple(pairs), alphabet=alphabet, max_len=dk_matrices[0].max_len)


def noise_sweep_levels(lo: float, hi: float, steps: int) -> list[NoiseProfile]:
    """Evenly spaced constant noise levels covering [lo, hi] inclusive."""
    if not 0.0 <= lo <= hi <= 1.0:
        raise ValueError(f"need 0 <= lo <= hi <= 1, got lo={lo}, hi={hi}")
    if steps < 1:
        raise ValueError(f"steps must be at least 1, got {steps}")
    if steps == 1 and lo != hi:
        raise ValueError("a single step cannot cover distinct endpoints")
    return [NoiseProfile(float(level)) for level in np.linspace(lo, hi, steps)]
