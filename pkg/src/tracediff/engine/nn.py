"""Composite network pieces built from engine primitives."""

from __future__ import annotations

import math

import numpy as np

from .tensor import (
    Tensor,
    log_softmax,
    matmul,
    mean,
    mul,
    sigmoid,
    softmax,
    softplus,
    sub,
    transpose,
    tsum,
)

__all__ = [
    "parameter",
    "silu",
    "cross_entropy",
    "binary_cross_entropy_with_logits",
    "CrossAttention",
]


def parameter(rng: np.random.Generator, shape: tuple[int, ...], scale: float) -> Tensor:
    """Gaussian-initialized leaf tensor with gradient tracking."""
    return Tensor(rng.normal(0.0, scale, size=shape), requires_grad=True)


def silu(x: Tensor) -> Tensor:
    """Smooth ramp activation x * sigmoid(x)."""
    return mul(x, sigmoid(x))


def cross_entropy(logits: Tensor, target, mask: np.ndarray | None = None) -> Tensor:
    """Mean over unmasked columns of -sum(target * log_softmax(logits)).

    ``logits`` and ``target`` are (K, T); ``mask`` is a length-T boolean
    vector selecting real (non-padding) columns. Masked-out columns
    contribute neither to the value nor to the gradient.
    """
    target_t = target if isinstance(target, Tensor) else Tensor(target)
    if logits.shape != target_t.shape or logits.ndim != 2:
        raise ValueError(f"cross_entropy shape mismatch: logits {logits.shape}, target {target_t.shape}")
    columns = logits.shape[1]
    if mask is None:
        mask = np.ones(columns, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (columns,):
        raise ValueError(f"cross_entropy mask shape {mask.shape} does not match {columns} columns")
    count = int(mask.sum())
    if count == 0:
        raise ValueError("cross_entropy mask excludes every column")
    per_column = tsum(mul(target_t, log_softmax(logits, axis=0)), axis=0)
    total = tsum(mul(per_column, Tensor(mask.astype(np.float64))))
    return mul(total, -1.0 / count)


def binary_cross_entropy_with_logits(logits: Tensor, target) -> Tensor:
    """Element-wise binary cross entropy, averaged over all entries."""
    target_t = target if isinstance(target, Tensor) else Tensor(target)
    if logits.shape != target_t.shape:
        raise ValueError(f"binary cross entropy shape mismatch: {logits.shape} vs {target_t.shape}")
    # softplus(z) - z*y == -y*log(sigmoid(z)) - (1-y)*log(1-sigmoid(z))
    return mean(sub(softplus(logits), mul(logits, target_t)))


class CrossAttention:
    """Single-head cross attention between two channels-first sequences.

    Queries come from a (query_channels, L_q) tensor, keys and values from a
    (key_channels, L_k) tensor; positions are columns. Output is projected
    back to ``out_channels`` (defaults to the query side) so callers can add
    it residually.
    """

    def __init__(
        self,
        query_channels: int,
        key_channels: int,
        head_dim: int,
        rng: np.random.Generator,
        out_channels: int | None = None,
    ):
        if min(query_channels, key_channels, head_dim) <= 0:
            raise ValueError("attention dimensions must be positive")
        out_channels = query_channels if out_channels is None else out_channels
        self.head_dim = head_dim
        self.wq = parameter(rng, (head_dim, query_channels), 1.0 / math.sqrt(query_channels))
        self.wk = parameter(rng, (head_dim, key_channels), 1.0 / math.sqrt(key_channels))
        self.wv = parameter(rng, (head_dim, key_channels), 1.0 / math.sqrt(key_channels))
        self.wo = parameter(rng, (out_channels, head_dim), 1.0 / math.sqrt(head_dim))

    def parameters(self) -> dict[str, Tensor]:
        return {"wq": self.wq, "wk": self.wk, "wv": self.wv, "wo": self.wo}

    def attention_weights(self, queries_from: Tensor, keys_values_from: Tensor) -> np.ndarray:
        """The (L_q, L_k) softmax weight matrix, for inspection."""
        q = matmul(self.wq, queries_from)
        k = matmul(self.wk, keys_values_from)
        scores = mul(matmul(transpose(q), k), 1.0 / math.sqrt(self.head_dim))
        return softmax(scores, axis=1).data

    def __call__(self, queries_from: Tensor, keys_values_from: Tensor) -> Tensor:
        q = matmul(self.wq, queries_from)
        k = matmul(self.wk, keys_values_from)
        v = matmul(self.wv, keys_values_from)
        scores = mul(matmul(transpose(q), k), 1.0 / math.sqrt(self.head_dim))
        weights = softmax(scores, axis=1)
        mixed = matmul(v, transpose(weights))
        return matmul(self.wo, mixed)
