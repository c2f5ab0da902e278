"""Finite-difference verification of engine gradients."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, no_grad

__all__ = ["GradCheckReport", "grad_check"]


@dataclass(frozen=True)
class GradCheckReport:
    name: str
    max_rel_error: float
    coords_checked: int

    def passed(self, tolerance: float) -> bool:
        return self.max_rel_error < tolerance


def grad_check(
    fn: Callable[[], Tensor],
    inputs: Sequence[Tensor],
    h: float = 1e-5,
    max_total_coords: int | None = None,
    rng: np.random.Generator | None = None,
    name: str = "",
) -> GradCheckReport:
    """Compare autodiff gradients of ``fn()`` against central differences.

    ``fn`` is a zero-argument closure over ``inputs`` returning a scalar
    Tensor; each call must build a fresh graph. ``max_total_coords`` caps
    the number of coordinates probed across all inputs combined (a seeded
    random subset), which keeps the check affordable for whole-model
    losses. The reported error is max|analytic - numeric| normalized by
    the largest gradient magnitude seen, so a tiny-gradient coordinate
    cannot dominate through finite-difference round-off.
    """
    for p in inputs:
        p.grad = np.zeros_like(p.data)
    loss = fn()
    loss.backward()
    analytic = [np.array(p.grad, copy=True) for p in inputs]

    sizes = [p.data.size for p in inputs]
    offsets = np.cumsum([0] + sizes)
    total = int(offsets[-1])
    if max_total_coords is not None and total > max_total_coords:
        if rng is None:
            raise ValueError("grad_check needs an rng when sampling coordinates")
        picked = np.sort(rng.choice(total, size=max_total_coords, replace=False))
    else:
        picked = np.arange(total)

    max_diff = 0.0
    max_mag = 0.0
    for global_idx in picked:
        which = int(np.searchsorted(offsets, global_idx, side="right") - 1)
        idx = int(global_idx - offsets[which])
        flat = inputs[which].data.reshape(-1)
        original = flat[idx]
        flat[idx] = original + h
        with no_grad():
            upper = float(fn().data)
        flat[idx] = original - h
        with no_grad():
            lower = float(fn().data)
        flat[idx] = original
        numeric = (upper - lower) / (2.0 * h)
        exact = analytic[which].reshape(-1)[idx]
        max_diff = max(max_diff, abs(exact - numeric))
        max_mag = max(max_mag, abs(exact), abs(numeric))
    rel = max_diff / max(max_mag, 1e-12)
    return GradCheckReport(name=name, max_rel_error=rel, coords_checked=len(picked))
