"""Named finite-difference gradient checks over engine ops and whole models."""

from __future__ import annotations

from typing import Callable

import numpy as np

from . import engine
from .denoiser import DenoiserConfig, DenoiserModel
from .engine import GradCheckReport, Tensor, grad_check

__all__ = [
    "PRIMITIVE_TOLERANCE",
    "MODEL_TOLERANCE",
    "primitive_checks",
    "block_checks",
    "denoiser_loss_check",
    "full_suite",
]

PRIMITIVE_TOLERANCE = 1e-5
MODEL_TOLERANCE = 1e-4


def _leaf(rng: np.random.Generator, shape: tuple[int, ...]) -> Tensor:
    return Tensor(rng.normal(0.0, 1.0, shape), requires_grad=True)


def _spread_pairs(rng: np.random.Generator, shape: tuple[int, ...]) -> Tensor:
    """Random leaf whose pooling pairs are well separated (keeps max kinks away from FD probes)."""
    values = rng.normal(0.0, 1.0, shape)
    grouped = values.reshape(shape[0], -1, 2)
    gap = np.abs(grouped[..., 0] - grouped[..., 1]) < 1e-2
    grouped[..., 0] += np.where(gap, 0.5, 0.0)
    return Tensor(values, requires_grad=True)


def primitive_checks(seed: int) -> list[GradCheckReport]:
    """One finite-difference check per engine primitive, seeded."""
    rng = np.random.default_rng(seed)
    reports: list[GradCheckReport] = []

    def check(name: str, fn: Callable[[], Tensor], inputs: list[Tensor]) -> None:
        reports.append(grad_check(fn, inputs, name=name))

    a = _leaf(rng, (4, 5))
    b = _leaf(rng, (4, 5))
    w = _leaf(rng, (4, 5))
    check("add", lambda: engine.tsum(engine.mul(engine.add(a, b), w)), [a, b, w])
    check("sub", lambda: engine.tsum(engine.mul(engine.sub(a, b), w)), [a, b])
    check("neg", lambda: engine.tsum(engine.mul(engine.neg(a), w)), [a])
    check("mul", lambda: engine.tsum(engine.mul(engine.mul(a, b), w)), [a, b])

    bias = _leaf(rng, (4, 1))
    check("add-broadcast", lambda: engine.tsum(engine.mul(engine.add(a, bias), w)), [a, bias])

    m1 = _leaf(rng, (3, 4))
    m2 = _leaf(rng, (4, 2))
    mw = _leaf(rng, (3, 2))
    check("matmul", lambda: engine.tsum(engine.mul(engine.matmul(m1, m2), mw)), [m1, m2])
    tw = Tensor(rng.normal(size=(4, 3)))
    check("transpose", lambda: engine.tsum(engine.mul(engine.transpose(m1), tw)), [m1])
    check("reshape", lambda: engine.tsum(engine.mul(engine.reshape(m1, (4, 3)), tw)), [m1])

    x = _leaf(rng, (3, 8))
    kernels = _leaf(rng, (5, 3, 3))
    cw = Tensor(rng.normal(size=(5, 8)))
    check("conv1d", lambda: engine.tsum(engine.mul(engine.conv1d(x, kernels), cw)), [x, kernels])

    pooled_in = _spread_pairs(rng, (3, 8))
    pw = Tensor(rng.normal(size=(3, 4)))
    check("maxpool1d", lambda: engine.tsum(engine.mul(engine.maxpool1d(pooled_in, 2), pw)), [pooled_in])

    uw = Tensor(rng.normal(size=(3, 16)))
    check("upsample1d", lambda: engine.tsum(engine.mul(engine.upsample1d(x, 2), uw)), [x])

    sw = Tensor(rng.normal(size=(4, 5)))
    check("softmax", lambda: engine.tsum(engine.mul(engine.softmax(a, 0), sw)), [a])
    check("log_softmax", lambda: engine.tsum(engine.mul(engine.log_softmax(a, 0), sw)), [a])
    check("sigmoid", lambda: engine.tsum(engine.mul(engine.sigmoid(a), sw)), [a])
    check("softplus", lambda: engine.tsum(engine.mul(engine.softplus(a), sw)), [a])
    check("mean", lambda: engine.mean(engine.mul(a, sw)), [a])
    mean_w = Tensor(rng.normal(size=(5,)))
    check("mean-axis", lambda: engine.tsum(engine.mul(engine.mean(a, axis=0), mean_w)), [a])
    sum_w = Tensor(rng.normal(size=(4,)))
    check("sum-axis", lambda: engine.tsum(engine.mul(engine.tsum(a, axis=1), sum_w)), [a])

    c1 = _leaf(rng, (2, 6))
    c2 = _leaf(rng, (3, 6))
    ccw = Tensor(rng.normal(size=(5, 6)))
    check("concat", lambda: engine.tsum(engine.mul(engine.concat([c1, c2], axis=0), ccw)), [c1, c2])
    nw = Tensor(rng.normal(size=(2, 3)))
    check("narrow", lambda: engine.tsum(engine.mul(engine.narrow(c1, 1, 2, 3), nw)), [c1])
    return reports


def block_checks(seed: int) -> list[GradCheckReport]:
    """Composite pieces: masked cross entropy, binary CE, attention, silu."""
    rng = np.random.default_rng(seed)
    reports: list[GradCheckReport] = []

    logits = _leaf(rng, (4, 6))
    target_cols = rng.dirichlet(np.ones(4), size=6).T
    mask = np.array([True, True, True, True, False, False])
    reports.append(
        grad_check(lambda: engine.cross_entropy(logits, Tensor(target_cols), mask), [logits], name="cross_entropy")
    )

    flow_logits = _leaf(rng, (5, 5))
    flow_target = Tensor((rng.random((5, 5)) < 0.4).astype(float))
    reports.append(
        grad_check(
            lambda: engine.binary_cross_entropy_with_logits(flow_logits, flow_target),
            [flow_logits],
            name="binary_cross_entropy",
        )
    )

    attn = engine.CrossAttention(6, 5, 4, rng)
    queries = _leaf(rng, (6, 7))
    keys = _leaf(rng, (5, 3))
    attn_weight = Tensor(rng.normal(size=(6, 7)))
    reports.append(
        grad_check(
            lambda: engine.tsum(engine.mul(attn(queries, keys), attn_weight)),
            [queries, keys, *attn.parameters().values()],
            name="cross_attention",
        )
    )

    s = _leaf(rng, (3, 4))
    reports.append(grad_check(lambda: engine.mean(engine.silu(s)), [s], name="silu"))
    return reports


def denoiser_loss_check(
    seed: int,
    variant: str = "model-aware",
    max_coords: int = 60,
) -> GradCheckReport:
    """Finite-difference check of the full training loss on a toy model.

    Probes ``max_coords`` seeded random coordinates across all parameters
    (checking every one of the ~10k coordinates would dominate the suite's
    runtime without adding information).
    """
    rng = np.random.default_rng(seed)
    config = DenoiserConfig(
        num_classes=4,
        max_len=8,
        levels=1,
        base_channels=6,
        time_embed_dim=8,
        attention_head_dim=4,
        variant=variant,
    )
    model = DenoiserModel(config, seed=seed)
    x_t = Tensor(rng.normal(size=(4, 8)))
    y = Tensor(rng.normal(size=(4, 8)))
    mask = np.array([True] * 6 + [False] * 2)
    target = np.zeros((4, 8))
    target[rng.integers(0, 3, size=6), np.arange(6)] = 1.0
    flow_target = Tensor((rng.random((3, 3)) < 0.5).astype(float))

    def loss() -> Tensor:
        prediction, flow_logits = model.forward(x_t, y, t=3)
        trace_loss = engine.cross_entropy(prediction, Tensor(target), mask)
        if flow_logits is None:
            return trace_loss
        flow_loss = engine.binary_cross_entropy_with_logits(flow_logits, flow_target)
        return engine.add(engine.mul(trace_loss, 0.8), engine.mul(flow_loss, 0.2))

    params = model.parameters()
    return grad_check(
        loss,
        list(params.values()),
        max_total_coords=max_coords,
        rng=np.random.default_rng(seed + 1),
        name=f"denoiser-loss-{variant}",
    )


def full_suite(seed: int = 0) -> list[tuple[GradCheckReport, float]]:
    """Every check paired with its tolerance; used by the command-line runner."""
    out: list[tuple[GradCheckReport, float]] = []
    for report in primitive_checks(seed):
        out.append((report, PRIMITIVE_TOLERANCE))
    for report in block_checks(seed):
        out.append((report, PRIMITIVE_TOLERANCE))
    out.append((denoiser_loss_check(seed, "model-free"), MODEL_TOLERANCE))
    out.append((denoiser_loss_check(seed, "model-aware"), MODEL_TOLERANCE))
    return out
