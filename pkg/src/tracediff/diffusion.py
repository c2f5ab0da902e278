"""Noise schedule, forward corruption, reverse sampling, training and recovery.

The forward process mixes an encoded trace with Gaussian noise through the
closed form sqrt(abar_t) * x0 + sqrt(1 - abar_t) * eps. The reverse step
combines the denoiser's original-point prediction with the current iterate
and fresh noise using the coefficients

    sqrt(abar_{t-1}) / (1 - abar_t)            on the prediction,
    sqrt(a_t) (1 - abar_{t-1}) / (1 - abar_t)  on the iterate,
    (1 - abar_{t-1}) (1 - a_t) / (1 - abar_t)  on the noise,

with abar_0 = 1 so the final step is well defined and noise-free.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .denoiser import DenoiserModel, dk_log_encoding, onehot_target, sk_log_encoding
from .engine import (
    Adam,
    Tensor,
    add,
    binary_cross_entropy_with_logits,
    cross_entropy,
    mul,
    no_grad,
)
from .flows import FlowMatrix
from .logs import Dataset, DKTrace, TraceMatrix, argmax_decode

__all__ = [
    "NoiseSchedule",
    "make_schedule",
    "forward_sample",
    "reverse_step",
    "TrainConfig",
    "TrainResult",
    "TrainingDiverged",
    "train",
    "RecoveredTrace",
    "recover",
    "recover_log",
]

logger = logging.getLogger(__name__)

PURE_NOISE_THRESHOLD = 0.01


class TrainingDiverged(RuntimeError):
    """Loss became non-finite; carries the epoch/trace/step context."""


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    """Per-step retention factors alpha_t and their running products."""

    alpha: np.ndarray
    alpha_bar: np.ndarray

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=np.float64)
        alpha_bar = np.asarray(self.alpha_bar, dtype=np.float64)
        if alpha.ndim != 1 or alpha.size < 1:
            raise ValueError("alpha must be a non-empty vector")
        if np.any((alpha <= 0.0) | (alpha >= 1.0)):
            raise ValueError("every alpha_t must lie strictly inside (0, 1)")
        if alpha_bar.shape != alpha.shape:
            raise ValueError("alpha and alpha_bar must have matching length")
        if np.max(np.abs(alpha_bar - np.cumprod(alpha))) > 1e-12:
            raise ValueError("alpha_bar does not equal the running product of alpha")
        if alpha.size > 1 and np.any(np.diff(alpha_bar) >= 0.0):
            raise ValueError("alpha_bar must be strictly decreasing")
        alpha.setflags(write=False)
        alpha_bar.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "alpha_bar", alpha_bar)
        if alpha_bar[-1] >= PURE_NOISE_THRESHOLD:
            logger.warning(
                "alpha_bar_T = %.4g >= %.2g: the most-corrupted point keeps visible signal",
                alpha_bar[-1],
                PURE_NOISE_THRESHOLD,
            )

    @classmethod
    def from_alphas(cls, alphas: Sequence[float]) -> "NoiseSchedule":
        alphas = np.asarray(alphas, dtype=np.float64)
        return cls(alpha=alphas, alpha_bar=np.cumprod(alphas))

    @property
    def steps(self) -> int:
        return self.alpha.size

    def _check_t(self, t: int) -> None:
        if not 1 <= t <= self.steps:
            raise ValueError(f"step t={t} outside [1, {self.steps}]")

    def alpha_at(self, t: int) -> float:
        self._check_t(t)
        return float(self.alpha[t - 1])

    def alpha_bar_at(self, t: int) -> float:
        if t == 0:
            return 1.0
        self._check_t(t)
        return float(self.alpha_bar[t - 1])


def make_schedule(steps: int, beta_lo: float = 1e-4, beta_hi: float = 0.02) -> NoiseSchedule:
    """Linear-beta schedule: alpha_t = 1 - beta_t with beta evenly spaced."""
    if steps < 1:
        raise ValueError(f"steps must be at least 1, got {steps}")
    if not 0.0 < beta_lo <= beta_hi < 1.0:
        raise ValueError(f"need 0 < beta_lo <= beta_hi < 1, got [{beta_lo}, {beta_hi}]")
    betas = np.linspace(beta_lo, beta_hi, steps)
    return NoiseSchedule.from_alphas(1.0 - betas)


def forward_sample(x0: np.ndarray, t: int, eps: np.ndarray, schedule: NoiseSchedule) -> np.ndarray:
    """Closed-form corruption of x0 after t steps with the given unit noise."""
    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if x0.shape != eps.shape:
        raise ValueError(f"noise shape {eps.shape} does not match datapoint shape {x0.shape}")
    abar = schedule.alpha_bar_at(t)
    return np.sqrt(abar) * x0 + np.sqrt(1.0 - abar) * eps


def reverse_step(
    x_t: np.ndarray,
    x0_pred: np.ndarray,
    t: int,
    z: np.ndarray | None,
    schedule: NoiseSchedule,
) -> np.ndarray:
    """One denoising step from x_t to x_{t-1}; z must be zero (or None) at t=1."""
    x_t = np.asarray(x_t, dtype=np.float64)
    x0_pred = np.asarray(x0_pred, dtype=np.float64)
    if x_t.shape != x0_pred.shape:
        raise ValueError(f"prediction shape {x0_pred.shape} does not match iterate shape {x_t.shape}")
    schedule._check_t(t)
    if t == 1 and z is not None and np.any(np.asarray(z) != 0.0):
        raise ValueError("the final reverse step (t=1) must be noise-free; pass z=None or zeros")
    a_t = schedule.alpha_at(t)
    abar_t = schedule.alpha_bar_at(t)
    abar_prev = schedule.alpha_bar_at(t - 1)
    denom = 1.0 - abar_t
    coeff_pred = np.sqrt(abar_prev) / denom
    coeff_iter = np.sqrt(a_t) * (1.0 - abar_prev) / denom
    coeff_noise = (1.0 - abar_prev) * (1.0 - a_t) / denom
    out = coeff_pred * x0_pred + coeff_iter * x_t
    if z is not None and coeff_noise != 0.0:
        z = np.asarray(z, dtype=np.float64)
        if z.shape != x_t.shape:
            raise ValueError(f"noise shape {z.shape} does not match iterate shape {x_t.shape}")
        out = out + coeff_noise * z
    return out


# -- training -------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    """Knobs for the per-example training loop."""

    epochs: int
    lr: float = 1e-3
    gamma: float = 0.8
    p_no_sk: float = 0.1
    p_no_f: float = 0.1
    batch_size: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be at least 1, got {self.epochs}")
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        for name in ("gamma", "p_no_sk", "p_no_f"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be at least 1, got {self.batch_size}")


@dataclass
class TrainResult:
    model: DenoiserModel
    epoch_losses: list[float]
    trace_losses: list[float]
    flow_losses: list[float]


@dataclass(frozen=True)
class _Encoded:
    x0: np.ndarray
    y: Tensor
    target: Tensor
    mask: np.ndarray
    case_id: str


def _encode_dataset(dataset: Dataset, num_classes: int) -> list[_Encoded]:
    encoded = []
    for dk, sk in dataset:
        encoded.append(
            _Encoded(
                x0=dk_log_encoding(dk, num_classes),
                y=Tensor(sk_log_encoding(sk, num_classes)),
                target=Tensor(onehot_target(dk, num_classes)),
                mask=np.array(dk.mask),
                case_id=dk.case_id,
            )
        )
    return encoded


def train(
    dataset: Dataset,
    model: DenoiserModel,
    schedule: NoiseSchedule,
    flow: FlowMatrix | None,
    cfg: TrainConfig,
) -> TrainResult:
    """Fit the denoiser: per example, corrupt at a random step and regress the original.

    Every example independently drops the SK guidance with probability
    ``p_no_sk`` and (model-aware only) the flow guidance with ``p_no_f``.
    The loss is ``gamma * CE(trace)`` plus, when the flow is in play,
    ``(1 - gamma) * CE(flow)``; the model-free variant must run with
    ``gamma = 1`` and no flow matrix.
    """
    aware = model.config.variant == "model-aware"
    if aware and flow is None:
        raise ValueError("the model-aware variant needs a flow matrix for its reconstruction loss")
    if not aware:
        if flow is not None:
            raise ValueError("the model-free variant takes no flow matrix")
        if cfg.gamma != 1.0:
            raise ValueError("the model-free variant has no flow loss; set gamma = 1")
    if aware and flow.size != model.config.num_activities:
        raise ValueError(f"flow matrix size {flow.size} != activity count {model.config.num_activities}")
    if dataset.max_len != model.config.max_len:
        raise ValueError(f"dataset max_len {dataset.max_len} != model max_len {model.config.max_len}")
    if dataset.alphabet.size != model.config.num_activities:
        raise ValueError(f"alphabet size {dataset.alphabet.size} != model activity count {model.config.num_activities}")

    encoded = _encode_dataset(dataset, model.config.num_classes)
    flow_target = Tensor(np.array(flow.data)) if aware else None
    rng = np.random.default_rng(cfg.seed)
    optimizer = Adam(model.parameters(), lr=cfg.lr)
    steps = schedule.steps
    epoch_losses: list[float] = []
    trace_losses: list[float] = []
    flow_losses: list[float] = []

    for epoch in range(cfg.epochs):
        total = trace_total = flow_total = 0.0
        flow_terms = 0
        batch: list[Tensor] = []
        for example in encoded:
            t = int(rng.integers(1, steps + 1))
            eps = rng.standard_normal(example.x0.shape)
            drop_sk = rng.random() < cfg.p_no_sk
            drop_f = bool(aware and rng.random() < cfg.p_no_f)
            x_t = forward_sample(example.x0, t, eps, schedule)
            y = None if drop_sk else example.y
            prediction, flow_logits = model.forward(Tensor(x_t), y, t, drop_flow=drop_f)
            trace_loss = cross_entropy(prediction, example.target, example.mask)
            loss = mul(trace_loss, cfg.gamma)
            if aware and not drop_f and cfg.gamma < 1.0:
                flow_loss = binary_cross_entropy_with_logits(flow_logits, flow_target)
                loss = add(loss, mul(flow_loss, 1.0 - cfg.gamma))
                flow_total += flow_loss.item()
                flow_terms += 1
            value = loss.item()
            if not np.isfinite(value):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch + 1}, case {example.case_id!r}, step t={t}"
                )
            total += value
            trace_total += trace_loss.item()
            batch.append(loss)
            if len(batch) == cfg.batch_size:
                _apply_batch(optimizer, batch)
                batch = []
        if batch:
            _apply_batch(optimizer, batch)
        epoch_losses.append(total / len(encoded))
        trace_losses.append(trace_total / len(encoded))
        flow_losses.append(flow_total / flow_terms if flow_terms else 0.0)
    return TrainResult(model=model, epoch_losses=epoch_losses, trace_losses=trace_losses, flow_losses=flow_losses)


def _apply_batch(optimizer: Adam, batch: list[Tensor]) -> None:
    loss = batch[0] if len(batch) == 1 else mul(_sum_losses(batch), 1.0 / len(batch))
    optimizer.zero_grad()
    loss.backward()
    optimizer.step()


def _sum_losses(losses: list[Tensor]) -> Tensor:
    total = losses[0]
    for term in losses[1:]:
        total = add(total, term)
    return total


# -- inference ----------------------------------------------------------------


@dataclass(frozen=True)
class RecoveredTrace:
    trace: DKTrace
    logits: TraceMatrix


def recover(
    sk: TraceMatrix,
    model: DenoiserModel,
    schedule: NoiseSchedule,
    rng: np.random.Generator,
) -> RecoveredTrace:
    """Run the reverse process from pure noise, guided by one SK trace.

    Iterates t = T..1; fresh noise enters every step except the last. The
    final iterate is decoded per column by softmax + argmax over the real
    activity rows (ties to the lowest index).
    """
    if sk.kind != "sk":
        raise ValueError(f"recover expects an sk matrix, got kind {sk.kind!r}")
    if sk.num_activities != model.config.num_activities:
        raise ValueError(f"SK trace has {sk.num_activities} activities but the model expects {model.config.num_activities}")
    if sk.max_len != model.config.max_len:
        raise ValueError(f"SK trace padded to {sk.max_len} but the model expects {model.config.max_len}")
    y = Tensor(sk_log_encoding(sk, model.config.num_classes))
    x = rng.standard_normal((model.config.num_classes, model.config.max_len))
    with no_grad():
        for t in range(schedule.steps, 0, -1):
            z = rng.standard_normal(x.shape) if t > 1 else None
            prediction, _ = model.forward(Tensor(x), y, t)
            x = reverse_step(x, prediction.data, t, z, schedule)
    logits = TraceMatrix(
        data=x[: model.config.num_activities, :],
        mask=np.array(sk.mask),
        kind="logits",
        case_id=sk.case_id,
    )
    return RecoveredTrace(trace=argmax_decode(logits), logits=logits)


def _case_rng(seed: int, case_id: str) -> np.random.Generator:
    digest = hashlib.sha256(f"{seed}:{case_id}".encode()).digest()
    return np.random.default_rng([seed & 0x7FFFFFFF, int.from_bytes(digest[:8], "big")])


def recover_log(
    sk_matrices: Sequence[TraceMatrix],
    model: DenoiserModel,
    schedule: NoiseSchedule,
    seed: int,
) -> list[RecoveredTrace]:
    """Recover many SK traces; each case gets its own noise stream derived from (seed, case id)."""
    return [recover(sk, model, schedule, _case_rng(seed, sk.case_id)) for sk in sk_matrices]
