"""Guided U-net denoiser over padded trace matrices.

The network runs in the space of activity log-probabilities: one-hot DK
columns are smoothed, logged, and standardized; SK columns are clamped and
transformed identically. A padding class row is appended so padded
positions carry a real token instead of zeros.

Two variants share the backbone. The model-free denoiser runs two parallel
U-net streams (the noisy trace and the SK guidance); stream features are
summed between blocks, while the bottleneck keeps the streams separate.
The model-aware variant adds a third stream that transforms a learnable
latent flow matrix; the trace-side representation attends to flow features
after each block via cross attention, the flow features attend back once
at the bottleneck, and a second head reconstructs the process' flow matrix
from the flow stream.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from . import engine
from .engine import CrossAttention, Tensor
from .logs import Alphabet, TraceMatrix

__all__ = [
    "DenoiserConfig",
    "DenoiserModel",
    "ConvBlock",
    "time_embedding",
    "dk_log_encoding",
    "sk_log_encoding",
    "onehot_target",
    "save_checkpoint",
    "load_checkpoint",
]

VARIANTS = ("model-free", "model-aware")
LOG_SMOOTHING = 0.01
PROB_FLOOR = 1e-6
CHECKPOINT_MAGIC = b"tracediff-ckpt\n"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class DenoiserConfig:
    """Architecture hyperparameters; ``num_classes`` counts the padding class."""

    num_classes: int
    max_len: int
    levels: int = 2
    base_channels: int = 32
    time_embed_dim: int = 64
    attention_head_dim: int = 32
    kernel_width: int = 3
    variant: str = "model-free"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if min(self.num_classes, self.max_len, self.levels, self.base_channels) <= 0:
            raise ValueError("all sizes must be positive")
        if self.num_classes < 3:
            raise ValueError("num_classes counts the padding class and needs at least 2 activities + pad")
        if self.max_len % (2**self.levels) != 0:
            raise ValueError(f"max_len {self.max_len} must be divisible by 2^levels = {2**self.levels}")
        if self.time_embed_dim % 2 != 0 or self.time_embed_dim <= 0:
            raise ValueError(f"time_embed_dim must be a positive even number, got {self.time_embed_dim}")
        if self.kernel_width % 2 != 1:
            raise ValueError(f"kernel_width must be odd, got {self.kernel_width}")
        if self.attention_head_dim <= 0:
            raise ValueError("attention_head_dim must be positive")

    @property
    def num_activities(self) -> int:
        return self.num_classes - 1

    def to_dict(self) -> dict:
        return {
            "num_classes": self.num_classes,
            "max_len": self.max_len,
            "levels": self.levels,
            "base_channels": self.base_channels,
            "time_embed_dim": self.time_embed_dim,
            "attention_head_dim": self.attention_head_dim,
            "kernel_width": self.kernel_width,
            "variant": self.variant,
        }

    @classmethod
    def from_dict(cls, payload: Mapping) -> "DenoiserConfig":
        return cls(**{key: payload[key] for key in cls.__dataclass_fields__})


# -- log-probability encodings ----------------------------------------------


def _standardize(values: np.ndarray) -> np.ndarray:
    std = values.std()
    return (values - values.mean()) / max(std, 1e-12)


def _with_pad_row(matrix: TraceMatrix, num_classes: int) -> np.ndarray:
    if matrix.num_activities != num_classes - 1:
        raise ValueError(f"matrix has {matrix.num_activities} activity rows, expected {num_classes - 1}")
    out = np.zeros((num_classes, matrix.max_len))
    out[:-1, :] = matrix.data
    out[-1, ~matrix.mask] = 1.0
    return out


def dk_log_encoding(matrix: TraceMatrix, num_classes: int) -> np.ndarray:
    """Smoothed one-hot -> log -> standardized, with padding as its own class."""
    if matrix.kind != "dk":
        raise ValueError(f"expected a dk matrix, got kind {matrix.kind!r}")
    onehot = _with_pad_row(matrix, num_classes)
    smoothed = np.where(onehot == 1.0, 1.0 - LOG_SMOOTHING, LOG_SMOOTHING / (num_classes - 1))
    return _standardize(np.log(smoothed))


def sk_log_encoding(matrix: TraceMatrix, num_classes: int) -> np.ndarray:
    """Clamped probabilities -> log -> standardized, matching the DK encoding."""
    if matrix.kind != "sk":
        raise ValueError(f"expected an sk matrix, got kind {matrix.kind!r}")
    probs = _with_pad_row(matrix, num_classes)
    return _standardize(np.log(np.clip(probs, PROB_FLOOR, 1.0)))


def onehot_target(matrix: TraceMatrix, num_classes: int) -> np.ndarray:
    """Exact one-hot targets (with pad row) for the trace cross-entropy."""
    if matrix.kind != "dk":
        raise ValueError(f"expected a dk matrix, got kind {matrix.kind!r}")
    return _with_pad_row(matrix, num_classes)


def time_embedding(t: int, dim: int) -> np.ndarray:
    """Sinusoidal embedding of the diffusion step at geometric frequencies, as a (dim, 1) column."""
    if t < 1:
        raise ValueError(f"diffusion step must be >= 1, got {t}")
    if dim % 2 != 0 or dim <= 0:
        raise ValueError(f"embedding dim must be a positive even number, got {dim}")
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half) / half)
    angles = t * freqs
    return np.concatenate([np.sin(angles), np.cos(angles)]).reshape(dim, 1)


# -- building blocks ----------------------------------------------------------


class _ParamStore:
    """Named parameter registry with seeded Gaussian initialization."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.tensors: dict[str, Tensor] = {}

    def new(self, name: str, shape: tuple[int, ...], scale: float) -> Tensor:
        if name in self.tensors:
            raise ValueError(f"duplicate parameter name {name!r}")
        tensor = engine.parameter(self.rng, shape, scale)
        self.tensors[name] = tensor
        return tensor

    def register(self, name: str, tensor: Tensor) -> Tensor:
        if name in self.tensors:
            raise ValueError(f"duplicate parameter name {name!r}")
        self.tensors[name] = tensor
        return tensor


class ConvBlock:
    """conv -> (+time bias) -> silu -> conv -> silu over a channels-first sequence."""

    def __init__(
        self,
        store: _ParamStore,
        prefix: str,
        in_channels: int,
        out_channels: int,
        kernel_width: int,
        time_embed_dim: int | None,
    ):
        he1 = math.sqrt(2.0 / (in_channels * kernel_width))
        he2 = math.sqrt(2.0 / (out_channels * kernel_width))
        self.w1 = store.new(f"{prefix}.w1", (out_channels, in_channels, kernel_width), he1)
        self.b1 = store.new(f"{prefix}.b1", (out_channels, 1), 0.0)
        self.w2 = store.new(f"{prefix}.w2", (out_channels, out_channels, kernel_width), he2)
        self.b2 = store.new(f"{prefix}.b2", (out_channels, 1), 0.0)
        if time_embed_dim is not None:
            scale = math.sqrt(1.0 / time_embed_dim)
            self.wt = store.new(f"{prefix}.wt", (out_channels, time_embed_dim), scale)
            self.bt = store.new(f"{prefix}.bt", (out_channels, 1), 0.0)
        else:
            self.wt = None
            self.bt = None

    def __call__(self, x: Tensor, temb: Tensor | None = None) -> Tensor:
        h = engine.add(engine.conv1d(x, self.w1), self.b1)
        if self.wt is not None:
            if temb is None:
                raise ValueError("this block is time-conditioned; pass a time embedding")
            h = engine.add(h, engine.add(engine.matmul(self.wt, temb), self.bt))
        h = engine.silu(h)
        return engine.silu(engine.add(engine.conv1d(h, self.w2), self.b2))


class DenoiserModel:
    """Trace denoiser with SK guidance and, in the model-aware variant, a latent flow stream.

    ``forward(x_t, y, t)`` maps a noisy (num_classes, max_len) trace point,
    optional SK guidance of the same shape, and a diffusion step to
    predicted original-trace logits, plus flow-matrix logits when
    model-aware. Guidance dropping replaces the SK input (or the latent
    flow input) with a learned null embedding.
    """

    def __init__(self, config: DenoiserConfig, seed: int = 0):
        self.config = config
        store = _ParamStore(np.random.default_rng(seed))
        self._store = store
        cfg = config
        k = cfg.num_classes
        widths = [cfg.base_channels * 2**i for i in range(cfg.levels)]
        bottleneck = cfg.base_channels * 2**cfg.levels
        self._widths = widths
        self._bottleneck_width = bottleneck

        def stream(name: str, in_channels: int, kernel: int, with_time: bool, with_skips: bool):
            temb = cfg.time_embed_dim if with_time else None
            down = []
            previous = in_channels
            for i, width in enumerate(widths):
                down.append(ConvBlock(store, f"{name}.down{i}", previous, width, kernel, temb))
                previous = width
            middle = ConvBlock(store, f"{name}.mid", previous, bottleneck, kernel, temb)
            up = []
            previous = bottleneck
            for i in reversed(range(cfg.levels)):
                # with skips, the first conv consumes [upsampled source | skip];
                # skip channels sit last
                extra = widths[i] if with_skips else 0
                up.append(ConvBlock(store, f"{name}.up{i}", previous + extra, widths[i], kernel, temb))
                previous = widths[i]
            return down, middle, list(reversed(up))

        self.trace_down, self.trace_mid, self.trace_up = stream("trace", k, cfg.kernel_width, True, True)
        self.sk_down, self.sk_mid, self.sk_up = stream("sk", k, cfg.kernel_width, True, True)
        self.null_sk = store.new("null_sk", (k, cfg.max_len), 0.5)
        head_scale = math.sqrt(2.0 / cfg.base_channels)
        self.head_w = store.new("head.w", (k, cfg.base_channels, 1), head_scale)
        self.head_b = store.new("head.b", (k, 1), 0.0)

        if cfg.variant == "model-aware":
            ka = cfg.num_activities
            self.latent_flow = store.new("latent_flow", (ka, ka), 0.5)
            self.null_flow = store.new("null_flow", (ka, ka), 0.5)
            # flow stream uses width-1 kernels: activity order carries no
            # neighborhood structure worth convolving over
            self.flow_down, self.flow_mid, self.flow_up = stream("flow", ka, 1, False, False)
            rng = store.rng

            def attention(name: str, channels: int) -> CrossAttention:
                block = CrossAttention(channels, channels, cfg.attention_head_dim, rng)
                for pname, tensor in block.parameters().items():
                    store.register(f"{name}.{pname}", tensor)
                return block

            self.attn_down = [attention(f"attn.down{i}", widths[i]) for i in range(cfg.levels)]
            self.attn_mid = attention("attn.mid", bottleneck)
            self.attn_flow = attention("attn.flow", bottleneck)
            self.attn_up = [attention(f"attn.up{i}", widths[i]) for i in range(cfg.levels)]
            flow_head_scale = math.sqrt(2.0 / cfg.base_channels)
            self.flow_head_w = store.new("flow_head.w", (ka, cfg.base_channels, 1), flow_head_scale)
            self.flow_head_b = store.new("flow_head.b", (ka, 1), 0.0)

    def parameters(self) -> dict[str, Tensor]:
        return dict(self._store.tensors)

    def parameter_count(self) -> int:
        return sum(t.size for t in self._store.tensors.values())

    def _check_input(self, name: str, value: np.ndarray) -> None:
        expected = (self.config.num_classes, self.config.max_len)
        if value.shape != expected:
            raise ValueError(f"{name} has shape {value.shape}, expected {expected}")

    def forward(
        self,
        x_t: Tensor | np.ndarray,
        y: Tensor | np.ndarray | None,
        t: int,
        drop_flow: bool = False,
    ) -> tuple[Tensor, Tensor | None]:
        cfg = self.config
        if t < 1:
            raise ValueError(f"diffusion step must be >= 1, got {t}")
        x_data = x_t.data if isinstance(x_t, Tensor) else np.asarray(x_t, dtype=np.float64)
        self._check_input("x_t", x_data)
        # standardize the noisy-trace input: reverse-process iterates grow in
        # scale under the prediction-weighted update, and the network must
        # read them the same way it reads unit-scale training corruptions
        # (the step index t carries the noise level via its embedding)
        x_t = Tensor(_standardize(x_data))
        if y is None:
            guide: Tensor = self.null_sk
        else:
            guide = y if isinstance(y, Tensor) else Tensor(y)
            self._check_input("y", guide.data)
        aware = cfg.variant == "model-aware"
        if drop_flow and not aware:
            raise ValueError("flow guidance only exists in the model-aware variant")
        temb = Tensor(time_embedding(t, cfg.time_embed_dim))

        flow = None
        if aware:
            flow = self.null_flow if drop_flow else self.latent_flow

        a: Tensor = x_t
        b: Tensor = guide
        skips_a: list[Tensor] = []
        skips_b: list[Tensor] = []
        for i in range(cfg.levels):
            ai = self.trace_down[i](a, temb)
            bi = self.sk_down[i](b, temb)
            skips_a.append(ai)
            skips_b.append(bi)
            if aware:
                flow = self.flow_down[i](flow)
            if i == cfg.levels - 1:
                # streams enter the bottleneck uncombined
                if aware:
                    ai = engine.add(ai, self.attn_down[i](ai, flow))
                a = engine.maxpool1d(ai, 2)
                b = engine.maxpool1d(bi, 2)
            else:
                combined = engine.add(ai, bi)
                if aware:
                    combined = engine.add(combined, self.attn_down[i](combined, flow))
                pooled = engine.maxpool1d(combined, 2)
                a = pooled
                b = pooled
        a = self.trace_mid(a, temb)
        b = self.sk_mid(b, temb)
        if aware:
            flow = self.flow_mid(flow)
            a = engine.add(a, self.attn_mid(a, flow))
            flow = engine.add(flow, self.attn_flow(flow, a))
        for i in reversed(range(cfg.levels)):
            ua = self.trace_up[i](engine.concat([engine.upsample1d(a, 2), skips_a[i]], axis=0), temb)
            ub = self.sk_up[i](engine.concat([engine.upsample1d(b, 2), skips_b[i]], axis=0), temb)
            combined = engine.add(ua, ub)
            if aware:
                flow = self.flow_up[i](flow)
                combined = engine.add(combined, self.attn_up[i](combined, flow))
            a = combined
            b = combined
        trace_logits = engine.add(engine.conv1d(a, self.head_w), self.head_b)
        if not aware:
            return trace_logits, None
        flow_logits = engine.add(engine.conv1d(flow, self.flow_head_w), self.flow_head_b)
        return trace_logits, flow_logits


# -- checkpoint persistence ----------------------------------------------------


def save_checkpoint(
    model: DenoiserModel,
    path: str | Path,
    alphabet: Alphabet | None = None,
    metadata: Mapping | None = None,
) -> None:
    """Write a self-describing checkpoint: magic line, JSON header, raw float64 blobs.

    Parameter bytes follow the header in the order listed under ``params``
    (sorted by name), little-endian C-order. Byte-identical for identical
    model state and metadata.
    """
    path = Path(path)
    params = model.parameters()
    names = sorted(params)
    header = {
        "format_version": CHECKPOINT_VERSION,
        "config": model.config.to_dict(),
        "alphabet": list(alphabet.activities) if alphabet is not None else None,
        "metadata": dict(metadata) if metadata else {},
        "params": [{"name": n, "shape": list(params[n].shape)} for n in names],
    }
    encoded = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with path.open("wb") as handle:
        handle.write(CHECKPOINT_MAGIC)
        handle.write(encoded)
        handle.write(b"\n")
        for name in names:
            handle.write(np.ascontiguousarray(params[name].data, dtype="<f8").tobytes())


def load_checkpoint(
    path: str | Path,
    alphabet: Alphabet | None = None,
) -> tuple[DenoiserModel, Alphabet | None, dict]:
    """Rebuild a model from a checkpoint; forward outputs match bit for bit.

    When ``alphabet`` is given it must match the stored one; otherwise the
    stored alphabet (if any) is returned for the caller to use.
    """
    path = Path(path)
    raw = path.read_bytes()
    if not raw.startswith(CHECKPOINT_MAGIC):
        raise ValueError(f"{path}: not a tracediff checkpoint")
    body = raw[len(CHECKPOINT_MAGIC) :]
    newline = body.find(b"\n")
    if newline < 0:
        raise ValueError(f"{path}: truncated checkpoint header")
    try:
        header = json.loads(body[:newline])
    except json.JSONDecodeError:
        raise ValueError(f"{path}: corrupt checkpoint header") from None
    if header.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {header.get('format_version')!r}")
    config = DenoiserConfig.from_dict(header["config"])
    stored_alphabet = None
    if header.get("alphabet") is not None:
        stored_alphabet = Alphabet(tuple(header["alphabet"]))
    if alphabet is not None:
        if stored_alphabet is None or stored_alphabet.activities != alphabet.activities:
            stored = None if stored_alphabet is None else list(stored_alphabet.activities)
            raise ValueError(f"{path}: checkpoint alphabet {stored} does not match {list(alphabet.activities)}")
    blob = body[newline + 1 :]
    model = DenoiserModel(config, seed=0)
    params = model.parameters()
    offset = 0
    listed = {entry["name"]: tuple(entry["shape"]) for entry in header["params"]}
    if set(listed) != set(params):
        raise ValueError(f"{path}: checkpoint parameters do not match the architecture")
    for entry in header["params"]:
        name, shape = entry["name"], tuple(entry["shape"])
        tensor = params[name]
        if tensor.shape != shape:
            raise ValueError(f"{path}: parameter {name!r} has shape {shape}, expected {tensor.shape}")
        nbytes = int(np.prod(shape, dtype=np.int64)) * 8 if shape else 8
        chunk = blob[offset : offset + nbytes]
        if len(chunk) != nbytes:
            raise ValueError(f"{path}: truncated checkpoint (parameter {name!r})")
        tensor.data[...] = np.frombuffer(chunk, dtype="<f8").reshape(shape)
        offset += nbytes
    if offset != len(blob):
        raise ValueError(f"{path}: {len(blob) - offset} trailing bytes after parameters")
    return model, stored_alphabet, dict(header.get("metadata", {}))
