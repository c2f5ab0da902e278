"""Experiment orchestration: config, pipeline stages, reports, robustness sweeps.

An experiment is fully described by a TOML config plus a seed; rerunning
with the same config produces byte-identical reports and checkpoints.
Pipeline: obtain a DK log (file or simulator), synthesize or load SK
traces, split, mine the flow matrix from the training split, train the
requested denoiser variants, recover the held-out SK traces, and score
them against ground truth alongside the per-event argmax baseline.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .denoiser import DenoiserConfig, DenoiserModel, load_checkpoint, save_checkpoint
from .diffusion import NoiseSchedule, TrainConfig, TrainResult, make_schedule, recover_log, train
from .flows import FlowMatrix, mine_dfg_flow_matrix, write_flow_matrix
from .logs import (
    Alphabet,
    Dataset,
    DKTrace,
    TraceMatrix,
    argmax_decode,
    build_dataset,
    decode_dk,
    encode,
    parse_dk_log,
    parse_sk_log,
    split_train_test,
    write_dk_log,
)
from .metrics import MetricsReport, compute_metrics, run_baseline_argmax
from .noise import DirichletParams, NoiseProfile, noise_sweep_levels, synthesize_sk_log
from .simulate import sample_choice_loop_log

__all__ = [
    "ConfigError",
    "ExperimentError",
    "ExperimentConfig",
    "ExperimentResult",
    "SweepRow",
    "run_experiment",
    "run_sweep",
    "ARGMAX_METHOD",
    "variant_method_name",
]

logger = logging.getLogger(__name__)

ARGMAX_METHOD = "argmax"
METRICS_HEADER = ("dataset", "method", "accuracy", "precision", "recall")
SWEEP_HEADER = ("lambda", "method", "mean_accuracy", "std_accuracy", "n_traces")


class ConfigError(ValueError):
    """Bad experiment configuration."""


class ExperimentError(RuntimeError):
    """A pipeline stage failed; the message names the stage."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage {stage!r} failed: {message}")
        self.stage = stage


def variant_method_name(variant: str) -> str:
    return f"ddtr-{variant}"


# -- configuration ---------------------------------------------------------


@dataclass(frozen=True)
class DatasetSpec:
    dk_path: str | None = None
    sk_path: str | None = None
    simulate: str | None = None
    traces: int = 200
    p_loop: float = 0.4
    max_len: int | None = None

    def __post_init__(self):
        if (self.dk_path is None) == (self.simulate is None):
            raise ConfigError("dataset needs exactly one of dk_path or simulate")
        if self.simulate is not None and self.simulate != "choice-loop":
            raise ConfigError(f"unknown simulator {self.simulate!r} (available: choice-loop)")
        if self.sk_path is not None and self.dk_path is None:
            raise ConfigError("sk_path requires dk_path")


@dataclass(frozen=True)
class NoiseSpec:
    level: float = 0.6
    concentration: float = 0.05
    seed: int | None = None
    sweep: tuple[float, float, int] = (0.53, 0.62, 10)


@dataclass(frozen=True)
class ModelSpec:
    variant: str = "model-free"
    levels: int = 2
    base_channels: int = 32
    time_embed_dim: int = 64
    attention_head_dim: int = 32
    kernel_width: int = 3

    def __post_init__(self):
        if self.variant not in ("model-free", "model-aware", "both"):
            raise ConfigError(f"variant must be model-free, model-aware, or both; got {self.variant!r}")

    @property
    def variants(self) -> tuple[str, ...]:
        if self.variant == "both":
            return ("model-free", "model-aware")
        return (self.variant,)


@dataclass(frozen=True)
class DiffusionSpec:
    steps: int = 500
    beta: tuple[float, float] = (1e-4, 0.02)


@dataclass(frozen=True)
class TrainSpec:
    epochs: int = 200
    lr: float = 1e-3
    gamma: float = 0.8
    p_no_sk: float = 0.1
    p_no_f: float = 0.1
    batch_size: int = 1
    seed: int | None = None


@dataclass(frozen=True)
class SweepSpec:
    n_traces: int = 100


@dataclass(frozen=True)
class ExperimentConfig:
    out_dir: str
    name: str = "synthetic"
    seed: int = 0
    dataset: DatasetSpec = field(default_factory=lambda: DatasetSpec(simulate="choice-loop"))
    split_fraction: float = 0.75
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    model: ModelSpec = field(default_factory=ModelSpec)
    diffusion: DiffusionSpec = field(default_factory=DiffusionSpec)
    train: TrainSpec = field(default_factory=TrainSpec)
    sweep: SweepSpec = field(default_factory=SweepSpec)

    def to_canonical_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        # out_dir is where results land, not part of the experiment identity;
        # runs into different directories must produce identical artifacts
        canonical = self.to_canonical_dict()
        del canonical["out_dir"]
        return hashlib.sha256(json.dumps(canonical, sort_keys=True, separators=(",", ":")).encode()).hexdigest()[:12]

    def stage_seed(self, stage: str) -> int:
        digest = hashlib.sha256(f"{self.seed}:{stage}".encode()).digest()
        return int.from_bytes(digest[:8], "big") >> 1

    @property
    def noise_seed(self) -> int:
        return self.noise.seed if self.noise.seed is not None else self.stage_seed("noise")

    @property
    def train_seed(self) -> int:
        return self.train.seed if self.train.seed is not None else self.stage_seed("train")


_SECTION_FIELDS = {
    "dataset": DatasetSpec,
    "noise": NoiseSpec,
    "model": ModelSpec,
    "diffusion": DiffusionSpec,
    "train": TrainSpec,
    "sweep": SweepSpec,
}

# config-file spellings that differ from dataclass field names
_KEY_ALIASES = {
    ("noise", "lambda"): "level",
    ("diffusion", "T"): "steps",
}


def config_from_dict(payload: Mapping, out_dir: str | None = None) -> ExperimentConfig:
    """Build a config from nested dicts (parsed TOML), rejecting unknown keys."""
    data = dict(payload)
    top_known = {"name", "seed", "out_dir", "split"} | set(_SECTION_FIELDS)
    unknown = set(data) - top_known
    if unknown:
        raise ConfigError(f"unknown top-level config keys: {sorted(unknown)}")
    kwargs: dict = {}
    if out_dir is not None:
        kwargs["out_dir"] = out_dir
    elif "out_dir" in data:
        kwargs["out_dir"] = str(data["out_dir"])
    else:
        raise ConfigError("config needs an out_dir (or pass --out on the command line)")
    if "name" in data:
        kwargs["name"] = str(data["name"])
    if "seed" in data:
        kwargs["seed"] = int(data["seed"])
    split = data.get("split", {})
    if split:
        if not isinstance(split, Mapping):
            raise ConfigError("[split] must be a table")
        extra = set(split) - {"train_fraction"}
        if extra:
            raise ConfigError(f"unknown keys in [split]: {sorted(extra)}")
        kwargs["split_fraction"] = float(split["train_fraction"])
    for section, spec_cls in _SECTION_FIELDS.items():
        raw = data.get(section)
        if raw is None:
            continue
        if not isinstance(raw, Mapping):
            raise ConfigError(f"[{section}] must be a table")
        renamed = {}
        for key, value in raw.items():
            field_name = _KEY_ALIASES.get((section, key), key)
            if field_name not in spec_cls.__dataclass_fields__:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            renamed[field_name] = value
        for name, value in list(renamed.items()):
            if isinstance(value, list):
                renamed[name] = tuple(value)
        try:
            kwargs[section] = spec_cls(**renamed)
        except TypeError as exc:
            raise ConfigError(f"bad [{section}] section: {exc}") from None
    try:
        return ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def config_from_toml(path: str | Path, out_dir: str | None = None) -> ExperimentConfig:
    try:
        import tomllib  # Python >= 3.11
    except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
        import tomli as tomllib
    raw = Path(path).read_bytes()
    try:
        payload = tomllib.loads(raw.decode("utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(payload, out_dir=out_dir)


# -- pipeline -------------------------------------------------------------


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    out_dir: Path
    alphabet: Alphabet
    max_len: int
    schedule: NoiseSchedule
    train_set: Dataset
    test_set: Dataset
    flow: FlowMatrix | None
    models: dict[str, DenoiserModel]
    train_results: dict[str, TrainResult]
    metrics: dict[str, MetricsReport]

    def checkpoint_path(self, variant: str) -> Path:
        return self.out_dir / f"{variant}.ckpt"


def _round_up(value: int, multiple: int) -> int:
    return ((value + multiple - 1) // multiple) * multiple


def _obtain_dk_log(cfg: ExperimentConfig) -> tuple[list[DKTrace], Alphabet]:
    spec = cfg.dataset
    if spec.simulate is not None:
        return sample_choice_loop_log(
            spec.traces,
            seed=cfg.stage_seed("simulate"),
            p_loop=spec.p_loop,
            max_len=spec.max_len or 32,
        )
    return parse_dk_log(spec.dk_path)


def _build_pairs(cfg: ExperimentConfig, dk_traces: list[DKTrace], alphabet: Alphabet, max_len: int) -> Dataset:
    if cfg.dataset.sk_path is not None:
        sk_traces = parse_sk_log(cfg.dataset.sk_path, alphabet)
        return build_dataset(dk_traces, sk_traces, alphabet, max_len)
    dk_matrices = [encode(trace, alphabet, max_len) for trace in dk_traces]
    profile = NoiseProfile(cfg.noise.level)
    params = DirichletParams.uniform(cfg.noise.concentration, alphabet.size, seed=cfg.noise_seed)
    return synthesize_sk_log(dk_matrices, profile, params, alphabet)


def _write_metrics_csv(path: Path, cfg: ExperimentConfig, rows: Sequence[tuple[str, str, MetricsReport]]) -> None:
    with path.open("w", newline="", encoding="utf-8") as handle:
        handle.write(f"# config_hash={cfg.config_hash()} seed={cfg.seed}\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(METRICS_HEADER)
        for dataset_name, method, report in rows:
            writer.writerow(
                [
                    dataset_name,
                    method,
                    f"{report.accuracy:.6f}",
                    f"{report.macro_precision:.6f}",
                    f"{report.macro_recall:.6f}",
                ]
            )


def _write_loss_csv(path: Path, cfg: ExperimentConfig, result: TrainResult) -> None:
    with path.open("w", newline="", encoding="utf-8") as handle:
        handle.write(f"# config_hash={cfg.config_hash()} seed={cfg.seed}\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(("epoch", "loss", "trace_loss", "flow_loss"))
        for epoch, (total, trace_part, flow_part) in enumerate(
            zip(result.epoch_losses, result.trace_losses, result.flow_losses), start=1
        ):
            writer.writerow([epoch, f"{total:.10g}", f"{trace_part:.10g}", f"{flow_part:.10g}"])


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Execute the full pipeline and persist reports under ``cfg.out_dir``."""
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(
        json.dumps(
            {"config": cfg.to_canonical_dict(), "config_hash": cfg.config_hash(), "seed": cfg.seed},
            sort_keys=True,
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )

    def stage(name):
        def wrap(fn, *args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except ExperimentError:
                raise
            except Exception as exc:
                raise ExperimentError(name, str(exc)) from exc

        return wrap

    dk_traces, alphabet = stage("load")(_obtain_dk_log, cfg)
    multiple = 2**cfg.model.levels
    longest = max(len(t) for t in dk_traces)
    if cfg.dataset.max_len is not None:
        max_len = cfg.dataset.max_len
        if max_len % multiple != 0:
            raise ExperimentError("load", f"max_len {max_len} must be divisible by {multiple}")
    else:
        max_len = _round_up(longest, multiple)
    dataset = stage("synth")(_build_pairs, cfg, dk_traces, alphabet, max_len)
    train_set, test_set = stage("split")(split_train_test, dataset, cfg.split_fraction, cfg.stage_seed("split"))
    logger.info("split %d pairs into %d train / %d test", len(dataset), len(train_set), len(test_set))

    flow = None
    if "model-aware" in cfg.model.variants:
        train_dk = [decode_dk(dk) for dk, _ in train_set]
        flow = stage("mine")(mine_dfg_flow_matrix, train_dk, alphabet)
        write_flow_matrix(flow, alphabet, out_dir / "flow.csv")

    schedule = make_schedule(cfg.diffusion.steps, *cfg.diffusion.beta)
    models: dict[str, DenoiserModel] = {}
    train_results: dict[str, TrainResult] = {}
    reports: dict[str, MetricsReport] = {}
    truths = [decode_dk(dk) for dk, _ in test_set]
    metric_rows: list[tuple[str, str, MetricsReport]] = []

    baseline = stage("evaluate")(run_baseline_argmax, test_set)
    reports[ARGMAX_METHOD] = baseline
    metric_rows.append((cfg.name, ARGMAX_METHOD, baseline))

    for variant in cfg.model.variants:
        aware = variant == "model-aware"
        model_config = DenoiserConfig(
            num_classes=alphabet.size + 1,
            max_len=max_len,
            levels=cfg.model.levels,
            base_channels=cfg.model.base_channels,
            time_embed_dim=cfg.model.time_embed_dim,
            attention_head_dim=cfg.model.attention_head_dim,
            kernel_width=cfg.model.kernel_width,
            variant=variant,
        )
        model = DenoiserModel(model_config, seed=cfg.stage_seed(f"init:{variant}"))
        train_cfg = TrainConfig(
            epochs=cfg.train.epochs,
            lr=cfg.train.lr,
            gamma=cfg.train.gamma if aware else 1.0,
            p_no_sk=cfg.train.p_no_sk,
            p_no_f=cfg.train.p_no_f,
            batch_size=cfg.train.batch_size,
            seed=cfg.train_seed,
        )
        logger.info("training %s (%d parameters, %d epochs)", variant, model.parameter_count(), train_cfg.epochs)
        result = stage("train")(train, train_set, model, schedule, flow if aware else None, train_cfg)
        models[variant] = model
        train_results[variant] = result
        _write_loss_csv(out_dir / f"loss_{variant}.csv", cfg, result)
        save_checkpoint(
            model,
            out_dir / f"{variant}.ckpt",
            alphabet=alphabet,
            metadata={
                "config_hash": cfg.config_hash(),
                "seed": cfg.seed,
                "epochs": cfg.train.epochs,
                "final_loss": result.epoch_losses[-1],
                "diffusion_steps": cfg.diffusion.steps,
                "beta": list(cfg.diffusion.beta),
            },
        )
        recovered = stage("recover")(
            recover_log, [sk for _, sk in test_set], model, schedule, cfg.stage_seed(f"recover:{variant}")
        )
        write_dk_log([r.trace for r in recovered], alphabet, out_dir / f"recovered_{variant}.csv")
        report = stage("evaluate")(compute_metrics, [r.trace for r in recovered], truths)
        method = variant_method_name(variant)
        reports[method] = report
        metric_rows.append((cfg.name, method, report))
        logger.info("%s accuracy %.4f (argmax %.4f)", method, report.accuracy, baseline.accuracy)

    _write_metrics_csv(out_dir / "metrics.csv", cfg, metric_rows)
    return ExperimentResult(
        config=cfg,
        out_dir=out_dir,
        alphabet=alphabet,
        max_len=max_len,
        schedule=schedule,
        train_set=train_set,
        test_set=test_set,
        flow=flow,
        models=models,
        train_results=train_results,
        metrics=reports,
    )


# -- robustness sweep -------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    level: float
    method: str
    mean_accuracy: float
    std_accuracy: float
    n_traces: int


def _trace_accuracy(predicted: DKTrace, truth: DKTrace) -> float:
    hits = sum(1 for p, t in zip(predicted.activities, truth.activities) if p == t)
    return hits / len(truth)


def _replicated_dk(test_set: Dataset, n_traces: int, tag: str) -> list[TraceMatrix]:
    """Cycle the held-out DK matrices (fresh case ids) until n_traces copies exist."""
    out: list[TraceMatrix] = []
    base = [dk for dk, _ in test_set]
    replica = 0
    while len(out) < n_traces:
        for dk in base:
            if len(out) >= n_traces:
                break
            out.append(
                TraceMatrix(
                    data=np.array(dk.data),
                    mask=np.array(dk.mask),
                    kind="dk",
                    case_id=f"{dk.case_id}#{tag}.{replica}",
                )
            )
        replica += 1
    return out


def run_sweep(
    cfg: ExperimentConfig,
    result: ExperimentResult | None = None,
) -> list[SweepRow]:
    """Evaluate trained models across noise levels without retraining.

    Fresh SK test traces are synthesized from the held-out DK traces at
    every level; the argmax baseline and each trained variant are scored on
    the same traces. Results land in ``out_dir/sweep.csv``.
    """
    if result is None:
        result = _reload_experiment(cfg)
    lo, hi, steps = cfg.noise.sweep
    profiles = noise_sweep_levels(lo, hi, int(steps))
    n_traces = cfg.sweep.n_traces
    if n_traces < 1:
        raise ConfigError(f"sweep n_traces must be positive, got {n_traces}")
    methods = {ARGMAX_METHOD: None}
    for variant, model in result.models.items():
        methods[variant_method_name(variant)] = model
    rows: list[SweepRow] = []
    for index, profile in enumerate(profiles):
        level = float(profile.lambdas)
        dk_matrices = _replicated_dk(result.test_set, n_traces, f"s{index}")
        params = DirichletParams.uniform(
            cfg.noise.concentration, result.alphabet.size, seed=cfg.stage_seed(f"sweep-noise:{index}")
        )
        level_set = synthesize_sk_log(dk_matrices, profile, params, result.alphabet)
        truths = [decode_dk(dk) for dk, _ in level_set]
        for method, model in methods.items():
            if model is None:
                predictions = [argmax_decode(sk) for _, sk in level_set]
            else:
                recovered = recover_log(
                    [sk for _, sk in level_set], model, result.schedule, cfg.stage_seed(f"sweep-recover:{index}")
                )
                predictions = [r.trace for r in recovered]
            scores = np.array([_trace_accuracy(p, t) for p, t in zip(predictions, truths)])
            rows.append(
                SweepRow(
                    level=level,
                    method=method,
                    mean_accuracy=float(scores.mean()),
                    std_accuracy=float(scores.std()),
                    n_traces=len(scores),
                )
            )
        logger.info("sweep level %.4f done (%d traces)", level, n_traces)
    _write_sweep_csv(Path(cfg.out_dir) / "sweep.csv", cfg, rows)
    return rows


def _write_sweep_csv(path: Path, cfg: ExperimentConfig, rows: Sequence[SweepRow]) -> None:
    with path.open("w", newline="", encoding="utf-8") as handle:
        handle.write(f"# config_hash={cfg.config_hash()} seed={cfg.seed}\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(SWEEP_HEADER)
        for row in rows:
            writer.writerow(
                [
                    f"{row.level:.6f}",
                    row.method,
                    f"{row.mean_accuracy:.6f}",
                    f"{row.std_accuracy:.6f}",
                    row.n_traces,
                ]
            )


def _reload_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Rebuild datasets deterministically and load stored checkpoints; train if absent."""
    out_dir = Path(cfg.out_dir)
    missing = [v for v in cfg.model.variants if not (out_dir / f"{v}.ckpt").exists()]
    if missing:
        logger.info("no checkpoints for %s under %s; training first", missing, out_dir)
        return run_experiment(cfg)
    dk_traces, alphabet = _obtain_dk_log(cfg)
    multiple = 2**cfg.model.levels
    longest = max(len(t) for t in dk_traces)
    max_len = cfg.dataset.max_len if cfg.dataset.max_len is not None else _round_up(longest, multiple)
    dataset = _build_pairs(cfg, dk_traces, alphabet, max_len)
    train_set, test_set = split_train_test(dataset, cfg.split_fraction, cfg.stage_seed("split"))
    models = {}
    for variant in cfg.model.variants:
        model, _, _ = load_checkpoint(out_dir / f"{variant}.ckpt", alphabet=alphabet)
        models[variant] = model
    return ExperimentResult(
        config=cfg,
        out_dir=out_dir,
        alphabet=alphabet,
        max_len=max_len,
        schedule=make_schedule(cfg.diffusion.steps, *cfg.diffusion.beta),
        train_set=train_set,
        test_set=test_set,
        flow=None,
        models=models,
        train_results={},
        metrics={},
    )
