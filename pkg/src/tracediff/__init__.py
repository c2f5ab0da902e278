"""tracediff: recovering deterministic traces from stochastically-known event logs.

The library pairs a small float64 autodiff engine with a guided diffusion
denoiser: event logs are encoded as activity-probability matrices, corrupted
synthetically with Dirichlet mixtures, and recovered by iterative denoising
conditioned on the stochastic observations and (optionally) a learned latent
view of the process' flow structure.
"""

from .denoiser import (
    DenoiserConfig,
    DenoiserModel,
    load_checkpoint,
    save_checkpoint,
    time_embedding,
)
from .diffusion import (
    NoiseSchedule,
    RecoveredTrace,
    TrainConfig,
    TrainResult,
    TrainingDiverged,
    forward_sample,
    make_schedule,
    recover,
    recover_log,
    reverse_step,
    train,
)
from .flows import FlowMatrix, load_flow_matrix, mine_dfg_flow_matrix, write_flow_matrix
from .logs import (
    Alphabet,
    Dataset,
    DKTrace,
    LogParseError,
    SKTrace,
    TraceMatrix,
    argmax_decode,
    build_dataset,
    decode_dk,
    encode,
    parse_dk_log,
    parse_sk_log,
    split_train_test,
    write_dk_log,
    write_sk_log,
)
from .metrics import ClassMetrics, MetricsReport, compute_metrics, run_baseline_argmax
from .noise import (
    DirichletParams,
    NoiseProfile,
    noise_sweep_levels,
    sample_dirichlet,
    synthesize_sk_log,
    synthesize_sk_trace,
)
from .simulate import choice_loop_alphabet, choice_loop_flow, sample_choice_loop_log

__version__ = "0.1.0"

__all__ = [
    "Alphabet",
    "ClassMetrics",
    "Dataset",
    "DenoiserConfig",
    "DenoiserModel",
    "DirichletParams",
    "DKTrace",
    "FlowMatrix",
    "LogParseError",
    "MetricsReport",
    "NoiseProfile",
    "NoiseSchedule",
    "RecoveredTrace",
    "SKTrace",
    "TraceMatrix",
    "TrainConfig",
    "TrainResult",
    "TrainingDiverged",
    "argmax_decode",
    "build_dataset",
    "choice_loop_alphabet",
    "choice_loop_flow",
    "compute_metrics",
    "decode_dk",
    "encode",
    "forward_sample",
    "load_checkpoint",
    "load_flow_matrix",
    "make_schedule",
    "mine_dfg_flow_matrix",
    "noise_sweep_levels",
    "parse_dk_log",
    "parse_sk_log",
    "recover",
    "recover_log",
    "reverse_step",
    "run_baseline_argmax",
    "sample_choice_loop_log",
    "sample_dirichlet",
    "save_checkpoint",
    "split_train_test",
    "synthesize_sk_log",
    "synthesize_sk_trace",
    "time_embedding",
    "train",
    "write_dk_log",
    "write_flow_matrix",
    "write_sk_log",
]
