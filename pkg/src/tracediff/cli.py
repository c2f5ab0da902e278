"""Command-line interface.

Subcommands: synth, mine, train, recover, evaluate, sweep, gradcheck.
Config-driven commands read a TOML experiment file; ``--seed`` and the
``TRACEDIFF_SEED`` environment variable override the config seed (flag
wins). Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from pathlib import Path

from .checks import full_suite
from .denoiser import load_checkpoint
from .diffusion import make_schedule, recover_log
from .experiment import (
    ConfigError,
    ExperimentError,
    config_from_toml,
    run_experiment,
    run_sweep,
)
from .flows import mine_dfg_flow_matrix, write_flow_matrix
from .logs import (
    LogParseError,
    SKTrace,
    encode,
    parse_dk_log,
    parse_sk_log,
    write_dk_log,
    write_sk_log,
)
from .metrics import compute_metrics
from .noise import DirichletParams, NoiseProfile, synthesize_sk_log

logger = logging.getLogger(__name__)

USAGE_ERROR = 2
DOMAIN_ERROR = 1


def _seed_override(args: argparse.Namespace) -> int | None:
    if getattr(args, "seed", None) is not None:
        return int(args.seed)
    env = os.environ.get("TRACEDIFF_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"TRACEDIFF_SEED must be an integer, got {env!r}") from None
    return None


def _load_config(args: argparse.Namespace):
    cfg = config_from_toml(args.config, out_dir=getattr(args, "out", None))
    override = _seed_override(args)
    if override is not None:
        cfg = dataclasses.replace(cfg, seed=override)
    return cfg


def _cmd_synth(args: argparse.Namespace) -> int:
    dk_traces, alphabet = parse_dk_log(args.dk)
    max_len = max(len(t) for t in dk_traces)
    matrices = [encode(t, alphabet, max_len) for t in dk_traces]
    seed = _seed_override(args)
    params = DirichletParams.uniform(args.concentration, alphabet.size, seed=0 if seed is None else seed)
    dataset = synthesize_sk_log(matrices, NoiseProfile(args.level), params, alphabet)
    traces = [SKTrace(sk.case_id, sk.data[:, sk.mask].T) for _, sk in dataset]
    write_sk_log(traces, args.out)
    logger.info("wrote %d SK traces to %s", len(traces), args.out)
    return 0


def _cmd_mine(args: argparse.Namespace) -> int:
    dk_traces, alphabet = parse_dk_log(args.dk)
    flow = mine_dfg_flow_matrix(dk_traces, alphabet)
    write_flow_matrix(flow, alphabet, args.out)
    logger.info("mined %d edges over %d activities", int(flow.data.sum()), alphabet.size)
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    result = run_experiment(cfg)
    for method, report in result.metrics.items():
        print(f"{method}: accuracy={report.accuracy:.4f} precision={report.macro_precision:.4f} recall={report.macro_recall:.4f}")
    print(f"artifacts in {result.out_dir}")
    return 0


def _cmd_recover(args: argparse.Namespace) -> int:
    model, alphabet, metadata = load_checkpoint(args.checkpoint)
    if alphabet is None:
        raise ValueError(f"{args.checkpoint}: checkpoint stores no alphabet; cannot decode recovered traces")
    sk_traces = parse_sk_log(args.sk, alphabet)
    matrices = [encode(t, alphabet, model.config.max_len) for t in sk_traces]
    steps = args.steps if args.steps is not None else int(metadata.get("diffusion_steps", 500))
    beta = metadata.get("beta", [1e-4, 0.02])
    beta_lo = args.beta_lo if args.beta_lo is not None else float(beta[0])
    beta_hi = args.beta_hi if args.beta_hi is not None else float(beta[1])
    schedule = make_schedule(steps, beta_lo, beta_hi)
    seed = _seed_override(args)
    recovered = recover_log(matrices, model, schedule, 0 if seed is None else seed)
    write_dk_log([r.trace for r in recovered], alphabet, args.out)
    logger.info("recovered %d traces to %s", len(recovered), args.out)
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    predictions, pred_alphabet = parse_dk_log(args.pred)
    truths, truth_alphabet = parse_dk_log(args.truth)
    # realign prediction indices to the truth alphabet
    relabeled = []
    for trace in predictions:
        labels = trace.labels(pred_alphabet)
        relabeled.append(dataclasses.replace(trace, activities=tuple(truth_alphabet.index(l) for l in labels)))
    report = compute_metrics(relabeled, truths)
    print(f"accuracy={report.accuracy:.6f}")
    print(f"macro_precision={report.macro_precision:.6f}")
    print(f"macro_recall={report.macro_recall:.6f}")
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    rows = run_sweep(cfg)
    for row in rows:
        print(f"lambda={row.level:.4f} {row.method}: {row.mean_accuracy:.4f} +- {row.std_accuracy:.4f} (n={row.n_traces})")
    print(f"curve written to {Path(cfg.out_dir) / 'sweep.csv'}")
    return 0


def _cmd_gradcheck(args: argparse.Namespace) -> int:
    failures = 0
    for report, tolerance in full_suite(args.seed if args.seed is not None else 0):
        status = "ok" if report.passed(tolerance) else "FAIL"
        print(f"{report.name:28s} max_rel_error={report.max_rel_error:.3e} tol={tolerance:.0e} [{status}]")
        if not report.passed(tolerance):
            failures += 1
    if failures:
        print(f"{failures} gradient check(s) failed", file=sys.stderr)
        return DOMAIN_ERROR
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tracediff", description="Trace recovery from stochastically-known event logs")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="corrupt a DK log into an SK log")
    synth.add_argument("--dk", required=True, help="input DK log CSV")
    synth.add_argument("--out", required=True, help="output SK log JSONL")
    synth.add_argument("--level", type=float, default=0.6, help="mixture level lambda (default 0.6)")
    synth.add_argument("--concentration", type=float, default=0.05, help="Dirichlet concentration (default 0.05)")
    synth.add_argument("--seed", type=int, default=None)
    synth.set_defaults(handler=_cmd_synth)

    mine = sub.add_parser("mine", help="mine a directly-follows flow matrix from a DK log")
    mine.add_argument("--dk", required=True, help="input DK log CSV")
    mine.add_argument("--out", required=True, help="output flow matrix CSV")
    mine.set_defaults(handler=_cmd_mine)

    train_p = sub.add_parser("train", help="run the training pipeline from a config file")
    train_p.add_argument("--config", required=True, help="experiment TOML")
    train_p.add_argument("--out", default=None, help="override the config's out_dir")
    train_p.add_argument("--seed", type=int, default=None, help="override the config seed")
    train_p.set_defaults(handler=_cmd_train)

    rec = sub.add_parser("recover", help="recover DK traces from an SK log with a trained checkpoint")
    rec.add_argument("--checkpoint", required=True)
    rec.add_argument("--sk", required=True, help="input SK log JSONL")
    rec.add_argument("--out", required=True, help="output recovered DK log CSV")
    rec.add_argument("--steps", type=int, default=None, help="diffusion steps (default: from checkpoint)")
    rec.add_argument("--beta-lo", type=float, default=None)
    rec.add_argument("--beta-hi", type=float, default=None)
    rec.add_argument("--seed", type=int, default=None)
    rec.set_defaults(handler=_cmd_recover)

    ev = sub.add_parser("evaluate", help="score a recovered DK log against ground truth")
    ev.add_argument("--pred", required=True, help="recovered DK log CSV")
    ev.add_argument("--truth", required=True, help="ground-truth DK log CSV")
    ev.set_defaults(handler=_cmd_evaluate)

    sweep = sub.add_parser("sweep", help="evaluate trained models across noise levels")
    sweep.add_argument("--config", required=True, help="experiment TOML")
    sweep.add_argument("--out", default=None, help="override the config's out_dir")
    sweep.add_argument("--seed", type=int, default=None)
    sweep.set_defaults(handler=_cmd_sweep)

    gc = sub.add_parser("gradcheck", help="finite-difference check of every engine gradient")
    gc.add_argument("--seed", type=int, default=None)
    gc.set_defaults(handler=_cmd_gradcheck)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.handler(args)
    except (LogParseError, ConfigError, ExperimentError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DOMAIN_ERROR


if __name__ == "__main__":
    sys.exit(main())
