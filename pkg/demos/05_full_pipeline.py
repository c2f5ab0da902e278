"""The whole pipeline on a small scale: simulate, corrupt, train, recover, sweep.

A 5-activity process with a choice and a loop is simulated, corrupted at
lambda = 0.6, and split 75/25. Both denoiser variants are trained: the
model-free one sees only the noisy trace and the SK guidance; the
model-aware one also carries a learnable latent flow matrix, attends to it
from the trace representation, and reconstructs the mined directly-follows
matrix as an auxiliary output. Both are then evaluated against the argmax
baseline, including across noise levels the models never saw in training.

Runs in roughly two minutes; scale `traces` and `epochs` up for stronger
numbers (the test suite's acceptance module runs the full-size protocol).
"""

from tracediff.experiment import config_from_dict, run_experiment, run_sweep

config = config_from_dict(
    {
        "name": "demo",
        "seed": 42,
        "dataset": {"simulate": "choice-loop", "traces": 60, "max_len": 32},
        "split": {"train_fraction": 0.75},
        "noise": {"lambda": 0.6, "concentration": 0.05, "sweep": [0.53, 0.62, 4]},
        "model": {"variant": "both", "levels": 2, "base_channels": 24},
        "diffusion": {"T": 50, "beta": [1e-4, 0.2]},
        "train": {"epochs": 40, "lr": 1e-3, "gamma": 0.8},
        "sweep": {"n_traces": 30},
    },
    out_dir="runs/demo",
)

result = run_experiment(config)
print("\ntest-set metrics (also in runs/demo/metrics.csv):")
print(f"{'method':<18} {'accuracy':>9} {'precision':>10} {'recall':>8}")
for method, report in result.metrics.items():
    print(f"{method:<18} {report.accuracy:9.4f} {report.macro_precision:10.4f} {report.macro_recall:8.4f}")

print("\nrobustness sweep without retraining (runs/demo/sweep.csv):")
rows = run_sweep(config, result)
methods = sorted({row.method for row in rows})
levels = sorted({row.level for row in rows})
print(f"{'lambda':>8}  " + "  ".join(f"{m:>16}" for m in methods))
for level in levels:
    cells = {row.method: row.mean_accuracy for row in rows if row.level == level}
    print(f"{level:8.3f}  " + "  ".join(f"{cells[m]:16.4f}" for m in methods))

print(
    "\nThe argmax column decays as noise grows; the denoiser columns stay"
    "\nflat because recovery leans on the learned process structure, not"
    "\nonly on per-event probabilities."
)
