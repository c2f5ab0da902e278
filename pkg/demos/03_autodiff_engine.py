"""A tour of the tensor engine: taped ops, backward, Adam, gradient checks.

The denoiser is built on a small float64 engine: every op records a
gradient closure, a scalar's ``backward()`` walks the record in reverse,
and finite differences stand ready as the independent referee.
"""

import numpy as np

from tracediff import engine
from tracediff.checks import denoiser_loss_check, full_suite
from tracediff.engine import Adam, Tensor, cross_entropy, grad_check

# -- forward + backward on a tiny expression --------------------------------

rng = np.random.default_rng(0)
weights = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
inputs = Tensor(rng.normal(size=(4, 5)))
logits = engine.matmul(weights, inputs)  # (3, 5)
target = np.zeros((3, 5))
target[rng.integers(0, 3, size=5), np.arange(5)] = 1.0
loss = cross_entropy(logits, target, np.ones(5, dtype=bool))
print(f"loss on random 3-class problem: {loss.item():.4f} (ln 3 = {np.log(3):.4f})")

weights.zero_grad()
loss.backward()
print("gradient shape:", weights.grad.shape, "norm:", round(float(np.linalg.norm(weights.grad)), 4))

# -- the finite-difference referee ------------------------------------------

report = grad_check(
    lambda: cross_entropy(engine.matmul(weights, inputs), target, np.ones(5, dtype=bool)),
    [weights],
    name="linear+cross_entropy",
)
print(f"finite differences vs autodiff: max relative error {report.max_rel_error:.2e}")

# -- a few steps of Adam ------------------------------------------------------

optimizer = Adam([weights], lr=0.05)
for step in range(60):
    optimizer.zero_grad()
    loss = cross_entropy(engine.matmul(weights, inputs), target, np.ones(5, dtype=bool))
    loss.backward()
    optimizer.step()
print(f"loss after 60 Adam steps: {loss.item():.4f}")

# -- the full check suite (same thing `tracediff gradcheck` runs) -----------

print("\nfull gradient-check suite:")
for rep, tolerance in full_suite(seed=0):
    status = "ok" if rep.passed(tolerance) else "FAIL"
    print(f"  {rep.name:28s} {rep.max_rel_error:.2e}  [{status}]")

toy = denoiser_loss_check(seed=1, variant="model-aware", max_coords=30)
print(f"\nwhole model-aware loss vs finite differences: {toy.max_rel_error:.2e}")
