"""Adam update math against hand-evaluated steps."""

from __future__ import annotations

import numpy as np
import pytest

from tracediff.engine import Adam, Tensor


def test_first_step_with_unit_gradient_moves_by_about_lr():
    # m = 0.1, v = 0.001; bias correction gives m_hat = v_hat = 1,
    # so the update is lr * 1 / (1 + eps) ~= lr
    p = Tensor(np.array(1.0), requires_grad=True)
    opt = Adam([p], lr=0.1)
    p.grad = np.array(1.0)
    opt.step()
    expected = 1.0 - 0.1 * 1.0 / (1.0 + 1e-8)
    assert p.data == pytest.approx(expected, abs=1e-15)
    assert p.data == pytest.approx(0.9, abs=1e-8)


def test_zero_gradient_leaves_parameter_but_decays_moments():
    p = Tensor(np.array(2.0), requires_grad=True)
    opt = Adam([p], lr=0.1)
    p.grad = np.array(1.0)
    opt.step()
    after_first = float(p.data)
    p.grad = np.array(0.0)
    opt.step()
    # moments decayed but nonzero, so the parameter still drifts slightly;
    # with a zero gradient from the start it must not move at all
    q = Tensor(np.array(2.0), requires_grad=True)
    opt_q = Adam([q], lr=0.1)
    q.grad = np.array(0.0)
    opt_q.step()
    assert float(q.data) == 2.0
    assert float(p.data) != after_first


def test_missing_gradient_is_an_error():
    p = Tensor(np.array(1.0), requires_grad=True)
    opt = Adam([p], lr=0.1)
    with pytest.raises(RuntimeError, match="no gradient"):
        opt.step()


def test_zero_grad_resets_buffers():
    p = Tensor(np.ones(3), requires_grad=True)
    opt = Adam([p], lr=0.1)
    p.grad = np.ones(3)
    opt.zero_grad()
    assert np.all(p.grad == 0.0)


def test_identical_runs_are_bit_identical():
    def run() -> np.ndarray:
        rng = np.random.default_rng(42)
        p = Tensor(rng.normal(size=(4, 4)), requires_grad=True)
        opt = Adam([p], lr=0.01)
        for _ in range(25):
            opt.zero_grad()
            p.grad = rng.normal(size=(4, 4))
            opt.step()
        return np.array(p.data)

    assert np.array_equal(run(), run())
