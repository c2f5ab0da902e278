"""Adam optimizer over engine tensors."""

from __future__ import annotations

from typing import Iterable, Mapping

import numpy as np

from .tensor import Tensor

__all__ = ["Adam"]


class Adam:
    """Adam with bias correction over a fixed parameter set.

    ``step()`` requires every parameter to carry a gradient buffer; call
    ``zero_grad()`` before each backward pass. Updates mutate parameter
    data in place and are fully deterministic.

    Moment buffers live in one flat array, processed in cache-sized chunks:
    fewer numpy calls than a per-parameter loop, less memory traffic than
    whole-buffer passes. The arithmetic matches the textbook
    per-parameter update bit for bit.
    """

    _CHUNK = 16384

    def __init__(
        self,
        params: Mapping[str, Tensor] | Iterable[Tensor],
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        if isinstance(params, Mapping):
            self._params = list(params.values())
        else:
            self._params = list(params)
        if not self._params:
            raise ValueError("Adam needs at least one parameter")
        if lr <= 0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        total = sum(p.data.size for p in self._params)
        self._m = np.zeros(total)
        self._v = np.zeros(total)
        self._g = np.zeros(total)
        self._scratch = np.zeros(total)
        self._slices = []
        offset = 0
        for p in self._params:
            self._slices.append(slice(offset, offset + p.data.size))
            offset += p.data.size

    def zero_grad(self) -> None:
        for p in self._params:
            if p.grad is None or p.grad.shape != p.data.shape:
                p.grad = np.zeros_like(p.data)
            else:
                p.grad.fill(0.0)

    def step(self) -> None:
        for p in self._params:
            if p.grad is None:
                raise RuntimeError("Adam.step: parameter has no gradient; call zero_grad() and backward() first")
        self.t += 1
        flat_g, flat_m, flat_v, flat_u = self._g, self._m, self._v, self._scratch
        for p, sl in zip(self._params, self._slices):
            flat_g[sl] = p.grad.reshape(-1)
        correction1 = 1.0 - self.beta1**self.t
        correction2 = 1.0 - self.beta2**self.t
        for start in range(0, flat_g.size, self._CHUNK):
            sl = slice(start, start + self._CHUNK)
            g, m, v, u = flat_g[sl], flat_m[sl], flat_v[sl], flat_u[sl]
            # m = b1*m + (1-b1)*g ; v = b2*v + (1-b2)*g^2
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            # u = (lr * m_hat) / (sqrt(v_hat) + eps)
            denominator = np.sqrt(v / correction2)
            denominator += self.eps
            np.divide(m, correction1, out=u)
            u *= self.lr
            u /= denominator
        for p, sl in zip(self._params, self._slices):
            p.data -= flat_u[sl].reshape(p.data.shape)
