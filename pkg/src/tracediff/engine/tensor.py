"""Dense float64 tensors with tape-based reverse-mode differentiation.

Every operation records its parents and a gradient closure on the output
tensor; ``Tensor.backward()`` replays that record in reverse topological
order. The op set is deliberately small: exactly what a 1-D convolutional
denoiser with attention needs. All arithmetic is float64.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "no_grad",
    "add",
    "sub",
    "neg",
    "mul",
    "matmul",
    "transpose",
    "reshape",
    "narrow",
    "concat",
    "conv1d",
    "maxpool1d",
    "upsample1d",
    "softmax",
    "log_softmax",
    "sigmoid",
    "softplus",
    "mean",
    "tsum",
]

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the context (inference fast path)."""
    global _GRAD_ENABLED
    previous = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = previous


class Tensor:
    """A float64 ndarray plus the bookkeeping needed for backpropagation.

    ``requires_grad`` marks leaf parameters; tensors produced by ops carry a
    backward closure instead. Gradients accumulate into ``grad``, so callers
    must zero parameter grads between training steps (the optimizer does
    this). Data is owned by the tensor and must not be mutated while a graph
    referencing it is alive; only the optimizer updates parameter values.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_backward_done")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None
        self._backward_done = False

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def backward(self) -> None:
        """Populate ``grad`` on every tensor this scalar depends on.

        Raises if called on a non-scalar or a second time on the same
        tensor; rebuilding the graph (and zeroing parameter grads) is the
        supported way to differentiate again.
        """
        if self.data.shape != ():
            raise ValueError(f"backward requires a scalar loss, got shape {self.data.shape}")
        if self._backward_done:
            raise RuntimeError("backward was already called on this tensor; build a fresh graph")
        order = _toposort(self)
        self.grad = np.ones((), dtype=np.float64)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
        self._backward_done = True

    # -- operator sugar -------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("tensor/tensor division is not supported; divide by a scalar")
        return mul(self, 1.0 / float(other))

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"


def _as_tensor(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=np.float64))


def _wants_grad(t: Tensor) -> bool:
    return t.requires_grad or t._backward is not None


def _tracked(*tensors: Tensor) -> bool:
    if not _GRAD_ENABLED:
        return False
    return any(_wants_grad(t) for t in tensors)


def _result(data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.requires_grad = False
    out._parents = parents
    out._backward = backward
    out._backward_done = False
    return out


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        # copy: incoming buffers may be shared with sibling branches
        t.grad = np.array(g, dtype=np.float64, copy=True)
    else:
        t.grad += g


def _toposort(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, ss) in enumerate(zip(g.shape, shape)) if ss == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# -- elementwise and linear algebra --------------------------------------


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data + b.data
    if not _tracked(a, b):
        return _result(data, (), None)

    def backward(g):
        if _wants_grad(a):
            _accumulate(a, _unbroadcast(g, a.data.shape))
        if _wants_grad(b):
            _accumulate(b, _unbroadcast(g, b.data.shape))

    return _result(data, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data - b.data
    if not _tracked(a, b):
        return _result(data, (), None)

    def backward(g):
        if _wants_grad(a):
            _accumulate(a, _unbroadcast(g, a.data.shape))
        if _wants_grad(b):
            _accumulate(b, _unbroadcast(-g, b.data.shape))

    return _result(data, (a, b), backward)


def neg(a) -> Tensor:
    a = _as_tensor(a)
    data = -a.data
    if not _tracked(a):
        return _result(data, (), None)

    def backward(g):
        _accumulate(a, -g)

    return _result(data, (a,), backward)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data * b.data
    if not _tracked(a, b):
        return _result(data, (), None)

    def backward(g):
        if _wants_grad(a):
            _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        if _wants_grad(b):
            _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    return _result(data, (a, b), backward)


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got {a.shape} @ {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    data = a.data @ b.data
    if not _tracked(a, b):
        return _result(data, (), None)

    def backward(g):
        if _wants_grad(a):
            _accumulate(a, g @ b.data.T)
        if _wants_grad(b):
            _accumulate(b, a.data.T @ g)

    return _result(data, (a, b), backward)


def transpose(a) -> Tensor:
    a = _as_tensor(a)
    if a.ndim != 2:
        raise ValueError(f"transpose expects a 2-D tensor, got shape {a.shape}")
    data = a.data.T
    if not _tracked(a):
        return _result(data, (), None)

    def backward(g):
        _accumulate(a, g.T)

    return _result(data, (a,), backward)


def reshape(a, shape: Sequence[int]) -> Tensor:
    a = _as_tensor(a)
    data = a.data.reshape(shape)
    if not _tracked(a):
        return _result(data, (), None)

    def backward(g):
        _accumulate(a, g.reshape(a.data.shape))

    return _result(data, (a,), backward)


def narrow(a, axis: int, start: int, length: int) -> Tensor:
    """Slice ``length`` entries along ``axis`` starting at ``start``."""
    a = _as_tensor(a)
    if not 0 <= axis < a.ndim:
        raise ValueError(f"narrow axis {axis} out of range for shape {a.shape}")
    if start < 0 or start + length > a.shape[axis]:
        raise ValueError(f"narrow window [{start}, {start + length}) exceeds axis size {a.shape[axis]}")
    index = tuple(slice(start, start + length) if d == axis else slice(None) for d in range(a.ndim))
    data = a.data[index]
    if not _tracked(a):
        return _result(data, (), None)

    def backward(g):
        full = np.zeros_like(a.data)
        full[index] = g
        _accumulate(a, full)

    return _result(data, (a,), backward)


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    ts = [_as_tensor(t) for t in tensors]
    if not ts:
        raise ValueError("concat requires at least one tensor")
    data = np.concatenate([t.data for t in ts], axis=axis)
    if not _tracked(*ts):
        return _result(data, (), None)
    sizes = [t.data.shape[axis] for t in ts]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(ts, offsets[:-1], offsets[1:]):
            if _wants_grad(t):
                index = tuple(slice(lo, hi) if d == axis else slice(None) for d in range(g.ndim))
                _accumulate(t, g[index])

    return _result(data, tuple(ts), backward)


# -- sequence ops ---------------------------------------------------------


def conv1d(x, kernels) -> Tensor:
    """Same-padded 1-D convolution of a (C_in, L) signal with (C_out, C_in, W) kernels."""
    x, kernels = _as_tensor(x), _as_tensor(kernels)
    if x.ndim != 2 or kernels.ndim != 3:
        raise ValueError(f"conv1d expects (C_in, L) input and (C_out, C_in, W) kernels, got {x.shape} and {kernels.shape}")
    c_in, length = x.shape
    c_out, k_in, width = kernels.shape
    if k_in != c_in:
        raise ValueError(f"conv1d channel mismatch: input has {c_in}, kernels expect {k_in}")
    if width % 2 != 1:
        raise ValueError(f"conv1d kernel width must be odd for same padding, got {width}")
    pad = width // 2
    padded = np.zeros((c_in, length + 2 * pad))
    padded[:, pad : pad + length] = x.data
    # (C_in, L, W) windows -> (C_in * W, L) columns, row index c * W + k
    windows = np.lib.stride_tricks.sliding_window_view(padded, width, axis=1)
    cols = windows.transpose(0, 2, 1).reshape(c_in * width, length)
    wmat = kernels.data.reshape(c_out, c_in * width)
    data = wmat @ cols
    if not _tracked(x, kernels):
        return _result(data, (), None)

    def backward(g):
        if _wants_grad(kernels):
            _accumulate(kernels, (g @ cols.T).reshape(c_out, c_in, width))
        if _wants_grad(x):
            gcols = (wmat.T @ g).reshape(c_in, width, length)
            gpad = np.zeros_like(padded)
            for k in range(width):
                gpad[:, k : k + length] += gcols[:, k, :]
            _accumulate(x, gpad[:, pad : pad + length])

    return _result(data, (x, kernels), backward)


def maxpool1d(x, width: int = 2) -> Tensor:
    """Non-overlapping max pooling along the length axis; ties go to the first position."""
    x = _as_tensor(x)
    if x.ndim != 2:
        raise ValueError(f"maxpool1d expects a (C, L) tensor, got shape {x.shape}")
    channels, length = x.shape
    if length % width != 0:
        raise ValueError(f"maxpool1d length {length} not divisible by width {width}")
    grouped = x.data.reshape(channels, length // width, width)
    idx = np.argmax(grouped, axis=2)
    data = np.take_along_axis(grouped, idx[:, :, None], axis=2)[:, :, 0]
    if not _tracked(x):
        return _result(data, (), None)

    def backward(g):
        gx = np.zeros_like(grouped)
        np.put_along_axis(gx, idx[:, :, None], g[:, :, None], axis=2)
        _accumulate(x, gx.reshape(channels, length))

    return _result(data, (x,), backward)


def upsample1d(x, factor: int = 2) -> Tensor:
    """Nearest-neighbor upsampling along the length axis."""
    x = _as_tensor(x)
    if x.ndim != 2:
        raise ValueError(f"upsample1d expects a (C, L) tensor, got shape {x.shape}")
    channels, length = x.shape
    data = np.repeat(x.data, factor, axis=1)
    if not _tracked(x):
        return _result(data, (), None)

    def backward(g):
        _accumulate(x, g.reshape(channels, length, factor).sum(axis=2))

    return _result(data, (x,), backward)


# -- reductions and nonlinearities ---------------------------------------


def softmax(x, axis: int) -> Tensor:
    x = _as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=axis, keepdims=True)
    if not _tracked(x):
        return _result(data, (), None)

    def backward(g):
        inner = (g * data).sum(axis=axis, keepdims=True)
        _accumulate(x, data * (g - inner))

    return _result(data, (x,), backward)


def log_softmax(x, axis: int) -> Tensor:
    x = _as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    data = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    if not _tracked(x):
        return _result(data, (), None)

    def backward(g):
        _accumulate(x, g - np.exp(data) * g.sum(axis=axis, keepdims=True))

    return _result(data, (x,), backward)


def _sigmoid_values(x: np.ndarray) -> np.ndarray:
    # sigmoid(x) = exp(-softplus(-x)); overflow-free on both tails
    return np.exp(-np.logaddexp(0.0, -x))


def sigmoid(x) -> Tensor:
    x = _as_tensor(x)
    data = _sigmoid_values(x.data)
    if not _tracked(x):
        return _result(data, (), None)

    def backward(g):
        _accumulate(x, g * data * (1.0 - data))

    return _result(data, (x,), backward)


def softplus(x) -> Tensor:
    x = _as_tensor(x)
    data = np.logaddexp(0.0, x.data)
    if not _tracked(x):
        return _result(data, (), None)

    def backward(g):
        _accumulate(x, g * _sigmoid_values(x.data))

    return _result(data, (x,), backward)


def mean(x, axis: int | None = None) -> Tensor:
    x = _as_tensor(x)
    data = x.data.mean(axis=axis)
    if not _tracked(x):
        return _result(data, (), None)
    count = x.data.size if axis is None else x.data.shape[axis]

    def backward(g):
        if axis is None:
            grad = np.broadcast_to(g, x.data.shape) / count
        else:
            grad = np.broadcast_to(np.expand_dims(g, axis), x.data.shape) / count
        _accumulate(x, grad)

    return _result(data, (x,), backward)


def tsum(x, axis: int | None = None) -> Tensor:
    """Sum reduction (named to avoid shadowing the builtin)."""
    x = _as_tensor(x)
    data = x.data.sum(axis=axis)
    if not _tracked(x):
        return _result(data, (), None)

    def backward(g):
        if axis is None:
            grad = np.broadcast_to(g, x.data.shape)
        else:
            grad = np.broadcast_to(np.expand_dims(g, axis), x.data.shape)
        _accumulate(x, grad)

    return _result(data, (x,), backward)
