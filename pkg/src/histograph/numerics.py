"""Dense float64 tensors with reverse-mode differentiation and Adam.

The primitive set is exactly what the graph layers need: matrix products,
broadcast add/multiply, softmax variants, leaky ReLU and a handful of
structural ops (reshape, concat, take, channel slicing). Every primitive
records onto the active :class:`Tape` when any input requires gradients;
with no active tape a forward pass is plain numpy and therefore pure.
"""

from __future__ import annotations

from contextvars import ContextVar
from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ShapeError, TapeError, ValidationError

__all__ = [
    "Tensor",
    "Tape",
    "backward",
    "constant",
    "parameter",
    "matmul",
    "add",
    "mul",
    "scale",
    "sum_all",
    "transpose",
    "reshape",
    "concat",
    "take",
    "channel",
    "softmax",
    "log_softmax",
    "leaky_relu",
    "AdamState",
    "adam_step",
    "SplitMix64",
]


def _as_f64(data) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise NumericError("tensor contains non-finite values")
    return arr


class Tensor:
    """A dense float64 array plus an optional gradient of the same shape."""

    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_f64(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False)


def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True)


@dataclass
class _TapeStep:
    out: Tensor
    inputs: tuple[Tensor, ...]
    backward_fn: object  # callable(grad: ndarray) -> tuple[ndarray | None, ...]


_ACTIVE_TAPE: ContextVar["Tape | None"] = ContextVar("histograph_tape", default=None)


class Tape:
    """Ordered record of primitive ops for one reverse pass.

    Use as a context manager around the forward build; recording order is
    construction order, which is topological by definition. A tape supports
    exactly one backward pass.
    """

    def __init__(self):
        self._steps: list[_TapeStep] = []
        self._consumed = False
        self._token = None

    def __enter__(self) -> "Tape":
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, *exc) -> None:
        _ACTIVE_TAPE.reset(self._token)
        self._token = None

    def __len__(self) -> int:
        return len(self._steps)


def backward(loss: Tensor, tape: Tape) -> None:
    """Accumulate d(loss)/d(param) into ``.grad`` of every reachable parameter.

    ``loss`` must be a scalar (one element). A tape can only be walked once;
    rebuild the forward pass under a fresh tape for another step.
    """
    if loss.data.size != 1:
        raise ValidationError(f"backward requires a scalar loss, got shape {loss.data.shape}")
    if tape._consumed:
        raise TapeError("tape has already been used for a backward pass")
    tape._consumed = True

    loss.grad = np.ones_like(loss.data)
    for step in reversed(tape._steps):
        g = step.out.grad
        if g is None:
            continue
        in_grads = step.backward_fn(g)
        for t, ig in zip(step.inputs, in_grads):
            if ig is None or not t.requires_grad:
                continue
            t.grad = ig if t.grad is None else t.grad + ig


def _emit(out_data: np.ndarray, inputs: tuple[Tensor, ...], backward_fn) -> Tensor:
    if not np.all(np.isfinite(out_data)):
        raise NumericError("operation produced a non-finite value")
    requires = any(t.requires_grad for t in inputs)
    out = Tensor.__new__(Tensor)
    out.data = out_data
    out.grad = None
    out.requires_grad = requires
    if requires:
        tape = _ACTIVE_TAPE.get()
        if tape is not None:
            tape._steps.append(_TapeStep(out, inputs, backward_fn))
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the operand's shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of two 2-D tensors."""
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError("matmul expects 2-D tensors")
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul dimension mismatch: {a.data.shape} x {b.data.shape}")
    out = a.data @ b.data
    need_a, need_b = a.requires_grad, b.requires_grad

    def bw(g):
        return (g @ b.data.T if need_a else None,
                a.data.T @ g if need_b else None)

    return _emit(out, (a, b), bw)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum with numpy broadcasting."""
    out = a.data + b.data
    need_a, need_b = a.requires_grad, b.requires_grad

    def bw(g):
        return (_unbroadcast(g, a.data.shape) if need_a else None,
                _unbroadcast(g, b.data.shape) if need_b else None)

    return _emit(out, (a, b), bw)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product with numpy broadcasting."""
    out = a.data * b.data
    need_a, need_b = a.requires_grad, b.requires_grad

    def bw(g):
        return (_unbroadcast(g * b.data, a.data.shape) if need_a else None,
                _unbroadcast(g * a.data, b.data.shape) if need_b else None)

    return _emit(out, (a, b), bw)


def scale(a: Tensor, factor: float) -> Tensor:
    """Multiply by a python scalar constant."""
    f = float(factor)
    out = a.data * f

    def bw(g):
        return (g * f,)

    return _emit(out, (a,), bw)


def sum_all(a: Tensor) -> Tensor:
    """Sum every element into a 1x1 tensor."""
    out = np.array([[a.data.sum()]])

    def bw(g):
        return (np.full(a.data.shape, g.item()),)

    return _emit(out, (a,), bw)


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeError("transpose expects a 2-D tensor")
    out = a.data.T.copy()

    def bw(g):
        return (g.T,)

    return _emit(out, (a,), bw)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    out = a.data.reshape(shape).copy()

    def bw(g):
        return (g.reshape(a.data.shape),)

    return _emit(out, (a,), bw)


def concat(tensors: list[Tensor], axis: int = 1) -> Tensor:
    if not tensors:
        raise ShapeError("concat of an empty list")
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bw(g):
        return tuple(np.split(g, splits, axis=axis))

    return _emit(out, tuple(tensors), bw)


def take(a: Tensor, flat_indices) -> Tensor:
    """Gather elements by flat (row-major) index into a 1xK row."""
    idx = np.asarray(flat_indices, dtype=np.intp)
    if idx.size and (idx.min() < -a.data.size or idx.max() >= a.data.size):
        raise ShapeError("take index out of range")
    out = a.data.reshape(-1)[idx].reshape(1, -1).copy()

    def bw(g):
        acc = np.zeros(a.data.size)
        np.add.at(acc, idx, g.reshape(-1))
        return (acc.reshape(a.data.shape),)

    return _emit(out, (a,), bw)


def channel(a: Tensor, k: int) -> Tensor:
    """Slice channel ``k`` off the last axis of a 3-D tensor."""
    if a.data.ndim != 3:
        raise ShapeError("channel expects a 3-D tensor")
    if not 0 <= k < a.data.shape[2]:
        raise ShapeError(f"channel {k} out of range for shape {a.data.shape}")
    out = a.data[:, :, k].copy()

    def bw(g):
        acc = np.zeros(a.data.shape)
        acc[:, :, k] = g
        return (acc,)

    return _emit(out, (a,), bw)


def softmax(a: Tensor, axis: int) -> Tensor:
    """Exp-normalize along ``axis``, stabilized by max subtraction."""
    if not -a.data.ndim <= axis < a.data.ndim:
        raise ShapeError(f"softmax axis {axis} invalid for shape {a.data.shape}")
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        inner = (g * out).sum(axis=axis, keepdims=True)
        return ((g - inner) * out,)

    return _emit(out, (a,), bw)


def log_softmax(a: Tensor, axis: int) -> Tensor:
    if not -a.data.ndim <= axis < a.data.ndim:
        raise ShapeError(f"log_softmax axis {axis} invalid for shape {a.data.shape}")
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))

    def bw(g):
        return (g - np.exp(out) * g.sum(axis=axis, keepdims=True),)

    return _emit(out, (a,), bw)


def leaky_relu(a: Tensor, slope: float = 0.01) -> Tensor:
    """Elementwise max(x, slope*x) for slope in [0, 1)."""
    if not 0.0 <= slope < 1.0:
        raise ValidationError(f"leaky_relu slope must be in [0, 1), got {slope}")
    mask = np.where(a.data > 0.0, 1.0, slope)
    out = a.data * mask

    def bw(g):
        return (g * mask,)

    return _emit(out, (a,), bw)


# ---------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    """Moment estimates for one list of parameters, updated in lockstep."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_params(cls, params: list[Tensor], learning_rate: float = 0.01,
                   beta1: float = 0.9, beta2: float = 0.999,
                   epsilon: float = 1e-8) -> "AdamState":
        return cls(
            m=[np.zeros_like(p.data) for p in params],
            v=[np.zeros_like(p.data) for p in params],
            t=0,
            learning_rate=learning_rate,
            beta1=beta1,
            beta2=beta2,
            epsilon=epsilon,
        )


def adam_step(params: list[Tensor], grads: list[np.ndarray], state: AdamState) -> None:
    """One bias-corrected Adam update, in place on ``params``."""
    if not (len(params) == len(grads) == len(state.m) == len(state.v)):
        raise ShapeError("adam_step: params, grads, and state lengths differ")
    for p, g, m in zip(params, grads, state.m):
        if p.data.shape != g.shape or p.data.shape != m.shape:
            raise ShapeError(
                f"adam_step shape mismatch: param {p.data.shape}, grad {g.shape}"
            )
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.t
    inv_bc2 = 1.0 / (1.0 - b2 ** state.t)
    step_scale = state.learning_rate / bc1
    for p, g, m, v in zip(params, grads, state.m, state.v):
        t = g * g
        t *= 1.0 - b2
        v *= b2
        v += t
        np.multiply(g, 1.0 - b1, out=t)
        m *= b1
        m += t
        np.multiply(v, inv_bc2, out=t)
        np.sqrt(t, out=t)
        t += state.epsilon
        np.divide(m, t, out=t)
        t *= step_scale
        p.data -= t
        if not np.isfinite(p.data).all():
            raise NumericError("adam_step produced a non-finite parameter")


# ---------------------------------------------------------------------------
# Deterministic PRNG


_U64 = (1 << 64) - 1


class SplitMix64:
    """Small deterministic PRNG; identical streams on every platform."""

    def __init__(self, seed: int):
        self._state = int(seed) & _U64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _U64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _U64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _U64
        return z ^ (z >> 31)

    def next_float(self) -> float:
        """Uniform double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def uniform(self, low: float, high: float, shape: tuple[int, ...] | None = None):
        if shape is None:
            return low + (high - low) * self.next_float()
        n = int(np.prod(shape)) if shape else 1
        flat = np.fromiter((self.next_float() for _ in range(n)), dtype=np.float64, count=n)
        return (low + (high - low) * flat).reshape(shape)

    def randrange(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection from the top 64 bits."""
        if n <= 0:
            raise ValidationError("randrange requires n >= 1")
        limit = (_U64 + 1) - ((_U64 + 1) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def shuffle(self, items: list) -> None:
        """Fisher-Yates shuffle in place."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randrange(i + 1)
            items[i], items[j] = items[j], items[i]

    def spawn(self) -> "SplitMix64":
        """Derive an independent child stream."""
        return SplitMix64(self.next_u64())
