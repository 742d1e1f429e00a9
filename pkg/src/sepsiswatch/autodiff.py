"""Dense-tensor reverse-mode automatic differentiation, Adam, and a
finite-difference gradient checker.

The engine is deliberately small: float64 ndarrays, define-by-run recording
onto an explicit tape, and vector-Jacobian backward rules for the handful of
primitives the models need. Tapes are single-threaded; tensors are treated as
immutable once created.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CHECKPOINT_VERSION = 1


class ShapeError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    pass


_ACTIVE_TAPE: "Tape | None" = None


class Tape:
    """Ordered record of primitive ops; reverse order is a topological order."""

    def __init__(self):
        self.nodes: list[Tensor] = []

    def __enter__(self):
        global _ACTIVE_TAPE
        if _ACTIVE_TAPE is not None:
            raise RuntimeError("tapes do not nest")
        _ACTIVE_TAPE = self
        return self

    def __exit__(self, *exc):
        global _ACTIVE_TAPE
        _ACTIVE_TAPE = None
        return False

    def backward(self, loss: "Tensor", clear: bool = False) -> None:
        """Accumulate gradients of a scalar loss into .grad of every input.

        With clear=True, recorded nodes' gradients are reset first so the
        same tape supports several independent backward passes (the caller
        still zeroes leaf gradients between passes).
        """
        if loss.data.size != 1:
            raise ShapeError(f"backward needs a scalar, got shape {loss.data.shape}")
        if clear:
            for node in self.nodes:
                node.grad = None
        loss.grad = np.ones_like(loss.data)
        for node in reversed(self.nodes):
            if node.grad is None or node._backward is None:
                continue
            node._backward(node.grad)


class Tensor:
    __slots__ = ("data", "grad", "_backward", "op")

    def __init__(self, data, op: str = "leaf", _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        if not np.all(np.isfinite(self.data)):
            raise NonFiniteError(f"non-finite values produced by primitive {op!r}")
        self.grad: np.ndarray | None = None
        self.op = op
        self._backward = _backward
        if _ACTIVE_TAPE is not None and _backward is not None:
            _ACTIVE_TAPE.nodes.append(self)

    @property
    def shape(self):
        return self.data.shape

    def zero_grad(self):
        self.grad = None

    def accumulate(self, g: np.ndarray):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    # operator sugar
    def __add__(self, other):
        return add(self, _lift(other))

    __radd__ = __add__

    def __neg__(self):
        return neg(self)

    def __sub__(self, other):
        return add(self, neg(_lift(other)))

    def __rsub__(self, other):
        return add(_lift(other), neg(self))

    def __mul__(self, other):
        return multiply(self, _lift(other))

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return take(self, key)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, op={self.op!r})"


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to the original operand shape."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _recording() -> bool:
    return _ACTIVE_TAPE is not None


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    try:
        out_data = a.data + b.data
    except ValueError:
        raise ShapeError(f"add: incompatible shapes {a.shape} and {b.shape}")
    if not _recording():
        return Tensor(out_data, "add")

    def backward(g):
        a.accumulate(_unbroadcast(g, a.data.shape))
        b.accumulate(_unbroadcast(g, b.data.shape))

    return Tensor(out_data, "add", backward)


def neg(a: Tensor) -> Tensor:
    if not _recording():
        return Tensor(-a.data, "neg")

    def backward(g):
        a.accumulate(-g)

    return Tensor(-a.data, "neg", backward)


def multiply(a: Tensor, b: Tensor) -> Tensor:
    try:
        out_data = a.data * b.data
    except ValueError:
        raise ShapeError(f"multiply: incompatible shapes {a.shape} and {b.shape}")
    if not _recording():
        return Tensor(out_data, "multiply")

    def backward(g):
        a.accumulate(_unbroadcast(g * b.data, a.data.shape))
        b.accumulate(_unbroadcast(g * a.data, b.data.shape))

    return Tensor(out_data, "multiply", backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    out_data = a.data @ b.data
    if not _recording():
        return Tensor(out_data, "matmul")

    def backward(g):
        a.accumulate(g @ b.data.T)
        b.accumulate(a.data.T @ g)

    return Tensor(out_data, "matmul", backward)


def sigmoid(a: Tensor) -> Tensor:
    out_data = 1.0 / (1.0 + np.exp(-a.data))
    if not _recording():
        return Tensor(out_data, "sigmoid")

    def backward(g):
        a.accumulate(g * out_data * (1.0 - out_data))

    return Tensor(out_data, "sigmoid", backward)


def tanh(a: Tensor) -> Tensor:
    out_data = np.tanh(a.data)
    if not _recording():
        return Tensor(out_data, "tanh")

    def backward(g):
        a.accumulate(g * (1.0 - out_data * out_data))

    return Tensor(out_data, "tanh", backward)


def exp(a: Tensor) -> Tensor:
    out_data = np.exp(a.data)
    if not _recording():
        return Tensor(out_data, "exp")

    def backward(g):
        a.accumulate(g * out_data)

    return Tensor(out_data, "exp", backward)


def log(a: Tensor) -> Tensor:
    with np.errstate(divide="raise", invalid="raise"):
        try:
            out_data = np.log(a.data)
        except FloatingPointError:
            raise NonFiniteError("non-finite values produced by primitive 'log'")
    if not _recording():
        return Tensor(out_data, "log")

    def backward(g):
        a.accumulate(g / a.data)

    return Tensor(out_data, "log", backward)


def power(a: Tensor, b: Tensor) -> Tensor:
    """a ** b with tensor exponent; requires a > 0 when b participates."""
    b = _lift(b)
    out_data = a.data ** b.data
    if not _recording():
        return Tensor(out_data, "power")

    def backward(g):
        a.accumulate(_unbroadcast(g * b.data * a.data ** (b.data - 1.0), a.data.shape))
        b.accumulate(_unbroadcast(g * out_data * np.log(a.data), b.data.shape))

    return Tensor(out_data, "power", backward)


def absolute(a: Tensor) -> Tensor:
    """|a|; the backward rule uses the subgradient sign(a), 0 at exactly 0."""
    out_data = np.abs(a.data)
    if not _recording():
        return Tensor(out_data, "absolute")

    def backward(g):
        a.accumulate(g * np.sign(a.data))

    return Tensor(out_data, "absolute", backward)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=axis, keepdims=True)
    if not _recording():
        return Tensor(out_data, "softmax")

    def backward(g):
        dot = (g * out_data).sum(axis=axis, keepdims=True)
        a.accumulate(out_data * (g - dot))

    return Tensor(out_data, "softmax", backward)


def concat(tensors: list[Tensor], axis: int = 0) -> Tensor:
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    if not _recording():
        return Tensor(out_data, "concat")

    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            t.accumulate(g[tuple(idx)])

    return Tensor(out_data, "concat", backward)


def take(a: Tensor, key) -> Tensor:
    """Slice/index; the backward rule scatter-adds into the source shape."""
    out_data = a.data[key]
    if not _recording():
        return Tensor(out_data, "slice")

    def backward(g):
        buf = np.zeros_like(a.data)
        np.add.at(buf, key, g)
        a.accumulate(buf)

    return Tensor(out_data, "slice", backward)


def tensor_sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out_data = a.data.sum(axis=axis, keepdims=keepdims)
    if not _recording():
        return Tensor(out_data, "sum")

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        a.accumulate(np.broadcast_to(g, a.data.shape).copy())

    return Tensor(out_data, "sum", backward)


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    n = a.data.size if axis is None else a.data.shape[axis]
    return multiply(tensor_sum(a, axis=axis, keepdims=keepdims), Tensor(1.0 / n))


# ---------------------------------------------------------------------------
# gradient checking
# ---------------------------------------------------------------------------

def grad_check(fn, params: list[Tensor], epsilon: float = 1e-5) -> float:
    """Max relative error between tape gradients and central differences.

    `fn` maps the parameter list to a scalar Tensor and must be free of side
    effects; it is re-evaluated ~2 * sum(p.size) times.
    """
    for p in params:
        p.zero_grad()
    with Tape() as tape:
        loss = fn(params)
        tape.backward(loss)
    ad_grads = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]

    worst = 0.0
    for p, g_ad in zip(params, ad_grads):
        flat = p.data.reshape(-1)
        g_flat = g_ad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            up = float(fn(params).data)
            flat[i] = orig - epsilon
            down = float(fn(params).data)
            flat[i] = orig
            g_fd = (up - down) / (2.0 * epsilon)
            err = abs(g_flat[i] - g_fd) / max(1.0, abs(g_flat[i]), abs(g_fd))
            worst = max(worst, err)
    return worst


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    lr: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_step(params: list[Tensor], grads: list[np.ndarray], state: AdamState) -> None:
    """One bias-corrected Adam update, in place."""
    if not state.m:
        state.m = [np.zeros_like(p.data) for p in params]
        state.v = [np.zeros_like(p.data) for p in params]
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.data.shape != g.shape:
            raise ShapeError(f"adam_step: param {p.data.shape} vs grad {g.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p.data -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


# ---------------------------------------------------------------------------
# checkpoints: flat float64 array file + JSON manifest of names and shapes
# ---------------------------------------------------------------------------

def save_checkpoint(named_params: dict[str, Tensor], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    manifest = {"version": CHECKPOINT_VERSION, "params": []}
    blob = bytearray()
    for name, t in named_params.items():
        manifest["params"].append({"name": name, "shape": list(t.data.shape)})
        flat = np.ascontiguousarray(t.data, dtype="<f8").tobytes()
        blob.extend(flat)
    with open(path, "wb") as fh:
        header = json.dumps(manifest).encode()
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(bytes(blob))


def load_checkpoint(path) -> dict[str, Tensor]:
    with open(path, "rb") as fh:
        (hlen,) = struct.unpack("<I", fh.read(4))
        manifest = json.loads(fh.read(hlen).decode())
        if "version" not in manifest:
            raise ValueError("checkpoint missing version field")
        out = {}
        for entry in manifest["params"]:
            shape = tuple(entry["shape"])
            n = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(8 * n), dtype="<f8").reshape(shape).copy()
            out[entry["name"]] = Tensor(data)
    return out
