"""Reverse-mode automatic differentiation over dense numpy tensors.

Training runs in float64 throughout; checkpoints are written as float32 (see
``storygraph.training``). A :class:`Tape` is an append-only record of primitive
applications; :func:`backward` replays it once in reverse construction order.

Supported broadcasting is deliberately narrow: elementwise ops require equal
shapes, except matrix + row-vector bias addition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import NumericError

# Finiteness is part of the Tensor contract; the arrays involved are small
# enough that checking every primitive output is affordable.
CHECK_FINITE = True


def _check_finite(data: np.ndarray, op: str) -> None:
    if CHECK_FINITE and not np.all(np.isfinite(data)):
        raise NumericError(f"non-finite values produced by primitive '{op}'")


class Tape:
    """Append-only record of primitive applications for one forward pass."""

    __slots__ = ("_records",)

    def __init__(self):
        self._records: list[tuple[Var, Callable[[np.ndarray], None]]] = []

    def _record(self, out: "Var", vjp: Callable[[np.ndarray], None]) -> None:
        self._records.append((out, vjp))

    def __len__(self) -> int:
        return len(self._records)


class Var:
    """A value in the computation record. Leaf Vars carry parameters."""

    __slots__ = ("data", "grad", "tape", "name")

    def __init__(self, data, tape: Tape | None = None, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.tape = tape
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    # -- primitive suite -------------------------------------------------

    def __add__(self, other) -> "Var":
        other = _as_var(other)
        a, b = self, other
        if a.data.shape == b.data.shape:
            out_data = a.data + b.data
            reduce_b = False
        elif a.data.ndim == 2 and b.data.ndim == 1 and a.data.shape[1] == b.data.shape[0]:
            out_data = a.data + b.data  # bias add, the one blessed broadcast
            reduce_b = True
        else:
            raise ValueError(f"add: incompatible shapes {a.data.shape} and {b.data.shape}")
        return _unary_or_binary(
            "add", out_data, a, b,
            lambda g: g,
            (lambda g: g.sum(axis=0)) if reduce_b else (lambda g: g),
        )

    def __sub__(self, other) -> "Var":
        return self + (_as_var(other) * -1.0)

    def __mul__(self, other) -> "Var":
        other = _as_var(other)
        a, b = self, other
        if a.data.shape != b.data.shape and a.data.ndim != 0 and b.data.ndim != 0:
            raise ValueError(f"mul: incompatible shapes {a.data.shape} and {b.data.shape}")
        out_data = a.data * b.data

        def vjp_a(g):
            ga = g * b.data
            return ga.sum() if a.data.ndim == 0 and g.ndim != 0 else ga

        def vjp_b(g):
            gb = g * a.data
            return gb.sum() if b.data.ndim == 0 and g.ndim != 0 else gb

        return _unary_or_binary("mul", out_data, a, b, vjp_a, vjp_b)

    __rmul__ = __mul__

    def __neg__(self) -> "Var":
        return self * -1.0

    def __matmul__(self, other) -> "Var":
        other = _as_var(other)
        a, b = self, other
        if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
            raise ValueError(f"matmul: incompatible shapes {a.data.shape} and {b.data.shape}")
        return _unary_or_binary(
            "matmul", a.data @ b.data, a, b,
            lambda g: g @ b.data.T,
            lambda g: a.data.T @ g,
        )

    def transpose(self) -> "Var":
        if self.data.ndim != 2:
            raise ValueError(f"transpose: expected 2-d, got shape {self.data.shape}")
        return _unary("transpose", self.data.T, self, lambda g: g.T)

    def relu(self) -> "Var":
        mask = self.data > 0
        return _unary("relu", self.data * mask, self, lambda g: g * mask)

    def sigmoid(self) -> "Var":
        s = _sigmoid(self.data)
        return _unary("sigmoid", s, self, lambda g: g * s * (1.0 - s))

    def logsigmoid(self) -> "Var":
        # log(sigmoid(x)) = -softplus(-x), computed without overflow
        x = np.atleast_1d(self.data)
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = -np.log1p(np.exp(-x[pos]))
        out[~pos] = x[~pos] - np.log1p(np.exp(x[~pos]))
        out = out.reshape(self.data.shape)
        return _unary("logsigmoid", out, self, lambda g: g * _sigmoid(-self.data))

    def log(self) -> "Var":
        if np.any(self.data <= 0):
            raise NumericError("log: non-positive input")
        return _unary("log", np.log(self.data), self, lambda g: g / self.data)

    def softmax(self, axis: int) -> "Var":
        shifted = self.data - self.data.max(axis=axis, keepdims=True)
        e = np.exp(shifted)
        s = e / e.sum(axis=axis, keepdims=True)

        def vjp(g):
            return s * (g - (g * s).sum(axis=axis, keepdims=True))

        return _unary("softmax", s, self, vjp)

    def log_softmax(self, axis: int) -> "Var":
        shifted = self.data - self.data.max(axis=axis, keepdims=True)
        lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
        out = shifted - lse
        sm = np.exp(out)

        def vjp(g):
            return g - sm * g.sum(axis=axis, keepdims=True)

        return _unary("log_softmax", out, self, vjp)

    def sum(self, axis: int | None = None) -> "Var":
        shape = self.data.shape

        def vjp(g):
            if axis is None:
                return np.full(shape, g)
            return np.broadcast_to(np.expand_dims(g, axis), shape).copy()

        return _unary("sum", self.data.sum(axis=axis), self, vjp)

    def mean(self) -> "Var":
        size = self.data.size
        shape = self.data.shape
        return _unary("mean", self.data.mean(), self, lambda g: np.full(shape, g / size))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _as_var(x) -> Var:
    if isinstance(x, Var):
        return x
    return Var(np.asarray(x, dtype=np.float64))  # constant: tape=None, no grad


def _unary(op: str, out_data: np.ndarray, a: Var, vjp_a) -> Var:
    _check_finite(out_data, op)
    out = Var(out_data, a.tape)
    if a.tape is not None:
        a.tape._record(out, lambda g: a._accumulate(vjp_a(g)))
    return out


def _unary_or_binary(op: str, out_data, a: Var, b: Var, vjp_a, vjp_b) -> Var:
    _check_finite(out_data, op)
    tape = a.tape or b.tape
    out = Var(out_data, tape)
    if tape is not None:
        def vjp(g):
            if a.tape is not None:
                a._accumulate(vjp_a(g))
            if b.tape is not None:
                b._accumulate(vjp_b(g))
        tape._record(out, vjp)
    return out


def concat(parts: Sequence[Var], axis: int) -> Var:
    """Concatenate along ``axis``; gradient splits back to each part."""
    parts = [_as_var(p) for p in parts]
    if not parts:
        raise ValueError("concat: empty input")
    out_data = np.concatenate([p.data for p in parts], axis=axis)
    _check_finite(out_data, "concat")
    tape = next((p.tape for p in parts if p.tape is not None), None)
    out = Var(out_data, tape)
    if tape is not None:
        offsets = np.cumsum([0] + [p.data.shape[axis] for p in parts])

        def vjp(g):
            for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
                if p.tape is not None:
                    idx = [slice(None)] * g.ndim
                    idx[axis] = slice(lo, hi)
                    p._accumulate(g[tuple(idx)])

        tape._record(out, vjp)
    return out


def gather_rows(table: Var, ids) -> Var:
    """Row lookup (embedding lookup); gradient scatter-adds into the table."""
    ids = np.asarray(ids, dtype=np.intp)
    if table.data.ndim != 2:
        raise ValueError(f"gather_rows: table must be 2-d, got shape {table.data.shape}")
    out_data = table.data[ids]
    _check_finite(out_data, "gather_rows")
    out = Var(out_data, table.tape)
    if table.tape is not None:
        def vjp(g):
            gt = np.zeros_like(table.data)
            np.add.at(gt, ids, g)
            table._accumulate(gt)
        table.tape._record(out, vjp)
    return out


embedding_lookup = gather_rows


def broadcast_rows(row: Var, n: int) -> Var:
    """Repeat a (1, d) row n times; gradient sums the rows back."""
    if row.data.ndim != 2 or row.data.shape[0] != 1:
        raise ValueError(f"broadcast_rows: expected (1, d), got shape {row.data.shape}")
    out_data = np.repeat(row.data, n, axis=0)
    out = Var(out_data, row.tape)
    if row.tape is not None:
        row.tape._record(out, lambda g: row._accumulate(g.sum(axis=0, keepdims=True)))
    return out


def backward(loss: Var, params: Mapping[str, Var] | None = None) -> dict[str, np.ndarray]:
    """Single reverse sweep from a scalar loss.

    Returns a gradient per named parameter; parameters not on any path from
    the loss get a zero gradient.
    """
    if loss.data.shape != ():
        raise ValueError(f"backward: loss must be scalar, got shape {loss.data.shape}")
    if loss.tape is None:
        raise ValueError("backward: loss is a constant, nothing to differentiate")
    loss.grad = np.ones(())
    for out, vjp in reversed(loss.tape._records):
        if out.grad is not None:
            vjp(out.grad)
    if params is None:
        return {}
    return {
        name: (p.grad if p.grad is not None else np.zeros_like(p.data))
        for name, p in params.items()
    }


@dataclass
class AdamConfig:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.98
    eps: float = 1e-6
    weight_decay: float = 0.01


class ParameterStore:
    """Named trainable tensors plus Adam moments and the shared step count.

    Shapes are immutable after creation; values are float64 in memory.
    """

    def __init__(self):
        self._values: dict[str, np.ndarray] = {}
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        self.step = 0

    def add(self, name: str, value: np.ndarray) -> None:
        if name in self._values:
            raise ValueError(f"parameter '{name}' already exists")
        self._values[name] = np.array(value, dtype=np.float64)

    def get(self, name: str) -> np.ndarray:
        return self._values[name]

    def set(self, name: str, value: np.ndarray) -> None:
        current = self._values[name]
        value = np.asarray(value, dtype=np.float64)
        if value.shape != current.shape:
            raise ValueError(
                f"parameter '{name}': shape {value.shape} != existing {current.shape}"
            )
        self._values[name] = value.copy()

    def names(self) -> list[str]:
        return list(self._values)

    def drop(self, prefix: str) -> None:
        for name in [n for n in self._values if n.startswith(prefix)]:
            del self._values[name]
            self._m.pop(name, None)
            self._v.pop(name, None)

    def __contains__(self, name: str) -> bool:
        return name in self._values

    def bind(self, tape: Tape, prefix: str = "") -> dict[str, Var]:
        """Leaf Vars sharing this store's arrays, recorded on ``tape``."""
        return {
            name: Var(value, tape, name=name)
            for name, value in self._values.items()
            if name.startswith(prefix)
        }

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: value.copy() for name, value in self._values.items()}

    def restore(self, snap: Mapping[str, np.ndarray]) -> None:
        for name, value in snap.items():
            self.set(name, value)


def adam_update(store: ParameterStore, grads: Mapping[str, np.ndarray],
                hyper: AdamConfig) -> None:
    """One Adam step with bias correction and decoupled weight decay."""
    store.step += 1
    t = store.step
    for name in store.names():
        if name not in grads:
            continue
        g = np.asarray(grads[name], dtype=np.float64)
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for parameter '{name}'")
        theta = store._values[name]
        if g.shape != theta.shape:
            raise ValueError(
                f"gradient for '{name}': shape {g.shape} != parameter {theta.shape}"
            )
        m = store._m.setdefault(name, np.zeros_like(theta))
        v = store._v.setdefault(name, np.zeros_like(theta))
        m *= hyper.beta1
        m += (1.0 - hyper.beta1) * g
        v *= hyper.beta2
        v += (1.0 - hyper.beta2) * g * g
        m_hat = m / (1.0 - hyper.beta1 ** t)
        v_hat = v / (1.0 - hyper.beta2 ** t)
        theta -= hyper.lr * m_hat / (np.sqrt(v_hat) + hyper.eps)
        if hyper.weight_decay:
            theta -= hyper.lr * hyper.weight_decay * theta


def finite_difference_check(loss_fn: Callable[[Mapping[str, Var]], Var],
                            store: ParameterStore,
                            eps: float = 1e-5,
                            max_coords: int = 200,
                            rng: np.random.Generator | None = None) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``loss_fn`` must rebuild its computation from the bound parameter Vars on
    every call. At most ``max_coords`` coordinates are probed, sampled
    uniformly across all parameters.
    """
    rng = rng or np.random.default_rng(0)
    tape = Tape()
    params = store.bind(tape)
    grads = backward(loss_fn(params), params)

    coords = [(name, i) for name in store.names() for i in range(store.get(name).size)]
    if len(coords) > max_coords:
        picks = rng.choice(len(coords), size=max_coords, replace=False)
        coords = [coords[i] for i in sorted(picks)]

    def evaluate() -> float:
        return float(loss_fn(store.bind(Tape())).data)

    worst = 0.0
    for name, i in coords:
        flat = store._values[name].reshape(-1)
        orig = flat[i]
        flat[i] = orig + eps
        f_plus = evaluate()
        flat[i] = orig - eps
        f_minus = evaluate()
        flat[i] = orig
        g_num = (f_plus - f_minus) / (2.0 * eps)
        g_ana = float(grads[name].reshape(-1)[i])
        err = abs(g_ana - g_num) / max(1e-8, abs(g_ana) + abs(g_num))
        worst = max(worst, err)
    return worst


def glorot(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    """Uniform Glorot initialization for 2-d weights."""
    fan_in, fan_out = shape[-1], shape[0]
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)
