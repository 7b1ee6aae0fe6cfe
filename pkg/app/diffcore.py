# app/diffcore.py
"""
Reverse-mode differentiation over dense float64 matrices, plus Adam.

A Tape is built once per batch: leaves are named placeholders (trainable
parameters or constant inputs), every other node is one primitive applied to
earlier nodes. `evaluate` binds the leaves and runs the nodes in insertion
order; `gradient` walks them backwards from a scalar loss.
"""
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from app.errors import GoGePoError, NonFiniteError, ShapeError, UnboundInputError

Params = Dict[str, np.ndarray]


@dataclass(frozen=True, eq=False)
class Node:
    index: int
    op: str
    inputs: Tuple[int, ...] = ()
    name: Optional[str] = None
    attrs: dict = field(default_factory=dict)

    @property
    def label(self) -> str:
        suffix = f"[{self.name}]" if self.name else ""
        return f"{self.op}#{self.index}{suffix}"


class Tape:
    def __init__(self):
        self.nodes: List[Node] = []
        self.values: List[Optional[np.ndarray]] = []
        self.adjoints: List[Optional[np.ndarray]] = []
        self.outputs: Dict[str, int] = {}
        self._leaves: Dict[str, int] = {}
        self._trainable: Dict[str, int] = {}

    def __len__(self) -> int:
        return len(self.nodes)

    def _push(self, op: str, inputs: Sequence[int] = (), name: Optional[str] = None, **attrs) -> int:
        index = len(self.nodes)
        for i in inputs:
            if not 0 <= i < index:
                raise GoGePoError(f"{op}#{index}: input {i} does not precede the node")
        self.nodes.append(Node(index, op, tuple(inputs), name, attrs))
        self.values.append(None)
        self.adjoints.append(None)
        return index

    # --- leaves ---

    def param(self, name: str) -> int:
        """Trainable leaf; `gradient` reports its derivative"""
        node = self._leaf(name, "param")
        self._trainable[name] = node
        return node

    def input(self, name: str) -> int:
        """Constant leaf"""
        return self._leaf(name, "input")

    def _leaf(self, name: str, op: str) -> int:
        if name in self._leaves:
            raise GoGePoError(f"leaf {name!r} declared twice")
        node = self._push(op, name=name)
        self._leaves[name] = node
        return node

    def leaves(self, arrays: Mapping[str, np.ndarray], trainable: bool, prefix: str = "") -> Dict[str, int]:
        """Declare one leaf per named array; returns name -> node"""
        make = self.param if trainable else self.input
        return {name: make(prefix + name) for name in arrays}

    def output(self, name: str, node: int) -> int:
        self.outputs[name] = node
        return node

    # --- primitives ---

    def matmul(self, a: int, b: int) -> int:
        return self._push("matmul", (a, b))

    def add(self, a: int, b: int) -> int:
        """a + b, with b either a's shape or a 1×m row broadcast over rows (bias add)"""
        return self._push("add", (a, b))

    def tanh(self, a: int) -> int:
        return self._push("tanh", (a,))

    def relu(self, a: int) -> int:
        return self._push("relu", (a,))

    def concat(self, parts: Sequence[int], axis: int = 0) -> int:
        if not parts:
            raise GoGePoError("concat of nothing")
        return self._push("concat", tuple(parts), axis=axis)

    def scale(self, a: int, factor: float) -> int:
        return self._push("scale", (a,), factor=float(factor))

    def square(self, a: int) -> int:
        return self._push("square", (a,))

    def mean(self, a: int, axis: Optional[int] = None) -> int:
        return self._push("mean", (a,), axis=axis)

    def gather(self, a: int, index: np.ndarray) -> int:
        """out[i, j] = a.ravel()[index[i, j]]; covers reshape, tiling and slice assembly"""
        index = np.asarray(index, dtype=np.int64)
        if index.ndim != 2:
            raise ShapeError(f"gather#{len(self.nodes)}", "2-D index", index.shape)
        return self._push("gather", (a,), index=index)

    def sub(self, a: int, b: int) -> int:
        return self.add(a, self.scale(b, -1.0))

    # --- forward ---

    def evaluate(self, inputs: Mapping[str, np.ndarray]) -> Dict[str, np.ndarray]:
        """Bind leaves, run every node in order; returns the named outputs"""
        for node in self.nodes:
            if node.op in ("param", "input"):
                if node.name not in inputs:
                    raise UnboundInputError(node.name)
                value = np.asarray(inputs[node.name], dtype=np.float64)
                if value.ndim != 2:
                    raise ShapeError(node.label, "2-D matrix", value.shape)
                self.values[node.index] = value
            else:
                self.values[node.index] = self._forward(node)
        self.adjoints = [None] * len(self.nodes)
        return {name: self.values[i] for name, i in self.outputs.items()}

    def value(self, node: int) -> np.ndarray:
        value = self.values[node]
        if value is None:
            raise GoGePoError(f"{self.nodes[node].label} has not been evaluated")
        return value

    def _forward(self, node: Node) -> np.ndarray:
        args = [self.values[i] for i in node.inputs]
        op = node.op
        if op == "matmul":
            a, b = args
            if a.shape[1] != b.shape[0]:
                raise ShapeError(node.label, (a.shape[1], "*"), b.shape)
            return a @ b
        if op == "add":
            a, b = args
            if b.shape != a.shape and b.shape != (1, a.shape[1]):
                raise ShapeError(node.label, [a.shape, (1, a.shape[1])], b.shape)
            return a + b
        if op == "tanh":
            return np.tanh(args[0])
        if op == "relu":
            return np.maximum(args[0], 0.0)
        if op == "concat":
            axis = node.attrs["axis"]
            other = 1 - axis
            expected = args[0].shape[other]
            for arg in args[1:]:
                if arg.shape[other] != expected:
                    raise ShapeError(node.label, expected, arg.shape)
            return np.concatenate(args, axis=axis)
        if op == "scale":
            return node.attrs["factor"] * args[0]
        if op == "square":
            return args[0] * args[0]
        if op == "mean":
            axis = node.attrs["axis"]
            if axis is None:
                return np.array([[args[0].mean()]])
            return args[0].mean(axis=axis, keepdims=True)
        if op == "gather":
            index = node.attrs["index"]
            size = args[0].size
            if index.size and (index.min() < 0 or index.max() >= size):
                raise ShapeError(node.label, f"indices in [0, {size})", (int(index.min()), int(index.max())))
            return args[0].ravel()[index]
        raise GoGePoError(f"unknown primitive {op!r}")

    # --- backward ---

    def gradient(self, loss: int) -> Dict[str, np.ndarray]:
        """d loss / d p for every trainable leaf; adjoints are reset afterwards"""
        value = self.value(loss)
        if value.shape != (1, 1):
            raise ShapeError(f"{self.nodes[loss].label} (loss)", (1, 1), value.shape)
        adjoints: List[Optional[np.ndarray]] = [None] * len(self.nodes)
        adjoints[loss] = np.ones((1, 1))
        for node in reversed(self.nodes[: loss + 1]):
            g = adjoints[node.index]
            if g is None or not node.inputs:
                continue
            for i, contribution in zip(node.inputs, self._backward(node, g)):
                if contribution is None:
                    continue
                adjoints[i] = contribution if adjoints[i] is None else adjoints[i] + contribution
        grads = {}
        for name, i in self._trainable.items():
            grads[name] = adjoints[i] if adjoints[i] is not None else np.zeros_like(self.value(i))
        self.adjoints = [None] * len(self.nodes)
        return grads

    def _backward(self, node: Node, g: np.ndarray) -> List[Optional[np.ndarray]]:
        args = [self.values[i] for i in node.inputs]
        op = node.op
        if op == "matmul":
            a, b = args
            return [g @ b.T, a.T @ g]
        if op == "add":
            a, b = args
            gb = g if b.shape == a.shape else g.sum(axis=0, keepdims=True)
            return [g, gb]
        if op == "tanh":
            out = self.values[node.index]
            return [g * (1.0 - out * out)]
        if op == "relu":
            return [g * (args[0] > 0.0)]
        if op == "concat":
            axis = node.attrs["axis"]
            bounds = np.cumsum([arg.shape[axis] for arg in args])[:-1]
            return list(np.split(g, bounds, axis=axis))
        if op == "scale":
            return [node.attrs["factor"] * g]
        if op == "square":
            return [2.0 * args[0] * g]
        if op == "mean":
            a = args[0]
            axis = node.attrs["axis"]
            if axis is None:
                return [np.full(a.shape, g[0, 0] / a.size)]
            return [np.broadcast_to(g / a.shape[axis], a.shape).copy()]
        if op == "gather":
            a = args[0]
            index = node.attrs["index"]
            flat = np.bincount(index.ravel(), weights=g.ravel(), minlength=a.size)
            return [flat.reshape(a.shape)]
        raise GoGePoError(f"unknown primitive {op!r}")


# --- Adam ---

@dataclass(frozen=True)
class AdamState:
    m: Params
    v: Params
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: Mapping[str, np.ndarray]) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
        )


def adam_step(params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray],
              state: AdamState, lr: float) -> Tuple[Params, AdamState]:
    """One bias-corrected Adam update; returns new params and state, inputs untouched"""
    for name, g in grads.items():
        if name not in params:
            raise GoGePoError(f"gradient for unknown parameter {name!r}")
        if g.shape != params[name].shape or state.m[name].shape != g.shape:
            raise ShapeError(f"adam[{name}]", params[name].shape, g.shape)
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"gradient of {name}")

    t = state.t + 1
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    new_params, new_m, new_v = dict(params), dict(state.m), dict(state.v)
    for name, g in grads.items():
        m = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        v = state.beta2 * state.v[name] + (1.0 - state.beta2) * (g * g)
        new_m[name], new_v[name] = m, v
        new_params[name] = params[name] - lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return new_params, AdamState(new_m, new_v, t, state.beta1, state.beta2, state.eps)


def finite_difference(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central differences (f(x + h e_i) - f(x - h e_i)) / 2h per coordinate"""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat, out = x.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        saved = flat[i]
        flat[i] = saved + h
        upper = f(x)
        flat[i] = saved - h
        lower = f(x)
        flat[i] = saved
        out[i] = (upper - lower) / (2.0 * h)
    return grad
