# app/nn.py
"""Dense MLP blocks shared by the generator heads and the value network."""
from typing import Mapping, Sequence

import numpy as np

from app.diffcore import Params, Tape


def layer_names(prefix: str, n_layers: int):
    return [(f"{prefix}.l{i}.weight", f"{prefix}.l{i}.bias") for i in range(n_layers)]


def init_mlp(prefix: str, sizes: Sequence[int], rng: np.random.Generator) -> Params:
    """Uniform ±1/sqrt(fan_in) for weights (in×out) and biases (1×out)"""
    params: Params = {}
    for (w_name, b_name), fan_in, fan_out in zip(layer_names(prefix, len(sizes) - 1), sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        params[w_name] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        params[b_name] = rng.uniform(-bound, bound, size=(1, fan_out))
    return params


def count_layers(params: Mapping[str, object], prefix: str) -> int:
    return sum(1 for name in params if name.startswith(prefix + ".l") and name.endswith(".weight"))


def mlp_graph(tape: Tape, x: int, nodes: Mapping[str, int], prefix: str, activation: str = "relu") -> int:
    """Hidden layers use `activation`, the last layer is linear"""
    n_layers = count_layers(nodes, prefix)
    act = tape.relu if activation == "relu" else tape.tanh
    h = x
    for i, (w_name, b_name) in enumerate(layer_names(prefix, n_layers)):
        h = tape.add(tape.matmul(h, nodes[w_name]), nodes[b_name])
        if i < n_layers - 1:
            h = act(h)
    return h


def mlp_forward(params: Mapping[str, np.ndarray], prefix: str, x: np.ndarray, activation: str = "relu") -> np.ndarray:
    n_layers = count_layers(params, prefix)
    act = (lambda z: np.maximum(z, 0.0)) if activation == "relu" else np.tanh
    h = x
    for i, (w_name, b_name) in enumerate(layer_names(prefix, n_layers)):
        h = h @ params[w_name] + params[b_name]
        if i < n_layers - 1:
            h = act(h)
    return h
