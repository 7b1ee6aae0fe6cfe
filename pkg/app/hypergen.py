# app/hypergen.py
"""
Hypernetwork generator G_rho: return command -> policy weights.

Every weight matrix K^j is a grid of slices. Slice (m, n) of K^j comes from
a shared head applied to [z^j_mn || c]:

    hidden layer (K2):  hidden_head -> f×f slices on a (hidden/f)×(hidden/f) grid
    input layer  (K1):  input_head  -> f×obs_dim slices on a (hidden/f)×1 grid
    output layer (K3):  output_head -> act_dim×f slices on a 1×(hidden/f) grid

Biases: bias_head maps each embedding of K1/K2 to an f-vector; slices are
stacked along the output dimension and averaged over the grid's input
dimension. The output bias uses out_bias_head (act_dim values per
embedding of K3, averaged the same way). Each layer is then scaled by
2/sqrt(fan_in).
"""
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Dict, List, Sequence, Tuple

import numpy as np

from app import fingerprint
from app.diffcore import AdamState, Params, Tape, adam_step
from app.errors import EmptyBatchError, NonFiniteError, TrainingDivergedError
from app.fingerprint import EvaluatorParams
from app.nn import init_mlp, mlp_graph
from app.policy import PolicyParams, check_slice_size

EMBEDDINGS = ("emb1", "emb2", "emb3")


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float = 0.1

    def __post_init__(self):
        if not self.sigma >= 0.0:
            raise ValueError(f"noise sigma must be >= 0, got {self.sigma}")


@dataclass(frozen=True, eq=False)
class GeneratorParams:
    arrays: Params
    obs_dim: int
    act_dim: int
    hidden: int
    slice_size: int = 16
    embedding_dim: int = 8
    head_hidden: int = 256
    output_scaling: bool = True
    bias_command: bool = True
    command_scale: float = 1.0

    @property
    def grid(self) -> int:
        return self.hidden // self.slice_size

    def with_arrays(self, arrays: Params) -> "GeneratorParams":
        return replace(self, arrays=dict(arrays))

    def metadata(self) -> Dict[str, object]:
        return {
            "obs_dim": self.obs_dim, "act_dim": self.act_dim, "hidden": self.hidden,
            "slice_size": self.slice_size, "embedding_dim": self.embedding_dim,
            "head_hidden": self.head_hidden, "output_scaling": self.output_scaling,
            "bias_command": self.bias_command, "command_scale": self.command_scale,
        }


def init_generator(obs_dim: int, act_dim: int, hidden: int, slice_size: int, embedding_dim: int,
                   rng: np.random.Generator, head_hidden: int = 256, output_scaling: bool = True,
                   bias_command: bool = True, command_scale: float = 1.0) -> GeneratorParams:
    check_slice_size(hidden, slice_size)
    f, d, h = slice_size, embedding_dim, head_hidden
    grid = hidden // f
    bias_in = d + 1 if bias_command else d
    arrays: Params = {}
    arrays.update(init_mlp("hidden_head", [d + 1, h, h, f * f], rng))
    arrays.update(init_mlp("input_head", [d + 1, h, h, f * obs_dim], rng))
    arrays.update(init_mlp("output_head", [d + 1, h, h, act_dim * f], rng))
    arrays.update(init_mlp("bias_head", [bias_in, h, h, f], rng))
    arrays.update(init_mlp("out_bias_head", [bias_in, h, h, act_dim], rng))
    bound = 1.0 / np.sqrt(d)
    for name, positions in zip(EMBEDDINGS, (grid, grid * grid, grid)):
        arrays[name] = rng.uniform(-bound, bound, size=(positions, d))
    return GeneratorParams(arrays, obs_dim, act_dim, hidden, f, d, head_hidden,
                           output_scaling, bias_command, command_scale)


# --- index maps (slice grids -> matrices) ---

@lru_cache(maxsize=None)
def _tile_index(batch: int, positions: int, width: int) -> np.ndarray:
    """Row b*P + p picks embedding p"""
    return np.tile(np.arange(positions * width).reshape(positions, width), (batch, 1))


@lru_cache(maxsize=None)
def _command_index(batch: int, positions: int) -> np.ndarray:
    return np.repeat(np.arange(batch), positions)[:, None]


@lru_cache(maxsize=None)
def _weight_index(sample: int, rows: int, cols: int, slice_rows: int, slice_cols: int) -> np.ndarray:
    """
    Transposed K for one sample from head outputs of shape (B*rows*cols) × (slice_rows*slice_cols).
    K[m*sr + i, n*sc + j] = out[b*rows*cols + m*cols + n, i*sc + j]
    """
    n = np.arange(cols)[:, None, None, None]
    j = np.arange(slice_cols)[None, :, None, None]
    m = np.arange(rows)[None, None, :, None]
    i = np.arange(slice_rows)[None, None, None, :]
    flat = (sample * rows * cols + m * cols + n) * (slice_rows * slice_cols) + i * slice_cols + j
    return flat.reshape(cols * slice_cols, rows * slice_rows)


@lru_cache(maxsize=None)
def _bias_index(sample: int, rows: int, cols: int, length: int) -> np.ndarray:
    """cols × (rows*length); averaging over axis 0 gives the bias"""
    n = np.arange(cols)[:, None, None]
    m = np.arange(rows)[None, :, None]
    i = np.arange(length)[None, None, :]
    flat = (sample * rows * cols + m * cols + n) * length + i
    return flat.reshape(cols, rows * length)


def _head_inputs(tape: Tape, embedding: int, commands: int, batch: int, positions: int,
                 width: int, with_command: bool) -> int:
    z = tape.gather(embedding, _tile_index(batch, positions, width))
    if not with_command:
        return z
    c = tape.gather(commands, _command_index(batch, positions))
    return tape.concat([z, c], axis=1)


def generator_graph(tape: Tape, g: GeneratorParams, nodes: Dict[str, int], commands: int,
                    batch: int) -> List[List[Tuple[int, int]]]:
    """Policy layers (w_j, b_j) in row convention for each of `batch` commands (B×1 node)"""
    f, d, grid = g.slice_size, g.embedding_dim, g.grid
    if g.command_scale != 1.0:
        commands = tape.scale(commands, g.command_scale)

    grids = {
        1: (grid, 1, nodes["emb1"]),
        2: (grid, grid, nodes["emb2"]),
        3: (1, grid, nodes["emb3"]),
    }
    weight_in, bias_in = {}, {}
    for j, (rows, cols, emb) in grids.items():
        weight_in[j] = _head_inputs(tape, emb, commands, batch, rows * cols, d, True)
        bias_in[j] = weight_in[j] if g.bias_command else _head_inputs(tape, emb, commands, batch, rows * cols, d, False)

    slices = {
        1: mlp_graph(tape, weight_in[1], nodes, "input_head"),
        2: mlp_graph(tape, weight_in[2], nodes, "hidden_head"),
        3: mlp_graph(tape, weight_in[3], nodes, "output_head"),
    }
    bias_slices = {
        1: mlp_graph(tape, bias_in[1], nodes, "bias_head"),
        2: mlp_graph(tape, bias_in[2], nodes, "bias_head"),
        3: mlp_graph(tape, bias_in[3], nodes, "out_bias_head"),
    }
    slice_shapes = {1: (f, g.obs_dim), 2: (f, f), 3: (g.act_dim, f)}
    bias_lengths = {1: f, 2: f, 3: g.act_dim}
    fan_in = {1: g.obs_dim, 2: g.hidden, 3: g.hidden}

    policies = []
    for b in range(batch):
        layers = []
        for j in (1, 2, 3):
            rows, cols, _ = grids[j]
            w = tape.gather(slices[j], _weight_index(b, rows, cols, *slice_shapes[j]))
            bias = tape.mean(tape.gather(bias_slices[j], _bias_index(b, rows, cols, bias_lengths[j])), axis=0)
            if g.output_scaling:
                factor = 2.0 / np.sqrt(fan_in[j])
                w, bias = tape.scale(w, factor), tape.scale(bias, factor)
            layers.append((w, bias))
        policies.append(layers)
    return policies


def _to_policy(values: Sequence[np.ndarray]) -> PolicyParams:
    w1, b1, w2, b2, w3, b3 = values
    return PolicyParams(w1.T.copy(), b1[0].copy(), w2.T.copy(), b2[0].copy(), w3.T.copy(), b3[0].copy())


def generate_batch(g: GeneratorParams, commands: Sequence[float]) -> List[PolicyParams]:
    commands = np.asarray(commands, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(commands)):
        raise NonFiniteError("return command")
    tape = Tape()
    nodes = tape.leaves(g.arrays, trainable=False)
    c = tape.input("commands")
    policies = generator_graph(tape, g, nodes, c, len(commands))
    for b, layers in enumerate(policies):
        for j, (w, bias) in enumerate(layers, start=1):
            tape.output(f"{b}/w{j}", w)
            tape.output(f"{b}/b{j}", bias)
    out = tape.evaluate({**g.arrays, "commands": commands[:, None]})
    return [
        _to_policy([out[f"{b}/{name}{j}"] for j in (1, 2, 3) for name in ("w", "b")])
        for b in range(len(commands))
    ]


def generate(g: GeneratorParams, command: float) -> PolicyParams:
    """Deterministic policy for one return command"""
    return generate_batch(g, [command])[0]


def sample_policy(g: GeneratorParams, command: float, noise: NoiseSpec, rng: np.random.Generator) -> PolicyParams:
    """generate() plus isotropic Gaussian parameter noise (after output scaling)"""
    base = generate(g, command)
    if noise.sigma == 0.0:
        return base
    flat = base.flatten()
    return PolicyParams.from_flat(flat + rng.normal(0.0, noise.sigma, size=flat.shape),
                                  base.obs_dim, base.act_dim, base.hidden)


def _loss_tape(g: GeneratorParams, w: EvaluatorParams, returns: Sequence[float]):
    returns = np.asarray(returns, dtype=np.float64).reshape(-1)
    if returns.size == 0:
        raise EmptyBatchError("generator update needs at least one return")
    if not np.all(np.isfinite(returns)):
        raise NonFiniteError("return command")
    tape = Tape()
    gen_nodes = tape.leaves(g.arrays, trainable=True)
    val_nodes = tape.leaves(w.arrays, trainable=False, prefix="evaluator/")
    commands = tape.input("commands")
    policies = generator_graph(tape, g, gen_nodes, commands, returns.size)
    values = fingerprint.value_graph(tape, w, val_nodes, policies)
    loss = tape.output("loss", tape.mean(tape.square(tape.sub(values, commands))))
    inputs = dict(g.arrays)
    inputs.update({f"evaluator/{k}": v for k, v in w.arrays.items()})
    inputs["commands"] = returns[:, None]
    return tape, inputs, loss


def generator_loss(g: GeneratorParams, w: EvaluatorParams, returns: Sequence[float]) -> float:
    """Mean of (r - V_w(G_rho(r)))^2 over the batch"""
    tape, inputs, _ = _loss_tape(g, w, returns)
    return float(tape.evaluate(inputs)["loss"][0, 0])


def generator_gradient(g: GeneratorParams, w: EvaluatorParams, returns: Sequence[float]) -> Tuple[float, Params]:
    tape, inputs, loss = _loss_tape(g, w, returns)
    value = float(tape.evaluate(inputs)["loss"][0, 0])
    return value, tape.gradient(loss)


def generator_update(g: GeneratorParams, w: EvaluatorParams, returns: Sequence[float],
                     opt: AdamState, lr: float) -> Tuple[GeneratorParams, AdamState, float]:
    """One Adam step on rho; the evaluator is held fixed"""
    loss, grads = generator_gradient(g, w, returns)
    if not np.isfinite(loss):
        raise TrainingDivergedError("generator loss is not finite", {"loss": loss, "batch": len(returns), "step": opt.t})
    arrays, opt = adam_step(g.arrays, grads, opt, lr)
    return g.with_arrays(arrays), opt, loss
