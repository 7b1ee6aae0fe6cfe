# app/fingerprint.py
"""
Parameter-based value function V_w with policy fingerprinting.

A policy is judged only by its raw outputs on a set of learnable probing
states; those probing actions go through the value MLP U. w = probing
states + U, trained jointly.
"""
from dataclasses import dataclass, replace
from typing import Dict, List, Sequence, Tuple

import numpy as np

from app.diffcore import AdamState, Params, Tape, adam_step
from app.errors import EmptyBatchError, ShapeError, TrainingDivergedError
from app.nn import init_mlp, mlp_forward, mlp_graph
from app.policy import PolicyParams, policy_graph, policy_outputs

PROBING_STATES = "probing_states"
VALUE_PREFIX = "value"


@dataclass(frozen=True, eq=False)
class EvaluatorParams:
    arrays: Params
    obs_dim: int
    act_dim: int
    n_probing_states: int
    value_hidden: int = 256
    output_activation: str = "linear"

    @property
    def probing_states(self) -> np.ndarray:
        return self.arrays[PROBING_STATES]

    def with_arrays(self, arrays: Params) -> "EvaluatorParams":
        return replace(self, arrays=dict(arrays))

    def metadata(self) -> Dict[str, object]:
        return {
            "obs_dim": self.obs_dim, "act_dim": self.act_dim, "n_probing_states": self.n_probing_states,
            "value_hidden": self.value_hidden, "output_activation": self.output_activation,
        }


def init_evaluator(obs_dim: int, act_dim: int, n_probing_states: int, rng: np.random.Generator,
                   value_hidden: int = 256, output_activation: str = "linear") -> EvaluatorParams:
    """Probing states uniform in [0, 1); U uniform ±1/sqrt(fan_in)"""
    if n_probing_states < 1:
        raise ShapeError("init_evaluator(n_probing_states)", ">= 1", n_probing_states)
    arrays: Params = {PROBING_STATES: rng.uniform(0.0, 1.0, size=(n_probing_states, obs_dim))}
    arrays.update(init_mlp(VALUE_PREFIX, [n_probing_states * act_dim, value_hidden, value_hidden, 1], rng))
    return EvaluatorParams(arrays, obs_dim, act_dim, n_probing_states, value_hidden, output_activation)


def _check_dims(w: EvaluatorParams, params: PolicyParams) -> None:
    if (params.obs_dim, params.act_dim) != (w.obs_dim, w.act_dim):
        raise ShapeError("fingerprint(policy dims)", (w.obs_dim, w.act_dim), (params.obs_dim, params.act_dim))


def probing_actions(w: EvaluatorParams, params: PolicyParams) -> np.ndarray:
    """Raw policy outputs on every probing state, concatenated state-major"""
    _check_dims(w, params)
    return policy_outputs(params, w.probing_states, w.output_activation).ravel()


def evaluate(w: EvaluatorParams, params: PolicyParams) -> float:
    pa = probing_actions(w, params)
    return float(mlp_forward(w.arrays, VALUE_PREFIX, pa[None, :])[0, 0])


def value_graph(tape: Tape, w: EvaluatorParams, nodes: Dict[str, int],
                policies: Sequence[Sequence[Tuple[int, int]]]) -> int:
    """V_w for a batch of policies given as tape layers; returns a B×1 node"""
    states = nodes[PROBING_STATES]
    flatten = np.arange(w.n_probing_states * w.act_dim).reshape(1, -1)
    rows = []
    for layers in policies:
        actions = policy_graph(tape, states, layers, w.output_activation)
        rows.append(tape.gather(actions, flatten))
    fingerprints = rows[0] if len(rows) == 1 else tape.concat(rows, axis=0)
    return mlp_graph(tape, fingerprints, nodes, VALUE_PREFIX, activation="relu")


def _policy_leaves(tape: Tape, index: int) -> List[Tuple[int, int]]:
    prefix = f"policy{index}/"
    return [(tape.input(f"{prefix}w{j}"), tape.input(f"{prefix}b{j}")) for j in (1, 2, 3)]


def _loss_tape(w: EvaluatorParams, batch: Sequence[Tuple[float, PolicyParams]]):
    if not batch:
        raise EmptyBatchError("evaluator update needs at least one (return, policy) pair")
    tape = Tape()
    nodes = tape.leaves(w.arrays, trainable=True)
    inputs: Dict[str, np.ndarray] = dict(w.arrays)
    policies = []
    for index, (_, params) in enumerate(batch):
        _check_dims(w, params)
        policies.append(_policy_leaves(tape, index))
        inputs.update({f"policy{index}/{k}": v for k, v in params.tape_arrays().items()})
    returns = tape.input("returns")
    inputs["returns"] = np.array([[float(r)] for r, _ in batch])
    values = value_graph(tape, w, nodes, policies)
    loss = tape.output("loss", tape.mean(tape.square(tape.sub(values, returns))))
    return tape, inputs, loss


def evaluator_loss(w: EvaluatorParams, batch: Sequence[Tuple[float, PolicyParams]]) -> float:
    """Mean squared error between returns and V_w over the batch"""
    tape, inputs, _ = _loss_tape(w, batch)
    return float(tape.evaluate(inputs)["loss"][0, 0])


def evaluator_gradient(w: EvaluatorParams, batch: Sequence[Tuple[float, PolicyParams]]) -> Tuple[float, Params]:
    tape, inputs, loss = _loss_tape(w, batch)
    value = float(tape.evaluate(inputs)["loss"][0, 0])
    return value, tape.gradient(loss)


def evaluator_update(w: EvaluatorParams, batch: Sequence[Tuple[float, PolicyParams]],
                     opt: AdamState, lr: float) -> Tuple[EvaluatorParams, AdamState, float]:
    """One Adam step on probing states and U; policies are constants"""
    loss, grads = evaluator_gradient(w, batch)
    if not np.isfinite(loss):
        raise TrainingDivergedError("evaluator loss is not finite", {"loss": loss, "batch": len(batch), "step": opt.t})
    arrays, opt = adam_step(w.arrays, grads, opt, lr)
    return w.with_arrays(arrays), opt, loss
