# app/policy.py
"""
Deterministic two-hidden-layer MLP policy (the generated object).

Layout: K^j is stored out×in, biases are 1-D. The flat vector is
K1 row-major, b1, K2, b2, K3, b3.
"""
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from app.diffcore import Tape
from app.errors import GoGePoError, InvalidPermutationError, NonFiniteError, ShapeError

LAYER_NAMES = ("k1", "b1", "k2", "b2", "k3", "b3")


@dataclass(frozen=True, eq=False)
class PolicyParams:
    k1: np.ndarray
    b1: np.ndarray
    k2: np.ndarray
    b2: np.ndarray
    k3: np.ndarray
    b3: np.ndarray

    def __post_init__(self):
        hidden, obs_dim = self.k1.shape
        act_dim = self.k3.shape[0]
        expected = {
            "k1": (hidden, obs_dim), "b1": (hidden,),
            "k2": (hidden, hidden), "b2": (hidden,),
            "k3": (act_dim, hidden), "b3": (act_dim,),
        }
        for name, shape in expected.items():
            actual = getattr(self, name).shape
            if actual != shape:
                raise ShapeError(f"PolicyParams.{name}", shape, actual)

    @property
    def obs_dim(self) -> int:
        return self.k1.shape[1]

    @property
    def act_dim(self) -> int:
        return self.k3.shape[0]

    @property
    def hidden(self) -> int:
        return self.k1.shape[0]

    def arrays(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in LAYER_NAMES}

    def flatten(self) -> np.ndarray:
        return np.concatenate([getattr(self, name).ravel() for name in LAYER_NAMES])

    @staticmethod
    def flat_size(obs_dim: int, act_dim: int, hidden: int) -> int:
        return hidden * obs_dim + hidden + hidden * hidden + hidden + act_dim * hidden + act_dim

    @classmethod
    def from_flat(cls, vector: np.ndarray, obs_dim: int, act_dim: int, hidden: int) -> "PolicyParams":
        vector = np.asarray(vector, dtype=np.float64)
        size = cls.flat_size(obs_dim, act_dim, hidden)
        if vector.shape != (size,):
            raise ShapeError("PolicyParams.from_flat", (size,), vector.shape)
        shapes = [(hidden, obs_dim), (hidden,), (hidden, hidden), (hidden,), (act_dim, hidden), (act_dim,)]
        parts, offset = [], 0
        for shape in shapes:
            n = int(np.prod(shape))
            parts.append(vector[offset:offset + n].reshape(shape).copy())
            offset += n
        return cls(*parts)

    def tape_arrays(self) -> Dict[str, np.ndarray]:
        """Row-convention matrices for a tape: w_j = K_j^T (in×out), b_j as 1×out"""
        return {
            "w1": self.k1.T, "b1": self.b1[None, :],
            "w2": self.k2.T, "b2": self.b2[None, :],
            "w3": self.k3.T, "b3": self.b3[None, :],
        }

    def check_finite(self, what: str = "policy parameters") -> "PolicyParams":
        if not all(np.all(np.isfinite(getattr(self, name))) for name in LAYER_NAMES):
            raise NonFiniteError(what)
        return self


def check_slice_size(hidden: int, slice_size: int) -> None:
    if hidden < 1 or slice_size < 1 or hidden % slice_size != 0:
        raise GoGePoError(f"hidden width {hidden} is not divisible by slice size {slice_size}")


def init_policy(obs_dim: int, act_dim: int, hidden: int, rng: np.random.Generator,
                slice_size: int = 16) -> PolicyParams:
    """Weights and biases uniform in [-1/sqrt(n), 1/sqrt(n)], n = fan-in"""
    if obs_dim < 1 or act_dim < 1:
        raise GoGePoError(f"dimensions must be positive, got obs_dim={obs_dim}, act_dim={act_dim}")
    check_slice_size(hidden, slice_size)
    parts = []
    for fan_in, fan_out in ((obs_dim, hidden), (hidden, hidden), (hidden, act_dim)):
        bound = 1.0 / np.sqrt(fan_in)
        parts.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        parts.append(rng.uniform(-bound, bound, size=fan_out))
    return PolicyParams(*parts)


def zero_policy(obs_dim: int, act_dim: int, hidden: int) -> PolicyParams:
    return PolicyParams.from_flat(np.zeros(PolicyParams.flat_size(obs_dim, act_dim, hidden)), obs_dim, act_dim, hidden)


def policy_forward(params: PolicyParams, obs: np.ndarray,
                   bounds: Optional[Tuple[np.ndarray, np.ndarray]] = None,
                   output_activation: str = "linear") -> np.ndarray:
    """a = K3 tanh(K2 tanh(K1 obs + b1) + b2) + b3, then clipped to `bounds`"""
    obs = np.asarray(obs, dtype=np.float64)
    if obs.shape != (params.obs_dim,):
        raise ShapeError("policy_forward(obs)", (params.obs_dim,), obs.shape)
    if not np.all(np.isfinite(obs)):
        raise NonFiniteError("observation")
    h = np.tanh(params.k1 @ obs + params.b1)
    h = np.tanh(params.k2 @ h + params.b2)
    action = params.k3 @ h + params.b3
    if output_activation == "tanh":
        action = np.tanh(action)
    if bounds is not None:
        action = np.clip(action, bounds[0], bounds[1])
    return action


def policy_outputs(params: PolicyParams, states: np.ndarray, output_activation: str = "linear") -> np.ndarray:
    """Raw (unclipped) outputs for a batch of states, n×act_dim"""
    h = np.tanh(states @ params.k1.T + params.b1)
    h = np.tanh(h @ params.k2.T + params.b2)
    out = h @ params.k3.T + params.b3
    return np.tanh(out) if output_activation == "tanh" else out


def policy_graph(tape: Tape, states: int, layers: Sequence[Tuple[int, int]], output_activation: str = "linear") -> int:
    """Tape version of `policy_outputs`; `layers` holds (w_j, b_j) nodes in row convention"""
    (w1, b1), (w2, b2), (w3, b3) = layers
    h = tape.tanh(tape.add(tape.matmul(states, w1), b1))
    h = tape.tanh(tape.add(tape.matmul(h, w2), b2))
    out = tape.add(tape.matmul(h, w3), b3)
    return tape.tanh(out) if output_activation == "tanh" else out


def permute_hidden(params: PolicyParams, layer_index: int, permutation: Sequence[int]) -> PolicyParams:
    """Reorder the neurons of hidden layer 1 or 2 without changing the function"""
    if layer_index not in (1, 2):
        raise InvalidPermutationError(f"hidden layer index must be 1 or 2, got {layer_index}")
    perm = np.asarray(permutation)
    if perm.shape != (params.hidden,) or not np.array_equal(np.sort(perm), np.arange(params.hidden)):
        raise InvalidPermutationError(f"not a permutation of {params.hidden} hidden units")
    arrays = params.arrays()
    incoming, bias, outgoing = (("k1", "b1", "k2"), ("k2", "b2", "k3"))[layer_index - 1]
    arrays[incoming] = arrays[incoming][perm]
    arrays[bias] = arrays[bias][perm]
    arrays[outgoing] = arrays[outgoing][:, perm]
    return PolicyParams(**arrays)
