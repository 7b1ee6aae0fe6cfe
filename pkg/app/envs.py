# app/envs.py
"""
Built-in continuous-control environments, observation normalization and rollouts.

Both environments are deterministic given the reset state; returns are
undiscounted sums of raw rewards.
"""
import math
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Tuple

import numpy as np

from app.errors import GoGePoError, NonFiniteError
from app.policy import PolicyParams, policy_forward


@dataclass(frozen=True)
class EnvSpec:
    name: str
    obs_dim: int
    act_dim: int
    action_low: Tuple[float, ...]
    action_high: Tuple[float, ...]
    horizon: int
    return_range: Tuple[float, float]

    @property
    def bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.array(self.action_low), np.array(self.action_high)


class StepResult(NamedTuple):
    state: np.ndarray
    reward: float
    done: bool


class MountainCarContinuous:
    """Classic-control continuous mountain car"""

    MIN_POSITION = -1.2
    MAX_POSITION = 0.6
    MAX_SPEED = 0.07
    GOAL_POSITION = 0.45
    POWER = 0.0015
    GRAVITY = 0.0025
    GOAL_REWARD = 100.0
    ACTION_COST = 0.1

    spec = EnvSpec("mountaincar", 2, 1, (-1.0,), (1.0,), 999, (-100.0, 100.0))

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        return np.array([rng.uniform(-0.6, -0.4), 0.0])

    def observe(self, state: np.ndarray) -> np.ndarray:
        return state.copy()

    def step(self, state: np.ndarray, action: np.ndarray) -> StepResult:
        action = _checked_action(self.spec, action)
        force = float(action[0])
        position, velocity = float(state[0]), float(state[1])

        velocity += force * self.POWER - self.GRAVITY * math.cos(3.0 * position)
        velocity = min(max(velocity, -self.MAX_SPEED), self.MAX_SPEED)
        position += velocity
        position = min(max(position, self.MIN_POSITION), self.MAX_POSITION)
        if position == self.MIN_POSITION and velocity < 0:
            velocity = 0.0

        done = position >= self.GOAL_POSITION
        reward = -self.ACTION_COST * force * force
        if done:
            reward += self.GOAL_REWARD
        return StepResult(np.array([position, velocity]), reward, done)


class PointReacher:
    """2-D point mass pushed towards a fixed target; dense reward -||p - target||"""

    TARGET = (0.6, 0.6)
    DT = 0.1

    spec = EnvSpec("pointreacher", 4, 2, (-1.0, -1.0), (1.0, 1.0), 100, (-100.0, 0.0))

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        return np.zeros(4)

    def observe(self, state: np.ndarray) -> np.ndarray:
        return state.copy()

    def step(self, state: np.ndarray, action: np.ndarray) -> StepResult:
        action = _checked_action(self.spec, action)
        velocity = state[2:] + action * self.DT
        position = state[:2] + velocity * self.DT
        reward = -float(np.linalg.norm(position - np.array(self.TARGET)))
        return StepResult(np.concatenate([position, velocity]), reward, False)


ENVIRONMENTS = {
    "mountaincar": MountainCarContinuous,
    "pointreacher": PointReacher,
}


def make_env(name: str):
    try:
        return ENVIRONMENTS[name.lower()]()
    except KeyError:
        raise GoGePoError(f"unknown environment {name!r}, expected one of {sorted(ENVIRONMENTS)}") from None


def _checked_action(spec: EnvSpec, action: np.ndarray) -> np.ndarray:
    action = np.asarray(action, dtype=np.float64).reshape(spec.act_dim)
    if not np.all(np.isfinite(action)):
        raise NonFiniteError("action")
    low, high = spec.bounds
    return np.clip(action, low, high)


# --- observation normalization ---

class RunningStat:
    """Streaming mean / variance (Welford)"""

    def __init__(self, shape: int):
        self.count = 0
        self.mean = np.zeros(shape)
        self.m2 = np.zeros(shape)

    def update(self, obs: np.ndarray) -> "RunningStat":
        obs = np.asarray(obs, dtype=np.float64)
        if not np.all(np.isfinite(obs)):
            raise NonFiniteError("observation")
        self.count += 1
        delta = obs - self.mean
        self.mean = self.mean + delta / self.count
        self.m2 = self.m2 + delta * (obs - self.mean)
        return self

    @property
    def var(self) -> np.ndarray:
        if self.count < 2:
            return np.ones_like(self.mean)
        return self.m2 / (self.count - 1)

    def normalize(self, obs: np.ndarray) -> np.ndarray:
        obs = np.asarray(obs, dtype=np.float64)
        if self.count < 2:
            return obs
        return (obs - self.mean) / np.sqrt(self.var + 1e-8)

    def copy(self) -> "RunningStat":
        other = RunningStat(self.mean.shape[0])
        other.count, other.mean, other.m2 = self.count, self.mean.copy(), self.m2.copy()
        return other

    def state_arrays(self) -> Dict[str, np.ndarray]:
        return {"count": np.array([[float(self.count)]]), "mean": self.mean[None, :].copy(), "m2": self.m2[None, :].copy()}

    @classmethod
    def from_state_arrays(cls, arrays: Dict[str, np.ndarray]) -> "RunningStat":
        stat = cls(arrays["mean"].shape[1])
        stat.count = int(arrays["count"][0, 0])
        stat.mean = arrays["mean"][0].copy()
        stat.m2 = arrays["m2"][0].copy()
        return stat


def update_stat(stat: RunningStat, obs: np.ndarray) -> RunningStat:
    return stat.update(obs)


def normalize_obs(stat: RunningStat, obs: np.ndarray) -> np.ndarray:
    return stat.normalize(obs)


# --- rollouts ---

class Episode(NamedTuple):
    ret: float
    steps: int
    actions: Optional[List[np.ndarray]] = None


def rollout(env, params: PolicyParams, stat: RunningStat, rng: np.random.Generator,
            update_stats: bool, output_activation: str = "linear", record: bool = False) -> Episode:
    """One episode with gamma = 1; stats change only when `update_stats` is set"""
    params.check_finite()
    spec = env.spec
    bounds = spec.bounds
    state = env.reset(rng)
    total, steps = 0.0, 0
    actions: Optional[List[np.ndarray]] = [] if record else None
    for _ in range(spec.horizon):
        obs = env.observe(state)
        if update_stats:
            stat.update(obs)
        action = policy_forward(params, stat.normalize(obs), bounds, output_activation)
        if record:
            actions.append(action)
        state, reward, done = env.step(state, action)
        total += reward
        steps += 1
        if done:
            break
    return Episode(total, steps, actions)


def evaluate_policy(env, params: PolicyParams, stat: RunningStat, episodes: int, rng: np.random.Generator,
                    output_activation: str = "linear") -> np.ndarray:
    """Returns of `episodes` evaluation rollouts on a frozen stats snapshot, in index order"""
    frozen = stat.copy()
    seeds = rng.integers(0, 2**63 - 1, size=episodes)
    return np.array([
        rollout(env, params, frozen, np.random.default_rng(int(seed)), False, output_activation).ret
        for seed in seeds
    ])
