# app/buffer.py
"""Replay buffer of (return, flat policy) pairs with recency-weighted sampling."""
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np

from app.errors import CheckpointError, EmptyBufferError, NonFiniteError, ShapeError

DUMP_MAGIC = b"GGPBUF01"
DUMP_HEADER = struct.Struct("<8sqqq")  # magic, obs_dim, act_dim, hidden
DUMP_DIMS = struct.Struct("<qqqq")      # flat size, count, capacity, episode counter


@dataclass(frozen=True, eq=False)
class ReplayEntry:
    ret: float
    theta: np.ndarray
    episode: int


class ReplayBuffer:
    def __init__(self, capacity: int, flat_size: int):
        if capacity < 1:
            raise ValueError(f"buffer capacity must be positive, got {capacity}")
        self.capacity = capacity
        self.flat_size = flat_size
        self._returns = np.zeros(capacity)
        self._episodes = np.zeros(capacity, dtype=np.int64)
        self._thetas: List[Optional[np.ndarray]] = [None] * capacity
        self._next = 0
        self._size = 0
        self.episode_counter = 0

    def __len__(self) -> int:
        return self._size

    def _order(self) -> np.ndarray:
        """Slot indices from oldest to newest"""
        if self._size < self.capacity:
            return np.arange(self._size)
        return (np.arange(self.capacity) + self._next) % self.capacity

    def push(self, ret: float, theta: np.ndarray) -> None:
        if not np.isfinite(ret):
            raise NonFiniteError("episode return")
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.flat_size,):
            raise ShapeError("ReplayBuffer.push(theta)", (self.flat_size,), theta.shape)
        self.episode_counter += 1
        self._returns[self._next] = ret
        self._episodes[self._next] = self.episode_counter
        self._thetas[self._next] = theta.copy()
        self._next = (self._next + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def entries(self) -> List[ReplayEntry]:
        return [ReplayEntry(float(self._returns[i]), self._thetas[i].copy(), int(self._episodes[i]))
                for i in self._order()]

    def ages(self) -> np.ndarray:
        """Episodes since storage plus one, oldest first (newest entry has age 1)"""
        return self.episode_counter - self._episodes[self._order()] + 1

    def probabilities(self, exponent: float = 1.1) -> np.ndarray:
        if self._size == 0:
            raise EmptyBufferError("cannot sample from an empty replay buffer")
        if exponent < 0:
            raise ValueError(f"recency exponent must be >= 0, got {exponent}")
        weights = self.ages().astype(np.float64) ** -exponent
        return weights / weights.sum()

    def sample_indices(self, k: int, exponent: float, rng: np.random.Generator) -> np.ndarray:
        p = self.probabilities(exponent)
        picks = rng.choice(self._size, size=k, replace=True, p=p)
        return self._order()[picks]

    def sample(self, k: int, exponent: float, rng: np.random.Generator) -> List[ReplayEntry]:
        """k entries with replacement, P(age x) proportional to 1/x^exponent"""
        return [ReplayEntry(float(self._returns[i]), self._thetas[i].copy(), int(self._episodes[i]))
                for i in self.sample_indices(k, exponent, rng)]

    def sample_returns(self, k: int, exponent: float, rng: np.random.Generator) -> np.ndarray:
        return self._returns[self.sample_indices(k, exponent, rng)].copy()

    def max_return(self) -> float:
        if self._size == 0:
            raise EmptyBufferError("max_return of an empty replay buffer")
        return float(self._returns[self._order()].max())

    def returns(self) -> np.ndarray:
        return self._returns[self._order()].copy()

    def thetas(self) -> np.ndarray:
        order = self._order()
        if order.size == 0:
            return np.zeros((0, self.flat_size))
        return np.stack([self._thetas[i] for i in order])

    # --- persistence ---

    def state_arrays(self) -> Dict[str, np.ndarray]:
        order = self._order()
        return {
            "returns": self._returns[order].copy(),
            "episodes": self._episodes[order].astype(np.float64),
            "thetas": self.thetas(),
            "counters": np.array([[self.capacity, self.episode_counter]], dtype=np.float64),
        }

    @classmethod
    def from_state_arrays(cls, arrays: Dict[str, np.ndarray]) -> "ReplayBuffer":
        capacity, counter = (int(x) for x in arrays["counters"][0])
        thetas = arrays["thetas"]
        buffer = cls(capacity, thetas.shape[1])
        size = len(arrays["returns"])
        buffer._returns[:size] = arrays["returns"]
        buffer._episodes[:size] = arrays["episodes"].astype(np.int64)
        for i in range(size):
            buffer._thetas[i] = thetas[i].copy()
        buffer._size = size
        buffer._next = size % capacity
        buffer.episode_counter = counter
        return buffer

    def dump(self, path: Union[str, Path], obs_dim: int, act_dim: int, hidden: int) -> Path:
        """Binary stream: header, then (return, episode, flat theta) float64 records, oldest first"""
        path = Path(path)
        records = np.column_stack([self.returns(), self._episodes[self._order()].astype(np.float64), self.thetas()])
        with path.open("wb") as fh:
            fh.write(DUMP_HEADER.pack(DUMP_MAGIC, obs_dim, act_dim, hidden))
            fh.write(DUMP_DIMS.pack(self.flat_size, self._size, self.capacity, self.episode_counter))
            fh.write(np.ascontiguousarray(records, dtype="<f8").tobytes())
        return path


@dataclass(frozen=True, eq=False)
class BufferDump:
    obs_dim: int
    act_dim: int
    hidden: int
    returns: np.ndarray
    episodes: np.ndarray
    thetas: np.ndarray


def load_dump(path: Union[str, Path]) -> BufferDump:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read buffer dump {path}: {exc}") from exc
    head = DUMP_HEADER.size + DUMP_DIMS.size
    if len(data) < head:
        raise CheckpointError(f"{path}: truncated buffer dump header")
    magic, obs_dim, act_dim, hidden = DUMP_HEADER.unpack_from(data, 0)
    if magic != DUMP_MAGIC:
        raise CheckpointError(f"{path}: not a buffer dump")
    flat_size, count, _, _ = DUMP_DIMS.unpack_from(data, DUMP_HEADER.size)
    records = np.frombuffer(data, dtype="<f8", offset=head)
    if records.size != count * (flat_size + 2):
        raise CheckpointError(f"{path}: expected {count} records of {flat_size + 2} values")
    records = records.reshape(count, flat_size + 2).astype(np.float64)
    return BufferDump(obs_dim, act_dim, hidden, records[:, 0].copy(),
                      records[:, 1].astype(np.int64), records[:, 2:].copy())
