"""Tiny instances shared by the tests."""
import numpy as np

from app.fingerprint import init_evaluator
from app.hypergen import init_generator
from app.policy import init_policy
from app.schemas.config import TrainingConfig

# obs 2, act 1, hidden 16, slice 4, embeddings 3, 8 probing states
TINY = dict(obs_dim=2, act_dim=1, hidden=16, slice_size=4, embedding_dim=3, n_probing_states=8,
            head_hidden=6, value_hidden=6)


def tiny_generator(seed: int = 0, **overrides):
    opts = dict(head_hidden=TINY["head_hidden"])
    opts.update(overrides)
    return init_generator(TINY["obs_dim"], TINY["act_dim"], TINY["hidden"], TINY["slice_size"],
                          TINY["embedding_dim"], np.random.default_rng(seed), **opts)


def tiny_evaluator(seed: int = 0, **overrides):
    opts = dict(value_hidden=TINY["value_hidden"])
    opts.update(overrides)
    return init_evaluator(TINY["obs_dim"], TINY["act_dim"], TINY["n_probing_states"], np.random.default_rng(seed), **opts)


def tiny_policy(seed: int = 0):
    return init_policy(TINY["obs_dim"], TINY["act_dim"], TINY["hidden"], np.random.default_rng(seed),
                       slice_size=TINY["slice_size"])


def tiny_config(**overrides) -> TrainingConfig:
    values = dict(
        env="pointreacher", seed=3, hidden=16, slice_size=4, embedding_dim=3, head_hidden=8,
        value_hidden=8, n_probing_states=8, total_interactions=300, eval_interval=100, eval_episodes=2,
    )
    values.update(overrides)
    return TrainingConfig(**values)


