# app/ars.py
"""
Augmented Random Search baseline (observation normalization + elite directions).

Same MLP policy, normalization and evaluation cadence as the GoGePo trainer;
logs use the trainer's CSV schema with empty command and loss columns.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np

from app.checkpoint import Checkpoint, save_checkpoint
from app.envs import RunningStat, evaluate_policy, make_env, rollout
from app.errors import GoGePoError, ShapeError
from app.policy import PolicyParams, init_policy
from app.runconfig import write_config
from app.schemas.config import ArsConfig
from app.trainer import CHECKPOINT_NAME, CONFIG_NAME, LOG_COLUMNS, LOG_NAME, RunResult, format_cell, make_streams, open_log

logger = logging.getLogger(__name__)

REWARD_STD_FLOOR = 1e-8


def ars_update(theta: np.ndarray, deltas: np.ndarray, rewards_plus: Sequence[float],
               rewards_minus: Sequence[float], step_size: float, n_elite: int) -> np.ndarray:
    """theta + step / (b * sigma_R) * sum over elite (r+ - r-) delta"""
    deltas = np.asarray(deltas, dtype=np.float64)
    r_plus = np.asarray(rewards_plus, dtype=np.float64)
    r_minus = np.asarray(rewards_minus, dtype=np.float64)
    n = deltas.shape[0]
    if r_plus.shape != (n,) or r_minus.shape != (n,):
        raise ShapeError("ars_update(rewards)", (n,), (r_plus.shape, r_minus.shape))
    if not 1 <= n_elite <= n:
        raise GoGePoError(f"elite directions ({n_elite}) must be between 1 and the number of directions ({n})")

    scores = np.maximum(r_plus, r_minus)
    # keep elites in their original order so b = N reproduces the full sum exactly
    elite = np.sort(np.argsort(-scores, kind="stable")[:n_elite])
    sigma = max(float(np.concatenate([r_plus[elite], r_minus[elite]]).std()), REWARD_STD_FLOOR)
    step = (r_plus[elite] - r_minus[elite]) @ deltas[elite]
    return theta + step_size / (n_elite * sigma) * step


@dataclass
class ArsResult:
    policy: PolicyParams
    stat: RunningStat
    run: RunResult


def ars_train(config: ArsConfig, out_dir: Union[str, Path]) -> ArsResult:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_config(out / CONFIG_NAME, config)

    env = make_env(config.env)
    spec = env.spec
    dims = (spec.obs_dim, spec.act_dim, config.hidden)
    rngs = make_streams(config.seed)
    theta = init_policy(*dims, rngs["init"], slice_size=config.slice_size).flatten()
    stat = RunningStat(spec.obs_dim)
    interactions, episodes, next_eval = 0, 0, config.eval_interval
    best = -np.inf
    rows: List[dict] = []
    logger.info("🚀 ARS on %s: seed %d, %d directions (%d elite), step %.3g, noise %.3g",
                config.env, config.seed, config.n_directions, config.n_elite, config.step_size, config.noise)

    handle, writer = open_log(out / LOG_NAME, append=False)
    try:
        while interactions < config.total_interactions:
            deltas = rngs["noise"].standard_normal((config.n_directions, theta.size))
            r_plus, r_minus = np.zeros(config.n_directions), np.zeros(config.n_directions)
            for i, delta in enumerate(deltas):
                for sign, store in ((1.0, r_plus), (-1.0, r_minus)):
                    candidate = PolicyParams.from_flat(theta + sign * config.noise * delta, *dims)
                    episode = rollout(env, candidate, stat, rngs["env"], update_stats=True,
                                      output_activation=config.output_activation)
                    store[i] = episode.ret
                    interactions += episode.steps
                    episodes += 1
                    best = max(best, episode.ret)
            theta = ars_update(theta, deltas, r_plus, r_minus, config.step_size, config.n_elite)

            evaluation = None
            while next_eval <= min(interactions, config.total_interactions):
                if evaluation is None:
                    evaluation = evaluate_policy(env, PolicyParams.from_flat(theta, *dims), stat,
                                                 config.eval_episodes, rngs["eval"], config.output_activation)
                values = [next_eval, episodes, None, evaluation.mean(), evaluation.std(), best, None, None]
                cells = [str(values[0]), str(values[1])] + [format_cell(v) for v in values[2:]]
                writer.writerow(cells)
                handle.flush()
                rows.append(dict(zip(LOG_COLUMNS, cells)))
                logger.info("📈 %d steps | eval %.2f ± %.2f | best %.2f",
                            next_eval, evaluation.mean(), evaluation.std(), best)
                next_eval += config.eval_interval
    finally:
        handle.close()

    policy = PolicyParams.from_flat(theta, *dims)
    checkpoint = Checkpoint(
        metadata={
            "algorithm": "ars", "env": config.env, "seed": config.seed, "interactions": interactions,
            "policy": {"obs_dim": dims[0], "act_dim": dims[1], "hidden": dims[2],
                       "output_activation": config.output_activation},
            "config": config.model_dump(mode="json"),
        },
        sections={"policy": {"theta": theta[None, :]}, "normalizer": stat.state_arrays()},
    )
    path = save_checkpoint(out / CHECKPOINT_NAME, checkpoint)
    logger.info("✅ ARS finished after %d episodes / %d steps; best return %.2f", episodes, interactions, best)
    return ArsResult(policy, stat, RunResult(out, path, out / LOG_NAME, rows))
