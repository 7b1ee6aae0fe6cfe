# app/trainer.py
"""
GoGePo outer loop.

Each iteration: sample a noisy policy for the current command, run one
training episode, store (return, theta), fit the evaluator, fit the
generator through the evaluator, then command best return + drive.
"""
import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from app.buffer import ReplayBuffer
from app.checkpoint import Checkpoint, load_checkpoint, model_checkpoint, restore_model, save_checkpoint
from app.diffcore import AdamState
from app.envs import RunningStat, evaluate_policy, make_env, rollout
from app.errors import CheckpointError, NonFiniteError, TrainingDivergedError
from app.fingerprint import EvaluatorParams, evaluator_update, init_evaluator
from app.hypergen import GeneratorParams, NoiseSpec, generate, generator_update, init_generator, sample_policy
from app.policy import PolicyParams
from app.runconfig import write_config
from app.schemas.config import TrainingConfig

logger = logging.getLogger(__name__)

STREAMS = ("init", "noise", "env", "sampling", "eval")
LOG_COLUMNS = (
    "interactions", "episode", "command", "eval_return_mean", "eval_return_std",
    "best_buffer_return", "loss_V", "loss_G",
)
CHECKPOINT_NAME = "checkpoint.ckpt"
LOG_NAME = "log.csv"
BUFFER_NAME = "buffer.bin"
CONFIG_NAME = "config.env"


def make_streams(seed: int) -> Dict[str, np.random.Generator]:
    """Independent named generators: (seed, stream index) -> SeedSequence"""
    return {name: np.random.default_rng(np.random.SeedSequence([seed, i])) for i, name in enumerate(STREAMS)}


@dataclass
class TrainerState:
    generator: GeneratorParams
    gen_opt: AdamState
    evaluator: EvaluatorParams
    val_opt: AdamState
    buffer: ReplayBuffer
    stat: RunningStat
    rngs: Dict[str, np.random.Generator]
    interactions: int = 0
    episodes: int = 0
    command: float = 0.0
    next_eval: int = 0
    loss_v: float = float("nan")
    loss_g: float = float("nan")
    env: object = field(default=None, repr=False)

    @property
    def policy_dims(self) -> Tuple[int, int, int]:
        return self.generator.obs_dim, self.generator.act_dim, self.generator.hidden


def init_state(config: TrainingConfig) -> TrainerState:
    env = make_env(config.env)
    spec = env.spec
    rngs = make_streams(config.seed)
    generator = init_generator(
        spec.obs_dim, spec.act_dim, config.hidden, config.slice_size, config.embedding_dim, rngs["init"],
        head_hidden=config.head_hidden, output_scaling=config.output_scaling,
        bias_command=config.bias_command, command_scale=config.command_scale,
    )
    evaluator = init_evaluator(spec.obs_dim, spec.act_dim, config.n_probing_states, rngs["init"],
                               value_hidden=config.value_hidden, output_activation=config.output_activation)
    buffer = ReplayBuffer(config.buffer_capacity, PolicyParams.flat_size(spec.obs_dim, spec.act_dim, config.hidden))
    return TrainerState(
        generator=generator, gen_opt=AdamState.zeros_like(generator.arrays),
        evaluator=evaluator, val_opt=AdamState.zeros_like(evaluator.arrays),
        buffer=buffer, stat=RunningStat(spec.obs_dim), rngs=rngs,
        next_eval=config.eval_interval, env=env,
    )


def next_command(buffer: ReplayBuffer, drive: float) -> float:
    """0 for an empty buffer, otherwise best stored return + drive"""
    if len(buffer) == 0:
        return 0.0
    return buffer.max_return() + drive


def train_iteration(state: TrainerState, config: TrainingConfig) -> TrainerState:
    theta = sample_policy(state.generator, state.command, NoiseSpec(config.noise_sigma), state.rngs["noise"])
    episode = rollout(state.env, theta, state.stat, state.rngs["env"], update_stats=True,
                      output_activation=config.output_activation)
    state.buffer.push(episode.ret, theta.flatten())
    state.interactions += episode.steps
    state.episodes += 1

    dims = state.policy_dims
    losses_v, losses_g = [], []
    try:
        for _ in range(config.evaluator_updates):
            entries = state.buffer.sample(config.batch_size, config.recency_exponent, state.rngs["sampling"])
            batch = [(entry.ret, PolicyParams.from_flat(entry.theta, *dims)) for entry in entries]
            state.evaluator, state.val_opt, loss = evaluator_update(state.evaluator, batch, state.val_opt, config.evaluator_lr)
            losses_v.append(loss)
        for _ in range(config.generator_updates):
            returns = state.buffer.sample_returns(config.batch_size, config.recency_exponent, state.rngs["sampling"])
            state.generator, state.gen_opt, loss = generator_update(state.generator, state.evaluator, returns,
                                                                    state.gen_opt, config.generator_lr)
            losses_g.append(loss)
    except (TrainingDivergedError, NonFiniteError) as exc:
        if isinstance(exc, TrainingDivergedError):
            message, diagnostics = exc.message, dict(exc.diagnostics)
        else:
            message, diagnostics = str(exc), {"what": exc.what}
        diagnostics.update(episode=state.episodes, interactions=state.interactions, command=state.command,
                           episode_return=episode.ret)
        logger.error("❌ training diverged: %s", exc)
        raise TrainingDivergedError(message, diagnostics) from exc

    state.loss_v = float(np.mean(losses_v))
    state.loss_g = float(np.mean(losses_g))
    state.command = next_command(state.buffer, config.drive)
    logger.debug("episode %d: return %.3f, steps %d, loss_V %.4g, loss_G %.4g, next command %.3f",
                 state.episodes, episode.ret, episode.steps, state.loss_v, state.loss_g, state.command)
    return state


def evaluate_generator(state: TrainerState, config: TrainingConfig) -> Tuple[float, np.ndarray]:
    """Deterministic policy for best return + drive, run on frozen stats"""
    command = next_command(state.buffer, config.drive)
    theta = generate(state.generator, command)
    returns = evaluate_policy(state.env, theta, state.stat, config.eval_episodes, state.rngs["eval"],
                              config.output_activation)
    return command, returns


# --- persistence ---

def state_checkpoint(state: TrainerState, config: TrainingConfig) -> Checkpoint:
    metadata = {
        "algorithm": "gogepo",
        "seed": config.seed,
        "interactions": state.interactions,
        "trainer": {
            "config": config.model_dump(mode="json"),
            "episodes": state.episodes,
            "command": state.command,
            "next_eval": state.next_eval,
            "loss_v": state.loss_v,
            "loss_g": state.loss_g,
            "gen_adam_t": state.gen_opt.t,
            "val_adam_t": state.val_opt.t,
            "rngs": {name: rng.bit_generator.state for name, rng in state.rngs.items()},
        },
    }
    checkpoint = model_checkpoint(state.generator, state.evaluator, state.stat, config.env, metadata)
    checkpoint.sections.update({
        "gen_adam_m": dict(state.gen_opt.m), "gen_adam_v": dict(state.gen_opt.v),
        "val_adam_m": dict(state.val_opt.m), "val_adam_v": dict(state.val_opt.v),
        "buffer": state.buffer.state_arrays(),
    })
    return checkpoint


def resume_state(path: Union[str, Path]) -> Tuple[TrainerState, TrainingConfig]:
    checkpoint = load_checkpoint(path)
    trainer = checkpoint.metadata.get("trainer")
    if trainer is None:
        raise CheckpointError(f"{path}: checkpoint has no trainer state to resume from")
    config = TrainingConfig.model_validate(trainer["config"])
    model = restore_model(checkpoint)
    rngs = {}
    for name in STREAMS:
        rng = np.random.default_rng()
        rng.bit_generator.state = trainer["rngs"][name]
        rngs[name] = rng
    sections = checkpoint.sections
    state = TrainerState(
        generator=model.generator,
        gen_opt=AdamState(dict(sections["gen_adam_m"]), dict(sections["gen_adam_v"]), trainer["gen_adam_t"]),
        evaluator=model.evaluator,
        val_opt=AdamState(dict(sections["val_adam_m"]), dict(sections["val_adam_v"]), trainer["val_adam_t"]),
        buffer=ReplayBuffer.from_state_arrays(sections["buffer"]),
        stat=model.stat, rngs=rngs,
        interactions=checkpoint.metadata["interactions"], episodes=trainer["episodes"],
        command=trainer["command"], next_eval=trainer["next_eval"],
        loss_v=trainer["loss_v"], loss_g=trainer["loss_g"],
        env=make_env(config.env),
    )
    return state, config


# --- run ---

def format_cell(value: Optional[float]) -> str:
    return "" if value is None else repr(float(value))


@dataclass
class RunResult:
    out_dir: Path
    checkpoint: Path
    log: Path
    rows: List[Dict[str, str]]


def open_log(path: Path, append: bool):
    new = not (append and path.exists())
    handle = path.open("a" if not new else "w", newline="", encoding="utf-8")
    writer = csv.writer(handle, lineterminator="\n")
    if new:
        writer.writerow(LOG_COLUMNS)
    return handle, writer


def train(config: Optional[TrainingConfig], out_dir: Union[str, Path], resume: Optional[Union[str, Path]] = None) -> RunResult:
    """Repeat train_iteration until the interaction budget; log every eval_interval steps"""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if resume is not None:
        state, stored = resume_state(resume)
        config = stored.model_copy(update={
            "total_interactions": config.total_interactions, "max_episodes": config.max_episodes,
        }) if config is not None else stored
    else:
        state = init_state(config)
    write_config(out / CONFIG_NAME, config)
    logger.info("🚀 GoGePo on %s: seed %d, budget %d steps, out %s",
                config.env, config.seed, config.total_interactions, out)

    rows: List[Dict[str, str]] = []
    handle, writer = open_log(out / LOG_NAME, append=resume is not None)
    try:
        while state.interactions < config.total_interactions:
            if config.max_episodes is not None and state.episodes >= config.max_episodes:
                break
            train_iteration(state, config)
            evaluation = None
            while state.next_eval <= min(state.interactions, config.total_interactions):
                if evaluation is None:
                    evaluation = evaluate_generator(state, config)
                command, returns = evaluation
                row = [state.next_eval, state.episodes, command, returns.mean(), returns.std(),
                       state.buffer.max_return(), state.loss_v, state.loss_g]
                writer.writerow([row[0], row[1]] + [format_cell(v) for v in row[2:]])
                handle.flush()
                rows.append(dict(zip(LOG_COLUMNS, (str(row[0]), str(row[1]), *(format_cell(v) for v in row[2:])))))
                logger.info("📈 %d steps | command %.2f | eval %.2f ± %.2f | best %.2f",
                            state.next_eval, command, returns.mean(), returns.std(), state.buffer.max_return())
                if config.save_stages:
                    stage = model_checkpoint(state.generator, state.evaluator, state.stat, config.env,
                                             {"algorithm": "gogepo", "seed": config.seed, "interactions": state.next_eval})
                    save_checkpoint(out / "stages" / f"step_{state.next_eval:08d}.ckpt", stage)
                state.next_eval += config.eval_interval
    finally:
        handle.close()

    checkpoint_path = save_checkpoint(out / CHECKPOINT_NAME, state_checkpoint(state, config))
    spec = state.env.spec
    state.buffer.dump(out / BUFFER_NAME, spec.obs_dim, spec.act_dim, config.hidden)
    logger.info("✅ finished after %d episodes / %d steps; best return %.2f",
                state.episodes, state.interactions, state.buffer.max_return() if len(state.buffer) else float("nan"))
    return RunResult(out, checkpoint_path, out / LOG_NAME, rows)
