# app/analysis.py
"""
Post-hoc analysis: command-vs-return identity sweeps and 2-D PCA maps of
policy fingerprints (buffer policies plus generator stages).
"""
import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, TextIO, Tuple, Union

import numpy as np
from scipy import stats

from app.buffer import BufferDump
from app.checkpoint import Model, load_model
from app.envs import evaluate_policy, make_env
from app.errors import GoGePoError
from app.fingerprint import probing_actions
from app.hypergen import generate_batch
from app.policy import PolicyParams
from app.schemas.analysis import FingerprintPoint, SweepRow

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ("command", "mean_return", "std_return", "episodes")
POINT_COLUMNS = ("x", "y", "return", "source")

ModelLike = Union[Model, str, Path]


def _model(model: ModelLike) -> Model:
    return model if isinstance(model, Model) else load_model(model)


def identity_sweep(model: ModelLike, c_min: float, c_max: float, n_commands: int, episodes: int,
                   rng: np.random.Generator) -> List[SweepRow]:
    """Noise-free policies for evenly spaced commands, evaluated on frozen stats"""
    if not c_min < c_max:
        raise GoGePoError(f"empty command range [{c_min}, {c_max}]")
    if n_commands < 2:
        raise GoGePoError(f"a sweep needs at least 2 commands, got {n_commands}")
    model = _model(model)
    env = make_env(model.env)
    commands = np.linspace(c_min, c_max, n_commands)
    rows = []
    for command, policy in zip(commands, generate_batch(model.generator, commands)):
        returns = evaluate_policy(env, policy, model.stat, episodes, rng, model.output_activation)
        rows.append(SweepRow(command=float(command), mean_return=float(returns.mean()),
                             std_return=float(returns.std()), episodes=episodes))
    logger.info("sweep over %d commands in [%.2f, %.2f] done", n_commands, c_min, c_max)
    return rows


def sweep_correlation(rows: Sequence[SweepRow]) -> float:
    """Spearman rank correlation between command and mean achieved return"""
    commands = [row.command for row in rows]
    means = [row.mean_return for row in rows]
    if max(means) == min(means):
        return 0.0
    return float(stats.spearmanr(commands, means).correlation)


# --- PCA ---

@dataclass(frozen=True, eq=False)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # 2×k
    variances: np.ndarray

    def transform(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - self.mean) @ self.components.T


def fit_pca(points: np.ndarray) -> PcaModel:
    """Top-2 eigenvectors of the sample covariance; each axis signed so its largest loading is positive"""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] < 2:
        raise GoGePoError(f"PCA needs at least 2 points, got shape {points.shape}")
    if points.shape[1] < 2:
        raise GoGePoError(f"PCA needs at least 2 dimensions, got {points.shape[1]}")
    mean = points.mean(axis=0)
    centered = points - mean
    cov = centered.T @ centered / (points.shape[0] - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals, kind="stable")[::-1][:2]
    components = eigvecs[:, order].T.copy()
    for axis in components:
        if axis[np.argmax(np.abs(axis))] < 0:
            axis *= -1.0
    return PcaModel(mean, components, np.maximum(eigvals[order], 0.0))


def pca_project(points: np.ndarray) -> np.ndarray:
    return fit_pca(points).transform(points)


# --- fingerprint maps ---

def load_stages(directory: Union[str, Path]) -> List[Tuple[str, Model]]:
    """Stage checkpoints written during training, oldest first"""
    stages = []
    for path in sorted(Path(directory).glob("step_*.ckpt")):
        model = load_model(path)
        stages.append((f"generator@{model.metadata.get('interactions', path.stem)}", model))
    return stages


def fingerprint_map(model: ModelLike, dump: BufferDump, stages: Iterable[Tuple[str, Model]] = (),
                    c_min: Optional[float] = None, c_max: Optional[float] = None, n_commands: int = 20,
                    episodes: int = 1, rng: Optional[np.random.Generator] = None) -> List[FingerprintPoint]:
    """
    PCA is fitted on the probing actions (final evaluator) of every buffer policy;
    generator stages are projected with the same PCA.
    """
    model = _model(model)
    rng = rng or np.random.default_rng(0)
    evaluator = model.evaluator
    dims = (dump.obs_dim, dump.act_dim, dump.hidden)
    buffer_points = np.stack([probing_actions(evaluator, PolicyParams.from_flat(theta, *dims)) for theta in dump.thetas])
    pca = fit_pca(buffer_points)

    points = [
        FingerprintPoint(x=float(x), y=float(y), ret=float(r), source="buffer")
        for (x, y), r in zip(pca.transform(buffer_points), dump.returns)
    ]
    stages = list(stages)
    if stages:
        env = make_env(model.env)
        low, high = env.spec.return_range
        commands = np.linspace(low if c_min is None else c_min, high if c_max is None else c_max, n_commands)
        for tag, stage in stages:
            policies = generate_batch(stage.generator, commands)
            coords = pca.transform(np.stack([probing_actions(evaluator, policy) for policy in policies]))
            for (x, y), policy in zip(coords, policies):
                achieved = evaluate_policy(env, policy, stage.stat, episodes, rng, stage.output_activation).mean()
                points.append(FingerprintPoint(x=float(x), y=float(y), ret=float(achieved), source=tag))
    return points


# --- CSV ---

Target = Union[str, Path, TextIO]


def _write_csv(target: Target, header: Sequence[str], records: Iterable[Sequence[object]]) -> Optional[Path]:
    if not isinstance(target, (str, Path)):
        writer = csv.writer(target, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(records)
        return None
    path = Path(target)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        _write_csv(fh, header, records)
    return path


def write_sweep_csv(target: Target, rows: Sequence[SweepRow]) -> Optional[Path]:
    return _write_csv(target, SWEEP_COLUMNS, (
        [repr(row.command), repr(row.mean_return), repr(row.std_return), row.episodes] for row in rows
    ))


def write_points_csv(target: Target, points: Sequence[FingerprintPoint]) -> Optional[Path]:
    return _write_csv(target, POINT_COLUMNS, (
        [repr(point.x), repr(point.y), repr(point.ret), point.source] for point in points
    ))
