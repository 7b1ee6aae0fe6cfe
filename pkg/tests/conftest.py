import pytest

from app.schemas.config import TrainingConfig
from app.trainer import train
from tests.factories import tiny_config

SEEDS = range(5)


@pytest.fixture(scope="session")
def tiny_run(tmp_path_factory):
    """Three PointReacher episodes with stage checkpoints"""
    out = tmp_path_factory.mktemp("tiny_run")
    return train(tiny_config(save_stages=True), out)


@pytest.fixture(scope="session")
def pointreacher_runs(tmp_path_factory):
    """Five full-length PointReacher runs (slow tests only)"""
    out = tmp_path_factory.mktemp("pointreacher")
    return [
        train(TrainingConfig(env="pointreacher", seed=seed, hidden=64, total_interactions=200_000,
                             eval_interval=10_000), out / str(seed))
        for seed in SEEDS
    ]


def _mountaincar_runs(out, **overrides):
    return [
        train(TrainingConfig(env="mountaincar", seed=seed, hidden=64, total_interactions=100_000,
                             eval_interval=10_000, **overrides), out / str(seed))
        for seed in SEEDS
    ]


@pytest.fixture(scope="session")
def mountaincar_runs(tmp_path_factory):
    return _mountaincar_runs(tmp_path_factory.mktemp("mountaincar"))


@pytest.fixture(scope="session")
def mountaincar_unscaled_runs(tmp_path_factory):
    return _mountaincar_runs(tmp_path_factory.mktemp("mountaincar_unscaled"), output_scaling=False)
