import csv

import numpy as np
import pytest

from app.ars import ars_train, ars_update
from app.checkpoint import load_checkpoint
from app.errors import GoGePoError
from app.schemas.config import ArsConfig
from app.trainer import LOG_COLUMNS


def test_single_direction_update():
    delta = np.array([[1.0, -2.0, 0.5]])
    theta = ars_update(np.zeros(3), delta, [1.0], [0.0], step_size=0.01, n_elite=1)
    np.testing.assert_allclose(theta, 0.02 * delta[0])


def test_equal_rewards_keep_theta():
    deltas = np.random.default_rng(0).normal(size=(4, 5))
    theta = np.arange(5.0)
    np.testing.assert_array_equal(ars_update(theta, deltas, [1.0, 2.0, 3.0, 4.0], [1.0, 2.0, 3.0, 4.0], 0.01, 4), theta)


def test_zero_step_keeps_theta():
    deltas = np.random.default_rng(1).normal(size=(2, 3))
    np.testing.assert_array_equal(ars_update(np.ones(3), deltas, [1.0, 5.0], [0.0, 2.0], 0.0, 2), np.ones(3))


def test_elites_pick_best_directions():
    deltas = np.eye(3)
    theta = ars_update(np.zeros(3), deltas, [0.0, 10.0, 1.0], [0.0, 0.0, 0.0], 1.0, n_elite=1)
    assert theta[1] > 0 and theta[0] == 0.0 and theta[2] == 0.0


def test_reward_scale_cancels():
    rng = np.random.default_rng(2)
    deltas = rng.normal(size=(6, 4))
    r_plus, r_minus = rng.normal(size=6), rng.normal(size=6)
    a = ars_update(np.zeros(4), deltas, r_plus, r_minus, 0.05, 3)
    b = ars_update(np.zeros(4), deltas, 7.5 * r_plus, 7.5 * r_minus, 0.05, 3)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-15)


def test_too_many_elites():
    with pytest.raises(GoGePoError):
        ars_update(np.zeros(2), np.eye(2), [1.0, 0.0], [0.0, 0.0], 0.01, n_elite=3)


def _small_config(**overrides):
    values = dict(env="pointreacher", seed=2, hidden=16, slice_size=16, total_interactions=1000,
                  eval_interval=500, eval_episodes=2, n_directions=2, n_elite=1)
    values.update(overrides)
    return ArsConfig(**values)


def test_short_run_writes_log_and_checkpoint(tmp_path):
    result = ars_train(_small_config(), tmp_path)
    with result.run.log.open() as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == LOG_COLUMNS
    assert len(rows) == 3
    assert [row[0] for row in rows[1:]] == ["500", "1000"]
    assert all(row[2] == "" and row[6] == "" and row[7] == "" for row in rows[1:])
    checkpoint = load_checkpoint(result.run.checkpoint)
    assert checkpoint.metadata["algorithm"] == "ars"
    np.testing.assert_array_equal(checkpoint.sections["policy"]["theta"][0], result.policy.flatten())
    assert (tmp_path / "config.env").exists()


def test_runs_are_bit_reproducible(tmp_path):
    a = ars_train(_small_config(), tmp_path / "a")
    b = ars_train(_small_config(), tmp_path / "b")
    assert a.run.log.read_bytes() == b.run.log.read_bytes()
    assert a.run.checkpoint.read_bytes() == b.run.checkpoint.read_bytes()


@pytest.mark.slow
def test_mountaincar_baseline_solves_some_seeds(tmp_path):
    finals = []
    for seed in range(5):
        config = ArsConfig(env="mountaincar", seed=seed, total_interactions=100_000)
        result = ars_train(config, tmp_path / str(seed))
        finals.append(float(result.run.rows[-1]["eval_return_mean"]))
    assert sum(r >= 90 for r in finals) >= 2


@pytest.mark.slow
def test_pointreacher_best_return_keeps_improving(tmp_path):
    config = ArsConfig(env="pointreacher", seed=0, hidden=64, total_interactions=100_000, eval_interval=10_000)
    best = [float(row["best_buffer_return"]) for row in ars_train(config, tmp_path).run.rows]
    assert np.mean(np.diff(best) >= 0) >= 0.8
    assert best[-1] > best[0]
