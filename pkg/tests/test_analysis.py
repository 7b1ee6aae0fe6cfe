import csv
import io

import numpy as np
import pytest

from app.analysis import (
    fingerprint_map, fit_pca, identity_sweep, load_stages, pca_project, sweep_correlation, write_points_csv,
    write_sweep_csv,
)
from app.buffer import load_dump
from app.checkpoint import Model
from app.envs import RunningStat
from app.errors import GoGePoError
from app.schemas.analysis import FingerprintPoint, SweepRow
from app.schemas.config import TrainingConfig
from app.trainer import init_state
from tests.factories import tiny_evaluator, tiny_generator


def _tiny_model():
    return Model(tiny_generator(5), tiny_evaluator(5), RunningStat(2), "mountaincar", "linear", {})


def _rows(means):
    return [SweepRow(command=float(i), mean_return=m, std_return=0.0, episodes=1) for i, m in enumerate(means)]


def test_sweep_commands_are_evenly_spaced():
    rows = identity_sweep(_tiny_model(), -100.0, 100.0, 20, 1, np.random.default_rng(0))
    assert len(rows) == 20
    assert rows[0].command == -100.0 and rows[-1].command == 100.0
    assert rows[1].command == pytest.approx(-89.47368421, abs=1e-8)
    assert all(row.episodes == 1 for row in rows)


def test_sweep_is_reproducible():
    a = identity_sweep(_tiny_model(), -10.0, 10.0, 3, 2, np.random.default_rng(4))
    b = identity_sweep(_tiny_model(), -10.0, 10.0, 3, 2, np.random.default_rng(4))
    assert a == b


def test_sweep_rejects_bad_ranges():
    with pytest.raises(GoGePoError):
        identity_sweep(_tiny_model(), 5.0, 5.0, 10, 1, np.random.default_rng(0))
    with pytest.raises(GoGePoError):
        identity_sweep(_tiny_model(), 0.0, 5.0, 1, 1, np.random.default_rng(0))


def test_correlation():
    assert sweep_correlation(_rows([-3.0, 1.0, 2.0, 50.0])) == pytest.approx(1.0)
    assert sweep_correlation(_rows([4.0, 3.0, 2.0, 1.0])) == pytest.approx(-1.0)
    assert sweep_correlation(_rows([7.0, 7.0, 7.0])) == 0.0


def test_pca_axis_aligned():
    points = np.array([[-2.0, 0.0], [2.0, 0.0], [0.0, -1.0], [0.0, 1.0]])
    pca = fit_pca(points)
    np.testing.assert_allclose(np.abs(pca.components), np.eye(2), atol=1e-12)
    np.testing.assert_allclose(pca.variances, [8.0 / 3.0, 2.0 / 3.0], atol=1e-12)
    np.testing.assert_allclose(np.abs(pca.transform(points)), np.abs(points), atol=1e-12)


def test_pca_flat_cloud_in_3d():
    rng = np.random.default_rng(1)
    points = np.column_stack([rng.normal(size=30) * 3.0, rng.normal(size=30), np.zeros(30)])
    pca = fit_pca(points)
    assert np.all(np.abs(pca.components[:, 2]) < 1e-12)


def test_pca_matches_covariance_spectrum():
    points = np.random.default_rng(2).normal(size=(50, 10))
    pca = fit_pca(points)
    expected = np.sort(np.linalg.eigvalsh(np.cov(points, rowvar=False)))[::-1][:2]
    np.testing.assert_allclose(pca.variances, expected, atol=1e-8)
    assert pca.variances[0] >= pca.variances[1]
    projected = pca.transform(points)
    np.testing.assert_allclose(projected.var(axis=0, ddof=1), expected, atol=1e-8)


def test_pca_ignores_translation():
    points = np.random.default_rng(3).normal(size=(20, 4))
    np.testing.assert_allclose(pca_project(points), pca_project(points + 123.0), atol=1e-10)


def test_pca_signs_are_fixed():
    points = np.random.default_rng(6).normal(size=(15, 5))
    for axis in fit_pca(points).components:
        assert axis[np.argmax(np.abs(axis))] > 0


def test_pca_needs_two_points():
    with pytest.raises(GoGePoError):
        fit_pca(np.ones((1, 3)))


def test_fingerprint_map_on_a_run(tiny_run):
    dump = load_dump(tiny_run.out_dir / "buffer.bin")
    stages = load_stages(tiny_run.out_dir / "stages")
    assert [tag for tag, _ in stages] == ["generator@100", "generator@200", "generator@300"]
    points = fingerprint_map(tiny_run.checkpoint, dump, stages, n_commands=4, rng=np.random.default_rng(0))
    assert len(points) == len(dump.returns) + 3 * 4
    buffer_points = [p for p in points if p.source == "buffer"]
    assert [p.ret for p in buffer_points] == list(dump.returns)
    assert np.mean([p.x for p in buffer_points]) == pytest.approx(0.0, abs=1e-9)


def test_sweep_csv_to_stream():
    out = io.StringIO()
    assert write_sweep_csv(out, _rows([0.5, 1.25])) is None
    rows = list(csv.reader(io.StringIO(out.getvalue())))
    assert rows[0] == ["command", "mean_return", "std_return", "episodes"]
    assert rows[2] == ["1.0", "1.25", "0.0", "1"]


def test_points_csv_to_file(tmp_path):
    points = [FingerprintPoint(x=0.1, y=-2.0, ret=3.5, source="buffer")]
    path = write_points_csv(tmp_path / "maps" / "points.csv", points)
    assert path.read_text().splitlines() == ["x,y,return,source", "0.1,-2.0,3.5,buffer"]


@pytest.mark.slow
def test_untrained_generator_ignores_commands():
    config = TrainingConfig(env="mountaincar", seed=0, hidden=64)
    state = init_state(config)
    model = Model(state.generator, state.evaluator, state.stat, config.env, config.output_activation, {})
    rows = identity_sweep(model, -100.0, 100.0, 20, 1, np.random.default_rng(0))
    means = [row.mean_return for row in rows]
    assert np.std(means) < 0.1 * 200.0


@pytest.mark.slow
def test_trained_pointreacher_generator_follows_commands(pointreacher_runs):
    correlations = []
    for run in pointreacher_runs:
        returns = load_dump(run.out_dir / "buffer.bin").returns
        rows = identity_sweep(run.checkpoint, float(returns.min()), float(returns.max()), 20, 10,
                              np.random.default_rng(0))
        correlations.append(sweep_correlation(rows))
    assert sum(rho >= 0.8 for rho in correlations) >= 3
