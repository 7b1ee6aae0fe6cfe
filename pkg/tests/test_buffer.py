import numpy as np
import pytest

from app.buffer import ReplayBuffer, load_dump
from app.errors import CheckpointError, EmptyBufferError, NonFiniteError, ShapeError

EXPECTED_RECENCY = np.array([0.5665, 0.2643, 0.1692])  # ages 1, 2, 3


def _buffer(returns, capacity=10, size=3):
    buffer = ReplayBuffer(capacity, size)
    for i, r in enumerate(returns):
        buffer.push(r, np.full(size, float(i)))
    return buffer


def test_ring_evicts_oldest():
    buffer = _buffer([1.0, 2.0, 3.0], capacity=2)
    assert len(buffer) == 2
    entries = buffer.entries()
    assert [e.ret for e in entries] == [2.0, 3.0]
    assert [e.episode for e in entries] == [2, 3]
    np.testing.assert_array_equal(entries[0].theta, np.full(3, 1.0))


def test_ages_oldest_first():
    buffer = _buffer([0.0, 0.0, 0.0])
    np.testing.assert_array_equal(buffer.ages(), [3, 2, 1])


def test_recency_probabilities():
    p = _buffer([0.0, 0.0, 0.0]).probabilities(1.1)
    np.testing.assert_allclose(p[::-1], EXPECTED_RECENCY, atol=1e-4)


def test_recency_frequencies_over_a_million_draws():
    buffer = _buffer([0.0, 0.0, 0.0])
    picks = buffer.sample_indices(1_000_000, 1.1, np.random.default_rng(0))
    freqs = np.bincount(picks, minlength=3) / picks.size
    np.testing.assert_allclose(freqs[::-1], EXPECTED_RECENCY, atol=0.003)


def test_zero_exponent_is_uniform():
    np.testing.assert_allclose(_buffer([0.0] * 4).probabilities(0.0), np.full(4, 0.25))


def test_single_entry_always_sampled():
    buffer = _buffer([42.0])
    entries = buffer.sample(5, 1.1, np.random.default_rng(1))
    assert [e.ret for e in entries] == [42.0] * 5


def test_sampled_returns_follow_entries():
    buffer = _buffer([-1.0, 8.0])
    returns = buffer.sample_returns(50, 1.1, np.random.default_rng(2))
    assert set(returns.tolist()) <= {-1.0, 8.0}


def test_max_return():
    assert _buffer([-5.0, 120.0, 7.0]).max_return() == 120.0
    assert _buffer([-3.5]).max_return() == -3.5


def test_max_tracks_eviction():
    buffer = _buffer([100.0, 1.0, 2.0], capacity=2)
    assert buffer.max_return() == 2.0


def test_empty_buffer_errors():
    buffer = ReplayBuffer(4, 3)
    with pytest.raises(EmptyBufferError):
        buffer.sample(1, 1.1, np.random.default_rng(0))
    with pytest.raises(EmptyBufferError):
        buffer.max_return()


def test_push_validation():
    buffer = ReplayBuffer(4, 3)
    with pytest.raises(NonFiniteError):
        buffer.push(float("nan"), np.zeros(3))
    with pytest.raises(ShapeError):
        buffer.push(1.0, np.zeros(4))
    assert len(buffer) == 0


def test_state_arrays_restore_wrapped_ring():
    buffer = _buffer([1.0, 2.0, 3.0, 4.0, 5.0], capacity=3)
    restored = ReplayBuffer.from_state_arrays(buffer.state_arrays())
    np.testing.assert_array_equal(restored.returns(), buffer.returns())
    np.testing.assert_array_equal(restored.ages(), buffer.ages())
    np.testing.assert_array_equal(restored.thetas(), buffer.thetas())
    restored.push(6.0, np.zeros(3))
    buffer.push(6.0, np.zeros(3))
    np.testing.assert_array_equal(restored.returns(), buffer.returns())


def test_dump_and_load(tmp_path):
    buffer = _buffer([1.5, -2.0, 9.0], capacity=5, size=4)
    path = buffer.dump(tmp_path / "buffer.bin", 1, 1, 1)
    dump = load_dump(path)
    assert (dump.obs_dim, dump.act_dim, dump.hidden) == (1, 1, 1)
    np.testing.assert_array_equal(dump.returns, [1.5, -2.0, 9.0])
    np.testing.assert_array_equal(dump.episodes, [1, 2, 3])
    np.testing.assert_array_equal(dump.thetas, buffer.thetas())


def test_load_rejects_other_files(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"x" * 64)
    with pytest.raises(CheckpointError):
        load_dump(path)
