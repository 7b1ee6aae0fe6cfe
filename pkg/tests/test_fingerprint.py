import numpy as np
import pytest

from app.diffcore import AdamState, finite_difference
from app.errors import EmptyBatchError, ShapeError
from app.fingerprint import evaluate, evaluator_gradient, evaluator_loss, evaluator_update, init_evaluator, probing_actions
from app.policy import PolicyParams, init_policy, permute_hidden, zero_policy
from tests.factories import tiny_evaluator, tiny_policy


def _value_oracle(w, params):
    pa = probing_actions(w, params)[None, :]
    a = w.arrays
    h = np.maximum(pa @ a["value.l0.weight"] + a["value.l0.bias"], 0.0)
    h = np.maximum(h @ a["value.l1.weight"] + a["value.l1.bias"], 0.0)
    return float((h @ a["value.l2.weight"] + a["value.l2.bias"])[0, 0])


def test_value_input_width():
    w = init_evaluator(2, 1, 200, np.random.default_rng(0), value_hidden=16)
    assert w.arrays["value.l0.weight"].shape == (200, 16)
    assert w.probing_states.shape == (200, 2)
    assert w.probing_states.min() >= 0.0 and w.probing_states.max() < 1.0


def test_zero_policy_has_zero_fingerprint():
    w = tiny_evaluator()
    np.testing.assert_array_equal(probing_actions(w, zero_policy(2, 1, 16)), np.zeros(8))


def test_probing_actions_are_raw_outputs():
    w = tiny_evaluator()
    arrays = zero_policy(2, 1, 16).arrays()
    arrays["b3"] = np.array([7.0])
    np.testing.assert_array_equal(probing_actions(w, PolicyParams(**arrays)), np.full(8, 7.0))


def test_dimension_mismatch():
    w = tiny_evaluator()
    with pytest.raises(ShapeError):
        probing_actions(w, init_policy(3, 1, 16, np.random.default_rng(0), slice_size=4))


def test_symmetry_invariance_over_random_pairs():
    rng = np.random.default_rng(11)
    w = tiny_evaluator(1)
    for trial in range(100):
        params = tiny_policy(trial)
        permuted = permute_hidden(params, int(rng.integers(1, 3)), rng.permutation(16))
        np.testing.assert_allclose(probing_actions(w, permuted), probing_actions(w, params), rtol=0, atol=1e-10)
        assert abs(evaluate(w, permuted) - evaluate(w, params)) <= 1e-10


def test_constant_value_network():
    w = tiny_evaluator()
    arrays = {k: (np.zeros_like(v) if k.startswith("value.") else v) for k, v in w.arrays.items()}
    arrays["value.l2.bias"] = np.array([[5.0]])
    w = w.with_arrays(arrays)
    for seed in range(3):
        assert evaluate(w, tiny_policy(seed)) == 5.0


def test_value_matches_composed_oracle():
    w = tiny_evaluator(2)
    params = tiny_policy(4)
    assert evaluate(w, params) == pytest.approx(_value_oracle(w, params), abs=1e-12)


def test_loss_graph_matches_direct_computation():
    w = tiny_evaluator(3)
    batch = [(float(r), tiny_policy(seed)) for seed, r in enumerate([1.0, -2.0, 0.5])]
    expected = np.mean([(evaluate(w, params) - r) ** 2 for r, params in batch])
    assert evaluator_loss(w, batch) == pytest.approx(expected, rel=1e-12)


def test_zero_learning_rate_keeps_evaluator():
    w = tiny_evaluator()
    batch = [(3.0, tiny_policy(0)), (-1.0, tiny_policy(1))]
    new, opt, loss = evaluator_update(w, batch, AdamState.zeros_like(w.arrays), lr=0.0)
    for name, value in w.arrays.items():
        np.testing.assert_array_equal(new.arrays[name], value)
    assert opt.t == 1
    assert np.isfinite(loss)


def test_update_reduces_loss_on_fixed_batch():
    w = tiny_evaluator()
    batch = [(3.0, tiny_policy(0)), (-1.0, tiny_policy(1))]
    opt = AdamState.zeros_like(w.arrays)
    first = evaluator_loss(w, batch)
    for _ in range(50):
        w, opt, _ = evaluator_update(w, batch, opt, lr=5e-3)
    assert evaluator_loss(w, batch) < first


def test_empty_batch():
    w = tiny_evaluator()
    with pytest.raises(EmptyBatchError):
        evaluator_update(w, [], AdamState.zeros_like(w.arrays), lr=1e-3)


@pytest.mark.parametrize("seed", range(10))
def test_evaluator_gradient_matches_finite_difference(seed):
    rng = np.random.default_rng(100 + seed)
    w = tiny_evaluator(seed)
    batch = [(float(rng.normal(scale=5.0)), tiny_policy(seed * 10 + i)) for i in range(3)]
    _, grads = evaluator_gradient(w, batch)
    names = sorted(w.arrays)
    for _ in range(2):
        direction = {name: rng.normal(size=w.arrays[name].shape) for name in names}
        norm = np.sqrt(sum(float(np.sum(d * d)) for d in direction.values()))
        direction = {name: d / norm for name, d in direction.items()}
        analytic = sum(float(np.sum(grads[name] * direction[name])) for name in names)

        def f(t):
            moved = {name: w.arrays[name] + t[0] * direction[name] for name in names}
            return evaluator_loss(w.with_arrays(moved), batch)

        numeric = finite_difference(f, np.zeros(1), h=1e-6)[0]
        assert abs(analytic - numeric) <= 1e-4 * max(abs(analytic), abs(numeric), 1e-8)


@pytest.mark.slow
def test_evaluator_regresses_smooth_labels():
    w = tiny_evaluator(0, value_hidden=32)
    policies = [tiny_policy(1000 + i) for i in range(200)]
    fingerprints = np.stack([probing_actions(w, params) for params in policies])
    labels = 10.0 * np.tanh(fingerprints.mean(axis=1)) + fingerprints[:, 0]
    batch = list(zip(labels.tolist(), policies))
    target = 0.01 * labels.var()
    opt = AdamState.zeros_like(w.arrays)
    loss = evaluator_loss(w, batch)
    for _ in range(10_000):
        if loss < target:
            break
        w, opt, loss = evaluator_update(w, batch, opt, lr=5e-3)
    assert evaluator_loss(w, batch) < target


def _widen(params, hidden):
    """Same input-output map with extra hidden units that stay at zero"""
    pad = hidden - params.hidden
    k2 = np.zeros((hidden, hidden))
    k2[:params.hidden, :params.hidden] = params.k2
    return PolicyParams(
        k1=np.vstack([params.k1, np.zeros((pad, params.obs_dim))]),
        b1=np.concatenate([params.b1, np.zeros(pad)]),
        k2=k2,
        b2=np.concatenate([params.b2, np.zeros(pad)]),
        k3=np.hstack([params.k3, np.zeros((params.act_dim, pad))]),
        b3=params.b3.copy(),
    )


def test_value_ignores_hidden_width():
    w = tiny_evaluator(4)
    for seed in range(5):
        narrow = tiny_policy(seed)
        wide = _widen(narrow, 32)
        assert wide.hidden == 32
        np.testing.assert_allclose(probing_actions(w, wide), probing_actions(w, narrow), rtol=0, atol=1e-12)
        assert evaluate(w, wide) == pytest.approx(evaluate(w, narrow), abs=1e-12)


def test_single_pair_regression():
    w = tiny_evaluator(0, value_hidden=32)
    batch = [(10.0, tiny_policy(0))]
    opt = AdamState.zeros_like(w.arrays)
    for _ in range(2000):
        w, opt, _ = evaluator_update(w, batch, opt, lr=5e-3)
    assert (evaluate(w, batch[0][1]) - 10.0) ** 2 < 1e-2
