import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccl.errors import ConfigError, DimensionError, PreconditionError, TrainingError
from ccl.gradcheck import check_gradients
from ccl.loss import ccl_pair_loss
from ccl.network import (
    LayerSpec,
    MLPParams,
    backward,
    enumerate_pairs,
    forward,
    init_params,
    load_checkpoint,
    make_optimizer,
    optimizer_step,
    predict_clusters,
    save_checkpoint,
    softmax,
    step_decay_lr,
)


def zero_params(spec):
    p = init_params(spec, 0)
    return MLPParams([np.zeros_like(w) for w in p.weights], [np.zeros_like(b) for b in p.biases])


def test_layer_spec_validation():
    with pytest.raises(ConfigError):
        LayerSpec(3, [4], 1)
    with pytest.raises(ConfigError):
        LayerSpec(3, [0], 2)
    with pytest.raises(ConfigError):
        LayerSpec(0, [], 2)


def test_init_deterministic_and_seeded():
    spec = LayerSpec(5, [7, 3], 4)
    a, b, c = init_params(spec, 1), init_params(spec, 1), init_params(spec, 2)
    for x, y in zip(a.arrays(), b.arrays()):
        assert x.tobytes() == y.tobytes()
    assert any(not np.array_equal(x, y) for x, y in zip(a.weights, c.weights))


def test_init_shapes_and_bounds():
    spec = LayerSpec(6, [], 3)
    p = init_params(spec, 0)
    assert [w.shape for w in p.weights] == [(6, 3)]
    assert np.all(p.biases[0] == 0)
    assert np.abs(p.weights[0]).max() <= np.sqrt(6 / 6)


def test_forward_zero_weights_uniform():
    spec = LayerSpec(3, [4], 5)
    tr = forward(zero_params(spec), np.random.default_rng(0).normal(size=(6, 3)))
    np.testing.assert_allclose(tr.probs, 1 / 5)


def test_forward_duplicate_rows_identical():
    spec = LayerSpec(3, [4, 4], 3)
    x = np.random.default_rng(0).normal(size=(1, 3))
    tr = forward(init_params(spec, 0), np.vstack([x, x]))
    assert tr.probs[0].tobytes() == tr.probs[1].tobytes()


def test_softmax_overflow_safe():
    p = softmax(np.array([[1000.0, 0.0]]))
    np.testing.assert_array_equal(p, [[1.0, 0.0]])


def test_forward_dimension_mismatch():
    with pytest.raises(DimensionError):
        forward(init_params(LayerSpec(3, [], 2), 0), np.zeros((2, 4)))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 8))
def test_forward_permutation_equivariant(seed, n):
    rng = np.random.default_rng(seed)
    spec = LayerSpec(4, [5, 3], 3)
    params = init_params(spec, seed)
    x = rng.normal(size=(n, 4))
    perm = rng.permutation(n)
    np.testing.assert_allclose(forward(params, x[perm]).probs, forward(params, x).probs[perm], rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(forward(params, x).probs.sum(axis=1), 1.0)


@pytest.mark.parametrize("n, count", [(2, 1), (4, 6), (100, 4950)])
def test_enumerate_pairs_count(n, count):
    rows, cols = enumerate_pairs(n)
    assert rows.size == count
    assert np.all(rows < cols)
    assert len(set(zip(rows.tolist(), cols.tolist()))) == count


def test_enumerate_pairs_small():
    rows, cols = enumerate_pairs(2)
    assert list(zip(rows.tolist(), cols.tolist())) == [(0, 1)]
    with pytest.raises(PreconditionError):
        enumerate_pairs(1)


def _pair_grads(params, x, rng, scale=1.0):
    tr = forward(params, x)
    rows, cols = enumerate_pairs(len(x))
    labels = rng.random(rows.size) < 0.5
    grads = []
    for i, j, lab in zip(rows, cols, labels):
        g = ccl_pair_loss(tr.probs[i], tr.probs[j], bool(lab))
        grads.append((scale * g.grad_p, scale * g.grad_q))
    return tr, grads, (rows, cols)


def test_backward_zero_and_linearity():
    rng = np.random.default_rng(0)
    spec = LayerSpec(3, [4], 3)
    params = init_params(spec, 0)
    x = rng.normal(size=(4, 3))
    tr, grads, pairs = _pair_grads(params, x, np.random.default_rng(1))
    zero = backward(params, tr, [(np.zeros(3), np.zeros(3))] * len(grads), pairs)
    assert all(not g.any() for g in zero.arrays())
    g1 = backward(params, tr, grads, pairs)
    _, grads2, _ = _pair_grads(params, x, np.random.default_rng(1), scale=2.0)
    g2 = backward(params, tr, grads2, pairs)
    for a, b in zip(g1.arrays(), g2.arrays()):
        np.testing.assert_allclose(b, 2 * a, rtol=1e-12)


def test_backward_misaligned():
    spec = LayerSpec(3, [], 3)
    params = init_params(spec, 0)
    tr = forward(params, np.zeros((3, 3)))
    with pytest.raises(DimensionError):
        backward(params, tr, [(np.zeros(3), np.zeros(3))], enumerate_pairs(3))


@pytest.mark.parametrize("kind", ["ccl", "kcl"])
def test_two_layer_net_finite_differences(kind):
    rng = np.random.default_rng(11)
    spec = LayerSpec(3, [5, 4], 3)
    params = init_params(spec, 3)
    for b in params.biases:
        b[:] = rng.normal(scale=0.1, size=b.shape)
    x = rng.normal(size=(4, 3))
    similar = np.array([True, False, False, True, False, True])
    res = check_gradients(params, x, similar, kind)
    assert res.max_rel_error() < 1e-4


@pytest.mark.parametrize("kind", ["ccl", "kcl"])
def test_balanced_weighting_gradients(kind):
    rng = np.random.default_rng(12)
    spec = LayerSpec(2, [4], 4, "tanh")
    params = init_params(spec, 5)
    x = rng.normal(size=(5, 2))
    similar = rng.random(10) < 0.3
    res = check_gradients(params, x, similar, kind, activation="tanh", weighting="balanced")
    assert res.max_rel_error() < 1e-4


def test_sgd_step_definition():
    params = MLPParams([np.array([[1.0]])], [np.array([0.0])])
    grads = MLPParams([np.array([[0.5]])], [np.array([0.0])])
    opt = make_optimizer("sgd", params, 0.1)
    optimizer_step(params, grads, opt)
    assert params.weights[0][0, 0] == pytest.approx(0.95)
    assert opt.step == 1


def test_zero_lr_is_identity():
    spec = LayerSpec(3, [4], 2)
    params = init_params(spec, 0)
    before = params.copy()
    grads = init_params(spec, 1)
    for kind in ("sgd", "adam"):
        optimizer_step(params, grads, make_optimizer(kind, params, 0.0))
    for a, b in zip(params.arrays(), before.arrays()):
        np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("g", [1e-3, -0.7, 42.0])
def test_adam_first_step_magnitude_is_lr(g):
    params = MLPParams([np.array([[0.0]])], [np.array([0.0])])
    grads = MLPParams([np.array([[g]])], [np.array([0.0])])
    opt = make_optimizer("adam", params, 0.001)
    optimizer_step(params, grads, opt)
    # m_hat / sqrt(v_hat) = g / |g| at t = 1
    assert params.weights[0][0, 0] == pytest.approx(-0.001 * np.sign(g), rel=1e-4)


def test_sgd_momentum_accumulates():
    params = MLPParams([np.array([[0.0]])], [np.array([0.0])])
    grads = MLPParams([np.array([[1.0]])], [np.array([0.0])])
    opt = make_optimizer("sgd", params, 0.1, momentum=0.9)
    optimizer_step(params, grads, opt)
    optimizer_step(params, grads, opt)
    assert params.weights[0][0, 0] == pytest.approx(-0.1 - 0.19)


def test_nonfinite_gradient_raises():
    params = MLPParams([np.array([[0.0]])], [np.array([0.0])])
    grads = MLPParams([np.array([[np.nan]])], [np.array([0.0])])
    with pytest.raises(TrainingError):
        optimizer_step(params, grads, make_optimizer("sgd", params, 0.1))


def test_step_decay():
    assert step_decay_lr(0.1, 0, [10, 20]) == 0.1
    assert step_decay_lr(0.1, 10, [10, 20]) == pytest.approx(0.01)
    assert step_decay_lr(0.1, 25, [10, 20]) == pytest.approx(0.001)


def test_predict_tie_breaks_low():
    spec = LayerSpec(2, [], 2)
    assert predict_clusters(zero_params(spec), np.ones((5, 2))).tolist() == [0] * 5


def test_predict_argmax():
    params = MLPParams([np.zeros((1, 3))], [np.log(np.array([0.1, 0.7, 0.2]))])
    assert predict_clusters(params, np.zeros((1, 1))).tolist() == [1]
    params = MLPParams([np.zeros((1, 2))], [np.zeros(2)])
    assert predict_clusters(params, np.zeros((1, 1))).tolist() == [0]


@pytest.mark.parametrize("kind", ["sgd", "adam"])
def test_checkpoint_round_trip(tmp_path, kind):
    spec = LayerSpec(3, [4, 2], 5, "tanh")
    params = init_params(spec, 0)
    opt = make_optimizer(kind, params, 0.01, momentum=0.9)
    optimizer_step(params, init_params(spec, 1), opt)
    meta = {"epoch": 3, "rng": {"state": 5}}
    save_checkpoint(tmp_path / "c.npz", spec, params, opt, meta)
    spec2, params2, opt2, meta2 = load_checkpoint(tmp_path / "c.npz")
    assert spec2 == spec and meta2 == meta
    for a, b in zip(params.arrays(), params2.arrays()):
        assert a.tobytes() == b.tobytes()
    assert opt2.kind == opt.kind and opt2.step == 1 and opt2.momentum == 0.9
    for a, b in zip(opt.buffers + opt.second, opt2.buffers + opt2.second):
        assert a.tobytes() == b.tobytes()
