import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gsaal.errors import DomainError, ShapeError, StateError, TrainingError
from gsaal.nn import (
    EPS,
    Activation,
    Direction,
    Mlp,
    SgdConfig,
    backward,
    bce_loss,
    forward,
    init_weights,
    sgd_step,
)


def _zero_net(input_dim=3, width=4, out_dim=1, act=Activation.SIGMOID):
    sizes = [input_dim] + [width] * 4 + [out_dim]
    return Mlp(tuple(np.zeros((a + 1, b)) for a, b in zip(sizes[:-1], sizes[1:])), act, input_dim, width)


def _random_net(rng, input_dim, width, out_dim, act):
    """Random weights and biases, scaled so ReLUs are mixed on and off."""
    sizes = [input_dim] + [width] * 4 + [out_dim]
    ws = tuple(rng.normal(0.0, 0.8, (a + 1, b)) for a, b in zip(sizes[:-1], sizes[1:]))
    return Mlp(ws, act, input_dim, width)


def naive_forward(net, batch):
    """Straight-line reference: explicit loops for every product and activation."""
    rows = [list(map(float, r)) for r in batch]
    out = []
    last = len(net.layer_weights) - 1
    for row in rows:
        a = row
        for i, w in enumerate(net.layer_weights):
            fan_in, fan_out = w.shape[0] - 1, w.shape[1]
            z = []
            for j in range(fan_out):
                s = float(w[fan_in, j])
                for t in range(fan_in):
                    s += a[t] * float(w[t, j])
                z.append(s)
            if i < last:
                a = [v if v > 0 else 0.0 for v in z]
            elif net.output_activation == Activation.SIGMOID:
                a = [min(max(1.0 / (1.0 + math.exp(-v)), EPS), 1 - EPS) for v in z]
            else:
                a = z
        out.append(a)
    return np.array(out)


# --- forward ----------------------------------------------------------------


def test_zero_net_outputs_half():
    net = _zero_net()
    out = forward(net, np.random.default_rng(0).normal(size=(7, 3)))
    np.testing.assert_array_equal(out, 0.5)


def test_relu_clamps_negative_preactivation():
    w0 = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])  # identity, zero bias
    eye = np.vstack([np.eye(2), np.zeros((1, 2))])
    net = Mlp((w0, eye, eye, eye, eye), Activation.LINEAR, 2, 2)
    _, cache = forward(net, np.array([[-1.0, 2.0]]), keep_cache=True)
    np.testing.assert_array_equal(cache.pre_activations[0], [[-1.0, 2.0]])
    np.testing.assert_array_equal(cache.inputs[1], [[0.0, 2.0]])


@pytest.mark.parametrize("act", [Activation.SIGMOID, Activation.LINEAR])
def test_forward_matches_triple_loop(act):
    rng = np.random.default_rng(1)
    for _ in range(5):
        net = _random_net(rng, 3, 5, 2, act)
        batch = rng.normal(size=(6, 3))
        np.testing.assert_allclose(forward(net, batch), naive_forward(net, batch), rtol=0, atol=1e-10)


def test_forward_shape_mismatch():
    with pytest.raises(ShapeError):
        forward(_zero_net(), np.zeros((2, 4)))


def test_forward_is_bit_deterministic():
    rng = np.random.default_rng(2)
    net = _random_net(rng, 4, 6, 1, Activation.SIGMOID)
    batch = rng.normal(size=(50, 4))
    assert forward(net, batch).tobytes() == forward(net, batch).tobytes()


def test_sigmoid_output_is_clamped():
    net = _zero_net(act=Activation.SIGMOID)
    ws = list(net.layer_weights)
    ws[-1] = ws[-1].copy()
    ws[-1][-1] = 1e4  # huge output bias saturates the sigmoid
    hi = forward(Mlp(tuple(ws), Activation.SIGMOID, 3, 4), np.zeros((2, 3)))
    ws[-1][-1] = -1e4
    lo = forward(Mlp(tuple(ws), Activation.SIGMOID, 3, 4), np.zeros((2, 3)))
    np.testing.assert_array_equal(hi, 1 - EPS)
    np.testing.assert_array_equal(lo, EPS)


# --- loss -------------------------------------------------------------------


def test_bce_half_is_ln2():
    assert bce_loss([0.5, 0.5], [1, 0]) == pytest.approx(math.log(2), abs=1e-12)


@given(st.lists(st.integers(0, 1), min_size=1, max_size=40))
def test_bce_half_is_ln2_for_any_labels(labels):
    assert abs(bce_loss(np.full(len(labels), 0.5), labels) - math.log(2)) <= 1e-12


def test_bce_perfect_prediction_is_about_eps():
    assert bce_loss([1 - EPS], [1]) == pytest.approx(EPS, rel=1e-6)


def test_bce_matches_extended_precision():
    rng = np.random.default_rng(3)
    mpmath.mp.dps = 50
    for _ in range(20):
        n = int(rng.integers(1, 30))
        p = rng.uniform(1e-6, 1 - 1e-6, n)
        y = rng.integers(0, 2, n)
        ref = -sum(
            mpmath.log(mpmath.mpf(pi)) if yi else mpmath.log(1 - mpmath.mpf(pi)) for pi, yi in zip(p, y)
        ) / n
        assert abs(bce_loss(p, y) - float(ref)) < 1e-9


def test_bce_clamps_zero_and_one():
    assert np.isfinite(bce_loss([0.0, 1.0], [1, 0]))


def test_bce_errors():
    with pytest.raises(DomainError):
        bce_loss([], [])
    with pytest.raises(ShapeError):
        bce_loss([0.5], [1, 0])


# --- backward ---------------------------------------------------------------


def _loss_and_grad_out(net, batch, weights_out):
    """Scalar loss sum(out * weights_out): its gradient wrt output is weights_out."""
    return float(np.sum(forward(net, batch) * weights_out))


def finite_difference_grads(net, batch, weights_out, h=1e-5):
    grads = []
    for i, w in enumerate(net.layer_weights):
        g = np.zeros_like(w)
        for idx in np.ndindex(w.shape):
            ws = [x.copy() for x in net.layer_weights]
            ws[i][idx] += h
            up = _loss_and_grad_out(Mlp(tuple(ws), net.output_activation, net.input_dim, net.layer_width), batch, weights_out)
            ws[i][idx] -= 2 * h
            dn = _loss_and_grad_out(Mlp(tuple(ws), net.output_activation, net.input_dim, net.layer_width), batch, weights_out)
            g[idx] = (up - dn) / (2 * h)
        grads.append(g)
    return grads


def relative_error(a, b):
    return np.max(np.abs(a - b) / np.maximum(1e-6, np.abs(a) + np.abs(b)))


def gradient_check_errors(n_pairs, seed):
    """Max relative error of analytic vs central-difference gradients per pair."""
    rng = np.random.default_rng(seed)
    errors = []
    for _ in range(n_pairs):
        act = Activation.SIGMOID if rng.random() < 0.5 else Activation.LINEAR
        in_dim, width = int(rng.integers(1, 4)), int(rng.integers(2, 5))
        out_dim = 1 if act is Activation.SIGMOID else int(rng.integers(1, 3))
        net = _random_net(rng, in_dim, width, out_dim, act)
        batch = rng.normal(size=(int(rng.integers(1, 5)), in_dim))
        pre = forward(net, batch, keep_cache=True)[1].pre_activations
        # skip draws with a ReLU kink inside the difference step
        if min(np.min(np.abs(z)) for z in pre[:-1]) < 1e-3:
            continue
        w_out = rng.normal(size=(batch.shape[0], out_dim))
        _, cache = forward(net, batch, keep_cache=True)
        analytic, _ = backward(net, cache, w_out)
        numeric = finite_difference_grads(net, batch, w_out)
        errors.append(max(relative_error(a, b) for a, b in zip(analytic, numeric)))
    return errors


def test_gradients_match_finite_differences():
    errs = gradient_check_errors(30, seed=4)
    assert len(errs) >= 10
    assert max(errs) < 1e-4


def test_input_gradient_matches_finite_differences():
    rng = np.random.default_rng(5)
    net = _random_net(rng, 3, 4, 1, Activation.SIGMOID)
    x = rng.normal(size=(2, 3))
    w_out = rng.normal(size=(2, 1))
    _, cache = forward(net, x, keep_cache=True)
    _, g_in = backward(net, cache, w_out)
    h = 1e-6
    num = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += h
        xm[idx] -= h
        num[idx] = (_loss_and_grad_out(net, xp, w_out) - _loss_and_grad_out(net, xm, w_out)) / (2 * h)
    np.testing.assert_allclose(g_in, num, rtol=1e-5, atol=1e-9)


def test_zero_grad_out_gives_zero_gradients():
    rng = np.random.default_rng(6)
    net = _random_net(rng, 3, 4, 1, Activation.SIGMOID)
    _, cache = forward(net, rng.normal(size=(5, 3)), keep_cache=True)
    grads, g_in = backward(net, cache, np.zeros((5, 1)))
    for g in grads:
        np.testing.assert_array_equal(g, 0.0)
    np.testing.assert_array_equal(g_in, 0.0)


def test_bias_gradient_is_column_sum_of_delta():
    rng = np.random.default_rng(7)
    net = _random_net(rng, 2, 3, 1, Activation.LINEAR)
    x = np.column_stack([np.ones(6), rng.normal(size=6)])  # first column constant
    _, cache = forward(net, x, keep_cache=True)
    grads, _ = backward(net, cache, np.ones((6, 1)))
    # output layer is linear, so its delta is grad_out itself
    np.testing.assert_allclose(grads[-1][-1], [6.0])
    # first layer: the constant column's weight gradient equals the bias gradient
    np.testing.assert_allclose(grads[0][0], grads[0][-1], rtol=1e-12)


def test_backward_rejects_foreign_cache():
    rng = np.random.default_rng(8)
    a = _random_net(rng, 3, 4, 1, Activation.SIGMOID)
    b = _random_net(rng, 3, 5, 1, Activation.SIGMOID)
    _, cache = forward(a, np.zeros((2, 3)), keep_cache=True)
    with pytest.raises(StateError):
        backward(b, cache, np.zeros((2, 1)))
    with pytest.raises(StateError):
        backward(a, cache, np.zeros((3, 1)))


# --- sgd --------------------------------------------------------------------


def test_zero_gradient_step_is_identity():
    net = init_weights(3, 4, 1, Activation.SIGMOID, 0)
    out = sgd_step(net, [np.zeros_like(w) for w in net.layer_weights], SgdConfig(0.1), Direction.ASCEND)
    for a, b in zip(out.layer_weights, net.layer_weights):
        np.testing.assert_array_equal(a, b)


def test_descend_arithmetic():
    net = _zero_net()
    grads = [np.zeros_like(w) for w in net.layer_weights]
    grads[0][0, 0] = 0.25
    out = sgd_step(net, grads, SgdConfig(1.0), Direction.DESCEND)
    assert out.layer_weights[0][0, 0] == -0.25
    up = sgd_step(net, grads, SgdConfig(1.0), Direction.ASCEND)
    assert up.layer_weights[0][0, 0] == 0.25


def test_two_steps_equal_one_double_step():
    rng = np.random.default_rng(9)
    net = init_weights(3, 4, 1, Activation.SIGMOID, 1)
    grads = [rng.normal(size=w.shape) for w in net.layer_weights]
    two = sgd_step(sgd_step(net, grads, SgdConfig(0.125)), grads, SgdConfig(0.125))
    one = sgd_step(net, grads, SgdConfig(0.25))
    for a, b in zip(two.layer_weights, one.layer_weights):
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-15)


def test_non_finite_gradient_names_layer():
    net = init_weights(3, 4, 1, Activation.SIGMOID, 0)
    grads = [np.zeros_like(w) for w in net.layer_weights]
    grads[2][1, 1] = np.nan
    with pytest.raises(TrainingError) as info:
        sgd_step(net, grads, SgdConfig(0.1))
    assert info.value.layer == 2


def test_sgd_config_validation():
    with pytest.raises(ValueError):
        SgdConfig(0.0)
    with pytest.raises(ValueError):
        SgdConfig(0.1, batch_size=0)


# --- init -------------------------------------------------------------------


def test_init_deterministic_and_seed_sensitive():
    a = init_weights(4, 4, 1, Activation.SIGMOID, 5)
    b = init_weights(4, 4, 1, Activation.SIGMOID, 5)
    c = init_weights(4, 4, 1, Activation.SIGMOID, 6)
    assert all(np.array_equal(x, y) for x, y in zip(a.layer_weights, b.layer_weights))
    assert any(not np.array_equal(x, y) for x, y in zip(a.layer_weights, c.layer_weights))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_init_within_glorot_bound_and_zero_bias(in_dim, width, out_dim, seed):
    net = init_weights(in_dim, width, out_dim, Activation.LINEAR, seed)
    sizes = [in_dim] + [width] * 4 + [out_dim]
    for w, (fi, fo) in zip(net.layer_weights, zip(sizes[:-1], sizes[1:])):
        assert np.all(np.abs(w[:-1]) <= math.sqrt(6 / (fi + fo)))
        np.testing.assert_array_equal(w[-1], 0.0)


def test_init_bound_4x4():
    net = init_weights(4, 4, 4, Activation.LINEAR, 0)
    assert np.all(np.abs(net.layer_weights[1][:-1]) <= math.sqrt(6 / 8))


def test_mlp_validates_shapes():
    net = _zero_net()
    with pytest.raises(ShapeError):
        Mlp(net.layer_weights[:4], Activation.SIGMOID, 3, 4)
    with pytest.raises(ShapeError):
        Mlp(net.layer_weights, Activation.SIGMOID, 2, 4)
    bad = list(net.layer_weights)
    bad[1] = np.full_like(bad[1], np.inf)
    with pytest.raises(ValueError):
        Mlp(tuple(bad), Activation.SIGMOID, 3, 4)
