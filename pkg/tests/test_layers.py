import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from mcdnn.layers import (
    TANH_A, TANH_B, ConvLayer, FullyLayer, LabelError, MaxPoolLayer, ShapeMismatchError,
    StaleCacheError, cross_entropy, scaled_tanh, scaled_tanh_grad, softmax,
)
from mcdnn.network import Network
from mcdnn.tensor import Rng

H = 1e-5


def rel_err(a, n):
    a, n = np.asarray(a), np.asarray(n)
    return np.abs(a - n) / np.maximum(1e-8, np.abs(a) + np.abs(n))


def naive_conv(w, b, x):
    out_maps, in_maps, k, _ = w.shape
    _, h, wd = x.shape
    out = np.zeros((out_maps, h - k + 1, wd - k + 1))
    for o in range(out_maps):
        for yy in range(h - k + 1):
            for xx in range(wd - k + 1):
                s = b[o]
                for i in range(in_maps):
                    for u in range(k):
                        for v in range(k):
                            s += w[o, i, u, v] * x[i, yy + u, xx + v]
                out[o, yy, xx] = s
    return out


def make_conv(rng, cin, cout, k):
    layer = ConvLayer(cin, cout, k)
    layer.weights[...] = rng.standard_normal(layer.weights.shape)
    layer.bias[...] = rng.standard_normal(cout)
    return layer


def numeric_grad(f, x):
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        old = x[idx]
        x[idx] = old + H
        fp = f()
        x[idx] = old - H
        fm = f()
        x[idx] = old
        g[idx] = (fp - fm) / (2 * H)
    return g


# convolution

def test_conv_sum_of_ones():
    layer = ConvLayer(1, 1, 2)
    layer.weights[...] = 1.0
    out = layer.forward(np.ones((1, 3, 3)))
    assert out.tolist() == [[[4.0, 4.0], [4.0, 4.0]]]


def test_conv_identity_kernel():
    layer = ConvLayer(1, 1, 1)
    layer.weights[...] = 1.0
    x = np.random.default_rng(0).standard_normal((1, 5, 6))
    assert np.array_equal(layer.forward(x), x)


def test_conv_matches_naive_loops():
    rng = np.random.default_rng(1)
    layer = make_conv(rng, 2, 3, 3)
    x = rng.standard_normal((2, 5, 5))
    assert np.max(np.abs(layer.forward(x) - naive_conv(layer.weights, layer.bias, x))) < 1e-12


def test_conv_backward_zero_grad():
    rng = np.random.default_rng(2)
    layer = make_conv(rng, 2, 3, 3)
    layer.forward(rng.standard_normal((2, 6, 6)))
    gin = layer.backward(np.zeros((3, 4, 4)))
    assert not gin.any() and not layer.grad_weights.any() and not layer.grad_bias.any()


def test_conv_backward_single_pixel():
    rng = np.random.default_rng(3)
    layer = make_conv(rng, 2, 3, 3)
    x = rng.standard_normal((2, 6, 6))
    layer.forward(x)
    g = np.zeros((3, 4, 4))
    g[1, 2, 0] = 0.7
    layer.backward(g)
    expected = np.zeros_like(layer.weights)
    expected[1] = 0.7 * x[:, 2:5, 0:3]
    assert np.allclose(layer.grad_weights, expected, rtol=0, atol=1e-15)
    assert layer.grad_bias.tolist() == [0.0, 0.7, 0.0]


def test_conv_backward_finite_differences():
    rng = np.random.default_rng(4)
    layer = make_conv(rng, 2, 3, 3)
    x = rng.standard_normal((2, 5, 6))
    probe = rng.standard_normal((3, 3, 4))

    def loss():
        return float(np.sum(layer.forward(x) * probe))

    loss()
    gin = layer.backward(probe)
    gw, gb = layer.grad_weights.copy(), layer.grad_bias.copy()
    assert rel_err(gin, numeric_grad(loss, x)).max() < 1e-4
    assert rel_err(gw, numeric_grad(loss, layer.weights)).max() < 1e-4
    assert rel_err(gb, numeric_grad(loss, layer.bias)).max() < 1e-4


def test_conv_shape_errors():
    layer = ConvLayer(2, 3, 3)
    with pytest.raises(ShapeMismatchError):
        layer.forward(np.zeros((1, 5, 5)))
    with pytest.raises(StaleCacheError):
        layer.backward(np.zeros((3, 3, 3)))
    layer.forward(np.zeros((2, 5, 5)))
    with pytest.raises(ShapeMismatchError):
        layer.backward(np.zeros((3, 2, 2)))


def test_conv_translation_consistency():
    rng = np.random.default_rng(5)
    layer = make_conv(rng, 1, 2, 3)
    x = np.zeros((1, 16, 16))
    x[0, 4:7, 3:6] = rng.standard_normal((3, 3))
    shifted = np.roll(x, (2, 2), axis=(1, 2))
    a, b = layer.forward(x), layer.forward(shifted)
    # interior window unaffected by the borders
    assert np.allclose(b[:, 2:14, 2:14], a[:, 0:12, 0:12], atol=1e-14)


# pooling

def test_maxpool_basic():
    layer = MaxPoolLayer(2)
    out = layer.forward(np.array([[[1.0, 2.0], [3.0, 4.0]]]))
    assert out.tolist() == [[[4.0]]]
    rows, cols = layer.winner_coords()
    assert (rows[0, 0, 0], cols[0, 0, 0]) == (1, 1)


def test_maxpool_tie_goes_top_left():
    layer = MaxPoolLayer(3)
    layer.forward(np.full((1, 3, 3), 0.5))
    rows, cols = layer.winner_coords()
    assert (rows[0, 0, 0], cols[0, 0, 0]) == (0, 0)


def test_maxpool_matches_region_scan():
    rng = np.random.default_rng(6)
    x = rng.standard_normal((2, 6, 6))
    layer = MaxPoolLayer(3)
    out = layer.forward(x)
    rows, cols = layer.winner_coords()
    for m in range(2):
        for i in range(2):
            for j in range(2):
                region = x[m, 3 * i:3 * i + 3, 3 * j:3 * j + 3]
                assert out[m, i, j] == region.max()
                r, c = np.unravel_index(np.argmax(region), (3, 3))
                assert (rows[m, i, j], cols[m, i, j]) == (3 * i + r, 3 * j + c)


def test_maxpool_backward_routes_to_winners():
    rng = np.random.default_rng(7)
    x = rng.standard_normal((1, 4, 4))
    layer = MaxPoolLayer(2)
    layer.forward(x)
    g = layer.backward(np.ones((1, 2, 2)))
    assert np.count_nonzero(g) == 4
    rows, cols = layer.winner_coords()
    winners = set(zip(rows.ravel().tolist(), cols.ravel().tolist()))
    for r in range(4):
        for c in range(4):
            if (r, c) not in winners:
                assert g[0, r, c] == 0.0
            else:
                assert g[0, r, c] == 1.0


def test_maxpool_backward_finite_differences():
    rng = np.random.default_rng(8)
    x = rng.permutation(72).reshape(2, 6, 6).astype(float) / 10  # no ties
    probe = rng.standard_normal((2, 3, 3))
    layer = MaxPoolLayer(2)

    def loss():
        return float(np.sum(layer.forward(x) * probe))

    loss()
    g = layer.backward(probe)
    assert rel_err(g, numeric_grad(loss, x)).max() < 1e-4


def test_maxpool_errors():
    layer = MaxPoolLayer(2)
    with pytest.raises(StaleCacheError):
        layer.backward(np.zeros((1, 1, 1)))
    with pytest.raises(ShapeMismatchError):
        layer.forward(np.zeros((1, 5, 4)))


@settings(max_examples=50, deadline=None)
@given(hnp.arrays(np.float64, (2, 6, 6), elements=st.floats(-1, 1)), st.sampled_from([2, 3]))
def test_maxpool_one_nonzero_per_region(x, p):
    layer = MaxPoolLayer(p)
    layer.forward(x)
    g = layer.backward(np.ones((2, 6 // p, 6 // p)))
    regions = g.reshape(2, 6 // p, p, 6 // p, p)
    assert (np.count_nonzero(regions, axis=(2, 4)) <= 1).all()


# fully connected

def test_fully_identity_and_bias():
    layer = FullyLayer(3, 3)
    layer.weights[...] = np.eye(3)
    x = np.array([1.0, -2.0, 3.0])
    assert np.array_equal(layer.forward(x), x)
    layer.weights[...] = 0.0
    layer.bias[...] = [4.0, 5.0, 6.0]
    assert layer.forward(x).tolist() == [4.0, 5.0, 6.0]


def test_fully_finite_differences():
    rng = np.random.default_rng(9)
    layer = FullyLayer(5, 4)
    layer.weights[...] = rng.standard_normal((4, 5))
    layer.bias[...] = rng.standard_normal(4)
    x = rng.standard_normal(5)
    probe = rng.standard_normal(4)

    def loss():
        return float(layer.forward(x) @ probe)

    loss()
    gin = layer.backward(probe)
    gw = layer.grad_weights.copy()
    assert rel_err(gin, numeric_grad(loss, x)).max() < 1e-4
    assert rel_err(gw, numeric_grad(loss, layer.weights)).max() < 1e-4
    assert np.allclose(layer.grad_bias, probe)


def test_fully_flattens_map_row_col():
    layer = FullyLayer(8, 1)
    layer.weights[0] = np.arange(8)
    x = np.arange(8.0).reshape(2, 2, 2)
    assert layer.forward(x)[0] == float(np.arange(8) @ np.arange(8.0))


# activations and loss

def test_scaled_tanh_values():
    assert scaled_tanh(0.0) == 0.0
    assert scaled_tanh_grad(0.0) == pytest.approx(1.14393, abs=1e-5)
    assert TANH_A * TANH_B == pytest.approx(1.14393, abs=1e-5)
    assert scaled_tanh(50.0) == pytest.approx(TANH_A)


@pytest.mark.parametrize("x", [-2.0, -0.5, 0.3, 4.0])
def test_scaled_tanh_grad_finite_differences(x):
    num = (scaled_tanh(x + H) - scaled_tanh(x - H)) / (2 * H)
    assert abs(scaled_tanh_grad(x) - num) < 1e-6


def test_softmax_examples():
    assert np.allclose(softmax([0, 0, 0, 0]), 0.25)
    p = softmax([0.0, 1000.0, -5.0])
    assert p[1] == pytest.approx(1.0) and p[0] < 1e-300 + 1e-12 and p[2] < 1e-12


@settings(max_examples=100, deadline=None)
@given(hnp.arrays(np.float64, st.integers(2, 12), elements=st.floats(-30, 30)), st.data())
def test_softmax_properties(z, data):
    p = softmax(z)
    assert abs(p.sum() - 1.0) < 1e-12
    assert ((p > 0) & (p <= 1)).all()
    label = data.draw(st.integers(0, len(z) - 1))
    _, g = cross_entropy(p, label)
    assert abs(g.sum()) < 1e-12


def test_softmax_components_strictly_inside_unit_interval():
    p = softmax(np.array([0.3, -1.2, 2.5]))
    assert ((p > 0) & (p < 1)).all()


def test_cross_entropy_label_range():
    with pytest.raises(LabelError):
        cross_entropy(softmax([0.0, 1.0]), 2)


def test_cross_entropy_grad_finite_differences():
    z = np.array([0.2, -1.0, 0.7, 0.1])
    _, g = cross_entropy(softmax(z), 2)
    num = numeric_grad(lambda: cross_entropy(softmax(z), 2)[0], z)
    assert rel_err(g, num).max() < 1e-6


# whole network

def net_gradient_check(descriptor, seed, n_inputs=5, scale=1.0):
    """Largest relative error between analytic and central-difference gradients."""
    rng = np.random.default_rng(seed)
    net = Network(descriptor).init_weights(Rng(seed))
    if scale != 1.0:
        for p in net.params():
            p *= scale
    worst = 0.0
    for _ in range(n_inputs):
        x = rng.uniform(-1, 1, net.descriptor.input_shape)
        label = int(rng.integers(net.class_count))
        _, _, gin = net.loss_and_grad(x, label, need_input_grad=True)
        analytic = [g.copy() for g in net.grads()]

        def loss():
            return cross_entropy(net.predict(x), label)[0]

        for p, a in zip(net.params(), analytic):
            worst = max(worst, rel_err(a, numeric_grad(loss, p)).max())
        worst = max(worst, rel_err(gin, numeric_grad(loss, x)).max())
    return worst


def test_end_to_end_gradient_check():
    assert net_gradient_check("1x8x8-3C3-MP2-4C2-MP2-5N-3N", seed=10, scale=10.0) < 1e-4


def test_gradient_check_multi_map_input():
    assert net_gradient_check("2x7x7-3C2-MP3-4N-2N", seed=11, n_inputs=2, scale=10.0) < 1e-4
