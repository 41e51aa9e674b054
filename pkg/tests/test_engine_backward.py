import numpy as np
import pytest

from convcost.engine import (
    EngineError, backward, count_parameters, forward, grad_check, init_params,
)
from convcost.graph import (
    Concat, Conv, Graph, GraphBuilder, Input, Node, TensorShape,
)
from convcost.cost import network_report
from convcost.zoo import ARCHITECTURES, build_architecture

from conftest import tiny_conv_net


def test_zero_input_zero_weight_grads():
    nodes = [
        Node(0, "input", Input(3), ()),
        Node(1, "conv", Conv(3, 1, 1, 4), (0,)),
    ]
    g = Graph(nodes, 0, 1)
    params = init_params(g, 0)
    x = np.zeros((1, 3, 6, 6))
    acts = forward(g, params, x)
    grads = backward(g, params, acts, np.ones_like(acts[1]))
    assert np.array_equal(grads["conv"]["weight"], np.zeros_like(params["conv"]["weight"]))


def test_concat_backward_routes_ones_to_each_source():
    nodes = [
        Node(0, "input", Input(2), ()),
        Node(1, "a", Conv(1, 1, 0, 2, has_bias=True), (0,)),
        Node(2, "b", Conv(1, 1, 0, 3, has_bias=True), (0,)),
        Node(3, "cat", Concat(), (1, 2)),
    ]
    g = Graph(nodes, 0, 3)
    params = init_params(g, 1)
    x = np.random.default_rng(0).normal(size=(1, 2, 4, 4))
    acts = forward(g, params, x)
    grads = backward(g, params, acts, np.ones_like(acts[3]))
    # loss = sum of concat output => each conv's bias grad is ones * h * w
    np.testing.assert_array_equal(grads["a"]["bias"], 16.0 * np.ones(2))
    np.testing.assert_array_equal(grads["b"]["bias"], 16.0 * np.ones(3))


def test_backward_requires_activations():
    g = tiny_conv_net()
    params = init_params(g, 0)
    with pytest.raises(EngineError, match="activation"):
        backward(g, params, {}, np.zeros((1, 2, 1, 1)))


def test_grad_check_osa_tiny_below_1e6():
    g = build_architecture("osa-tiny")
    err = grad_check(g, TensorShape(1, 3, 8, 8), seed=7, eps=1e-5)
    assert err < 1e-6


def test_grad_check_linear_only_below_1e8():
    gb = GraphBuilder()
    x = gb.input("input", 5)
    cur = gb.global_avg_pool(x, "gap")
    cur = gb.linear(cur, "fc", 4)
    g = gb.build(cur)
    err = grad_check(g, TensorShape(2, 5, 1, 1), seed=1, eps=1e-5)
    assert err < 1e-8


def test_grad_check_param_guard():
    g = build_architecture("osa-cifar")  # ~500k params, over the guard
    with pytest.raises(EngineError, match="guard"):
        grad_check(g, TensorShape(1, 3, 32, 32), seed=0)


def test_grad_check_covers_dense_and_residual_blocks():
    for name in ("dense-tiny", "res-tiny"):
        g = build_architecture(name)
        err = grad_check(g, TensorShape(1, 3, 8, 8), seed=11)
        assert err < 1e-6, name


def test_grad_check_float32_mode():
    g = tiny_conv_net()
    err = grad_check(g, TensorShape(1, 3, 6, 6), seed=5, eps=3e-3,
                     dtype=np.float32)
    assert err < 1e-3


def test_param_count_matches_cost_model_for_all_archs():
    for name in sorted(ARCHITECTURES):
        g = build_architecture(name)
        side = 224 if name.startswith("vovnet") else 32
        report = network_report(g, TensorShape(1, 3, side, side))
        store = init_params(g, 0, np.float32)
        assert count_parameters(store) == report.totals.params, name


def test_init_params_deterministic_and_seed_sensitive():
    g = build_architecture("osa-tiny")
    a = init_params(g, 9)
    b = init_params(g, 9)
    c = init_params(g, 10)
    for name in a:
        for fname in a[name]:
            assert np.array_equal(a[name][fname], b[name][fname])
    assert any(not np.array_equal(a[n][f], c[n][f])
               for n in a for f in a[n])


def test_init_params_bn_constants():
    g = tiny_conv_net()
    store = init_params(g, 0)
    bn = store["c1/bn"]
    assert np.array_equal(bn["bn_gamma"], np.ones(4))
    assert np.array_equal(bn["bn_beta"], np.zeros(4))
    assert np.array_equal(bn["bn_mean"], np.zeros(4))
    assert np.array_equal(bn["bn_var"], np.ones(4))


def test_init_params_fan_in_scaling():
    # std of a big conv weight tensor approaches sqrt(2 / fan_in)
    gb = GraphBuilder()
    x = gb.input("input", 64)
    cur = gb.conv(x, "conv", 64)
    g = gb.build(cur)
    w = init_params(g, 0)["conv"]["weight"]
    expected = np.sqrt(2.0 / (64 * 9))
    assert abs(w.std() - expected) / expected < 0.02
