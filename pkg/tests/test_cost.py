import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from convcost.cost import (
    CostError, PowerLog, average_power, conv_mac, efficiency_from_flops,
    efficiency_metrics, layer_cost, load_power_csv, mac_lower_bound,
    network_report, report_from_json, save_report_json,
)
from convcost.graph import (
    Conv, Graph, GraphBuilder, Input, Node, ReLU, TensorShape, infer_shapes,
)
from convcost.zoo import (
    DenseBlockConfig, OsaConfig, build_dense_block, build_densenet40,
    build_osa_cifar, build_osa_module,
)


def test_conv_mac_unit_case():
    assert conv_mac(1, 1, 1, 1, 1) == 3


def test_conv_mac_hand_values():
    assert conv_mac(32, 32, 64, 64, 3) == 167_936
    assert conv_mac(32, 32, 16, 43, 3) == 66_608


def test_conv_mac_rejects_nonpositive():
    with pytest.raises(CostError):
        conv_mac(0, 1, 1, 1, 1)
    with pytest.raises(CostError):
        conv_mac(4, 4, 4, -1, 3)


def test_lower_bound_equality_at_balanced_channels():
    B = 9 * 32 * 32 * 64 * 64
    assert mac_lower_bound(B, 32, 32, 3) == pytest.approx(167_936, rel=1e-12)


def test_lower_bound_strict_when_unbalanced():
    B = 9 * 32 * 32 * 16 * 43
    bound = mac_lower_bound(B, 32, 32, 3)
    assert bound == pytest.approx(59910.53639108199, rel=1e-12)
    assert bound < conv_mac(32, 32, 16, 43, 3)


def test_lower_bound_k1_unit_channels():
    # c_i = c_o = 1, k = 1: bound = 2hw + 1 = conv_mac exactly
    for h, w in ((4, 4), (7, 13)):
        assert mac_lower_bound(h * w, h, w, 1) == pytest.approx(
            conv_mac(h, w, 1, 1, 1), rel=1e-12)


def test_lower_bound_rejects_nonpositive():
    with pytest.raises(CostError):
        mac_lower_bound(0, 4, 4, 3)


@settings(max_examples=300)
@given(h=st.integers(1, 64), w=st.integers(1, 64), k=st.sampled_from([1, 3, 5, 7]),
       ci=st.integers(1, 96), co=st.integers(1, 96))
def test_lower_bound_law(h, w, k, ci, co):
    mac = conv_mac(h, w, ci, co, k)
    bound = mac_lower_bound(k * k * h * w * ci * co, h, w, k)
    assert mac >= bound - 1e-9 * bound
    if ci == co:
        assert mac == pytest.approx(bound, rel=1e-9)
    else:
        assert mac > bound * (1 + 1e-9)


def test_balanced_split_minimizes_mac():
    # all divisor pairs of a fixed product; the square split wins
    h, w, k = 16, 16, 3
    for c in (4, 6, 12):
        product = c * c
        pairs = [(a, product // a) for a in range(1, product + 1)
                 if product % a == 0]
        macs = {pair: conv_mac(h, w, *pair, k) for pair in pairs}
        assert min(macs, key=macs.get) == (c, c)


# --- layer_cost --------------------------------------------------------------

def _single_node_cost(kind, in_shape, channels_in=None):
    cin = channels_in if channels_in is not None else in_shape.c
    nodes = [Node(0, "input", Input(cin), ()), Node(1, "x", kind, (0,))]
    g = Graph(nodes, 0, 1)
    shapes = infer_shapes(g, in_shape)
    return layer_cost(g, 1, shapes)


def test_conv_layer_cost_hand_values():
    cost = _single_node_cost(Conv(3, 1, 1, 64), TensorShape(1, 64, 32, 32))
    assert cost.flops == 37_748_736
    assert cost.params == 36_864
    assert cost.mac == 167_936
    assert cost.activation_elems == 64 * 32 * 32


def test_relu_layer_cost():
    cost = _single_node_cost(ReLU(), TensorShape(1, 64, 32, 32))
    assert cost.params == 0
    assert cost.flops == 65_536


def test_pointwise_conv_params():
    cost = _single_node_cost(Conv(1, 1, 0, 256), TensorShape(1, 640, 56, 56))
    assert cost.params == 640 * 256


def test_flops_convention_switch_scales_conv_and_linear_only():
    g = build_densenet40()
    shape = TensorShape(1, 3, 32, 32)
    r1 = network_report(g, shape, flops_per_mac=1)
    r2 = network_report(g, shape, flops_per_mac=2)
    for name in r1.per_node:
        a, b = r1.per_node[name], r2.per_node[name]
        if r1.kinds[name] in ("Conv", "Linear"):
            assert b.flops == 2 * a.flops
        else:
            assert b.flops == a.flops
        assert (a.mac, a.params, a.activation_elems) == (b.mac, b.params,
                                                         b.activation_elems)


def test_empty_body_graph_totals_zero():
    g = Graph([Node(0, "input", Input(3), ())], 0, 0)
    r = network_report(g, TensorShape(1, 3, 8, 8))
    assert r.totals.mac == 0 and r.totals.flops == 0 and r.totals.params == 0
    assert r.totals.activation_elems == 3 * 8 * 8  # the input itself


def test_totals_equal_sum_of_rows():
    r = network_report(build_osa_cifar(), TensorShape(1, 3, 32, 32))
    for metric in ("mac", "flops", "params", "activation_elems"):
        assert getattr(r.totals, metric) == sum(
            getattr(c, metric) for c in r.per_node.values())
    assert sum(getattr(c, "mac", 0) for c in r.subtotals.values()) == r.totals.mac


def test_batch_scales_activations_not_params():
    g = build_osa_cifar()
    r1 = network_report(g, TensorShape(1, 3, 32, 32))
    r4 = network_report(g, TensorShape(4, 3, 32, 32))
    assert r4.totals.params == r1.totals.params
    assert r4.totals.activation_elems == 4 * r1.totals.activation_elems
    assert r4.totals.flops == 4 * r1.totals.flops


def test_mac_monotone_in_dense_block_constant_in_osa():
    gb = GraphBuilder()
    x = gb.input("input", 3)
    stem = gb.conv_bn_relu(x, "stem", 16)
    out = build_dense_block(gb, DenseBlockConfig(16, 12, 12), stem, "block")
    g = gb.build(out)
    r = network_report(g, TensorShape(1, 3, 32, 32))
    dense_macs = [r.per_node[f"block/layer{i}/conv"].mac for i in range(1, 13)]
    assert all(b > a for a, b in zip(dense_macs, dense_macs[1:]))

    gb = GraphBuilder()
    x = gb.input("input", 3)
    stem = gb.conv_bn_relu(x, "stem", 16)
    out = build_osa_module(gb, OsaConfig(16, 43, 160), stem, "osa")
    g = gb.build(out)
    r = network_report(g, TensorShape(1, 3, 32, 32))
    osa_macs = [r.per_node[f"osa/conv{i}"].mac for i in range(1, 6)]
    assert len(set(osa_macs[1:])) == 1 and osa_macs[1] == 104_705


# --- power log / efficiency --------------------------------------------------

def test_average_power_symmetric():
    log = PowerLog((0.0, 0.1, 0.2), (100.0, 110.0, 90.0))
    assert average_power(log) == pytest.approx(100.0)


def test_average_power_single_sample():
    assert average_power(PowerLog((0.0,), (63.9,))) == pytest.approx(63.9)


def test_average_power_constant():
    log = PowerLog(tuple(i * 0.1 for i in range(10)), (250.0,) * 10)
    assert average_power(log) == pytest.approx(250.0)


def test_average_power_empty_raises():
    with pytest.raises(CostError):
        average_power(PowerLog((), ()))


def test_powerlog_rejects_nonincreasing_timestamps():
    with pytest.raises(CostError):
        PowerLog((0.0, 0.0), (1.0, 1.0))


def test_powerlog_rejects_negative_power():
    with pytest.raises(CostError):
        PowerLog((0.0, 0.1), (1.0, -2.0))


def test_power_csv_round_trip(tmp_path):
    p = tmp_path / "log.csv"
    p.write_text("timestamp_s,power_w\n0.0,100\n0.1,110\n0.2,90\n")
    log = load_power_csv(p)
    assert average_power(log) == pytest.approx(100.0)


def test_power_csv_rejects_bad_header(tmp_path):
    p = tmp_path / "log.csv"
    p.write_text("time,watts\n0.0,100\n")
    with pytest.raises(CostError, match="header"):
        load_power_csv(p)


def test_gflops_per_second_table_value():
    # 5.6 GFLOP per image at 14 ms/image -> 400 GFLOP/s
    log = PowerLog((0.0,), (100.0,))
    eff = efficiency_from_flops(5.6e9, 1000, 14.0, log)
    assert eff.gflops_per_second == pytest.approx(400.0, rel=1e-9)


def test_joules_per_image_table_value():
    # 129.5 W at 35 FPS -> 3.7 J/img
    log = PowerLog((0.0, 0.1), (129.5, 129.5))
    eff = efficiency_from_flops(1e9, 35, 1.0, log)
    assert eff.joules_per_image == pytest.approx(3.7, rel=1e-9)


def test_joules_trivial_case():
    log = PowerLog((0.0,), (100.0,))
    eff = efficiency_from_flops(1e9, 10, 1.0, log)
    assert eff.joules_per_image == pytest.approx(10.0)


def test_efficiency_rejects_zero_time():
    with pytest.raises(CostError):
        efficiency_from_flops(1e9, 10, 0.0, PowerLog((0.0,), (1.0,)))


@settings(max_examples=100)
@given(watts=st.lists(st.floats(0.0, 1e4), min_size=1, max_size=20),
       images=st.integers(1, 10_000),
       wall=st.floats(1e-3, 1e4, allow_nan=False))
def test_energy_round_trip_property(watts, images, wall):
    log = PowerLog(tuple(0.1 * i for i in range(len(watts))), tuple(watts))
    eff = efficiency_from_flops(1e9, images, wall, log)
    assert eff.joules_per_image * eff.fps == pytest.approx(eff.avg_power,
                                                           rel=1e-12, abs=1e-12)


# --- report serialization ----------------------------------------------------

def test_report_json_round_trip(tmp_path):
    g = build_osa_cifar()
    r = network_report(g, TensorShape(1, 3, 32, 32), arch="osa-cifar")
    path = tmp_path / "r.json"
    save_report_json(r, path)
    import json
    with open(path) as fh:
        r2 = report_from_json(json.load(fh))
    assert r2.totals == r.totals
    assert r2.per_node == r.per_node
    assert r2.flops_per_mac == r.flops_per_mac


def test_report_json_sorted_by_name():
    r = network_report(build_osa_cifar(), TensorShape(1, 3, 32, 32))
    names = list(r.to_json_dict()["per_node"])
    assert names == sorted(names)


def test_report_table_and_csv_render():
    r = network_report(build_osa_cifar(), TensorShape(1, 3, 32, 32))
    table = r.to_table()
    assert "TOTAL" in table and "CONV ONLY" in table
    csv_text = r.to_csv()
    assert csv_text.startswith("name,kind,params,flops,mac,activation_elems")
    assert len(csv_text.strip().splitlines()) == len(r.per_node) + 1
