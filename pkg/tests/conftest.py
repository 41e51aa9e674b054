import numpy as np
import pytest

from convcost.graph import (
    Conv, Graph, GraphBuilder, Input, Node, ReLU, TensorShape,
)


def make_graph(nodes, input_id, output_id):
    return Graph(nodes, input_id, output_id)


@pytest.fixture
def chain_graph():
    """Input -> Conv -> ReLU, the minimal valid graph."""
    nodes = [
        Node(0, "input", Input(3), ()),
        Node(1, "conv", Conv(3, 1, 1, 8), (0,)),
        Node(2, "relu", ReLU(), (1,)),
    ]
    return Graph(nodes, 0, 2)


def tiny_conv_net(channels=4, with_pool=False):
    """Small Conv-BN-ReLU net used by several engine tests."""
    gb = GraphBuilder()
    cur = gb.input("input", 3)
    cur = gb.conv_bn_relu(cur, "c1", channels)
    if with_pool:
        cur = gb.max_pool(cur, "pool")
    cur = gb.conv_bn_relu(cur, "c2", channels)
    cur = gb.global_avg_pool(cur, "gap")
    cur = gb.linear(cur, "fc", 2)
    return gb.build(cur)


SHAPE_8 = TensorShape(1, 3, 8, 8)
