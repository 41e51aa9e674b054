"""Computation-graph IR: layer kinds, validation, topological order, shape inference.

A Graph is a DAG of Node objects over dense 4-D activations in (n, c, h, w)
layout. It is the single representation shared by the cost model, the numeric
engine and the connectivity analysis.

Node names follow a path grammar, ``segment('/'segment)*``, conventionally
``stage/module/layer`` (e.g. ``stage2/osa1/conv3``, ``stage2/osa1/conv3/bn``).
Names must be unique within a graph; reports and weight files key on them.

Graphs are immutable after construction and all operations here are pure,
so they are safe to share across threads.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from typing import NamedTuple, Union


class GraphError(ValueError):
    """Structural graph problem (cycle, bad wiring, malformed spec file)."""


class ShapeError(GraphError):
    """Shape inference failed for a node."""


class TensorShape(NamedTuple):
    """Dense 4-D activation shape: batch, channels, height, width."""

    n: int
    c: int
    h: int
    w: int

    @property
    def elems(self) -> int:
        return self.n * self.c * self.h * self.w


# --- layer kinds -----------------------------------------------------------

@dataclass(frozen=True)
class Input:
    """Graph source. Declares the channel count the graph expects."""

    channels: int


@dataclass(frozen=True)
class Conv:
    kernel: int
    stride: int
    padding: int
    out_channels: int
    has_bias: bool = False


@dataclass(frozen=True)
class BatchNorm:
    pass


@dataclass(frozen=True)
class ReLU:
    pass


@dataclass(frozen=True)
class MaxPool:
    kernel: int
    stride: int
    padding: int


@dataclass(frozen=True)
class AvgPool:
    kernel: int
    stride: int
    padding: int


@dataclass(frozen=True)
class Concat:
    pass


@dataclass(frozen=True)
class Add:
    pass


@dataclass(frozen=True)
class GlobalAvgPool:
    pass


@dataclass(frozen=True)
class Linear:
    out_features: int


LayerKind = Union[
    Input, Conv, BatchNorm, ReLU, MaxPool, AvgPool, Concat, Add,
    GlobalAvgPool, Linear,
]

# Fixed input arity per kind; None means "two or more".
_ARITY = {
    Input: 0, Conv: 1, BatchNorm: 1, ReLU: 1, MaxPool: 1, AvgPool: 1,
    Concat: None, Add: 2, GlobalAvgPool: 1, Linear: 1,
}


def kind_name(kind: LayerKind) -> str:
    return type(kind).__name__


@dataclass(frozen=True)
class Node:
    id: int
    name: str
    kind: LayerKind
    inputs: tuple[int, ...]


class Graph:
    """Immutable DAG of nodes with one designated input and output node."""

    def __init__(self, nodes, input_id: int, output_id: int):
        by_id: dict[int, Node] = {}
        for node in nodes:
            if node.id in by_id:
                raise GraphError(f"duplicate node id {node.id}")
            by_id[node.id] = node
        self._nodes = by_id
        self.input_id = input_id
        self.output_id = output_id
        consumers: dict[int, list[int]] = {nid: [] for nid in by_id}
        for node in by_id.values():
            for src in node.inputs:
                if src in consumers:
                    consumers[src].append(node.id)
        self._consumers = {nid: tuple(v) for nid, v in consumers.items()}

    @property
    def nodes(self) -> dict[int, Node]:
        return self._nodes

    def node(self, node_id: int) -> Node:
        return self._nodes[node_id]

    def consumers(self, node_id: int) -> tuple[int, ...]:
        return self._consumers[node_id]

    def find(self, name: str) -> Node:
        for node in self._nodes.values():
            if node.name == name:
                return node
        raise KeyError(name)

    def __len__(self) -> int:
        return len(self._nodes)


@dataclass(frozen=True)
class Violation:
    kind: str
    node_id: int
    message: str

    def __str__(self) -> str:
        return f"[{self.kind}] node {self.node_id}: {self.message}"


def validate(graph: Graph) -> list[Violation]:
    """Collect every structural violation; an empty list means the graph is ok.

    Checks: dangling/self-referencing inputs, per-kind arity, the single-Input
    rule, bias on a conv that feeds BatchNorm, cycles, duplicate names, and
    nodes that are not on any input-to-output path (flagged ``unused``).
    Spatial problems (Concat/Add mismatches) are left to infer_shapes.
    """
    out: list[Violation] = []
    nodes = graph.nodes

    names: dict[str, int] = {}
    for node in nodes.values():
        if node.name in names:
            out.append(Violation("duplicate-name", node.id,
                                 f"name {node.name!r} already used by node {names[node.name]}"))
        else:
            names[node.name] = node.id

    if graph.input_id not in nodes:
        out.append(Violation("dangling", graph.input_id, "input_id not in graph"))
    if graph.output_id not in nodes:
        out.append(Violation("dangling", graph.output_id, "output_id not in graph"))

    input_nodes = [n for n in nodes.values() if isinstance(n.kind, Input)]
    if len(input_nodes) != 1:
        nid = input_nodes[0].id if input_nodes else graph.input_id
        out.append(Violation("input-count", nid,
                             f"expected exactly one Input node, found {len(input_nodes)}"))
    elif graph.input_id in nodes and not isinstance(nodes[graph.input_id].kind, Input):
        out.append(Violation("input-kind", graph.input_id, "input_id is not an Input node"))

    for node in nodes.values():
        for src in node.inputs:
            if src == node.id:
                out.append(Violation("self-reference", node.id,
                                     f"{node.name!r} lists itself as an input"))
            elif src not in nodes:
                out.append(Violation("dangling", node.id,
                                     f"{node.name!r} references missing node {src}"))
        arity = _ARITY[type(node.kind)]
        if arity is None:
            if len(node.inputs) < 2:
                out.append(Violation("arity", node.id,
                                     f"Concat {node.name!r} needs >= 2 inputs, has {len(node.inputs)}"))
        elif len(node.inputs) != arity:
            out.append(Violation("arity", node.id,
                                 f"{kind_name(node.kind)} {node.name!r} needs {arity} "
                                 f"input(s), has {len(node.inputs)}"))
        if isinstance(node.kind, Conv) and node.kind.has_bias:
            if any(isinstance(nodes[c].kind, BatchNorm) for c in graph.consumers(node.id)):
                out.append(Violation("conv-bias-bn", node.id,
                                     f"{node.name!r} has a bias but feeds BatchNorm"))

    cycle_member = _find_cycle_member(graph)
    if cycle_member is not None:
        out.append(Violation("cycle", cycle_member,
                             f"{nodes[cycle_member].name!r} is on a cycle"))
        return out  # reachability is not meaningful on a cyclic graph

    if graph.input_id in nodes and graph.output_id in nodes:
        fwd = _reachable_from(graph, graph.input_id)
        back = _reachable_to(graph, graph.output_id)
        for node in nodes.values():
            if node.id not in fwd or node.id not in back:
                out.append(Violation("unused", node.id,
                                     f"{node.name!r} is not on an input-to-output path"))
    return out


def _find_cycle_member(graph: Graph):
    order = _kahn(graph)
    if len(order) == len(graph):
        return None
    remaining = set(graph.nodes) - set(order)
    # walk predecessors inside the remaining set until a node repeats
    cur = min(remaining)
    seen = {}
    while cur not in seen:
        seen[cur] = True
        preds = [s for s in graph.node(cur).inputs if s in remaining]
        if not preds:  # self-reference shows up with no remaining preds
            return cur
        cur = preds[0]
    return cur


def _kahn(graph: Graph) -> list[int]:
    indeg = {nid: 0 for nid in graph.nodes}
    for node in graph.nodes.values():
        for src in node.inputs:
            if src in indeg:
                indeg[node.id] += 1
    ready = [nid for nid, d in indeg.items() if d == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        nid = heapq.heappop(ready)
        order.append(nid)
        for consumer in graph.consumers(nid):
            indeg[consumer] -= 1
            if indeg[consumer] == 0:
                heapq.heappush(ready, consumer)
    return order


def _reachable_from(graph: Graph, start: int) -> set[int]:
    seen = {start}
    stack = [start]
    while stack:
        nid = stack.pop()
        for consumer in graph.consumers(nid):
            if consumer not in seen:
                seen.add(consumer)
                stack.append(consumer)
    return seen


def _reachable_to(graph: Graph, end: int) -> set[int]:
    seen = {end}
    stack = [end]
    while stack:
        nid = stack.pop()
        for src in graph.node(nid).inputs:
            if src in seen or src not in graph.nodes:
                continue
            seen.add(src)
            stack.append(src)
    return seen


def topo_order(graph: Graph) -> list[int]:
    """Topological order of all node ids, ties broken by ascending id."""
    order = _kahn(graph)
    if len(order) != len(graph):
        member = _find_cycle_member(graph)
        raise GraphError(f"graph has a cycle through node {member} "
                         f"({graph.node(member).name!r})")
    return order


def _pool_out(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def infer_shapes(graph: Graph, input_shape: TensorShape) -> dict[int, TensorShape]:
    """Propagate the input shape through the graph, floor-mode spatial math.

    Conv/pool output spatial size is ``floor((in + 2*padding - kernel)/stride) + 1``.
    Raises ShapeError naming the offending node on any mismatch or
    non-positive output dimension.
    """
    shapes: dict[int, TensorShape] = {}
    for nid in topo_order(graph):
        node = graph.node(nid)
        ins = [shapes[i] for i in node.inputs]
        kind = node.kind
        if isinstance(kind, Input):
            if input_shape.c != kind.channels:
                raise ShapeError(f"node {node.name!r}: graph expects {kind.channels} "
                                 f"input channels, got {input_shape.c}")
            shape = input_shape
        elif isinstance(kind, Conv):
            s = ins[0]
            h = _pool_out(s.h, kind.kernel, kind.stride, kind.padding)
            w = _pool_out(s.w, kind.kernel, kind.stride, kind.padding)
            if h < 1 or w < 1:
                raise ShapeError(f"node {node.name!r}: non-positive output dim "
                                 f"{h}x{w} from input {tuple(s)}")
            shape = TensorShape(s.n, kind.out_channels, h, w)
        elif isinstance(kind, (MaxPool, AvgPool)):
            s = ins[0]
            h = _pool_out(s.h, kind.kernel, kind.stride, kind.padding)
            w = _pool_out(s.w, kind.kernel, kind.stride, kind.padding)
            if h < 1 or w < 1:
                raise ShapeError(f"node {node.name!r}: non-positive output dim "
                                 f"{h}x{w} from input {tuple(s)}")
            shape = TensorShape(s.n, s.c, h, w)
        elif isinstance(kind, (BatchNorm, ReLU)):
            shape = ins[0]
        elif isinstance(kind, Concat):
            first = ins[0]
            for s, src in zip(ins[1:], node.inputs[1:]):
                if (s.n, s.h, s.w) != (first.n, first.h, first.w):
                    raise ShapeError(f"node {node.name!r}: Concat inputs disagree, "
                                     f"{tuple(first)} vs {tuple(s)} (from node {src})")
            shape = TensorShape(first.n, sum(s.c for s in ins), first.h, first.w)
        elif isinstance(kind, Add):
            if ins[0] != ins[1]:
                raise ShapeError(f"node {node.name!r}: Add inputs disagree, "
                                 f"{tuple(ins[0])} vs {tuple(ins[1])}")
            shape = ins[0]
        elif isinstance(kind, GlobalAvgPool):
            s = ins[0]
            shape = TensorShape(s.n, s.c, 1, 1)
        elif isinstance(kind, Linear):
            s = ins[0]
            if (s.h, s.w) != (1, 1):
                raise ShapeError(f"node {node.name!r}: Linear needs h=w=1, "
                                 f"got {tuple(s)}")
            shape = TensorShape(s.n, kind.out_features, 1, 1)
        else:
            raise ShapeError(f"node {node.name!r}: unknown kind {kind_name(kind)}")
        shapes[nid] = shape
    return shapes


def infer_channels(graph: Graph) -> dict[int, int]:
    """Per-node output channel count; needs no spatial input size."""
    channels: dict[int, int] = {}
    for nid in topo_order(graph):
        node = graph.node(nid)
        kind = node.kind
        if isinstance(kind, Input):
            channels[nid] = kind.channels
        elif isinstance(kind, Conv):
            channels[nid] = kind.out_channels
        elif isinstance(kind, Linear):
            channels[nid] = kind.out_features
        elif isinstance(kind, Concat):
            channels[nid] = sum(channels[i] for i in node.inputs)
        else:
            channels[nid] = channels[node.inputs[0]]
    return channels


# --- builder ---------------------------------------------------------------

class GraphBuilder:
    """Incrementally wires nodes; tracks channel counts for early mismatch errors."""

    def __init__(self):
        self._nodes: list[Node] = []
        self._next_id = 0
        self.channels: dict[int, int] = {}
        self._input_id = None

    def add(self, name: str, kind: LayerKind, inputs=()) -> int:
        nid = self._next_id
        self._next_id += 1
        self._nodes.append(Node(nid, name, kind, tuple(inputs)))
        if isinstance(kind, Input):
            self._input_id = nid
            self.channels[nid] = kind.channels
        elif isinstance(kind, (Conv,)):
            self.channels[nid] = kind.out_channels
        elif isinstance(kind, Linear):
            self.channels[nid] = kind.out_features
        elif isinstance(kind, Concat):
            self.channels[nid] = sum(self.channels[i] for i in inputs)
        else:
            self.channels[nid] = self.channels[inputs[0]]
        return nid

    def input(self, name: str, channels: int) -> int:
        return self.add(name, Input(channels))

    def conv(self, src: int, name: str, out_channels: int, kernel: int = 3,
             stride: int = 1, padding: int = 1, has_bias: bool = False) -> int:
        return self.add(name, Conv(kernel, stride, padding, out_channels, has_bias), (src,))

    def conv_bn_relu(self, src: int, name: str, out_channels: int, kernel: int = 3,
                     stride: int = 1, padding: int = 1) -> int:
        c = self.conv(src, name, out_channels, kernel, stride, padding)
        b = self.add(f"{name}/bn", BatchNorm(), (c,))
        return self.add(f"{name}/relu", ReLU(), (b,))

    def max_pool(self, src: int, name: str, kernel: int = 3, stride: int = 2,
                 padding: int = 1) -> int:
        return self.add(name, MaxPool(kernel, stride, padding), (src,))

    def avg_pool(self, src: int, name: str, kernel: int = 2, stride: int = 2,
                 padding: int = 0) -> int:
        return self.add(name, AvgPool(kernel, stride, padding), (src,))

    def concat(self, srcs, name: str) -> int:
        return self.add(name, Concat(), tuple(srcs))

    def global_avg_pool(self, src: int, name: str) -> int:
        return self.add(name, GlobalAvgPool(), (src,))

    def linear(self, src: int, name: str, out_features: int) -> int:
        return self.add(name, Linear(out_features), (src,))

    def build(self, output_id: int) -> Graph:
        if self._input_id is None:
            raise GraphError("graph has no Input node")
        return Graph(self._nodes, self._input_id, output_id)


# --- JSON architecture-spec format -----------------------------------------
#
# {"version": 1,
#  "nodes": [{"id": 0, "name": "input", "kind": "Input",
#             "params": {"channels": 3}, "inputs": []}, ...],
#  "input": 0, "output": 12}
#
# "kind" strings are the class names above; "params" holds the kind's fields.

_KIND_CLASSES = {cls.__name__: cls for cls in
                 (Input, Conv, BatchNorm, ReLU, MaxPool, AvgPool, Concat, Add,
                  GlobalAvgPool, Linear)}

JSON_VERSION = 1


def graph_to_json(graph: Graph) -> dict:
    nodes = []
    for nid in sorted(graph.nodes):
        node = graph.node(nid)
        params = {f: getattr(node.kind, f) for f in
                  getattr(node.kind, "__dataclass_fields__", {})}
        nodes.append({"id": node.id, "name": node.name,
                      "kind": kind_name(node.kind), "params": params,
                      "inputs": list(node.inputs)})
    return {"version": JSON_VERSION, "nodes": nodes,
            "input": graph.input_id, "output": graph.output_id}


def graph_from_json(doc: dict) -> Graph:
    if doc.get("version") != JSON_VERSION:
        raise GraphError(f"unsupported graph spec version {doc.get('version')!r}")
    nodes = []
    for item in doc["nodes"]:
        kind_cls = _KIND_CLASSES.get(item["kind"])
        if kind_cls is None:
            raise GraphError(f"unknown layer kind {item['kind']!r}")
        try:
            kind = kind_cls(**item.get("params", {}))
        except TypeError as exc:
            raise GraphError(f"bad params for {item['kind']} node "
                             f"{item.get('name')!r}: {exc}") from exc
        nodes.append(Node(item["id"], item["name"], kind, tuple(item["inputs"])))
    return Graph(nodes, doc["input"], doc["output"])


def save_graph(graph: Graph, path) -> None:
    with open(path, "w") as fh:
        json.dump(graph_to_json(graph), fh, indent=2)
        fh.write("\n")


def load_graph(path) -> Graph:
    with open(path) as fh:
        return graph_from_json(json.load(fh))
