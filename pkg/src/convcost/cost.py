"""Analytical efficiency model: memory access cost, FLOPs, parameters,
activation footprint, and the derived energy / throughput metrics.

Conventions (also embedded in every serialized report):

* conv MAC counts element accesses as ``h*w*(c_i + c_o) + k^2*c_i*c_o`` with
  ``h, w`` the convolution's *output* spatial size; for the stride-1
  padding-same layers analyzed here input and output sizes coincide, and for
  strided layers the output size is used. With a batch of n the activation
  terms scale by n while the weight term does not.
* FLOPs count one multiply-accumulate as 1 by default; ``flops_per_mac=2``
  switches to the multiply+add convention and scales conv/linear FLOPs only.
* MAC is element-denominated; bytes are reported separately as
  ``elements * dtype_bytes``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from functools import cached_property

from .graph import (
    Add, AvgPool, BatchNorm, Concat, Conv, GlobalAvgPool, Graph, Input,
    Linear, MaxPool, ReLU, TensorShape, infer_shapes, kind_name, topo_order,
)


class CostError(ValueError):
    pass


def conv_mac(h: int, w: int, c_i: int, c_o: int, k: int) -> int:
    """Memory access cost of one convolution, in element accesses.

    ``h, w`` are the output spatial dims. Exact integer arithmetic.
    """
    for name, v in (("h", h), ("w", w), ("c_i", c_i), ("c_o", c_o), ("k", k)):
        if v < 1:
            raise CostError(f"conv_mac: {name} must be >= 1, got {v}")
    return h * w * (c_i + c_o) + k * k * c_i * c_o


def mac_lower_bound(B: int, h: int, w: int, k: int) -> float:
    """Lower bound on conv MAC at fixed computation B = k^2*h*w*c_i*c_o.

    Equality holds exactly when c_i = c_o (the balanced-channel case).
    """
    for name, v in (("B", B), ("h", h), ("w", w), ("k", k)):
        if v < 1:
            raise CostError(f"mac_lower_bound: {name} must be >= 1, got {v}")
    return 2.0 * math.sqrt(h * w * B / (k * k)) + B / (h * w)


@dataclass(frozen=True)
class LayerCost:
    mac: int
    flops: int
    params: int
    activation_elems: int

    def __add__(self, other: "LayerCost") -> "LayerCost":
        return LayerCost(self.mac + other.mac, self.flops + other.flops,
                         self.params + other.params,
                         self.activation_elems + other.activation_elems)


_ZERO = LayerCost(0, 0, 0, 0)


def layer_cost(graph: Graph, node_id: int, shapes: dict[int, TensorShape],
               flops_per_mac: int = 1) -> LayerCost:
    """Cost of a single node given inferred shapes.

    Element-wise and pooling kinds have no parameters; their MAC is input
    elements plus output elements. Concat moves data but computes nothing.
    The Input node is the source and costs nothing beyond its activation.
    """
    node = graph.node(node_id)
    kind = node.kind
    out = shapes[node_id]
    ins = [shapes[i] for i in node.inputs]
    in_elems = sum(s.elems for s in ins)

    if isinstance(kind, Input):
        return LayerCost(0, 0, 0, out.elems)
    if isinstance(kind, Conv):
        c_i, c_o, k = ins[0].c, kind.out_channels, kind.kernel
        params = k * k * c_i * c_o + (c_o if kind.has_bias else 0)
        flops = flops_per_mac * k * k * c_i * c_o * out.h * out.w * out.n
        mac = out.n * out.h * out.w * (c_i + c_o) + k * k * c_i * c_o
        return LayerCost(mac, flops, params, out.elems)
    if isinstance(kind, Linear):
        c_i, c_o = ins[0].c, kind.out_features
        params = c_i * c_o + c_o
        flops = flops_per_mac * c_i * c_o * out.n
        mac = out.n * (c_i + c_o) + params
        return LayerCost(mac, flops, params, out.elems)
    if isinstance(kind, BatchNorm):
        c = out.c
        return LayerCost(2 * out.elems + 2 * c, 2 * out.elems, 2 * c, out.elems)
    if isinstance(kind, Concat):
        return LayerCost(in_elems + out.elems, 0, 0, out.elems)
    if isinstance(kind, (ReLU, MaxPool, AvgPool, Add, GlobalAvgPool)):
        return LayerCost(in_elems + out.elems, out.elems, 0, out.elems)
    raise CostError(f"no cost rule for kind {kind_name(kind)} (node {node.name!r})")


class CostReport:
    """Per-node costs plus totals and per-kind subtotals for one graph."""

    def __init__(self, per_node: dict[str, LayerCost], kinds: dict[str, str],
                 input_shape: TensorShape, dtype_bytes: int, flops_per_mac: int,
                 arch: str = ""):
        self.per_node = per_node
        self.kinds = kinds  # node name -> kind string
        self.input_shape = input_shape
        self.dtype_bytes = dtype_bytes
        self.flops_per_mac = flops_per_mac
        self.arch = arch

    @cached_property
    def totals(self) -> LayerCost:
        total = _ZERO
        for cost in self.per_node.values():
            total = total + cost
        return total

    @cached_property
    def subtotals(self) -> dict[str, LayerCost]:
        by_kind: dict[str, LayerCost] = {}
        for name, cost in self.per_node.items():
            kind = self.kinds[name]
            by_kind[kind] = by_kind.get(kind, _ZERO) + cost
        return by_kind

    @property
    def conv_only(self) -> LayerCost:
        """Subtotal over Conv nodes only; the Eq.-style MAC analysis covers these."""
        return self.subtotals.get("Conv", _ZERO)

    @property
    def activation_bytes(self) -> int:
        return self.totals.activation_elems * self.dtype_bytes

    def to_json_dict(self) -> dict:
        per_node = {}
        for name in sorted(self.per_node):
            c = self.per_node[name]
            per_node[name] = {"kind": self.kinds[name], "mac": c.mac,
                              "flops": c.flops, "params": c.params,
                              "activation_elems": c.activation_elems}
        t = self.totals
        return {
            "arch": self.arch,
            "input_shape": list(self.input_shape),
            "metadata": {
                "flops_per_mac": self.flops_per_mac,
                "mac_spatial_convention": "output h,w",
                "dtype_bytes": self.dtype_bytes,
            },
            "totals": {"mac": t.mac, "flops": t.flops, "params": t.params,
                       "activation_elems": t.activation_elems,
                       "activation_bytes": self.activation_bytes},
            "subtotals": {
                kind: {"mac": c.mac, "flops": c.flops, "params": c.params,
                       "activation_elems": c.activation_elems}
                for kind, c in sorted(self.subtotals.items())
            },
            "per_node": per_node,
        }

    def to_table(self) -> str:
        header = f"{'node':<40} {'kind':<14} {'params':>12} {'flops':>14} {'mac':>14} {'act_elems':>12}"
        lines = [header, "-" * len(header)]
        for name in sorted(self.per_node):
            c = self.per_node[name]
            lines.append(f"{name:<40} {self.kinds[name]:<14} {c.params:>12} "
                         f"{c.flops:>14} {c.mac:>14} {c.activation_elems:>12}")
        lines.append("-" * len(header))
        t = self.totals
        lines.append(f"{'TOTAL':<40} {'':<14} {t.params:>12} {t.flops:>14} "
                     f"{t.mac:>14} {t.activation_elems:>12}")
        conv = self.conv_only
        lines.append(f"{'CONV ONLY':<40} {'':<14} {conv.params:>12} {conv.flops:>14} "
                     f"{conv.mac:>14} {conv.activation_elems:>12}")
        return "\n".join(lines)

    def to_csv(self) -> str:
        lines = ["name,kind,params,flops,mac,activation_elems"]
        for name in sorted(self.per_node):
            c = self.per_node[name]
            lines.append(f"{name},{self.kinds[name]},{c.params},{c.flops},"
                         f"{c.mac},{c.activation_elems}")
        return "\n".join(lines) + "\n"


def network_report(graph: Graph, input_shape: TensorShape, dtype_bytes: int = 4,
                   flops_per_mac: int = 1, arch: str = "") -> CostReport:
    """Cost every node and aggregate. Exact integer arithmetic throughout."""
    shapes = infer_shapes(graph, input_shape)
    per_node: dict[str, LayerCost] = {}
    kinds: dict[str, str] = {}
    for nid in topo_order(graph):
        node = graph.node(nid)
        per_node[node.name] = layer_cost(graph, nid, shapes, flops_per_mac)
        kinds[node.name] = kind_name(node.kind)
    return CostReport(per_node, kinds, input_shape, dtype_bytes, flops_per_mac, arch)


def report_from_json(doc: dict) -> CostReport:
    per_node = {}
    kinds = {}
    for name, entry in doc["per_node"].items():
        per_node[name] = LayerCost(entry["mac"], entry["flops"], entry["params"],
                                   entry["activation_elems"])
        kinds[name] = entry["kind"]
    meta = doc["metadata"]
    return CostReport(per_node, kinds, TensorShape(*doc["input_shape"]),
                      meta["dtype_bytes"], meta["flops_per_mac"],
                      doc.get("arch", ""))


# --- power log and efficiency metrics ---------------------------------------

@dataclass(frozen=True)
class PowerLog:
    """Timestamped wattage samples, nominally one every 0.1 s."""

    timestamps: tuple[float, ...]
    watts: tuple[float, ...]

    def __post_init__(self):
        if len(self.timestamps) != len(self.watts):
            raise CostError("power log: timestamp/power length mismatch")
        for i in range(1, len(self.timestamps)):
            if self.timestamps[i] <= self.timestamps[i - 1]:
                raise CostError(f"power log: timestamps not strictly increasing "
                                f"at sample {i}")
        for i, p in enumerate(self.watts):
            if p < 0:
                raise CostError(f"power log: negative power {p} at sample {i}")

    def __len__(self) -> int:
        return len(self.watts)


def load_power_csv(path) -> PowerLog:
    """Read a ``timestamp_s,power_w`` CSV, as emitted by device monitors."""
    ts: list[float] = []
    ws: list[float] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["timestamp_s", "power_w"]:
            raise CostError(f"power log {path}: expected header "
                            f"'timestamp_s,power_w', got {header!r}")
        for row in reader:
            if not row:
                continue
            ts.append(float(row[0]))
            ws.append(float(row[1]))
    return PowerLog(tuple(ts), tuple(ws))


def average_power(log: PowerLog) -> float:
    """Arithmetic mean of the sampled wattages."""
    if len(log) == 0:
        raise CostError("average_power: empty power log")
    return sum(log.watts) / len(log)


@dataclass(frozen=True)
class EfficiencyReport:
    fps: float
    avg_power: float
    joules_per_image: float
    gflops_per_second: float


def efficiency_from_flops(flops_per_image: float, images: int, wall_seconds: float,
                          log: PowerLog) -> EfficiencyReport:
    if wall_seconds <= 0:
        raise CostError("efficiency metrics: wall_seconds must be > 0")
    if images < 1:
        raise CostError("efficiency metrics: images must be >= 1")
    fps = images / wall_seconds
    avg = average_power(log)
    seconds_per_image = wall_seconds / images
    return EfficiencyReport(
        fps=fps,
        avg_power=avg,
        joules_per_image=avg / fps,
        gflops_per_second=flops_per_image / seconds_per_image / 1e9,
    )


def efficiency_metrics(report: CostReport, images: int, wall_seconds: float,
                       log: PowerLog) -> EfficiencyReport:
    """Throughput, energy and device-utilization metrics for a measured run.

    ``report`` supplies the per-image FLOPs (cost reports are conventionally
    computed at batch 1).
    """
    return efficiency_from_flops(report.totals.flops, images, wall_seconds, log)


def save_report_json(report: CostReport, path) -> None:
    with open(path, "w") as fh:
        json.dump(report.to_json_dict(), fh, indent=2)
        fh.write("\n")
