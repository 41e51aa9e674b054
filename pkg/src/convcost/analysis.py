"""Connectivity analysis: normalized mean absolute weight linking each source
layer to each consuming conv layer, plus shallow/deep aggregation summaries.

For a target conv whose input (traced through BN/ReLU/pool nodes) is a
concatenation, the target's weight tensor is sliced along input channels by
the concat's source ranges; entry (s, t) is the mean of |w| over the
(c_out, slice, k, k) block. Columns are normalized per target by their max,
so each target with any nonzero incoming weight has a 1.0 entry. Entries for
source/target pairs that are not wired are undefined (masked), not zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import (
    AvgPool, BatchNorm, Concat, Conv, Graph, MaxPool, ReLU, infer_channels,
    topo_order,
)

# Kinds that pass channels through unchanged; traced through transparently.
_TRANSPARENT = (BatchNorm, ReLU, MaxPool, AvgPool)


class AnalysisError(ValueError):
    pass


def _trace_terminal(graph: Graph, nid: int) -> int:
    """Walk up through channel-preserving nodes to the producing layer."""
    node = graph.node(nid)
    while isinstance(node.kind, _TRANSPARENT):
        node = graph.node(node.inputs[0])
    return node.id


def _channel_sources(graph: Graph, nid: int, channels: dict[int, int],
                     offset: int = 0):
    """Yield (terminal node id, lo, hi) ranges covering node ``nid``'s channels."""
    terminal = _trace_terminal(graph, nid)
    node = graph.node(terminal)
    if isinstance(node.kind, Concat):
        for src in node.inputs:
            yield from _channel_sources(graph, src, channels, offset)
            offset += channels[src]
    else:
        yield terminal, offset, offset + channels[nid]


@dataclass
class ConnectivityMatrix:
    sources: list[str]   # ordered by depth (topological position)
    targets: list[str]   # ordered by depth
    values: np.ndarray   # (len(sources), len(targets)), normalized per target
    defined: np.ndarray  # bool mask; False entries are not wired

    def to_csv(self) -> str:
        """Rows target-major, sources by depth; undefined entries omitted."""
        lines = ["source,target,value"]
        for j, target in enumerate(self.targets):
            for i, source in enumerate(self.sources):
                if self.defined[i, j]:
                    lines.append(f"{source},{target},{self.values[i, j]:.10g}")
        return "\n".join(lines) + "\n"


def connectivity_matrix(graph: Graph, params, scope: str = "") -> ConnectivityMatrix:
    """Source-to-target influence matrix for the convs under ``scope``.

    ``scope`` is a name prefix selecting the module/block fragment (e.g.
    ``stage2/osa1`` or ``block1``); an empty scope takes every conv. Sources
    are the traced producers feeding those convs, which adds the fragment's
    input layer (the layer just outside the scope).
    """
    def in_scope(name: str) -> bool:
        return not scope or name == scope or name.startswith(scope + "/")

    channels = infer_channels(graph)
    order = topo_order(graph)
    position = {nid: i for i, nid in enumerate(order)}

    target_ids = [nid for nid in order
                  if isinstance(graph.node(nid).kind, Conv)
                  and in_scope(graph.node(nid).name)]
    if not target_ids:
        raise AnalysisError(f"no conv nodes under scope {scope!r}")

    per_target: list[dict[int, list[tuple[int, int]]]] = []
    source_ids: list[int] = []
    for tid in target_ids:
        ranges: dict[int, list[tuple[int, int]]] = {}
        for src, lo, hi in _channel_sources(graph, graph.node(tid).inputs[0],
                                            channels):
            ranges.setdefault(src, []).append((lo, hi))
            if src not in source_ids:
                source_ids.append(src)
        per_target.append(ranges)
    source_ids.sort(key=position.__getitem__)

    src_index = {s: i for i, s in enumerate(source_ids)}
    values = np.zeros((len(source_ids), len(target_ids)))
    defined = np.zeros_like(values, dtype=bool)
    for j, (tid, ranges) in enumerate(zip(target_ids, per_target)):
        name = graph.node(tid).name
        try:
            weight = params[name]["weight"]
        except KeyError:
            raise AnalysisError(f"no weights for conv node {name!r}") from None
        for src, spans in ranges.items():
            block = np.concatenate([np.abs(weight[:, lo:hi]).reshape(-1)
                                    for lo, hi in spans])
            values[src_index[src], j] = block.mean()
            defined[src_index[src], j] = True
        peak = values[:, j].max()
        if peak > 0:
            values[:, j] /= peak

    return ConnectivityMatrix(
        sources=[graph.node(s).name for s in source_ids],
        targets=[graph.node(t).name for t in target_ids],
        values=values,
        defined=defined,
    )


def aggregation_summary(matrix: ConnectivityMatrix) -> dict[str, tuple[float, float]]:
    """Mean normalized influence of the shallow and deep halves per target.

    Sources are split at their median depth; with an odd count the median
    source belongs to both halves, so a single-source target reports that
    source's value twice.
    """
    out: dict[str, tuple[float, float]] = {}
    for j, target in enumerate(matrix.targets):
        idx = np.nonzero(matrix.defined[:, j])[0]
        if idx.size == 0:
            continue
        med = np.median(idx)
        shallow = matrix.values[idx[idx <= med], j]
        deep = matrix.values[idx[idx >= med], j]
        out[target] = (float(shallow.mean()), float(deep.mean()))
    return out


def save_connectivity_csv(matrix: ConnectivityMatrix, path) -> None:
    with open(path, "w") as fh:
        fh.write(matrix.to_csv())
