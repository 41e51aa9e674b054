"""Constructors for the building blocks (OSA module, dense block, residual
block) and the full networks built from them.

Every conv here is emitted as a Conv-BN-ReLU triple (post-activation, bias
free) unless noted. Name grammar examples:

    stem/conv1, stem/conv1/bn, stem/conv1/relu
    stage2/pool, stage2/osa1/conv3, stage2/osa1/concat, stage2/osa1/proj
    block1/layer4/concat_in, block1/layer4/conv, block1/trans/conv, block1/trans/pool
    head/gap, head/fc

An OSA module chains ``num_convs`` same-width 3x3 convs, concatenates their
outputs once, and projects with a 1x1 conv. With ``bottleneck=True`` a 1x1
conv with ceil(input/2) channels is inserted in front of every 3x3 conv
(``.../squeezeN`` nodes). A dense block feeds each layer the concatenation of
the block input and all previous layer outputs, growing the input width by
``growth`` per layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .graph import Add, BatchNorm, Graph, GraphBuilder, GraphError


@dataclass(frozen=True)
class OsaConfig:
    in_channels: int
    stage_channels: int
    concat_out_channels: int
    num_convs: int = 5
    include_input_in_concat: bool = False
    bottleneck: bool = False

    def __post_init__(self):
        if self.num_convs < 1:
            raise ValueError(f"num_convs must be >= 1, got {self.num_convs}")
        for f in ("in_channels", "stage_channels", "concat_out_channels"):
            if getattr(self, f) < 1:
                raise ValueError(f"{f} must be >= 1")


@dataclass(frozen=True)
class DenseBlockConfig:
    in_channels: int
    growth: int
    num_layers: int
    bottleneck: bool = False

    def __post_init__(self):
        if self.num_layers < 1 or self.growth < 1 or self.in_channels < 1:
            raise ValueError("dense block channel/layer counts must be >= 1")


def build_osa_module(gb: GraphBuilder, cfg: OsaConfig, attach_to: int,
                     prefix: str) -> int:
    """Emit one OSA module onto the builder; returns the final node id."""
    if gb.channels[attach_to] != cfg.in_channels:
        raise GraphError(f"{prefix}: attach point has {gb.channels[attach_to]} "
                         f"channels, config expects {cfg.in_channels}")
    cur = attach_to
    conv_outs = []
    for i in range(1, cfg.num_convs + 1):
        if cfg.bottleneck:
            squeeze = math.ceil(gb.channels[cur] / 2)
            cur = gb.conv_bn_relu(cur, f"{prefix}/squeeze{i}", squeeze,
                                  kernel=1, padding=0)
        cur = gb.conv_bn_relu(cur, f"{prefix}/conv{i}", cfg.stage_channels)
        conv_outs.append(cur)
    sources = ([attach_to] if cfg.include_input_in_concat else []) + conv_outs
    if len(sources) >= 2:
        agg = gb.concat(sources, f"{prefix}/concat")
    else:
        agg = sources[0]  # a 1-way concat would violate Concat arity; wire through
    return gb.conv_bn_relu(agg, f"{prefix}/proj", cfg.concat_out_channels,
                           kernel=1, padding=0)


def build_dense_block(gb: GraphBuilder, cfg: DenseBlockConfig, attach_to: int,
                      prefix: str) -> int:
    """Emit one dense block; returns the final (block-wide) concat node id."""
    if gb.channels[attach_to] != cfg.in_channels:
        raise GraphError(f"{prefix}: attach point has {gb.channels[attach_to]} "
                         f"channels, config expects {cfg.in_channels}")
    outs = [attach_to]  # concat order: block input first, then layer outputs
    for i in range(1, cfg.num_layers + 1):
        if len(outs) == 1:
            src = outs[0]
        else:
            src = gb.concat(outs, f"{prefix}/layer{i}/concat_in")
        if cfg.bottleneck:
            src = gb.conv_bn_relu(src, f"{prefix}/layer{i}/squeeze",
                                  4 * cfg.growth, kernel=1, padding=0)
        outs.append(gb.conv_bn_relu(src, f"{prefix}/layer{i}/conv", cfg.growth))
    return gb.concat(outs, f"{prefix}/concat")


def build_residual_block(gb: GraphBuilder, in_channels: int, out_channels: int,
                         stride: int, attach_to: int, prefix: str) -> int:
    """Two 3x3 Conv-BN-ReLU layers added to an identity (or 1x1 projection)."""
    if gb.channels[attach_to] != in_channels:
        raise GraphError(f"{prefix}: attach point has {gb.channels[attach_to]} "
                         f"channels, expected {in_channels}")
    cur = gb.conv_bn_relu(attach_to, f"{prefix}/conv1", out_channels,
                          stride=stride)
    cur = gb.conv_bn_relu(cur, f"{prefix}/conv2", out_channels)
    if in_channels == out_channels and stride == 1:
        shortcut = attach_to
    else:
        shortcut = gb.conv(attach_to, f"{prefix}/proj", out_channels,
                           kernel=1, stride=stride, padding=0)
        shortcut = gb.add(f"{prefix}/proj/bn", BatchNorm(), (shortcut,))
    return gb.add(f"{prefix}/add", Add(), (cur, shortcut))


class VovVariant(Enum):
    V27_SLIM = "vovnet27slim"
    V39 = "vovnet39"
    V57 = "vovnet57"


# Per stage: (3x3 conv width, 1x1 projection width, module repeats).
_VOV_TABLES = {
    VovVariant.V27_SLIM: ((64, 128, 1), (80, 256, 1), (96, 384, 1), (112, 512, 1)),
    VovVariant.V39: ((128, 256, 1), (160, 512, 1), (192, 768, 2), (224, 1024, 2)),
    VovVariant.V57: ((128, 256, 1), (160, 512, 1), (192, 768, 4), (224, 1024, 3)),
}

_STEM = ((64, 2), (64, 1), (128, 1))  # (width, stride) triple-conv stem


def build_vovnet(variant: VovVariant, bottleneck: bool = False) -> Graph:
    """Full backbone: 3-conv stem, then 4 OSA stages, stride-2 max pool at
    each stage entry (output stride 32). No classifier head."""
    gb = GraphBuilder()
    cur = gb.input("input", 3)
    for i, (width, stride) in enumerate(_STEM, start=1):
        cur = gb.conv_bn_relu(cur, f"stem/conv{i}", width, stride=stride)
    for stage_idx, (width, proj, repeats) in enumerate(_VOV_TABLES[variant], start=2):
        cur = gb.max_pool(cur, f"stage{stage_idx}/pool")
        for m in range(1, repeats + 1):
            cfg = OsaConfig(in_channels=gb.channels[cur], stage_channels=width,
                            concat_out_channels=proj, bottleneck=bottleneck)
            cur = build_osa_module(gb, cfg, cur, f"stage{stage_idx}/osa{m}")
    return gb.build(cur)


# DenseNet-40 block output widths with growth 12 and no compression; the
# OSA-for-dense swap keeps these as its projection widths.
_DENSE40_BLOCK_OUT = (160, 304, 448)


def build_densenet40(growth: int = 12, bottleneck: bool = False,
                     num_classes: int = 10) -> Graph:
    """CIFAR DenseNet-40: 3x3/16 stem, three 12-layer dense blocks at
    32/16/8 spatial, 1x1 transition conv + 2x2 average pool between blocks,
    global average pool and a linear classifier."""
    gb = GraphBuilder()
    cur = gb.input("input", 3)
    cur = gb.conv_bn_relu(cur, "stem/conv", 16)
    for b in (1, 2, 3):
        cfg = DenseBlockConfig(in_channels=gb.channels[cur], growth=growth,
                               num_layers=12, bottleneck=bottleneck)
        cur = build_dense_block(gb, cfg, cur, f"block{b}")
        if b < 3:
            # no compression: transition keeps the block's output width
            cur = gb.conv_bn_relu(cur, f"block{b}/trans/conv",
                                  gb.channels[cur], kernel=1, padding=0)
            cur = gb.avg_pool(cur, f"block{b}/trans/pool")
    cur = gb.global_avg_pool(cur, "head/gap")
    cur = gb.linear(cur, "head/fc", num_classes)
    return gb.build(cur)


def build_osa_cifar(conv_channels: int = 43, num_convs: int = 5,
                    num_classes: int = 10) -> Graph:
    """DenseNet-40 macro layout with each dense block swapped for one OSA
    module. Projection widths match the replaced blocks' output channels
    (160/304/448); the 1x1 transition convs and 2x2 average pools between
    blocks are kept as in DenseNet-40."""
    gb = GraphBuilder()
    cur = gb.input("input", 3)
    cur = gb.conv_bn_relu(cur, "stem/conv", 16)
    for b, proj in enumerate(_DENSE40_BLOCK_OUT, start=1):
        cfg = OsaConfig(in_channels=gb.channels[cur], stage_channels=conv_channels,
                        concat_out_channels=proj, num_convs=num_convs)
        cur = build_osa_module(gb, cfg, cur, f"module{b}")
        if b < 3:
            cur = gb.conv_bn_relu(cur, f"trans{b}/conv", gb.channels[cur],
                                  kernel=1, padding=0)
            cur = gb.avg_pool(cur, f"trans{b}/pool")
    cur = gb.global_avg_pool(cur, "head/gap")
    cur = gb.linear(cur, "head/fc", num_classes)
    return gb.build(cur)


# --- small networks for gradient checks and demos ---------------------------

def build_osa_tiny(num_classes: int = 3) -> Graph:
    gb = GraphBuilder()
    cur = gb.input("input", 3)
    cur = gb.conv_bn_relu(cur, "stem/conv", 4)
    cur = gb.max_pool(cur, "stage1/pool")
    cfg = OsaConfig(in_channels=4, stage_channels=4, concat_out_channels=8,
                    num_convs=2)
    cur = build_osa_module(gb, cfg, cur, "stage1/osa1")
    cur = gb.global_avg_pool(cur, "head/gap")
    cur = gb.linear(cur, "head/fc", num_classes)
    return gb.build(cur)


def build_dense_tiny(num_classes: int = 2) -> Graph:
    gb = GraphBuilder()
    cur = gb.input("input", 3)
    cur = gb.conv_bn_relu(cur, "stem/conv", 4)
    cfg = DenseBlockConfig(in_channels=4, growth=3, num_layers=3)
    cur = build_dense_block(gb, cfg, cur, "block1")
    cur = gb.conv_bn_relu(cur, "block1/trans/conv", 6, kernel=1, padding=0)
    cur = gb.avg_pool(cur, "block1/trans/pool")
    cur = gb.global_avg_pool(cur, "head/gap")
    cur = gb.linear(cur, "head/fc", num_classes)
    return gb.build(cur)


def build_res_tiny(num_classes: int = 2) -> Graph:
    gb = GraphBuilder()
    cur = gb.input("input", 3)
    cur = gb.conv_bn_relu(cur, "stem/conv", 4)
    cur = build_residual_block(gb, 4, 4, 1, cur, "stage1/res1")
    cur = build_residual_block(gb, 4, 6, 2, cur, "stage2/res1")
    cur = gb.global_avg_pool(cur, "head/gap")
    cur = gb.linear(cur, "head/fc", num_classes)
    return gb.build(cur)


ARCHITECTURES = {
    "vovnet27slim": lambda: build_vovnet(VovVariant.V27_SLIM),
    "vovnet39": lambda: build_vovnet(VovVariant.V39),
    "vovnet57": lambda: build_vovnet(VovVariant.V57),
    "vovnet27slim-bottleneck": lambda: build_vovnet(VovVariant.V27_SLIM,
                                                    bottleneck=True),
    "densenet40": build_densenet40,
    "osa-cifar": build_osa_cifar,
    "osa-tiny": build_osa_tiny,
    "dense-tiny": build_dense_tiny,
    "res-tiny": build_res_tiny,
}


def build_architecture(name: str) -> Graph:
    try:
        builder = ARCHITECTURES[name]
    except KeyError:
        known = ", ".join(sorted(ARCHITECTURES))
        raise GraphError(f"unknown architecture {name!r}; known: {known}") from None
    return builder()
