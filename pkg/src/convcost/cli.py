"""Command-line front end.

Subcommands: analyze, compare, energy, gradcheck, train-demo, connectivity,
emit-graph. Every command is deterministic given its flags and inputs and
exits 0 iff no error. The CONVCOST_THREADS environment variable caps BLAS
parallelism (applied before numpy loads, so it takes effect when the program
is started through this entry point).
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass


def _cap_threads():
    n = os.environ.get("CONVCOST_THREADS")
    if n:
        for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS",
                    "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
            os.environ.setdefault(var, n)


_cap_threads()

import numpy as np  # noqa: E402  (after the thread cap on purpose)

from . import analysis, cost, data, engine, weights_io, zoo  # noqa: E402
from .graph import GraphError, TensorShape, load_graph, save_graph, validate  # noqa: E402


@dataclass
class RunConfig:
    command: str
    arch: str = ""
    input_shape: TensorShape = TensorShape(1, 3, 224, 224)
    dtype: str = "f64"
    seed: int = 0
    out: str = ""
    fmt: str = "json"
    dtype_bytes: int = 4
    flops_per_mac: int = 1


def parse_shape(text: str) -> TensorShape:
    parts = text.lower().split("x")
    try:
        dims = [int(p) for p in parts]
    except ValueError:
        raise GraphError(f"cannot parse shape {text!r}; use NxCxHxW or CxHxW") from None
    if len(dims) == 3:
        dims = [1] + dims
    if len(dims) != 4 or any(d < 1 for d in dims):
        raise GraphError(f"cannot parse shape {text!r}; use NxCxHxW or CxHxW")
    return TensorShape(*dims)


def resolve_arch(name: str):
    """Registry name, or a path to a graph spec JSON file."""
    if name in zoo.ARCHITECTURES:
        return zoo.build_architecture(name)
    if name.endswith(".json") or os.path.exists(name):
        graph = load_graph(name)
        problems = validate(graph)
        if problems:
            raise GraphError(f"{name}: invalid graph: "
                             + "; ".join(str(p) for p in problems))
        return graph
    known = ", ".join(sorted(zoo.ARCHITECTURES))
    raise GraphError(f"unknown architecture {name!r}; known: {known} "
                     f"(or pass a graph spec .json path)")


_NP_DTYPES = {"f32": np.float32, "f64": np.float64}


def cmd_analyze(cfg: RunConfig) -> int:
    graph = resolve_arch(cfg.arch)
    report = cost.network_report(graph, cfg.input_shape, cfg.dtype_bytes,
                                 cfg.flops_per_mac, arch=cfg.arch)
    out_path = cfg.out or f"{os.path.basename(cfg.arch).replace('.json', '')}.cost.json"
    cost.save_report_json(report, out_path)
    if cfg.fmt == "table":
        print(report.to_table())
    elif cfg.fmt == "csv":
        print(report.to_csv(), end="")
    s = cfg.input_shape
    print(f"arch={cfg.arch} input={s.n}x{s.c}x{s.h}x{s.w} "
          f"flops_per_mac={cfg.flops_per_mac} mac_hw=output "
          f"dtype_bytes={cfg.dtype_bytes} report={out_path}")
    print(f"conv_only_mac={report.conv_only.mac}")
    t = report.totals
    print(f"{cfg.arch} {t.params} {t.flops} {t.mac} {report.activation_bytes}")
    return 0


def cmd_compare(cfg_a: RunConfig, cfg_b: RunConfig) -> int:
    rows = []
    reports = []
    for cfg in (cfg_a, cfg_b):
        graph = resolve_arch(cfg.arch)
        reports.append(cost.network_report(graph, cfg.input_shape,
                                           cfg.dtype_bytes, cfg.flops_per_mac,
                                           arch=cfg.arch))
    a, b = reports
    metrics = [
        ("params", a.totals.params, b.totals.params),
        ("flops", a.totals.flops, b.totals.flops),
        ("mac", a.totals.mac, b.totals.mac),
        ("conv_only_mac", a.conv_only.mac, b.conv_only.mac),
        ("activation_elems", a.totals.activation_elems, b.totals.activation_elems),
        ("nodes", len(a.per_node), len(b.per_node)),
    ]
    print(f"{'metric':<18} {cfg_a.arch:>16} {cfg_b.arch:>16} {'delta':>16} {'pct':>8}")
    for name, va, vb in metrics:
        delta = vb - va
        pct = 0.0 if va == 0 else 100.0 * delta / va
        print(f"{name:<18} {va:>16} {vb:>16} {delta:>+16} {pct:>+7.1f}%")
        rows.append((name, va, vb, delta))
    return 0


def cmd_energy(report_path: str, powerlog_path: str, images: int,
               wall_seconds: float) -> int:
    import json
    with open(report_path) as fh:
        report = cost.report_from_json(json.load(fh))
    log = cost.load_power_csv(powerlog_path)
    eff = cost.efficiency_metrics(report, images, wall_seconds, log)
    print(f"fps={eff.fps:.6g} avg_power_w={eff.avg_power:.6g} "
          f"joules_per_image={eff.joules_per_image:.6g} "
          f"gflops_per_second={eff.gflops_per_second:.6g}")
    return 0


def cmd_gradcheck(cfg: RunConfig, eps: float, threshold: float) -> int:
    graph = resolve_arch(cfg.arch)
    err = engine.grad_check(graph, cfg.input_shape, seed=cfg.seed, eps=eps,
                            dtype=_NP_DTYPES[cfg.dtype])
    ok = err < threshold
    print(f"max_rel_err={err:.3e} threshold={threshold:.1e} "
          f"{'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def cmd_train_demo(cfg: RunConfig, steps: int, batch_size: int, lr: float,
                   momentum: float, synthetic: bool, cifar_path: str,
                   limit: int) -> int:
    graph = resolve_arch(cfg.arch)
    if synthetic or not cifar_path:
        dataset = data.synthetic_batch(cfg.seed, limit)
    else:
        dataset = data.load_cifar10_binary(cifar_path, limit)
    state, losses = engine.train_loop(graph, dataset.images, dataset.labels,
                                      steps, batch_size, cfg.seed, lr, momentum,
                                      dtype=_NP_DTYPES[cfg.dtype])
    out_dir = cfg.out or "."
    os.makedirs(out_dir, exist_ok=True)
    loss_path = os.path.join(out_dir, "loss.csv")
    with open(loss_path, "w") as fh:
        fh.write("step,loss\n")
        for i, loss in enumerate(losses):
            fh.write(f"{i},{loss!r}\n")
    weights_path = os.path.join(out_dir, "weights.cvwt")
    weights_io.save_weights(state.params, weights_path)
    acc = engine.accuracy(graph, state.params, dataset.images, dataset.labels)
    print(f"steps={steps} final_loss={losses[-1]:.6f} train_accuracy={acc:.4f} "
          f"loss_csv={loss_path} weights={weights_path}")
    return 0


def cmd_connectivity(cfg: RunConfig, weights_path: str, module: str) -> int:
    graph = resolve_arch(cfg.arch)
    params = weights_io.load_weights(weights_path)
    matrix = analysis.connectivity_matrix(graph, params, module)
    out_path = cfg.out or "connectivity.csv"
    analysis.save_connectivity_csv(matrix, out_path)
    print(f"module={module or '(whole net)'} sources={len(matrix.sources)} "
          f"targets={len(matrix.targets)} csv={out_path}")
    return 0


def cmd_emit_graph(cfg: RunConfig) -> int:
    graph = resolve_arch(cfg.arch)
    out_path = cfg.out or f"{cfg.arch}.graph.json"
    save_graph(graph, out_path)
    print(f"arch={cfg.arch} nodes={len(graph)} graph={out_path}")
    return 0


def _add_common(p, default_input="3x224x224"):
    p.add_argument("--arch", required=True,
                   help="architecture name or graph spec .json path")
    p.add_argument("--input", default=default_input,
                   help="input shape, NxCxHxW or CxHxW (N defaults to 1)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="", help="output path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="convcost",
        description="CNN backbone cost analyzer and reference micro-engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="per-layer cost report for one network")
    _add_common(p)
    p.add_argument("--format", choices=("json", "table", "csv"), default="json")
    p.add_argument("--dtype-bytes", type=int, default=4)
    p.add_argument("--flops-per-mac", type=int, choices=(1, 2), default=1)

    p = sub.add_parser("compare", help="side-by-side totals of two networks")
    p.add_argument("--arch-a", required=True)
    p.add_argument("--arch-b", required=True)
    p.add_argument("--input", default="3x224x224")
    p.add_argument("--flops-per-mac", type=int, choices=(1, 2), default=1)

    p = sub.add_parser("energy", help="efficiency metrics from a report and a power log")
    p.add_argument("--report", required=True, help="cost report JSON path")
    p.add_argument("--powerlog", required=True,
                   help="CSV power log with header timestamp_s,power_w")
    p.add_argument("--images", type=int, required=True)
    p.add_argument("--wall-seconds", type=float, required=True)

    p = sub.add_parser("gradcheck", help="finite-difference gradient check")
    _add_common(p, default_input="3x8x8")
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--threshold", type=float, default=1e-6)
    p.add_argument("--dtype", choices=("f32", "f64"), default="f64")

    p = sub.add_parser("train-demo", help="toy SGD run; logs loss CSV and weights")
    _add_common(p, default_input="3x32x32")
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--batch", type=int, default=10)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--dtype", choices=("f32", "f64"), default="f32")
    p.add_argument("--synthetic", action="store_true",
                   help="use the deterministic synthetic dataset")
    p.add_argument("--cifar", default="", help="CIFAR-10 binary batch path")
    p.add_argument("--limit", type=int, default=500, help="dataset size cap")

    p = sub.add_parser("connectivity", help="normalized weight connectivity CSV")
    _add_common(p)
    p.add_argument("--weights", required=True, help="weights file (CVWT)")
    p.add_argument("--module", default="", help="name prefix of the module/block")

    p = sub.add_parser("emit-graph", help="write a network as a graph spec JSON")
    _add_common(p)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "analyze":
            cfg = RunConfig("analyze", arch=args.arch,
                            input_shape=parse_shape(args.input), seed=args.seed,
                            out=args.out, fmt=args.format,
                            dtype_bytes=args.dtype_bytes,
                            flops_per_mac=args.flops_per_mac)
            return cmd_analyze(cfg)
        if args.command == "compare":
            shape = parse_shape(args.input)
            cfg_a = RunConfig("analyze", arch=args.arch_a, input_shape=shape,
                              flops_per_mac=args.flops_per_mac)
            cfg_b = RunConfig("analyze", arch=args.arch_b, input_shape=shape,
                              flops_per_mac=args.flops_per_mac)
            return cmd_compare(cfg_a, cfg_b)
        if args.command == "energy":
            return cmd_energy(args.report, args.powerlog, args.images,
                              args.wall_seconds)
        if args.command == "gradcheck":
            cfg = RunConfig("gradcheck", arch=args.arch,
                            input_shape=parse_shape(args.input),
                            seed=args.seed, dtype=args.dtype)
            return cmd_gradcheck(cfg, args.eps, args.threshold)
        if args.command == "train-demo":
            cfg = RunConfig("train-demo", arch=args.arch,
                            input_shape=parse_shape(args.input),
                            seed=args.seed, out=args.out, dtype=args.dtype)
            return cmd_train_demo(cfg, args.steps, args.batch, args.lr,
                                  args.momentum, args.synthetic, args.cifar,
                                  args.limit)
        if args.command == "connectivity":
            cfg = RunConfig("connectivity", arch=args.arch, seed=args.seed,
                            out=args.out)
            return cmd_connectivity(cfg, args.weights, args.module)
        if args.command == "emit-graph":
            cfg = RunConfig("emit-graph", arch=args.arch, out=args.out)
            return cmd_emit_graph(cfg)
        raise GraphError(f"unknown command {args.command!r}")
    except Exception as exc:  # surface module errors with a nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
