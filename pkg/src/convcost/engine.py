"""Deterministic reference numeric engine: forward, reverse-mode gradients,
and SGD for every layer kind in the graph IR.

Semantics are the direct summation formulas (see conv2d_direct); the
vectorized paths used by forward/backward reorganize the same sums with
im2col + matmul and agree bit-for-bit on integer-valued tensors, where
floating-point addition is exact regardless of order. Tensors are numpy
float32/float64 arrays in (n, c, h, w) layout.

Parameters live in a ParamStore: ``{node name: {field name: ndarray}}`` with
fields drawn from ``weight, bias, bn_gamma, bn_beta, bn_mean, bn_var``.
The bn_mean/bn_var entries are running-statistic buffers, not trainable
parameters; count_parameters and gradients cover trainable fields only.

forward/backward are pure; train_step is the one mutating operation (it
updates parameters, momentum buffers and BN running statistics in place).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graph import (
    Add, AvgPool, BatchNorm, Concat, Conv, GlobalAvgPool, Graph, Input,
    Linear, MaxPool, ReLU, TensorShape, infer_channels, kind_name, topo_order,
)
from .rng import NormalStream

BN_EPS = 1e-5
BN_MOMENTUM = 0.9  # running = momentum * running + (1 - momentum) * batch
TRAINABLE_FIELDS = ("weight", "bias", "bn_gamma", "bn_beta")
FIELD_ORDER = ("weight", "bias", "bn_gamma", "bn_beta", "bn_mean", "bn_var")
GRAD_CHECK_PARAM_GUARD = 50_000

ParamStore = dict  # {node name: {field: ndarray}}


class EngineError(ValueError):
    pass


# --- low-level kernels -------------------------------------------------------

def _pool_out(size, kernel, stride, padding):
    return (size + 2 * padding - kernel) // stride + 1


def _im2col(x, kernel, stride, padding, pad_value=0.0):
    """Window view (n, c, k, k, ho, wo) of the padded input."""
    n, c, h, w = x.shape
    ho = _pool_out(h, kernel, stride, padding)
    wo = _pool_out(w, kernel, stride, padding)
    if ho < 1 or wo < 1:
        raise EngineError(f"window {kernel}x{kernel}/s{stride}/p{padding} does not "
                          f"fit input {x.shape}")
    if padding > 0:
        xp = np.full((n, c, h + 2 * padding, w + 2 * padding), pad_value,
                     dtype=x.dtype)
        xp[:, :, padding:padding + h, padding:padding + w] = x
    else:
        xp = x
    cols = np.empty((n, c, kernel, kernel, ho, wo), dtype=x.dtype)
    for dy in range(kernel):
        for dx in range(kernel):
            cols[:, :, dy, dx] = xp[:, :, dy:dy + stride * ho:stride,
                                    dx:dx + stride * wo:stride]
    return cols


def _col2im(dcols, in_shape, kernel, stride, padding):
    """Scatter-add window gradients back to the (unpadded) input layout."""
    n, c, h, w = in_shape
    ho, wo = dcols.shape[-2:]
    dxp = np.zeros((n, c, h + 2 * padding, w + 2 * padding), dtype=dcols.dtype)
    for dy in range(kernel):
        for dx in range(kernel):
            dxp[:, :, dy:dy + stride * ho:stride,
                dx:dx + stride * wo:stride] += dcols[:, :, dy, dx]
    if padding > 0:
        return dxp[:, :, padding:padding + h, padding:padding + w]
    return dxp


def conv2d(x, weight, bias, stride, padding):
    co, ci, k, _ = weight.shape
    n, _, h, w = x.shape
    if k == 1 and stride == 1 and padding == 0:
        # pointwise conv: plain channel matmul, no window gather needed
        out = np.matmul(weight.reshape(co, ci), x.reshape(n, ci, h * w))
        out = out.reshape(n, co, h, w)
    else:
        cols = _im2col(x, k, stride, padding)
        ho, wo = cols.shape[-2:]
        out = np.matmul(weight.reshape(co, ci * k * k),
                        cols.reshape(n, ci * k * k, ho * wo))
        out = out.reshape(n, co, ho, wo)
    if bias is not None:
        out = out + bias.reshape(1, co, 1, 1)
    return out


def conv2d_direct(x, weight, bias, stride, padding):
    """Reference convolution as literal loops; the defining semantics.

    out[n,co,y,x] = sum_{ci,dy,dx} w[co,ci,dy,dx] * in[n,ci,y*s-p+dy,x*s-p+dx]
    with out-of-range taps contributing zero. Test oracle only; quadratic-slow.
    """
    n, ci, h, w = x.shape
    co, _, k, _ = weight.shape
    ho = _pool_out(h, k, stride, padding)
    wo = _pool_out(w, k, stride, padding)
    out = np.zeros((n, co, ho, wo), dtype=x.dtype)
    for ni in range(n):
        for oc in range(co):
            for y in range(ho):
                for xx in range(wo):
                    acc = x.dtype.type(0)
                    for ic in range(ci):
                        for dy in range(k):
                            for dx in range(k):
                                yy = y * stride - padding + dy
                                xc = xx * stride - padding + dx
                                if 0 <= yy < h and 0 <= xc < w:
                                    acc += weight[oc, ic, dy, dx] * x[ni, ic, yy, xc]
                    out[ni, oc, y, xx] = acc
    if bias is not None:
        out += bias.reshape(1, co, 1, 1)
    return out


def conv2d_backward(x, weight, stride, padding, g, has_bias):
    co, ci, k, _ = weight.shape
    n = x.shape[0]
    db = g.sum(axis=(0, 2, 3)) if has_bias else None
    if k == 1 and stride == 1 and padding == 0:
        x_mat = x.reshape(n, ci, -1)
        g_mat = g.reshape(n, co, -1)
        dw = np.tensordot(g_mat, x_mat, axes=([0, 2], [0, 2]))
        dx = np.matmul(weight.reshape(co, ci).T, g_mat).reshape(x.shape)
        return dx, dw.reshape(weight.shape), db
    cols = _im2col(x, k, stride, padding)
    ho, wo = cols.shape[-2:]
    cols_mat = cols.reshape(n, ci * k * k, ho * wo)
    g_mat = g.reshape(n, co, ho * wo)
    dw = np.tensordot(g_mat, cols_mat, axes=([0, 2], [0, 2]))
    dcols = np.matmul(weight.reshape(co, ci * k * k).T, g_mat)
    dx = _col2im(dcols.reshape(n, ci, k, k, ho, wo), x.shape, k, stride, padding)
    return dx, dw.reshape(weight.shape), db


def maxpool_forward(x, kernel, stride, padding):
    # -inf padding so border windows ignore the pad region
    cols = _im2col(x, kernel, stride, padding, pad_value=-np.inf)
    n, c, _, _, ho, wo = cols.shape
    return cols.reshape(n, c, kernel * kernel, ho, wo).max(axis=2)


def maxpool_backward(x, kernel, stride, padding, g):
    cols = _im2col(x, kernel, stride, padding, pad_value=-np.inf)
    n, c, _, _, ho, wo = cols.shape
    flat = cols.reshape(n, c, kernel * kernel, ho, wo)
    winner = flat.argmax(axis=2)  # ties: first window slot wins
    dcols = np.zeros_like(flat)
    np.put_along_axis(dcols, winner[:, :, None], g[:, :, None], axis=2)
    return _col2im(dcols.reshape(cols.shape), x.shape, kernel, stride, padding)


def avgpool_forward(x, kernel, stride, padding):
    # zero padding included in the divisor (count_include_pad convention)
    cols = _im2col(x, kernel, stride, padding)
    n, c, _, _, ho, wo = cols.shape
    return cols.reshape(n, c, kernel * kernel, ho, wo).sum(axis=2) / (kernel * kernel)


def avgpool_backward(x, kernel, stride, padding, g):
    k2 = kernel * kernel
    n, c, ho, wo = g.shape
    dcols = np.broadcast_to((g / k2)[:, :, None, None],
                            (n, c, kernel, kernel, ho, wo)).astype(g.dtype)
    return _col2im(dcols, x.shape, kernel, stride, padding)


def _bn_stats(x):
    mu = x.mean(axis=(0, 2, 3))
    var = x.var(axis=(0, 2, 3))  # biased, matching normalization
    return mu, var


def batchnorm_forward(x, gamma, beta, mu, var):
    inv = 1.0 / np.sqrt(var + BN_EPS)
    xhat = (x - mu.reshape(1, -1, 1, 1)) * inv.reshape(1, -1, 1, 1)
    return gamma.reshape(1, -1, 1, 1) * xhat + beta.reshape(1, -1, 1, 1)


def batchnorm_backward(x, gamma, g):
    mu, var = _bn_stats(x)
    inv = (1.0 / np.sqrt(var + BN_EPS)).reshape(1, -1, 1, 1)
    xhat = (x - mu.reshape(1, -1, 1, 1)) * inv
    m = x.shape[0] * x.shape[2] * x.shape[3]
    dgamma = (g * xhat).sum(axis=(0, 2, 3))
    dbeta = g.sum(axis=(0, 2, 3))
    dxhat = g * gamma.reshape(1, -1, 1, 1)
    dx = (inv / m) * (m * dxhat
                      - dxhat.sum(axis=(0, 2, 3), keepdims=True)
                      - xhat * (dxhat * xhat).sum(axis=(0, 2, 3), keepdims=True))
    return dx, dgamma, dbeta


# --- parameter store ---------------------------------------------------------

def init_params(graph: Graph, seed: int, dtype=np.float64) -> ParamStore:
    """Fan-in-scaled normal initialization from the portable seeded stream.

    Draw order is fixed: nodes in topological order, weight tensors filled in
    C (row-major) order from one shared normal stream; biases start at zero,
    BN at gamma=1, beta=0, running mean=0, var=1. Conv weight std is
    sqrt(2 / (c_in * k^2)), Linear weight std sqrt(2 / c_in). Identical
    (graph, seed) always produce bit-identical stores.
    """
    dtype = np.dtype(dtype)
    if dtype not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise EngineError(f"unsupported dtype {dtype}")
    channels = infer_channels(graph)
    stream = NormalStream(seed)
    store: ParamStore = {}
    for nid in topo_order(graph):
        node = graph.node(nid)
        kind = node.kind
        if isinstance(kind, Conv):
            c_in = channels[node.inputs[0]]
            k = kind.kernel
            std = math.sqrt(2.0 / (c_in * k * k))
            shape = (kind.out_channels, c_in, k, k)
            weight = (std * stream.draw(int(np.prod(shape)))).reshape(shape)
            fields = {"weight": weight.astype(dtype)}
            if kind.has_bias:
                fields["bias"] = np.zeros(kind.out_channels, dtype=dtype)
            store[node.name] = fields
        elif isinstance(kind, Linear):
            c_in = channels[node.inputs[0]]
            std = math.sqrt(2.0 / c_in)
            shape = (kind.out_features, c_in)
            weight = (std * stream.draw(int(np.prod(shape)))).reshape(shape)
            store[node.name] = {
                "weight": weight.astype(dtype),
                "bias": np.zeros(kind.out_features, dtype=dtype),
            }
        elif isinstance(kind, BatchNorm):
            c = channels[nid]
            store[node.name] = {
                "bn_gamma": np.ones(c, dtype=dtype),
                "bn_beta": np.zeros(c, dtype=dtype),
                "bn_mean": np.zeros(c, dtype=dtype),
                "bn_var": np.ones(c, dtype=dtype),
            }
    return store


def count_parameters(store: ParamStore) -> int:
    """Trainable scalar count (weights, biases, BN gamma/beta; buffers excluded)."""
    total = 0
    for fields in store.values():
        for fname in TRAINABLE_FIELDS:
            if fname in fields:
                total += fields[fname].size
    return total


def _store_dtype(store: ParamStore):
    for fields in store.values():
        for arr in fields.values():
            return arr.dtype
    return None


# --- forward / backward ------------------------------------------------------

def forward(graph: Graph, params: ParamStore, x: np.ndarray, mode: str = "train",
            debug: bool = False) -> dict[int, np.ndarray]:
    """Evaluate every node; returns activations keyed by node id.

    ``train`` mode normalizes BN with batch statistics, ``eval`` with the
    stored running statistics. Pure: running statistics are NOT updated here
    (train_step does that).
    """
    if mode not in ("train", "eval"):
        raise EngineError(f"mode must be 'train' or 'eval', got {mode!r}")
    pdtype = _store_dtype(params)
    if pdtype is not None and x.dtype != pdtype:
        raise EngineError(f"input dtype {x.dtype} != parameter dtype {pdtype}")
    acts: dict[int, np.ndarray] = {}
    for nid in topo_order(graph):
        node = graph.node(nid)
        kind = node.kind
        ins = [acts[i] for i in node.inputs]
        if isinstance(kind, Input):
            if x.ndim != 4 or x.shape[1] != kind.channels:
                raise EngineError(f"node {node.name!r}: expected (n, {kind.channels}"
                                  f", h, w) input, got {x.shape}")
            out = x
        elif isinstance(kind, Conv):
            p = params[node.name]
            out = conv2d(ins[0], p["weight"], p.get("bias"), kind.stride,
                         kind.padding)
        elif isinstance(kind, BatchNorm):
            p = params[node.name]
            if mode == "train":
                mu, var = _bn_stats(ins[0])
            else:
                mu, var = p["bn_mean"], p["bn_var"]
            out = batchnorm_forward(ins[0], p["bn_gamma"], p["bn_beta"], mu, var)
        elif isinstance(kind, ReLU):
            out = np.maximum(ins[0], 0)
        elif isinstance(kind, MaxPool):
            out = maxpool_forward(ins[0], kind.kernel, kind.stride, kind.padding)
        elif isinstance(kind, AvgPool):
            out = avgpool_forward(ins[0], kind.kernel, kind.stride, kind.padding)
        elif isinstance(kind, Concat):
            first = ins[0]
            for a, src in zip(ins[1:], node.inputs[1:]):
                if (a.shape[0],) + a.shape[2:] != (first.shape[0],) + first.shape[2:]:
                    raise EngineError(f"node {node.name!r}: Concat inputs disagree, "
                                      f"{first.shape} vs {a.shape} (from node {src})")
            out = np.concatenate(ins, axis=1)
        elif isinstance(kind, Add):
            if ins[0].shape != ins[1].shape:
                raise EngineError(f"node {node.name!r}: Add inputs disagree, "
                                  f"{ins[0].shape} vs {ins[1].shape}")
            out = ins[0] + ins[1]
        elif isinstance(kind, GlobalAvgPool):
            out = ins[0].mean(axis=(2, 3), keepdims=True)
        elif isinstance(kind, Linear):
            if ins[0].shape[2:] != (1, 1):
                raise EngineError(f"node {node.name!r}: Linear needs h=w=1, "
                                  f"got {ins[0].shape}")
            p = params[node.name]
            flat = ins[0].reshape(ins[0].shape[0], -1)
            out = (flat @ p["weight"].T + p["bias"])[:, :, None, None]
        else:
            raise EngineError(f"node {node.name!r}: unknown kind {kind_name(kind)}")
        if debug and not np.isfinite(out).all():
            raise FloatingPointError(f"node {node.name!r} produced non-finite values")
        acts[nid] = out
    return acts


def backward(graph: Graph, params: ParamStore, acts: dict[int, np.ndarray],
             loss_grad: np.ndarray) -> ParamStore:
    """Exact reverse-mode gradients of the forward math (train-mode BN).

    ``loss_grad`` is dLoss/d(output node activation). Returns a store holding
    gradients for every trainable field.
    """
    order = topo_order(graph)
    for nid in order:
        if nid not in acts:
            raise EngineError(f"missing activation for node "
                              f"{graph.node(nid).name!r}; run forward first")
    grad_acts: dict[int, np.ndarray] = {graph.output_id: loss_grad}
    grads: ParamStore = {}
    for nid in reversed(order):
        g = grad_acts.pop(nid, None)
        if g is None:
            continue
        node = graph.node(nid)
        kind = node.kind
        ins = [acts[i] for i in node.inputs]
        in_grads: list[np.ndarray] = []
        if isinstance(kind, Input):
            pass
        elif isinstance(kind, Conv):
            p = params[node.name]
            dx, dw, db = conv2d_backward(ins[0], p["weight"], kind.stride,
                                         kind.padding, g, kind.has_bias)
            grads[node.name] = {"weight": dw}
            if db is not None:
                grads[node.name]["bias"] = db
            in_grads = [dx]
        elif isinstance(kind, BatchNorm):
            p = params[node.name]
            dx, dgamma, dbeta = batchnorm_backward(ins[0], p["bn_gamma"], g)
            grads[node.name] = {"bn_gamma": dgamma, "bn_beta": dbeta}
            in_grads = [dx]
        elif isinstance(kind, ReLU):
            in_grads = [g * (ins[0] > 0)]
        elif isinstance(kind, MaxPool):
            in_grads = [maxpool_backward(ins[0], kind.kernel, kind.stride,
                                         kind.padding, g)]
        elif isinstance(kind, AvgPool):
            in_grads = [avgpool_backward(ins[0], kind.kernel, kind.stride,
                                         kind.padding, g)]
        elif isinstance(kind, Concat):
            offset = 0
            for a in ins:
                in_grads.append(g[:, offset:offset + a.shape[1]])
                offset += a.shape[1]
        elif isinstance(kind, Add):
            in_grads = [g, g]
        elif isinstance(kind, GlobalAvgPool):
            n, c, h, w = ins[0].shape
            in_grads = [np.broadcast_to(g / (h * w), ins[0].shape).copy()]
        elif isinstance(kind, Linear):
            p = params[node.name]
            flat = ins[0].reshape(ins[0].shape[0], -1)
            g2 = g.reshape(g.shape[0], -1)
            grads[node.name] = {"weight": g2.T @ flat, "bias": g2.sum(axis=0)}
            in_grads = [(g2 @ p["weight"]).reshape(ins[0].shape)]
        else:
            raise EngineError(f"node {node.name!r}: unknown kind {kind_name(kind)}")
        for src, gi in zip(node.inputs, in_grads):
            if src in grad_acts:
                grad_acts[src] = grad_acts[src] + gi
            else:
                grad_acts[src] = gi
    return grads


# --- gradient check ----------------------------------------------------------

def _sum_sq_loss(out: np.ndarray) -> float:
    return float(np.sum(out.astype(np.float64) ** 2))


def _kink_margins_ok(graph: Graph, acts, margin: float) -> bool:
    """True when no ReLU input or max-pool window is within ``margin`` of a
    kink, so central differences stay on one smooth branch."""
    for nid in topo_order(graph):
        node = graph.node(nid)
        if isinstance(node.kind, ReLU):
            if np.abs(acts[node.inputs[0]]).min() < margin:
                return False
        elif isinstance(node.kind, MaxPool):
            k = node.kind.kernel
            cols = _im2col(acts[node.inputs[0]], k, node.kind.stride,
                           node.kind.padding, pad_value=-np.inf)
            n, c, _, _, ho, wo = cols.shape
            flat = cols.reshape(n, c, k * k, ho, wo)
            top2 = np.partition(flat, k * k - 2, axis=2)[:, :, -2:]
            gap = top2[:, :, 1] - top2[:, :, 0]
            if np.nanmin(np.where(np.isfinite(gap), gap, np.inf)) < margin:
                return False
    return True


def grad_check(graph: Graph, input_shape: TensorShape, seed: int = 0,
               eps: float = 1e-5, dtype=np.float64, margin: float = 1e-3,
               max_input_tries: int = 10) -> float:
    """Max relative error between analytic and central-difference gradients.

    Loss is the sum of squared outputs. Inputs are redrawn (deterministically,
    seed + 1000*attempt) until every ReLU/max-pool sits clear of its kink, so
    finite differences are valid. Guards at 50k parameters.
    """
    params = init_params(graph, seed, dtype)
    n_params = count_parameters(params)
    if n_params > GRAD_CHECK_PARAM_GUARD:
        raise EngineError(f"grad_check guard: {n_params} parameters exceeds "
                          f"{GRAD_CHECK_PARAM_GUARD}")
    x = None
    for attempt in range(max_input_tries):
        stream = NormalStream((seed + 1000 * attempt) ^ 0x5EED)
        cand = stream.draw(TensorShape(*input_shape).elems).reshape(
            tuple(input_shape)).astype(dtype)
        acts = forward(graph, params, cand, mode="train")
        if _kink_margins_ok(graph, acts, margin):
            x = cand
            break
    if x is None:
        raise EngineError(f"no kink-free input found in {max_input_tries} tries")

    out = acts[graph.output_id]
    analytic = backward(graph, params, acts, 2.0 * out)

    def loss_now() -> float:
        return _sum_sq_loss(forward(graph, params, x, mode="train")[graph.output_id])

    worst = 0.0
    for name, fields in params.items():
        for fname in TRAINABLE_FIELDS:
            if fname not in fields:
                continue
            tensor = fields[fname]
            agrad = analytic[name][fname]
            flat = tensor.reshape(-1)
            aflat = agrad.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + eps
                lp = loss_now()
                flat[i] = orig - eps
                lm = loss_now()
                flat[i] = orig
                fd = (lp - lm) / (2.0 * eps)
                a = float(aflat[i])
                rel = abs(a - fd) / max(abs(a), abs(fd), 1e-8)
                worst = max(worst, rel)
    return worst


# --- training ----------------------------------------------------------------

def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy over the batch and its gradient w.r.t. logits."""
    n, k = logits.shape[0], logits.shape[1]
    labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() >= k:
        raise EngineError(f"label out of range [0, {k})")
    z = logits.reshape(n, k)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=1, keepdims=True)
    loss = float(-np.mean(np.log(p[np.arange(n), labels])))
    dlogits = p.copy()
    dlogits[np.arange(n), labels] -= 1.0
    dlogits /= n
    return loss, dlogits.reshape(logits.shape)


@dataclass
class TrainState:
    params: ParamStore
    velocity: ParamStore
    lr: float
    momentum: float
    seed: int
    step: int = 0


def init_train_state(graph: Graph, seed: int, lr: float, momentum: float = 0.9,
                     dtype=np.float32) -> TrainState:
    params = init_params(graph, seed, dtype)
    velocity = {name: {f: np.zeros_like(t) for f, t in fields.items()
                       if f in TRAINABLE_FIELDS}
                for name, fields in params.items()}
    return TrainState(params=params, velocity=velocity, lr=lr,
                      momentum=momentum, seed=seed)


def train_step(graph: Graph, state: TrainState, images: np.ndarray,
               labels: np.ndarray) -> float:
    """One SGD-with-momentum step on softmax cross-entropy; returns the loss.

    Updates v <- momentum*v + g and theta <- theta - lr*v, then folds the
    batch statistics into the BN running buffers.
    """
    x = images.astype(_store_dtype(state.params), copy=False)
    acts = forward(graph, state.params, x, mode="train")
    loss, dlogits = softmax_cross_entropy(acts[graph.output_id], labels)
    grads = backward(graph, state.params, acts, dlogits)
    for name, fields in grads.items():
        for fname, g in fields.items():
            v = state.velocity[name][fname]
            v *= state.momentum
            v += g
            state.params[name][fname] -= state.lr * v
    for nid in topo_order(graph):
        node = graph.node(nid)
        if isinstance(node.kind, BatchNorm):
            mu, var = _bn_stats(acts[node.inputs[0]])
            p = state.params[node.name]
            p["bn_mean"] *= BN_MOMENTUM
            p["bn_mean"] += (1.0 - BN_MOMENTUM) * mu
            p["bn_var"] *= BN_MOMENTUM
            p["bn_var"] += (1.0 - BN_MOMENTUM) * var
    state.step += 1
    return loss


def train_loop(graph: Graph, images: np.ndarray, labels: np.ndarray,
               steps: int, batch_size: int, seed: int, lr: float,
               momentum: float = 0.9, dtype=np.float32):
    """Run ``steps`` SGD steps over a fixed seeded shuffle of the dataset.

    Batches are consecutive wrap-around slices of one seed-determined
    permutation, so the whole run is a pure function of its arguments.
    Returns (state, per-step losses).
    """
    state = init_train_state(graph, seed, lr, momentum, dtype)
    order = np.random.default_rng(seed).permutation(images.shape[0])
    losses = []
    n = images.shape[0]
    for step in range(steps):
        idx = order[(step * batch_size + np.arange(batch_size)) % n]
        losses.append(train_step(graph, state, images[idx], labels[idx]))
    return state, losses


def predict(graph: Graph, params: ParamStore, images: np.ndarray,
            batch_size: int = 100) -> np.ndarray:
    """Eval-mode class predictions (argmax over the output node's channels)."""
    dtype = _store_dtype(params)
    preds = []
    for lo in range(0, images.shape[0], batch_size):
        x = images[lo:lo + batch_size].astype(dtype, copy=False)
        out = forward(graph, params, x, mode="eval")[graph.output_id]
        preds.append(out.reshape(out.shape[0], -1).argmax(axis=1))
    return np.concatenate(preds)


def accuracy(graph: Graph, params: ParamStore, images: np.ndarray,
             labels: np.ndarray, batch_size: int = 100) -> float:
    return float(np.mean(predict(graph, params, images, batch_size)
                         == np.asarray(labels)))
