"""Desk-scale graph network with compressed saved activations.

Forward output is always exact float32; compression only changes what gets
stashed for the backward pass. A compressed layer saves the random-projected,
stochastically-rounded input plus a 1-bit ReLU sign mask, and the backward
pass rebuilds an unbiased estimate of the input from that. Gradients are
therefore noisy but unbiased, and forward results never depend on the
compression settings.
"""

from __future__ import annotations

import struct
import time
from dataclasses import dataclass, field

import numpy as np

from .blockwise import dequantize_blockwise, memory_report, quantize_blockwise, serialized_size
from .core import DTYPE, SparseAdjacency, derive_seed, make_rng, normalize_adjacency, spmm
from .data import GraphData
from .projection import RademacherProjector, project, recover
from .quant import PackedQuantTensor, QuantScheme, dequantize_rows, quantize_rows, serialize
from .varopt import BoundaryTable, default_table

SCHEMA_VERSION = 1
CTX_MAGIC = b"ACTX"
CTX_HEADER_BYTES = 4 + 4 * 4  # magic + mode/rows/cols/has_mask u32
CTX_PROJ_BYTES = 8 + 2 * 4  # projector seed u64 + d_in/d_out u32
PRECISION_BITS = {"fp32": None, "int8": 8, "int4": 4, "int2": 2}


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class GnnLayer:
    """One propagation layer: relu(A_hat @ H @ theta) with optional compression."""

    theta: np.ndarray
    relu: bool = True
    projector: RademacherProjector | None = None
    scheme: QuantScheme | None = None

    def __post_init__(self):
        if self.projector is not None and self.projector.d_in != self.theta.shape[0]:
            raise ValueError("projector input width must match the layer input width")

    @property
    def d_in(self) -> int:
        return self.theta.shape[0]

    @property
    def d_out(self) -> int:
        return self.theta.shape[1]


@dataclass
class SavedContext:
    """Backward-pass state captured by one layer's forward call."""

    a_hat: SparseAdjacency
    in_shape: tuple[int, int]
    h_exact: np.ndarray | None = None  # uncompressed path
    packed: PackedQuantTensor | None = None
    projector: RademacherProjector | None = None
    mask: np.ndarray | None = None  # bool (N, d_out) when the layer has a ReLU

    @property
    def compressed(self) -> bool:
        return self.packed is not None


def forward(layer: GnnLayer, a_hat: SparseAdjacency, h_in: np.ndarray,
            rng: np.random.Generator) -> tuple[np.ndarray, SavedContext]:
    """Exact forward pass; the returned context may hold lossy saved state."""
    h_in = np.asarray(h_in)
    if h_in.shape[1] != layer.d_in:
        raise ValueError(f"expected input width {layer.d_in}, got {h_in.shape[1]}")
    pre = spmm(a_hat, h_in) @ layer.theta
    out = np.maximum(pre, 0) if layer.relu else pre
    mask = (pre > 0) if layer.relu else None

    ctx = SavedContext(a_hat=a_hat, in_shape=h_in.shape, mask=mask)
    if layer.scheme is None and layer.projector is None:
        ctx.h_exact = h_in
        return out, ctx
    h_save = project(h_in, layer.projector) if layer.projector is not None else h_in
    ctx.projector = layer.projector
    if layer.scheme is None:
        ctx.h_exact = np.asarray(h_save, dtype=DTYPE)
    elif layer.scheme.is_blockwise:
        ctx.packed = quantize_blockwise(h_save, layer.scheme, rng)
    else:
        ctx.packed = quantize_rows(h_save, layer.scheme, rng)
    return out, ctx


def recovered_input(ctx: SavedContext) -> np.ndarray:
    """Unbiased reconstruction of the saved layer input."""
    if ctx.packed is not None:
        h = dequantize_blockwise(ctx.packed) if ctx.packed.scheme.is_blockwise \
            else dequantize_rows(ctx.packed)
    else:
        h = ctx.h_exact
    if ctx.projector is not None:
        h = recover(h, ctx.projector)
    return h


def backward(layer: GnnLayer, ctx: SavedContext,
             grad_out: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(grad_theta, grad_h_in) from the saved context and output gradient."""
    if grad_out.shape[1] != layer.d_out:
        raise ValueError("gradient width does not match the layer")
    if ctx.in_shape[1] != layer.d_in:
        raise ValueError("context does not belong to this layer")
    g = grad_out * ctx.mask if ctx.mask is not None else grad_out
    h_hat = recovered_input(ctx)
    grad_theta = spmm(ctx.a_hat, h_hat).T @ g
    grad_in = spmm(ctx.a_hat.transpose(), g @ layer.theta.T.astype(g.dtype))
    return grad_theta, grad_in


def context_bits(ctx: SavedContext) -> int:
    """Exact size of the serialized context, in bits."""
    n = CTX_HEADER_BYTES
    if ctx.mask is not None:
        n += -(-ctx.mask.size // 8)
    if ctx.compressed:
        n += CTX_PROJ_BYTES
        rows, cols = ctx.packed.shape
        n += serialized_size(rows, cols, ctx.packed.scheme)
    else:
        if ctx.projector is not None:
            n += CTX_PROJ_BYTES
        n += 4 * ctx.h_exact.size
    return 8 * n


def serialize_context(ctx: SavedContext) -> bytes:
    """Binary form of the saved state; context_bits matches its length."""
    mode = 1 if ctx.compressed else 0
    has_mask = 1 if ctx.mask is not None else 0
    out = [CTX_MAGIC, struct.pack("<4I", mode, ctx.in_shape[0], ctx.in_shape[1], has_mask)]
    if ctx.mask is not None:
        out.append(np.packbits(ctx.mask.ravel()).tobytes())
    proj = ctx.projector
    if ctx.compressed:
        out.append(struct.pack("<Q2I", proj.seed if proj else 0,
                               proj.d_in if proj else 0, proj.d_out if proj else 0))
        out.append(serialize(ctx.packed))
    else:
        if proj is not None:
            out.append(struct.pack("<Q2I", proj.seed, proj.d_in, proj.d_out))
        out.append(np.ascontiguousarray(ctx.h_exact, dtype="<f4").tobytes())
    return b"".join(out)


@dataclass
class CompressionSpec:
    """Knobs shared by every layer of a model run."""

    precision: str = "fp32"  # fp32 | int8 | int4 | int2
    d_over_r: int = 8  # 1 disables the projection
    g_over_r: int | None = None  # None => per-row grouping; else block G = k * R
    vm: bool = False  # variance-minimized bin edges looked up by R

    def __post_init__(self):
        if self.precision not in PRECISION_BITS:
            raise ValueError(f"precision must be one of {sorted(PRECISION_BITS)}")
        if self.d_over_r < 1:
            raise ValueError("d_over_r must be >= 1")
        if self.g_over_r is not None and self.g_over_r < 1:
            raise ValueError("g_over_r must be >= 1")
        if self.vm and self.precision != "int2":
            raise ValueError("variance-minimized boundaries exist only for int2")

    @property
    def enabled(self) -> bool:
        return self.precision != "fp32" or self.d_over_r > 1


def build_model(layer_dims: list[int], spec: CompressionSpec, seed: int,
                table: BoundaryTable | None = None) -> list[GnnLayer]:
    """Layer stack with Glorot-style init; the last layer emits raw logits."""
    layers = []
    for i, (d_in, d_out) in enumerate(zip(layer_dims[:-1], layer_dims[1:])):
        w_rng = make_rng(derive_seed(seed, 100, i))
        scale = np.sqrt(2.0 / (d_in + d_out))
        theta = (w_rng.normal(0.0, scale, size=(d_in, d_out))).astype(DTYPE)
        projector = None
        scheme = None
        if spec.enabled:
            r = d_in
            if spec.d_over_r > 1:
                if d_in % spec.d_over_r:
                    raise ValueError(f"layer width {d_in} not divisible by d_over_r={spec.d_over_r}")
                r = d_in // spec.d_over_r
                projector = RademacherProjector(d_in=d_in, d_out=r, seed=derive_seed(seed, 200, i))
            bits = PRECISION_BITS[spec.precision]
            if bits is not None:
                inner = None
                if spec.vm:
                    if table is None:
                        from .varopt import default_table
                        table = default_table()
                    a, b, _ = table.lookup(r)
                    inner = np.array([a, b])
                block = spec.g_over_r * r if spec.g_over_r is not None else None
                scheme = QuantScheme(bits=bits, block_size=block, inner_edges=inner)
        layers.append(GnnLayer(theta=theta, relu=i < len(layer_dims) - 2,
                               projector=projector, scheme=scheme))
    return layers


def model_forward(layers, a_hat, x, rng):
    """Run the stack; returns (output, per-layer contexts, per-layer inputs)."""
    h = x
    ctxs = []
    inputs = []
    for layer in layers:
        inputs.append(h)
        h, ctx = forward(layer, a_hat, h, rng)
        ctxs.append(ctx)
    return h, ctxs, inputs


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray,
                          mask: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean CE over masked nodes and the gradient w.r.t. all logits."""
    z = logits.astype(np.float64)
    z = z - z.max(axis=1, keepdims=True)
    ez = np.exp(z)
    p = ez / ez.sum(axis=1, keepdims=True)
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        raise ValueError("loss mask selects no nodes")
    loss = float(-np.mean(np.log(p[idx, labels[idx]] + 1e-300)))
    grad = np.zeros_like(p)
    grad[idx] = p[idx]
    grad[idx, labels[idx]] -= 1.0
    grad[idx] /= idx.size
    return loss, grad.astype(logits.dtype)


def _normalized_rows(h: np.ndarray, levels: int = 3) -> np.ndarray:
    """Per-row affine map onto [0, levels]; constant rows map to 0."""
    h = h.astype(np.float64)
    z = h.min(axis=1, keepdims=True)
    r = h.max(axis=1, keepdims=True) - z
    safe = np.where(r > 0, r, 1.0)
    out = (h - z) / safe * levels
    out[np.broadcast_to(r == 0, out.shape)] = 0.0
    return out


@dataclass
class TrainReport:
    config: dict
    losses: list[float]
    val_losses: list[float]
    final_train_acc: float
    final_val_acc: float
    final_test_acc: float
    activation_bits_per_layer: list[int]
    activation_bits_total: int
    fp32_activation_bits_total: int
    memory_ratio_vs_fp32: float
    layer_memory_reports: list[dict]
    seconds_per_epoch: float
    total_seconds: float
    best_val_epoch: int
    captured_activations: dict = field(default_factory=dict, repr=False)

    def as_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "config": self.config,
            "epochs_run": len(self.losses),
            "losses": self.losses,
            "val_losses": self.val_losses,
            "final_train_acc": self.final_train_acc,
            "final_val_acc": self.final_val_acc,
            "final_test_acc": self.final_test_acc,
            "activation_bits_per_layer": self.activation_bits_per_layer,
            "activation_bits_total": self.activation_bits_total,
            "fp32_activation_bits_total": self.fp32_activation_bits_total,
            "memory_ratio_vs_fp32": self.memory_ratio_vs_fp32,
            "layer_memory_reports": self.layer_memory_reports,
            "best_val_epoch": self.best_val_epoch,
            "seconds_per_epoch": self.seconds_per_epoch,
            "total_seconds": self.total_seconds,
        }


def _fp32_baseline_bits(layers, n: int) -> int:
    total = 0
    for layer in layers:
        bits = 8 * (CTX_HEADER_BYTES + 4 * n * layer.d_in)
        if layer.relu:
            bits += 8 * -(-n * layer.d_out // 8)
        total += bits
    return total


def train(graph: GraphData, spec: CompressionSpec, epochs: int = 200, lr: float = 0.5,
          seed: int = 42, hidden: int = 64, table: BoundaryTable | None = None,
          capture_activations: bool = False) -> TrainReport:
    """Full-batch gradient descent with cross-entropy loss.

    Identical (seed, config) inputs give an identical report apart from the
    wall-clock fields.
    """
    a_hat = normalize_adjacency(graph.adjacency)
    dims = [graph.num_features, hidden, graph.num_classes]
    layers = build_model(dims, spec, seed, table=table)
    rng = make_rng(derive_seed(seed, 1))

    losses: list[float] = []
    val_losses: list[float] = []
    best_val = np.inf
    best_epoch = -1
    captured: dict = {}
    act_bits_per_layer: list[int] | None = None

    t0 = time.perf_counter()
    for epoch in range(epochs):
        logits, ctxs, layer_inputs = model_forward(layers, a_hat, graph.features, rng)
        loss, grad = softmax_cross_entropy(logits, graph.labels, graph.split_mask("train"))
        val_loss, _ = softmax_cross_entropy(logits, graph.labels, graph.split_mask("val"))
        if not np.isfinite(loss):
            raise TrainingDiverged(f"non-finite training loss at epoch {epoch}")
        losses.append(loss)
        val_losses.append(val_loss)
        if act_bits_per_layer is None:
            act_bits_per_layer = [context_bits(c) for c in ctxs]
        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            if capture_activations:
                captured = {}
                for i, (layer, h_in) in enumerate(zip(layers, layer_inputs)):
                    h_proj = project(h_in, layer.projector) if layer.projector is not None else h_in
                    captured[f"layer{i}"] = _normalized_rows(np.asarray(h_proj)).astype(DTYPE)
        for layer, ctxv in zip(reversed(layers), reversed(ctxs)):
            grad_theta, grad = backward(layer, ctxv, grad)
            layer.theta = layer.theta - (lr * grad_theta).astype(DTYPE)
    total_s = time.perf_counter() - t0

    logits, _, _ = model_forward(layers, a_hat, graph.features, rng)
    pred = logits.argmax(axis=1)

    def acc(name):
        m = graph.split_mask(name)
        return float(np.mean(pred[m] == graph.labels[m]))

    act_total = int(sum(act_bits_per_layer))
    fp32_total = _fp32_baseline_bits(layers, graph.num_nodes)
    from .blockwise import memory_report
    layer_reports = []
    for i, layer in enumerate(layers):
        saved_width = layer.projector.d_out if layer.projector is not None else layer.d_in
        rep = memory_report(graph.num_nodes, saved_width, layer.scheme)
        layer_reports.append({"layer": i, **rep.as_dict()})
    return TrainReport(
        config={
            "precision": spec.precision,
            "d_over_r": spec.d_over_r,
            "g_over_r": spec.g_over_r,
            "vm": spec.vm,
            "epochs": epochs,
            "lr": lr,
            "seed": seed,
            "hidden": hidden,
        },
        losses=losses,
        val_losses=val_losses,
        final_train_acc=acc("train"),
        final_val_acc=acc("val"),
        final_test_acc=acc("test"),
        activation_bits_per_layer=[int(b) for b in act_bits_per_layer],
        activation_bits_total=act_total,
        fp32_activation_bits_total=int(fp32_total),
        memory_ratio_vs_fp32=act_total / fp32_total,
        layer_memory_reports=layer_reports,
        seconds_per_epoch=total_s / max(epochs, 1),
        total_seconds=total_s,
        best_val_epoch=best_epoch,
        captured_activations=captured,
    )
