"""Graph layers: vertex convolution, embedding pooling, edge convolution,
attention gating, and dense readout.

All layers operate on the tensor primitives from :mod:`histograph.numerics`;
adjacency is passed as a list of (N, N) channel tensors so every layer stays
two-dimensional. Weight matrices are initialized uniform(-s, s) with
s = sqrt(1/fan_in); biases start at zero.
"""

from __future__ import annotations

import numpy as np

from . import numerics as nm
from .errors import ShapeError
from .numerics import SplitMix64, Tensor

LEAKY_SLOPE = 0.01

# Fan-in scaling with a conservative gain. Pooled adjacency rows concentrate
# an entire graph's edge mass, so unit gain leaves freshly built networks
# emitting logits in the hundreds and the first training epochs set an
# activation scale the optimizer never recovers from.
INIT_GAIN = 0.5


def _init_weights(shape: tuple[int, ...], fan_in: int, rng: SplitMix64 | None) -> np.ndarray:
    if rng is None:
        return np.zeros(shape)
    bound = INIT_GAIN * (1.0 / fan_in) ** 0.5
    return rng.uniform(-bound, bound, shape)


class VertexConvLayer:
    """Spatial graph convolution: learned mix of the identity and each
    adjacency channel applied to vertex features.

    ``weights[:, :, 0]`` is the self (identity) term; slice ``j >= 1`` pairs
    with adjacency channel ``j - 1``.
    """

    def __init__(self, in_features: int, out_features: int, edge_channels: int,
                 rng: SplitMix64 | None = None):
        self.in_features = in_features
        self.out_features = out_features
        self.edge_channels = edge_channels
        fan_in = in_features * (edge_channels + 1)
        self.weights = nm.parameter(
            _init_weights((out_features, in_features, edge_channels + 1), fan_in, rng))
        self.bias = nm.parameter(np.zeros((1, out_features)))

    def params(self) -> list[tuple[str, Tensor]]:
        return [("weights", self.weights), ("bias", self.bias)]

    def forward(self, v: Tensor, a: list[Tensor]) -> Tensor:
        if v.data.shape[1] != self.in_features:
            raise ShapeError(
                f"vertex conv expects {self.in_features} features, got {v.data.shape[1]}")
        if len(a) != self.edge_channels:
            raise ShapeError(
                f"vertex conv expects {self.edge_channels} edge channels, got {len(a)}")
        out = nm.matmul(v, nm.transpose(nm.channel(self.weights, 0)))
        for j, a_j in enumerate(a, start=1):
            h_j = nm.transpose(nm.channel(self.weights, j))
            out = nm.add(out, nm.matmul(nm.matmul(a_j, v), h_j))
        return nm.add(out, self.bias)


class PoolLayer:
    """Soft cluster pooling: an embedding convolution scores each node
    against N' clusters, assignments are row-softmaxed, and both vertex
    and adjacency tensors are projected through the assignment matrix.
    """

    def __init__(self, in_features: int, target_nodes: int, edge_channels: int,
                 rng: SplitMix64 | None = None):
        self.target_nodes = target_nodes
        self.embed = VertexConvLayer(in_features, target_nodes, edge_channels, rng)

    def params(self) -> list[tuple[str, Tensor]]:
        return [("embed." + n, t) for n, t in self.embed.params()]

    def forward(self, v: Tensor, a: list[Tensor]) -> tuple[Tensor, list[Tensor]]:
        logits = self.embed.forward(v, a)
        v_emb = nm.softmax(logits, axis=1)
        v_emb_t = nm.transpose(v_emb)
        v_out = nm.matmul(v_emb_t, v)
        a_out = [nm.matmul(nm.matmul(v_emb_t, a_l), v_emb) for a_l in a]
        return v_out, a_out


class EdgeConvLayer:
    """Recompute edge features from [edge channels, source vertex, destination
    vertex] per ordered pair, then symmetrize. Pairs with no input edge stay
    exactly zero, as does the diagonal.
    """

    def __init__(self, in_edge_channels: int, vertex_features: int,
                 out_edge_channels: int, rng: SplitMix64 | None = None,
                 slope: float = LEAKY_SLOPE):
        self.in_edge_channels = in_edge_channels
        self.vertex_features = vertex_features
        self.out_edge_channels = out_edge_channels
        self.slope = slope
        width = in_edge_channels + 2 * vertex_features
        self.weights = nm.parameter(_init_weights((out_edge_channels, width), width, rng))
        self.bias = nm.parameter(np.zeros((out_edge_channels, 1)))

    def params(self) -> list[tuple[str, Tensor]]:
        return [("weights", self.weights), ("bias", self.bias)]

    def forward(self, v: Tensor, a: list[Tensor]) -> list[Tensor]:
        if len(a) != self.in_edge_channels:
            raise ShapeError(
                f"edge conv expects {self.in_edge_channels} edge channels, got {len(a)}")
        if v.data.shape[1] != self.vertex_features:
            raise ShapeError(
                f"edge conv expects {self.vertex_features} vertex features, got {v.data.shape[1]}")
        l_in, f = self.in_edge_channels, self.vertex_features
        width = l_in + 2 * f
        mask = nm.constant(np.any([a_l.data != 0.0 for a_l in a], axis=0).astype(np.float64))
        out = []
        for lp in range(self.out_edge_channels):
            base = lp * width
            w_src = nm.reshape(nm.take(self.weights, range(base + l_in, base + l_in + f)), (f, 1))
            w_dst = nm.reshape(nm.take(self.weights, range(base + l_in + f, base + width)), (f, 1))
            pre = nm.matmul(v, w_src)  # (N, 1): broadcast down columns
            pre = nm.add(pre, nm.transpose(nm.matmul(v, w_dst)))  # (1, N): across rows
            for l, a_l in enumerate(a):
                pre = nm.add(pre, nm.mul(a_l, nm.take(self.weights, [base + l])))
            pre = nm.add(pre, nm.take(self.bias, [lp]))
            gated = nm.mul(nm.leaky_relu(pre, self.slope), mask)
            out.append(nm.scale(nm.add(gated, nm.transpose(gated)), 0.5))
        return out


class AttentionGate:
    """Scalar score per node, softmax across the graph, features rescaled by
    N * alpha so that uniform attention is the identity map. The softmax
    scores double as the per-nucleus importance signal.
    """

    def __init__(self, in_features: int, rng: SplitMix64 | None = None):
        self.in_features = in_features
        self.weights = nm.parameter(_init_weights((in_features, 1), in_features, rng))
        self.bias = nm.parameter(np.zeros((1, 1)))

    def params(self) -> list[tuple[str, Tensor]]:
        return [("weights", self.weights), ("bias", self.bias)]

    def forward(self, v: Tensor) -> tuple[Tensor, Tensor]:
        if v.data.shape[1] != self.in_features:
            raise ShapeError(
                f"attention gate expects {self.in_features} features, got {v.data.shape[1]}")
        logits = nm.add(nm.matmul(v, self.weights), self.bias)
        scores = nm.softmax(logits, axis=0)
        v_att = nm.scale(nm.mul(scores, v), float(v.data.shape[0]))
        return v_att, scores


class DenseLayer:
    """Affine map on a row vector, with optional leaky-ReLU."""

    def __init__(self, in_features: int, out_features: int, activation: bool,
                 rng: SplitMix64 | None = None):
        self.in_features = in_features
        self.out_features = out_features
        self.activation = activation
        self.weights = nm.parameter(_init_weights((out_features, in_features), in_features, rng))
        self.bias = nm.parameter(np.zeros((1, out_features)))

    def params(self) -> list[tuple[str, Tensor]]:
        return [("weights", self.weights), ("bias", self.bias)]

    def forward(self, x: Tensor) -> Tensor:
        if x.data.shape != (1, self.in_features):
            raise ShapeError(
                f"dense layer expects shape (1, {self.in_features}), got {x.data.shape}")
        out = nm.add(nm.matmul(x, nm.transpose(self.weights)), self.bias)
        if self.activation:
            out = nm.leaky_relu(out, LEAKY_SLOPE)
        return out
