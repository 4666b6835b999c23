"""Attention-weighted message passing over influence graphs.

Each layer updates a node from its own embedding and an attention-weighted
sum over in-neighbors; a mean readout over final embeddings yields one
graph-level vector. Everything is differentiable through `numerics`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ContractError, DimensionError
from .numerics import Tensor, leaky_relu, masked_softmax, matmul, relu, transpose

NODE_KINDS = ("user", "brand", "content")
EDGE_KINDS = ("follow", "share", "mention")


@dataclass(frozen=True)
class Node:
    id: int
    kind: str = "user"


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    kind: str = "follow"


@dataclass
class DiffusionGraph:
    """Directed influence graph over users, brands, and content items."""

    nodes: list[Node]
    edges: list[Edge]

    def __post_init__(self):
        ids = {n.id for n in self.nodes}
        if len(ids) != len(self.nodes):
            raise ContractError("duplicate node ids")
        seen: set[tuple[int, int]] = set()
        for e in self.edges:
            if e.src not in ids or e.dst not in ids:
                raise ContractError(f"edge ({e.src}, {e.dst}) references a missing node")
            if (e.src, e.dst) in seen:
                raise ContractError(f"duplicate directed edge ({e.src}, {e.dst})")
            seen.add((e.src, e.dst))

    @property
    def n(self) -> int:
        return len(self.nodes)

    @cached_property
    def index_of(self) -> dict[int, int]:
        return {node.id: i for i, node in enumerate(self.nodes)}

    @cached_property
    def in_neighbors(self) -> list[list[int]]:
        """Positional in-neighbor lists: influence flows along edge direction."""
        idx = self.index_of
        out: list[list[int]] = [[] for _ in self.nodes]
        for e in self.edges:
            out[idx[e.dst]].append(idx[e.src])
        return [sorted(lst) for lst in out]

    @cached_property
    def out_neighbors(self) -> list[list[int]]:
        idx = self.index_of
        out: list[list[int]] = [[] for _ in self.nodes]
        for e in self.edges:
            out[idx[e.src]].append(idx[e.dst])
        return [sorted(lst) for lst in out]

    @cached_property
    def _in_mask(self) -> np.ndarray:
        mask = np.zeros((self.n, self.n))
        for i, nbrs in enumerate(self.in_neighbors):
            mask[i, nbrs] = 1.0
        return mask


def neighbor_mask(graph: DiffusionGraph, neighborhood: str = "in") -> np.ndarray:
    """(n, n) 0/1 matrix; mask[i, j] = 1 when j is in N(i). Cached per graph."""
    if neighborhood == "in":
        return graph._in_mask
    if neighborhood == "symmetric":
        return np.maximum(graph._in_mask, graph._in_mask.T)
    raise ContractError(f"unknown neighborhood mode '{neighborhood}'")


@dataclass
class GnnLayerParams:
    """Self weight, neighbor weight, and the attention scoring vector."""

    w_self: Tensor  # (d_out, d_in)
    w_neigh: Tensor  # (d_out, d_in)
    attn: Tensor  # (2 * d_out, 1)

    @property
    def d_in(self) -> int:
        return self.w_self.shape[1]

    @property
    def d_out(self) -> int:
        return self.w_self.shape[0]


@dataclass
class GnnParams:
    layers: list[GnnLayerParams] = field(default_factory=list)
    leaky_alpha: float = 0.2

    def __post_init__(self):
        if not self.layers:
            raise ContractError("need at least one message-passing layer")
        for i, layer in enumerate(self.layers):
            if layer.w_self.shape != layer.w_neigh.shape:
                raise DimensionError(f"layer {i}: weight shapes differ")
            if layer.attn.shape != (2 * layer.d_out, 1):
                raise DimensionError(
                    f"layer {i}: attention vector shape {layer.attn.shape}, "
                    f"expected {(2 * layer.d_out, 1)}"
                )
            if i > 0 and layer.d_in != self.layers[i - 1].d_out:
                raise DimensionError(
                    f"layer {i}: input dim {layer.d_in} does not chain from "
                    f"previous output dim {self.layers[i - 1].d_out}"
                )

    @property
    def out_dim(self) -> int:
        return self.layers[-1].d_out


def init_gnn_params(rng: np.random.Generator, dims: list[int], leaky_alpha: float = 0.2) -> GnnParams:
    """Glorot-initialized parameters for the dim chain [d_in, h1, ..., h_L]."""
    layers = []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        scale = np.sqrt(2.0 / (d_in + d_out))
        layers.append(
            GnnLayerParams(
                w_self=Tensor(rng.normal(0.0, scale, (d_out, d_in)), requires_grad=True),
                w_neigh=Tensor(rng.normal(0.0, scale, (d_out, d_in)), requires_grad=True),
                attn=Tensor(rng.normal(0.0, 0.1, (2 * d_out, 1)), requires_grad=True),
            )
        )
    return GnnParams(layers=layers, leaky_alpha=leaky_alpha)


def _scores(layer: GnnLayerParams, projected: Tensor, leaky_alpha: float) -> Tensor:
    """Pairwise attention logits: score(i, j) = leaky(a . [proj_i || proj_j])."""
    d = layer.d_out
    left = projected @ layer.attn[:d]  # (..., n, 1)
    right = projected @ layer.attn[d:]  # (..., n, 1)
    if right.ndim == 2:
        right_t = transpose(right)
    else:
        right_t = transpose(right, (0, 2, 1))
    return leaky_relu(left + right_t, alpha=leaky_alpha)


def attention_coefficients(
    layer: GnnLayerParams,
    embeddings: Tensor | np.ndarray,
    graph: DiffusionGraph,
    leaky_alpha: float = 0.2,
    neighborhood: str = "in",
) -> Tensor:
    """(n, n) attention weights; row i is a distribution over N(i).

    Rows of nodes with no neighbors are all zero.
    """
    h = embeddings if isinstance(embeddings, Tensor) else Tensor(embeddings)
    if h.shape[-1] != layer.d_in:
        raise DimensionError(f"embeddings dim {h.shape[-1]} != layer input dim {layer.d_in}")
    mask = neighbor_mask(graph, neighborhood)
    projected = h @ transpose(layer.w_neigh)
    return masked_softmax(_scores(layer, projected, leaky_alpha), mask)


def gnn_layer(
    embeddings: Tensor | np.ndarray,
    graph: DiffusionGraph,
    layer: GnnLayerParams,
    leaky_alpha: float = 0.2,
    neighborhood: str = "in",
    layer_index: int = 0,
) -> Tensor:
    """One message-passing step: relu(W_self h_i + W_neigh sum_j alpha_ij h_j)."""
    h = embeddings if isinstance(embeddings, Tensor) else Tensor(embeddings)
    mask = neighbor_mask(graph, neighborhood)
    return _layer_forward(h, mask, layer, leaky_alpha, layer_index)[0]


def _layer_forward(
    h: Tensor, mask: np.ndarray, layer: GnnLayerParams, leaky_alpha: float, layer_index: int
) -> tuple[Tensor, Tensor]:
    if h.shape[-1] != layer.d_in:
        raise DimensionError(
            f"layer {layer_index}: embeddings dim {h.shape[-1]} != expected {layer.d_in}"
        )
    projected = h @ transpose(layer.w_neigh)  # W_neigh h_j for every j
    alpha = masked_softmax(_scores(layer, projected, leaky_alpha), mask)
    # sum_j alpha_ij (W_neigh h_j); aggregate in whichever dim is cheaper
    if layer.d_in < layer.d_out:
        aggregated = matmul(alpha, h) @ transpose(layer.w_neigh)
    else:
        aggregated = matmul(alpha, projected)
    return relu(h @ transpose(layer.w_self) + aggregated), alpha


def readout(final_embeddings: Tensor | np.ndarray) -> Tensor:
    """Mean over node embeddings; permutation invariant and size invariant."""
    h = final_embeddings if isinstance(final_embeddings, Tensor) else Tensor(final_embeddings)
    if h.shape[-2] == 0:
        raise ContractError("readout of an empty graph")
    return h.mean(axis=-2)


def encode_graph(
    graph: DiffusionGraph,
    features: Tensor | np.ndarray,
    params: GnnParams,
    neighborhood: str = "in",
    return_alphas: bool = False,
):
    """Run all layers then read out one embedding per graph.

    `features` is (n, d) for a single graph or (batch, n, d) for a batch of
    feature sets over the same topology; output is (d_out,) or (batch, d_out).
    """
    h = features if isinstance(features, Tensor) else Tensor(features)
    if graph.n == 0:
        raise ContractError("cannot encode an empty graph")
    if h.shape[-2] != graph.n:
        raise DimensionError(f"feature rows {h.shape[-2]} != node count {graph.n}")
    mask = neighbor_mask(graph, neighborhood)
    alphas = []
    for i, layer in enumerate(params.layers):
        h, alpha = _layer_forward(h, mask, layer, params.leaky_alpha, i)
        alphas.append(alpha)
    out = readout(h)
    if return_alphas:
        return out, alphas
    return out


def influencer_ranking(
    graph: DiffusionGraph, features: np.ndarray, params: GnnParams, neighborhood: str = "in"
) -> list[tuple[int, float]]:
    """Node ids ranked by total incoming attention mass across layers."""
    _, alphas = encode_graph(graph, features, params, neighborhood, return_alphas=True)
    incoming = np.zeros(graph.n)
    for alpha in alphas:
        data = alpha.data
        if data.ndim == 3:
            data = data.sum(axis=0)
        incoming += data.sum(axis=0)
    order = np.argsort(-incoming, kind="stable")
    return [(graph.nodes[i].id, float(incoming[i])) for i in order]
