"""
Question-guided graph fusion: inject question context into each graph's nodes,
weight the graphs by cosine relevance to the question and merge them.
"""
from dataclasses import dataclass
import math

import numpy as np

from .autograd import Tensor, masked_softmax, matmul, mean_pool, stack
from .exceptions import DimensionError, NumericError
from .layers import EVAL, WeightNormLinear, merge_heads, split_heads

COSINE_FLOOR = 1e-6


@dataclass
class FusedGraph:
    node_features: Tensor  # v-hat, m x d
    relations: Tensor  # alpha-hat, m x m
    weights: Tensor  # beta, (K,)


def cosine(a, b):
    norm_a = math.sqrt(float((a.data * a.data).sum()))
    norm_b = math.sqrt(float((b.data * b.data).sum()))
    if norm_a == 0.0 or norm_b == 0.0:
        raise NumericError("cosine similarity of a zero-norm vector")
    return (a * b).sum() / (((a * a).sum() * (b * b).sum()).sqrt())


def graph_weights(question_global, graph_globals, floor=COSINE_FLOOR):
    """beta_k = max(cos(Q, G_k), floor) / sum_i max(cos(Q, G_i), floor)."""
    clamped = stack([cosine(question_global, g).clamp_min(floor) for g in graph_globals])
    return clamped / clamped.sum()


def fuse(node_features, relations, weights):
    """Convex combination of the graphs' node features and head-averaged edges."""
    shape = node_features[0].shape
    if any(v.shape != shape for v in node_features) or any(r.shape != (shape[0], shape[0]) for r in relations):
        raise DimensionError("graphs to fuse must share the node count and width")
    fused_nodes = None
    fused_relations = None
    for index, (v, r) in enumerate(zip(node_features, relations)):
        beta = weights[index]
        fused_nodes = v * beta if fused_nodes is None else fused_nodes + v * beta
        fused_relations = r * beta if fused_relations is None else fused_relations + r * beta
    return FusedGraph(node_features=fused_nodes, relations=fused_relations, weights=weights)


class GraphFusion:
    """Visual-to-question cross attention (shared by the three graphs) plus fusion."""

    def __init__(self, store, config, rng, prefix='fusion'):
        self.config = config
        d = config.d
        self.query = WeightNormLinear(store, f"{prefix}.query", d, d, rng)
        self.key = WeightNormLinear(store, f"{prefix}.key", d, d, rng)
        self.value = WeightNormLinear(store, f"{prefix}.value", d, d, rng, dropout=config.dropout)

    def cross_attend(self, nodes, tokens, valid_mask, ctx=EVAL):
        """Return (v*, attention): v*_i = v'_i + heads(relu(sum_j a_ij W t_j)); attention is H x m x L."""
        valid_mask = np.asarray(valid_mask, dtype=bool)
        if tokens.shape[0] != valid_mask.shape[0]:
            raise DimensionError(f"token features {tokens.shape} and mask {valid_mask.shape} disagree")
        heads = self.config.heads
        queries = split_heads(self.query(nodes, ctx), heads)
        keys = split_heads(self.key(tokens, ctx), heads)
        values = split_heads(self.value(tokens, ctx), heads)
        scores = matmul(queries, keys.transpose(0, 2, 1)) * (1.0 / math.sqrt(self.config.head_dim))
        attention = masked_softmax(scores, valid_mask[None, None, :], axis=-1)
        return nodes + merge_heads(matmul(attention, values).relu()), attention

    def forward(self, graphs, tokens, valid_mask, ctx=EVAL):
        """Return (FusedGraph, per-graph cross attention or None when fusion is ablated)."""
        relations = [graph.mean_edges() for graph in graphs]
        if not self.config.enable_gfm:
            uniform = Tensor(np.full(len(graphs), 1.0 / len(graphs)))
            fused = fuse([graph.node_features for graph in graphs], relations, uniform)
            return fused, None
        attended = [self.cross_attend(graph.node_features, tokens, valid_mask, ctx) for graph in graphs]
        question_global = mean_pool(tokens, valid_mask)
        every_node = np.ones(graphs[0].node_features.shape[0], dtype=bool)
        graph_globals = [mean_pool(graph.node_features, every_node) for graph in graphs]
        weights = graph_weights(question_global, graph_globals)
        fused = fuse([v_star for v_star, _ in attended], relations, weights)
        return fused, [attention for _, attention in attended]
