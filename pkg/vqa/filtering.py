"""
Object filtering: rank objects by the attention they receive over the fused graph,
keep the top P, re-relate the kept objects and aggregate them into V*.
"""
from dataclasses import dataclass
import math

import numpy as np

from .autograd import Tensor, matmul, softmax
from .exceptions import ConfigError
from .layers import EVAL, WeightNormLinear


@dataclass
class PriorityRanking:
    relations: Tensor  # e-hat, m x m (None when filtering is ablated)
    priority: Tensor  # gamma, (m,)
    kept: np.ndarray  # EO, indices in rank order
    kept_relations: Tensor  # e-tilde, P x P (None when filtering is ablated)
    kept_priority: Tensor  # gamma-tilde, (P,)
    visual: Tensor  # V*, (d,)


def priority(relations):
    """gamma_i = s_i^2 / sum_j s_j^2 where s_i is the attention column i receives."""
    received = relations.sum(axis=0)
    squared = received * received
    return squared / squared.sum()


def top_objects(gamma, count):
    """Indices of the ``count`` largest priorities, ties to the lower index."""
    gamma = np.asarray(gamma, dtype=np.float64)
    return np.argsort(-gamma, kind='stable')[:min(count, gamma.shape[0])]


class ObjectFilter:
    """Single-head bilinear relations over the fused graph, shared by both filtering passes."""

    def __init__(self, store, config, rng, prefix='filter'):
        self.config = config
        d = config.d
        self.query = WeightNormLinear(store, f"{prefix}.query", d, d, rng)
        self.key = WeightNormLinear(store, f"{prefix}.key", d, d, rng)

    def bilinear(self, nodes, ctx=EVAL):
        """
        (W_q v_i)^T (W_k v_j) for every pair of rows.

        Unscaled by default; ``scale_filter_scores`` divides by sqrt(d) like the
        graph and cross-attention scores.
        """
        scores = matmul(self.query(nodes, ctx), self.key(nodes, ctx).transpose())
        if self.config.scale_filter_scores:
            return scores * (1.0 / math.sqrt(self.config.d))
        return scores

    def fused_relations(self, nodes, fused_alpha, ctx=EVAL):
        """e-hat: full-row softmax (self included) of bilinear scores plus alpha-hat."""
        return softmax(self.bilinear(nodes, ctx) + fused_alpha, axis=-1)

    def filter_and_aggregate(self, nodes, relations, P, ctx=EVAL, kept=None):
        if P < 1:
            raise ConfigError(f"P must be >= 1, got {P}")
        gamma = priority(relations)
        if kept is None:
            kept = top_objects(gamma.data, P)
        kept = np.asarray(kept, dtype=np.int64)
        kept_nodes = nodes[kept]
        scores = self.bilinear(kept_nodes, ctx)
        size = len(kept)
        # normalised over every (i, j) pair of kept objects at once
        kept_relations = softmax(scores.reshape(1, size * size), axis=-1).reshape(size, size)
        if self.config.kept_row_renorm:
            basis = kept_relations / kept_relations.sum(axis=1, keepdims=True)
        else:
            basis = kept_relations
        kept_priority = priority(basis)
        visual = matmul(kept_priority.reshape(1, size), kept_nodes).reshape(-1)
        return PriorityRanking(
            relations=relations,
            priority=gamma,
            kept=kept,
            kept_relations=kept_relations,
            kept_priority=kept_priority,
            visual=visual,
        )

    def forward(self, fused, ctx=EVAL, kept=None):
        nodes = fused.node_features
        count = nodes.shape[0]
        if not self.config.enable_of:
            uniform = Tensor(np.full(count, 1.0 / count))
            return PriorityRanking(
                relations=None,
                priority=uniform,
                kept=np.arange(count),
                kept_relations=None,
                kept_priority=uniform,
                visual=matmul(uniform.reshape(1, count), nodes).reshape(-1),
            )
        relations = self.fused_relations(nodes, fused.relations, ctx)
        return self.filter_and_aggregate(nodes, relations, self.config.P, ctx, kept=kept)
