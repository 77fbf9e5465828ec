"""
Image relation encoder: implicit, semantic and spatial graph attention over objects.

Each graph scores object pairs with scaled per-head dot products, keeps the top-k
neighbours of every node (shared across heads), normalises edges over that
neighbourhood (label-biased for the explicit graphs) and aggregates multi-head
messages into relation-aware node features.
"""
from dataclasses import dataclass
import math

import numpy as np

from .autograd import Tensor, concat, masked_softmax, matmul
from .exceptions import ConfigError, DataError, DegenerateSceneError, DimensionError
from .layers import EVAL, WeightNormLinear, merge_heads, split_heads

IMPLICIT = 'implicit'
SEMANTIC = 'semantic'
SPATIAL = 'spatial'
GRAPH_KINDS = (IMPLICIT, SEMANTIC, SPATIAL)

# Spatial label ids; 0 means the boxes are too far apart to relate.
NO_RELATION = 0
LEFT_OF = 1
RIGHT_OF = 2
ABOVE = 3
BELOW = 4
OVERLAPS = 5
CONTAINS = 6
INSIDE = 7
SPATIAL_LABELS = ('left-of', 'right-of', 'above', 'below', 'overlaps', 'contains', 'inside')
FAR_DISTANCE = 0.75


@dataclass
class ObjectSet:
    features: np.ndarray  # m x d_in
    boxes: np.ndarray  # m x 4, [x1, y1, x2, y2] in [0, 1]

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.boxes = np.asarray(self.boxes, dtype=np.float64)
        if self.features.ndim != 2 or self.boxes.shape != (self.features.shape[0], 4):
            raise DimensionError(f"features {self.features.shape} and boxes {self.boxes.shape} disagree")
        if self.count < 1:
            raise DegenerateSceneError("an object set needs at least one object")
        validate_boxes(self.boxes)

    @property
    def count(self):
        return self.features.shape[0]


def validate_boxes(boxes):
    boxes = np.asarray(boxes, dtype=np.float64)
    if np.any(boxes < 0.0) or np.any(boxes > 1.0):
        raise DataError("box coordinates must lie in [0, 1]")
    if np.any(boxes[:, 0] >= boxes[:, 2]) or np.any(boxes[:, 1] >= boxes[:, 3]):
        raise DataError("boxes need x1 < x2 and y1 < y2")


@dataclass
class RelationGraph:
    kind: str
    labels: np.ndarray  # m x m ids, None for the implicit graph
    neighbors: list  # per node, index arrays in rank order
    neighbor_mask: np.ndarray  # m x m bool
    scores: Tensor  # alpha, H x m x m
    edge_weights: Tensor  # e, H x m x m, zero outside the neighbour sets
    node_features: Tensor  # v', m x d

    def mean_edges(self):
        """Head-averaged edge matrix (m x m)."""
        return self.edge_weights.mean(axis=0)


def synthesize_spatial_labels(boxes):
    """
    Geometric label of object i relative to object j for every ordered pair.

    Priority: contains > inside > overlaps > directional. Directional labels follow
    the dominant axis of the centre displacement (y grows downwards); pairs whose
    centres are more than FAR_DISTANCE apart get NO_RELATION.
    """
    boxes = np.asarray(boxes, dtype=np.float64)
    count = boxes.shape[0]
    labels = np.zeros((count, count), dtype=np.int64)
    centres = np.stack([(boxes[:, 0] + boxes[:, 2]) / 2, (boxes[:, 1] + boxes[:, 3]) / 2], axis=1)
    for i in range(count):
        for j in range(count):
            if i == j:
                continue
            a, b = boxes[i], boxes[j]
            if a[0] <= b[0] and a[1] <= b[1] and a[2] >= b[2] and a[3] >= b[3]:
                labels[i, j] = CONTAINS
                continue
            if b[0] <= a[0] and b[1] <= a[1] and b[2] >= a[2] and b[3] >= a[3]:
                labels[i, j] = INSIDE
                continue
            overlap_w = min(a[2], b[2]) - max(a[0], b[0])
            overlap_h = min(a[3], b[3]) - max(a[1], b[1])
            if overlap_w > 0 and overlap_h > 0:
                labels[i, j] = OVERLAPS
                continue
            dx, dy = centres[j] - centres[i]
            if math.hypot(dx, dy) > FAR_DISTANCE:
                continue
            if abs(dx) >= abs(dy):
                labels[i, j] = LEFT_OF if dx > 0 else RIGHT_OF
            else:
                labels[i, j] = ABOVE if dy > 0 else BELOW
    return labels


def topk_neighbors(scores, k):
    """
    For every node, the min(k, m-1) other nodes with the largest scores.

    ``scores`` is a plain m x m array (head-averaged alpha). Ties go to the lower
    index. Returns the per-node index arrays and the boolean neighbour mask.
    """
    scores = np.asarray(scores, dtype=np.float64)
    count = scores.shape[0]
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    keep = min(k, count - 1)
    neighbors = []
    mask = np.zeros((count, count), dtype=bool)
    for i in range(count):
        candidates = np.array([j for j in range(count) if j != i], dtype=np.int64)
        order = np.argsort(-scores[i, candidates], kind='stable')
        chosen = candidates[order[:keep]]
        neighbors.append(chosen)
        mask[i, chosen] = True
    return neighbors, mask


def implicit_edges(scores, neighbor_mask):
    return masked_softmax(scores, neighbor_mask[None, :, :], axis=-1)


def explicit_edges(scores, neighbor_mask, labels, label_bias):
    """Edges biased by a learned per-head scalar for each relation label."""
    labels = np.asarray(labels, dtype=np.int64)
    table_size = label_bias.shape[1]
    if np.any(labels < 0) or np.any(labels >= table_size):
        raise DataError(f"relation label outside the bias table of size {table_size}")
    return masked_softmax(scores + label_bias[:, labels], neighbor_mask[None, :, :], axis=-1)


class RelationGraphEncoder:
    """One graph attention network with its own projections and label biases."""

    def __init__(self, store, config, kind, rng, label_count=0, prefix='graph'):
        if kind not in GRAPH_KINDS:
            raise ConfigError(f"unknown graph kind {kind!r}")
        self.config = config
        self.kind = kind
        name = f"{prefix}.{kind}"
        d = config.d
        self.query = WeightNormLinear(store, f"{name}.query", d, d, rng)
        self.key = WeightNormLinear(store, f"{name}.key", d, d, rng)
        self.value = WeightNormLinear(store, f"{name}.value", d, d, rng, dropout=config.dropout)
        self.label_bias = None
        if kind != IMPLICIT:
            # one row per head, one column per label id (column 0 is "no relation")
            self.label_bias = store.create(f"{name}.label_bias", np.zeros((config.heads, label_count + 1)))

    def correlation_scores(self, v, ctx=EVAL):
        if v.shape[0] < 2:
            raise DegenerateSceneError("relation graphs need at least two objects")
        queries = split_heads(self.query(v, ctx), self.config.heads)
        keys = split_heads(self.key(v, ctx), self.config.heads)
        return matmul(queries, keys.transpose(0, 2, 1)) * (1.0 / math.sqrt(self.config.head_dim))

    def gat_update(self, v, edges, ctx=EVAL):
        values = split_heads(self.value(v, ctx), self.config.heads)
        return merge_heads(matmul(edges, values).relu())

    def forward(self, v, labels=None, neighbors=None, ctx=EVAL):
        scores = self.correlation_scores(v, ctx)
        if neighbors is None:
            neighbor_sets, mask = topk_neighbors(scores.data.mean(axis=0), self.config.k)
        else:
            neighbor_sets, mask = neighbors
        if self.kind == IMPLICIT:
            edges = implicit_edges(scores, mask)
        else:
            if labels is None:
                raise DataError(f"the {self.kind} graph needs a label matrix")
            edges = explicit_edges(scores, mask, labels, self.label_bias)
        return RelationGraph(
            kind=self.kind,
            labels=None if labels is None else np.asarray(labels),
            neighbors=neighbor_sets,
            neighbor_mask=mask,
            scores=scores,
            edge_weights=edges,
            node_features=self.gat_update(v, edges, ctx),
        )


class ImageRelationEncoder:
    """Projects objects to d and runs the three graph attention networks independently."""

    def __init__(self, store, config, d_in, semantic_label_count, spatial_label_count, rng):
        self.config = config
        # appearance vector plus the 4 box coordinates
        self.projection = WeightNormLinear(store, 'objects.projection', d_in + 4, config.d, rng, dropout=config.dropout)
        self.graphs = {
            IMPLICIT: RelationGraphEncoder(store, config, IMPLICIT, rng),
            SEMANTIC: RelationGraphEncoder(store, config, SEMANTIC, rng, label_count=semantic_label_count),
            SPATIAL: RelationGraphEncoder(store, config, SPATIAL, rng, label_count=spatial_label_count),
        }

    def project(self, objects, ctx=EVAL):
        inputs = concat([Tensor(objects.features), Tensor(objects.boxes)], axis=-1)
        return self.projection(inputs, ctx).relu()

    def encode_image(self, objects, semantic_labels, ctx=EVAL, neighbors=None):
        """Return the implicit, semantic and spatial graphs, in that order."""
        if objects.count < 2:
            raise DegenerateSceneError("relation graphs need at least two objects")
        v = self.project(objects, ctx)
        spatial_labels = synthesize_spatial_labels(objects.boxes)
        labels = {IMPLICIT: None, SEMANTIC: semantic_labels, SPATIAL: spatial_labels}
        neighbors = neighbors or {}
        return [
            self.graphs[kind].forward(v, labels[kind], neighbors.get(kind), ctx)
            for kind in GRAPH_KINDS
        ]
