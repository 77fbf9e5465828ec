import math

from django.test import SimpleTestCase
import numpy as np

from vqa.autograd import Tensor
from vqa.exceptions import DataError, DegenerateSceneError
from vqa.gradcheck import (
    D_IN, SEMANTIC_LABEL_COUNT, SPATIAL_LABEL_COUNT, randomise_label_biases, small_config, small_objects,
)
from vqa.optim import ParameterStore
from vqa.relations import (
    ABOVE, BELOW, CONTAINS, FAR_DISTANCE, IMPLICIT, INSIDE, LEFT_OF, NO_RELATION, OVERLAPS, RIGHT_OF, SEMANTIC,
    SPATIAL, ImageRelationEncoder, ObjectSet, RelationGraphEncoder, explicit_edges, implicit_edges,
    synthesize_spatial_labels, topk_neighbors,
)


def rule_oracle(a, b):
    """Label of box a relative to box b, written out case by case."""
    if a[0] <= b[0] and a[1] <= b[1] and a[2] >= b[2] and a[3] >= b[3]:
        return CONTAINS
    if a[0] >= b[0] and a[1] >= b[1] and a[2] <= b[2] and a[3] <= b[3]:
        return INSIDE
    if min(a[2], b[2]) > max(a[0], b[0]) and min(a[3], b[3]) > max(a[1], b[1]):
        return OVERLAPS
    ax, ay = (a[0] + a[2]) / 2, (a[1] + a[3]) / 2
    bx, by = (b[0] + b[2]) / 2, (b[1] + b[3]) / 2
    if math.sqrt((bx - ax) ** 2 + (by - ay) ** 2) > FAR_DISTANCE:
        return NO_RELATION
    if abs(bx - ax) >= abs(by - ay):
        return LEFT_OF if bx > ax else RIGHT_OF
    return ABOVE if by > ay else BELOW


def random_boxes(rng, count):
    sizes = rng.uniform(0.05, 0.5, size=(count, 2))
    corners = rng.uniform(0.0, 1.0, size=(count, 2)) * (1.0 - sizes)
    return np.concatenate([corners, corners + sizes], axis=1)


class SpatialLabelTest(SimpleTestCase):
    def test_containment(self):
        boxes = np.array([[0.4, 0.4, 0.5, 0.5], [0.1, 0.1, 0.9, 0.9]])
        labels = synthesize_spatial_labels(boxes)
        self.assertEqual(labels[0, 1], INSIDE)
        self.assertEqual(labels[1, 0], CONTAINS)

    def test_left_and_right(self):
        boxes = np.array([[0.1, 0.4, 0.3, 0.6], [0.7, 0.4, 0.9, 0.6]])
        labels = synthesize_spatial_labels(boxes)
        self.assertEqual(labels[0, 1], LEFT_OF)
        self.assertEqual(labels[1, 0], RIGHT_OF)

    def test_above_and_below(self):
        boxes = np.array([[0.4, 0.1, 0.6, 0.2], [0.4, 0.6, 0.6, 0.8]])
        labels = synthesize_spatial_labels(boxes)
        self.assertEqual(labels[0, 1], ABOVE)
        self.assertEqual(labels[1, 0], BELOW)

    def test_far_apart(self):
        boxes = np.array([[0.0, 0.0, 0.1, 0.1], [0.9, 0.9, 1.0, 1.0]])
        self.assertEqual(synthesize_spatial_labels(boxes)[0, 1], NO_RELATION)

    def test_diagonal_is_empty(self):
        labels = synthesize_spatial_labels(random_boxes(np.random.default_rng(0), 6))
        np.testing.assert_array_equal(np.diag(labels), 0)

    def test_matches_rule_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            boxes = random_boxes(rng, int(rng.integers(2, 8)))
            labels = synthesize_spatial_labels(boxes)
            for i in range(len(boxes)):
                for j in range(len(boxes)):
                    if i != j:
                        self.assertEqual(labels[i, j], rule_oracle(boxes[i], boxes[j]))

    def test_invalid_box(self):
        with self.assertRaises(DataError):
            ObjectSet(np.zeros((1, 3)), [[0.5, 0.5, 0.4, 0.9]])


class TopkTest(SimpleTestCase):
    def test_two_nodes(self):
        neighbors, mask = topk_neighbors(np.zeros((2, 2)), 1)
        self.assertEqual([list(n) for n in neighbors], [[1], [0]])
        np.testing.assert_array_equal(mask, [[False, True], [True, False]])

    def test_k_capped_at_other_nodes(self):
        neighbors, _ = topk_neighbors(np.random.default_rng(2).normal(size=(3, 3)), 10)
        self.assertTrue(all(len(n) == 2 for n in neighbors))

    def test_ties_prefer_lower_index(self):
        scores = np.array([[9.0, 1.0, 1.0, 1.0], [0.0, 9.0, 2.0, 2.0], [5.0, 5.0, 9.0, 5.0], [0.0, 0.0, 0.0, 0.0]])
        neighbors, _ = topk_neighbors(scores, 2)
        self.assertEqual([list(n) for n in neighbors], [[1, 2], [2, 3], [0, 1], [0, 1]])

    def test_invariant_to_monotone_transform(self):
        rng = np.random.default_rng(3)
        scores = rng.normal(size=(6, 6))
        first, _ = topk_neighbors(scores, 3)
        second, _ = topk_neighbors(np.exp(2.0 * scores) + 1.0, 3)
        for a, b in zip(first, second):
            np.testing.assert_array_equal(a, b)

    def test_matches_sort_oracle(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            m = int(rng.integers(2, 7))
            scores = rng.normal(size=(m, m))
            neighbors, _ = topk_neighbors(scores, 3)
            for i in range(m):
                others = sorted((j for j in range(m) if j != i), key=lambda j: (-scores[i, j], j))
                self.assertEqual(list(neighbors[i]), others[:min(3, m - 1)])


class EdgeTest(SimpleTestCase):
    def setUp(self):
        rng = np.random.default_rng(5)
        self.scores = Tensor(rng.normal(size=(2, 5, 5)))
        _, self.mask = topk_neighbors(self.scores.data.mean(axis=0), 3)
        self.labels = rng.integers(0, 4, size=(5, 5))

    def test_rows_sum_to_one_over_neighbors(self):
        edges = implicit_edges(self.scores, self.mask)
        np.testing.assert_allclose(edges.data.sum(axis=-1), 1.0, atol=1e-12)
        self.assertTrue(np.all(edges.data[:, ~self.mask] == 0.0))

    def test_zero_bias_equals_implicit(self):
        bias = Tensor(np.zeros((2, 4)))
        np.testing.assert_array_equal(
            explicit_edges(self.scores, self.mask, self.labels, bias).data,
            implicit_edges(self.scores, self.mask).data,
        )

    def test_biased_softmax_matches_loop_oracle(self):
        bias = np.random.default_rng(6).normal(size=(2, 4))
        edges = explicit_edges(self.scores, self.mask, self.labels, Tensor(bias)).data
        for h in range(2):
            for i in range(5):
                logits = {j: self.scores.data[h, i, j] + bias[h, self.labels[i, j]] for j in range(5) if self.mask[i, j]}
                total = sum(math.exp(v) for v in logits.values())
                for j in range(5):
                    expected = math.exp(logits[j]) / total if j in logits else 0.0
                    self.assertAlmostEqual(edges[h, i, j], expected, delta=1e-12)

    def test_row_shift_invariance(self):
        shifted = Tensor(self.scores.data + np.arange(5.0)[None, :, None])
        np.testing.assert_allclose(
            implicit_edges(shifted, self.mask).data, implicit_edges(self.scores, self.mask).data, atol=1e-12,
        )

    def test_label_outside_table(self):
        with self.assertRaises(DataError):
            explicit_edges(self.scores, self.mask, np.full((5, 5), 9), Tensor(np.zeros((2, 4))))


class GraphEncoderTest(SimpleTestCase):
    def setUp(self):
        self.config = small_config()
        self.store = ParameterStore()
        self.encoder = ImageRelationEncoder(self.store, self.config, 6, 5, 7, np.random.default_rng(7))
        self.objects, self.labels = small_objects(np.random.default_rng(8), 4)

    def test_correlation_scores_match_loop_oracle(self):
        graph = self.encoder.graphs[IMPLICIT]
        v = self.encoder.project(self.objects)
        scores = graph.correlation_scores(v).data
        q = graph.query(v).data
        k = graph.key(v).data
        width = self.config.head_dim
        for h in range(self.config.heads):
            cols = slice(h * width, (h + 1) * width)
            for i in range(4):
                for j in range(4):
                    expected = q[i, cols] @ k[j, cols] / math.sqrt(width)
                    self.assertAlmostEqual(scores[h, i, j], expected, delta=1e-12)

    def test_gat_update_matches_loop_oracle(self):
        graph = self.encoder.graphs[SEMANTIC]
        v = self.encoder.project(self.objects)
        result = graph.forward(v, self.labels)
        values = graph.value(v).data
        edges = result.edge_weights.data
        width = self.config.head_dim
        for h in range(self.config.heads):
            cols = slice(h * width, (h + 1) * width)
            for i in range(4):
                message = sum(edges[h, i, j] * values[j, cols] for j in result.neighbors[i])
                np.testing.assert_allclose(result.node_features.data[i, cols], np.maximum(message, 0.0), atol=1e-12)

    def test_identical_parameters_give_identical_graphs(self):
        for kind in (SEMANTIC, SPATIAL):
            for part in ('query', 'key', 'value'):
                for field in ('direction', 'gain', 'bias'):
                    source = self.store[f"graph.{IMPLICIT}.{part}.{field}"]
                    self.store[f"graph.{kind}.{part}.{field}"].data[...] = source.data
        graphs = self.encoder.encode_image(self.objects, self.labels)
        np.testing.assert_array_equal(graphs[0].node_features.data, graphs[1].node_features.data)
        np.testing.assert_array_equal(graphs[0].node_features.data, graphs[2].node_features.data)

    def test_returns_graphs_in_kind_order(self):
        graphs = self.encoder.encode_image(self.objects, self.labels)
        self.assertEqual([g.kind for g in graphs], [IMPLICIT, SEMANTIC, SPATIAL])
        self.assertIsNone(graphs[0].labels)
        np.testing.assert_array_equal(graphs[2].labels, synthesize_spatial_labels(self.objects.boxes))

    def test_single_object_scene(self):
        objects = ObjectSet(np.zeros((1, 6)), [[0.1, 0.1, 0.2, 0.2]])
        with self.assertRaises(DegenerateSceneError):
            self.encoder.encode_image(objects, np.zeros((1, 1), dtype=int))

    def test_explicit_graph_needs_labels(self):
        graph = RelationGraphEncoder(ParameterStore(), self.config, SEMANTIC, np.random.default_rng(0), label_count=3)
        with self.assertRaises(DataError):
            graph.forward(Tensor(np.ones((3, self.config.d))))


def loop_softmax(logits):
    """Plain-python softmax over a {column: logit} dict."""
    top = max(logits.values())
    weights = {j: math.exp(value - top) for j, value in logits.items()}
    total = sum(weights.values())
    return {j: w / total for j, w in weights.items()}


class RandomCaseOracleTest(SimpleTestCase):
    def test_biased_softmax_on_random_cases(self):
        rng = np.random.default_rng(20)
        for _ in range(100):
            m = int(rng.integers(2, 7))
            heads = int(rng.integers(1, 4))
            label_count = int(rng.integers(1, 6))
            scores = rng.normal(scale=2.0, size=(heads, m, m))
            neighbors, mask = topk_neighbors(scores.mean(axis=0), int(rng.integers(1, m)))
            labels = rng.integers(0, label_count + 1, size=(m, m))
            bias = rng.normal(size=(heads, label_count + 1))
            edges = explicit_edges(Tensor(scores), mask, labels, Tensor(bias)).data
            for h in range(heads):
                for i in range(m):
                    expected = loop_softmax({j: scores[h, i, j] + bias[h, labels[i, j]] for j in neighbors[i]})
                    for j in range(m):
                        self.assertAlmostEqual(edges[h, i, j], expected.get(j, 0.0), delta=1e-9)

    def test_gat_update_on_random_cases(self):
        rng = np.random.default_rng(21)
        config = small_config(k=3)
        store = ParameterStore()
        encoder = ImageRelationEncoder(store, config, D_IN, SEMANTIC_LABEL_COUNT, SPATIAL_LABEL_COUNT, rng)
        randomise_label_biases(store, rng)
        width = config.head_dim
        for _ in range(100):
            m = int(rng.integers(2, 7))
            objects, labels = small_objects(rng, m)
            v = encoder.project(objects)
            for graph in encoder.encode_image(objects, labels):
                values = encoder.graphs[graph.kind].value(v).data
                edges = graph.edge_weights.data
                for h in range(config.heads):
                    for i in range(m):
                        for c in range(width):
                            column = h * width + c
                            message = sum(edges[h, i, j] * values[j, column] for j in graph.neighbors[i])
                            self.assertAlmostEqual(graph.node_features.data[i, column], max(message, 0.0), delta=1e-9)
