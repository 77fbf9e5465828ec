import math

from django.test import SimpleTestCase
import numpy as np

from vqa.autograd import Tensor
from vqa.exceptions import ConfigError
from vqa.filtering import ObjectFilter, priority, top_objects
from vqa.fusion import FusedGraph
from vqa.gradcheck import small_config
from vqa.optim import ParameterStore


def row_stochastic(rng, count):
    raw = rng.uniform(size=(count, count))
    return raw / raw.sum(axis=1, keepdims=True)


class PriorityTest(SimpleTestCase):
    def test_squared_column_sums(self):
        relations = Tensor([[0.0, 1.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]])
        # column sums 1, 2, 0
        np.testing.assert_allclose(priority(relations).data, [0.2, 0.8, 0.0])

    def test_uniform_relations_give_uniform_priority(self):
        np.testing.assert_allclose(priority(Tensor(np.full((4, 4), 0.25))).data, 0.25)

    def test_sums_to_one(self):
        gamma = priority(Tensor(row_stochastic(np.random.default_rng(0), 7)))
        self.assertAlmostEqual(float(gamma.data.sum()), 1.0, places=12)


class TopObjectsTest(SimpleTestCase):
    def test_single_object_kept(self):
        self.assertEqual(list(top_objects([0.1, 0.5, 0.4], 1)), [1])

    def test_p_at_least_m_keeps_everything_in_rank_order(self):
        self.assertEqual(list(top_objects([0.1, 0.5, 0.4], 3)), [1, 2, 0])
        self.assertEqual(list(top_objects([0.1, 0.5, 0.4], 10)), [1, 2, 0])

    def test_ties_prefer_lower_index(self):
        self.assertEqual(list(top_objects([0.25, 0.25, 0.25, 0.25], 2)), [0, 1])


class ObjectFilterTest(SimpleTestCase):
    def setUp(self):
        rng = np.random.default_rng(1)
        self.config = small_config(P=3)
        self.filter = ObjectFilter(ParameterStore(), self.config, rng)
        self.nodes = Tensor(rng.normal(size=(5, self.config.d)))
        self.fused = FusedGraph(self.nodes, Tensor(row_stochastic(rng, 5)), None)

    def test_fused_relations_are_row_stochastic(self):
        relations = self.filter.fused_relations(self.nodes, self.fused.relations)
        np.testing.assert_allclose(relations.data.sum(axis=1), 1.0, atol=1e-12)
        self.assertTrue(np.all(relations.data > 0.0))

    def test_keeps_top_p_by_priority(self):
        ranking = self.filter.forward(self.fused)
        expected = np.argsort(-ranking.priority.data, kind='stable')[:3]
        np.testing.assert_array_equal(ranking.kept, expected)
        self.assertEqual(ranking.kept_relations.shape, (3, 3))

    def test_kept_relations_normalised_over_all_pairs(self):
        ranking = self.filter.forward(self.fused)
        self.assertAlmostEqual(float(ranking.kept_relations.data.sum()), 1.0, places=12)
        self.assertAlmostEqual(float(ranking.kept_priority.data.sum()), 1.0, places=12)

    def test_visual_is_priority_weighted_sum(self):
        ranking = self.filter.forward(self.fused)
        expected = ranking.kept_priority.data @ self.nodes.data[ranking.kept]
        np.testing.assert_allclose(ranking.visual.data, expected, atol=1e-12)

    def test_row_renormalisation_switch(self):
        plain = ObjectFilter(ParameterStore(), small_config(P=3, kept_row_renorm=False), np.random.default_rng(1))
        ranking = plain.forward(self.fused)
        np.testing.assert_allclose(ranking.kept_priority.data, priority(ranking.kept_relations).data, atol=1e-12)

    def test_pinned_selection_is_used(self):
        ranking = self.filter.forward(self.fused, kept=[4, 0])
        np.testing.assert_array_equal(ranking.kept, [4, 0])
        self.assertEqual(ranking.kept_priority.shape, (2,))

    def test_p_larger_than_scene(self):
        big = ObjectFilter(ParameterStore(), small_config(P=9), np.random.default_rng(1))
        self.assertEqual(sorted(big.forward(self.fused).kept), [0, 1, 2, 3, 4])

    def test_ablated_filter_averages_every_object(self):
        ablated = ObjectFilter(ParameterStore(), small_config(enable_of=False), np.random.default_rng(2))
        ranking = ablated.forward(self.fused)
        np.testing.assert_array_equal(ranking.kept, np.arange(5))
        np.testing.assert_allclose(ranking.visual.data, self.nodes.data.mean(axis=0), atol=1e-12)
        self.assertIsNone(ranking.kept_relations)

    def test_invalid_p(self):
        relations = self.filter.fused_relations(self.nodes, self.fused.relations)
        with self.assertRaises(ConfigError):
            self.filter.filter_and_aggregate(self.nodes, relations, 0)

    def test_scores_are_unscaled_unless_switched_on(self):
        scaled = ObjectFilter(ParameterStore(), small_config(P=3, scale_filter_scores=True), np.random.default_rng(9))
        scaled.query, scaled.key = self.filter.query, self.filter.key
        np.testing.assert_allclose(
            scaled.bilinear(self.nodes).data, self.filter.bilinear(self.nodes).data / math.sqrt(self.config.d), atol=1e-12,
        )


def loop_priority(relations):
    size = len(relations)
    received = [sum(relations[i][j] for i in range(size)) for j in range(size)]
    total = sum(s * s for s in received)
    return [s * s / total for s in received]


def loop_scores(flt, nodes):
    q, k = flt.query(Tensor(nodes)).data, flt.key(Tensor(nodes)).data
    size, width = nodes.shape
    return [[sum(q[i, c] * k[j, c] for c in range(width)) for j in range(size)] for i in range(size)]


class FilterOracleTest(SimpleTestCase):
    def setUp(self):
        self.rng = np.random.default_rng(40)
        self.config = small_config(P=3)

    def test_priority_on_random_cases(self):
        for _ in range(100):
            m = int(self.rng.integers(1, 7))
            relations = self.rng.uniform(size=(m, m))
            expected = loop_priority(relations.tolist())
            gamma = priority(Tensor(relations)).data
            for i in range(m):
                self.assertAlmostEqual(gamma[i], expected[i], delta=1e-9)

    def test_priority_is_permutation_equivariant(self):
        for _ in range(100):
            m = int(self.rng.integers(2, 7))
            relations = row_stochastic(self.rng, m)
            order = self.rng.permutation(m)
            permuted = priority(Tensor(relations[np.ix_(order, order)])).data
            np.testing.assert_allclose(permuted, priority(Tensor(relations)).data[order], atol=1e-12)

    def test_fused_relations_on_random_cases(self):
        flt = ObjectFilter(ParameterStore(), self.config, self.rng)
        for _ in range(100):
            m = int(self.rng.integers(2, 7))
            nodes = self.rng.normal(size=(m, self.config.d))
            alpha = row_stochastic(self.rng, m)
            scores = loop_scores(flt, nodes)
            relations = flt.fused_relations(Tensor(nodes), Tensor(alpha)).data
            for i in range(m):
                total = sum(math.exp(scores[i][j] + alpha[i, j]) for j in range(m))
                for j in range(m):
                    self.assertAlmostEqual(relations[i, j], math.exp(scores[i][j] + alpha[i, j]) / total, delta=1e-9)

    def check_aggregation(self, row_renorm):
        flt = ObjectFilter(ParameterStore(), small_config(P=3, kept_row_renorm=row_renorm), self.rng)
        for _ in range(100):
            m = int(self.rng.integers(2, 7))
            nodes = self.rng.normal(size=(m, self.config.d))
            relations = row_stochastic(self.rng, m)
            ranking = flt.filter_and_aggregate(Tensor(nodes), Tensor(relations), 3)

            gamma = loop_priority(relations.tolist())
            kept = sorted(range(m), key=lambda i: (-gamma[i], i))[:3]
            self.assertEqual(list(ranking.kept), kept)
            scores = loop_scores(flt, nodes[kept])
            size = len(kept)
            total = sum(math.exp(scores[i][j]) for i in range(size) for j in range(size))
            kept_relations = [[math.exp(scores[i][j]) / total for j in range(size)] for i in range(size)]
            basis = kept_relations
            if row_renorm:
                basis = [[value / sum(row) for value in row] for row in kept_relations]
            weights = loop_priority(basis)
            for i in range(size):
                self.assertAlmostEqual(ranking.kept_priority.data[i], weights[i], delta=1e-9)
                for j in range(size):
                    self.assertAlmostEqual(ranking.kept_relations.data[i, j], kept_relations[i][j], delta=1e-9)
            for c in range(self.config.d):
                expected = sum(weights[i] * nodes[kept[i], c] for i in range(size))
                self.assertAlmostEqual(ranking.visual.data[c], expected, delta=1e-9)

    def test_aggregation_on_random_cases(self):
        self.check_aggregation(row_renorm=True)

    def test_aggregation_without_row_renorm_on_random_cases(self):
        self.check_aggregation(row_renorm=False)

    def test_kept_relations_are_substochastic_without_row_renorm(self):
        flt = ObjectFilter(ParameterStore(), small_config(P=4, kept_row_renorm=False), self.rng)
        for _ in range(100):
            m = int(self.rng.integers(2, 7))
            ranking = flt.filter_and_aggregate(Tensor(self.rng.normal(size=(m, 8))), Tensor(row_stochastic(self.rng, m)), 4)
            rows = ranking.kept_relations.data.sum(axis=1)
            self.assertTrue(np.all(rows < 1.0))
            self.assertAlmostEqual(float(rows.sum()), 1.0, delta=1e-9)
