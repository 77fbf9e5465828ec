from django.test import SimpleTestCase
import numpy as np

from vqa.exceptions import DataError, DimensionError, VocabularyError
from vqa.gradcheck import small_config
from vqa.layers import EVAL
from vqa.optim import ParameterStore
from vqa.question import QuestionBatch, QuestionEncoder
from vqa.vocab import Vocabulary, tokenize


class TokenizeTest(SimpleTestCase):
    def setUp(self):
        self.vocab = Vocabulary(['what', 'is', 'left', 'of', 'the', 'cube'])

    def test_ids_start_at_one(self):
        self.assertEqual(tokenize('what is left of the cube', self.vocab), [1, 2, 3, 4, 5, 6])

    def test_unknown_word(self):
        with self.assertRaises(VocabularyError) as ctx:
            tokenize('what is the sphere', self.vocab)
        self.assertIn('sphere', str(ctx.exception))

    def test_empty_question(self):
        with self.assertRaises(VocabularyError):
            tokenize('   ', self.vocab)

    def test_answer_vocab_is_dense_from_zero(self):
        answers = Vocabulary(['yes', 'no', 'red'], offset=0)
        self.assertEqual([answers.id(a) for a in ('yes', 'no', 'red')], [0, 1, 2])
        self.assertEqual(answers.id_limit, 3)


class QuestionBatchTest(SimpleTestCase):
    def test_pad(self):
        batch = QuestionBatch.pad([[4, 5, 6], [7]], 4)
        np.testing.assert_array_equal(batch.token_ids, [[4, 5, 6, 0], [7, 0, 0, 0]])
        np.testing.assert_array_equal(batch.valid_mask.sum(axis=1), [3, 1])

    def test_too_long(self):
        with self.assertRaises(DataError):
            QuestionBatch.pad([[1, 2, 3]], 2)

    def test_padding_must_be_zero(self):
        with self.assertRaises(DataError):
            QuestionBatch([[1, 2]], [[True, False]])


class QuestionEncoderTest(SimpleTestCase):
    def setUp(self):
        self.config = small_config()
        self.store = ParameterStore()
        self.encoder = QuestionEncoder(self.store, self.config, 12, np.random.default_rng(0))

    def test_shapes(self):
        encoded = self.encoder.encode(QuestionBatch.pad([[1, 2, 3], [4, 5]], 5))
        self.assertEqual(encoded.token_features.shape, (2, 5, 8))
        self.assertEqual(encoded.pooled.shape, (2, 8))

    def test_padding_ids_do_not_change_valid_outputs(self):
        short = self.encoder.encode(QuestionBatch.pad([[3, 1, 4]], 3))
        padded = self.encoder.encode(QuestionBatch.pad([[3, 1, 4]], 5))
        np.testing.assert_allclose(padded.token_features.data[:, :3], short.token_features.data, atol=1e-12)
        np.testing.assert_allclose(padded.pooled.data, short.pooled.data, atol=1e-12)

    def test_batch_rows_are_independent(self):
        alone = self.encoder.encode(QuestionBatch.pad([[2, 7]], 4))
        together = self.encoder.encode(QuestionBatch.pad([[9, 9, 9, 9], [2, 7]], 4))
        np.testing.assert_allclose(together.pooled.data[1], alone.pooled.data[0], atol=1e-12)

    def test_attention_ignores_padding(self):
        layer = self.encoder.layers[0]
        batch = QuestionBatch.pad([[1, 2]], 4)
        x = self.encoder.embedding[batch.token_ids] + self.encoder.position[:4]
        _, weights = self.encoder.self_attention(layer, x, batch.valid_mask, EVAL)
        np.testing.assert_array_equal(weights.data[..., 2:], 0.0)
        np.testing.assert_allclose(weights.data.sum(axis=-1), 1.0, atol=1e-12)

    def test_too_long_for_positions(self):
        with self.assertRaises(DimensionError):
            self.encoder.encode(QuestionBatch.pad([[1] * 6], 6))

    def test_layer_count_and_names(self):
        self.assertIn('question.embedding', self.store)
        self.assertIn('question.layer0.ffn.down.direction', self.store)
        self.assertNotIn('question.layer1.ffn.down.direction', self.store)
