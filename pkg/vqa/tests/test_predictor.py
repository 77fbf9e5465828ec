from django.test import SimpleTestCase
import numpy as np

from vqa.autograd import Tensor
from vqa.exceptions import DimensionError
from vqa.gradcheck import small_config
from vqa.optim import ParameterStore
from vqa.predictor import AnswerClassifier, bce_loss, joint, one_hot, predict


class JointTest(SimpleTestCase):
    def test_elementwise_product(self):
        np.testing.assert_array_equal(joint(Tensor([1.0, -2.0, 3.0]), Tensor([2.0, 0.5, 0.0])).data, [2.0, -1.0, 0.0])

    def test_shape_mismatch(self):
        with self.assertRaises(DimensionError):
            joint(Tensor(np.ones(3)), Tensor(np.ones(4)))


class PredictTest(SimpleTestCase):
    def test_argmax(self):
        self.assertEqual(predict([0.1, 2.0, -1.0]).answer_id, 1)

    def test_ties_go_to_lower_id(self):
        self.assertEqual(predict([0.5, 3.0, 3.0, 3.0]).answer_id, 1)

    def test_one_hot(self):
        np.testing.assert_array_equal(one_hot(2, 4), [0.0, 0.0, 1.0, 0.0])


class AnswerClassifierTest(SimpleTestCase):
    def setUp(self):
        self.config = small_config()
        self.store = ParameterStore()
        self.classifier = AnswerClassifier(self.store, self.config, 6, np.random.default_rng(0))

    def test_zero_joint_with_zero_biases_gives_zero_logits(self):
        logits = self.classifier.classify(Tensor(np.zeros(self.config.d)))
        np.testing.assert_array_equal(logits.data, np.zeros(6))

    def test_zero_logits_loss_is_ln2(self):
        logits = self.classifier.classify(Tensor(np.zeros(self.config.d)))
        self.assertAlmostEqual(bce_loss(logits, one_hot(0, 6)).item(), np.log(2.0), places=12)

    def test_hidden_width(self):
        self.assertEqual(self.store['answer.hidden.direction'].shape, (self.config.hidden, self.config.d))
        self.assertEqual(self.store['answer.output.direction'].shape, (6, self.config.hidden))

    def test_confident_correct_logits_have_small_loss(self):
        logits = Tensor(np.array([-20.0, 20.0, -20.0]))
        self.assertLess(bce_loss(logits, one_hot(1, 3)).item(), 1e-8)
