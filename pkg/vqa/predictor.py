"""Answer prediction: joint representation, two-layer classifier and the BCE objective."""
from dataclasses import dataclass

import numpy as np

from .autograd import bce_with_logits
from .exceptions import DimensionError
from .layers import EVAL, WeightNormLinear


@dataclass
class Prediction:
    logits: np.ndarray
    answer_id: int


def joint(question, visual):
    """J = q * V*, elementwise."""
    if question.shape != visual.shape:
        raise DimensionError(f"question {question.shape} and visual {visual.shape} vectors differ")
    return question * visual


def bce_loss(logits, targets):
    return bce_with_logits(logits, targets)


def predict(logits):
    """argmax with ties to the lower id."""
    logits = np.asarray(logits, dtype=np.float64)
    return Prediction(logits=logits, answer_id=int(np.argmax(logits)))


def one_hot(answer_id, answer_count):
    targets = np.zeros(answer_count)
    targets[answer_id] = 1.0
    return targets


class AnswerClassifier:
    def __init__(self, store, config, answer_count, rng, prefix='answer'):
        self.config = config
        self.hidden = WeightNormLinear(store, f"{prefix}.hidden", config.d, config.hidden, rng)
        self.output = WeightNormLinear(
            store, f"{prefix}.output", config.hidden, answer_count, rng, dropout=config.classifier_dropout,
        )

    def classify(self, joint_vector, ctx=EVAL):
        hidden = self.hidden(joint_vector.reshape(1, -1), ctx).relu()
        return self.output(hidden, ctx).reshape(-1)
