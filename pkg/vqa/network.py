"""The full relation-graph VQA network: question encoder, three relation graphs, fusion, filtering, classifier."""
from dataclasses import dataclass
import logging

import numpy as np

from .exceptions import DataError
from .filtering import ObjectFilter, PriorityRanking
from .fusion import FusedGraph, GraphFusion
from .layers import EVAL
from .optim import ParameterStore
from .predictor import AnswerClassifier, bce_loss, joint, one_hot, predict
from .question import QuestionBatch, QuestionEncoder
from .relations import ImageRelationEncoder

logger = logging.getLogger(__name__)


@dataclass
class ForwardTrace:
    """Everything one example's forward pass computed, kept for dumps and tests."""

    graphs: list
    fused: FusedGraph
    cross_attention: list  # per graph H x m x L, or None when fusion is ablated
    ranking: PriorityRanking
    logits: object

    @property
    def answer_id(self):
        return predict(self.logits.data).answer_id


@dataclass(frozen=True)
class Vocabularies:
    """Sizes the parameter shapes depend on."""

    question: int  # embedding rows, padding id included
    answers: int
    semantic_labels: int
    spatial_labels: int
    d_in: int

    def to_dict(self):
        return {
            'question': self.question,
            'answers': self.answers,
            'semantic_labels': self.semantic_labels,
            'spatial_labels': self.spatial_labels,
            'd_in': self.d_in,
        }

    @classmethod
    def for_corpus(cls, corpus):
        return cls(
            question=corpus.question_vocab.id_limit,
            answers=len(corpus.answer_vocab),
            semantic_labels=len(corpus.semantic_labels),
            spatial_labels=len(corpus.spatial_labels),
            d_in=corpus.manifest.d_in,
        )


class QdgfnNetwork:
    def __init__(self, config, sizes, rng=None):
        self.config = config.validate()
        self.sizes = sizes
        rng = rng if rng is not None else np.random.default_rng([config.seed, 0])
        self.store = ParameterStore()
        self.question = QuestionEncoder(self.store, config, sizes.question, rng)
        self.relations = ImageRelationEncoder(
            self.store, config, sizes.d_in, sizes.semantic_labels, sizes.spatial_labels, rng,
        )
        self.fusion = GraphFusion(self.store, config, rng)
        self.filter = ObjectFilter(self.store, config, rng)
        self.classifier = AnswerClassifier(self.store, config, sizes.answers, rng)
        logger.debug(f"Built {config.variant} network with {self.store.parameter_count()} parameters")

    def encode_questions(self, scenes, ctx=EVAL):
        length = max(len(scene.question_ids) for scene in scenes)
        batch = QuestionBatch.pad([scene.question_ids for scene in scenes], length)
        return self.question.encode(batch, ctx)

    def forward_example(self, objects, semantic_labels, tokens, valid_mask, pooled, ctx=EVAL, neighbors=None, kept=None):
        """
        One example from projected question tokens to answer logits.

        ``neighbors`` (graph kind -> (sets, mask)) and ``kept`` pin the top-k and
        top-P selections, which are otherwise recomputed from the scores.
        """
        graphs = self.relations.encode_image(objects, semantic_labels, ctx, neighbors=neighbors)
        fused, cross_attention = self.fusion.forward(graphs, tokens, valid_mask, ctx)
        ranking = self.filter.forward(fused, ctx, kept=kept)
        logits = self.classifier.classify(joint(pooled, ranking.visual), ctx)
        return ForwardTrace(graphs=graphs, fused=fused, cross_attention=cross_attention, ranking=ranking, logits=logits)

    def forward(self, scenes, ctx=EVAL):
        encoded = self.encode_questions(scenes, ctx)
        traces = []
        for row, scene in enumerate(scenes):
            valid = encoded.valid_mask[row]
            traces.append(self.forward_example(
                scene.objects(),
                scene.semantic_labels,
                encoded.token_features[row],
                valid,
                encoded.pooled[row],
                ctx,
            ))
        return traces

    def loss(self, scenes, ctx=EVAL):
        """Mean BCE over the batch against one-hot answer targets; returns (loss, traces)."""
        if not scenes:
            raise DataError("cannot compute the loss of an empty batch")
        traces = self.forward(scenes, ctx)
        total = None
        for scene, trace in zip(scenes, traces):
            example = bce_loss(trace.logits, one_hot(scene.answer_id, self.sizes.answers))
            total = example if total is None else total + example
        return total * (1.0 / len(scenes)), traces

    def predict(self, scenes, batch_size=None):
        """Eval-mode answer ids, in input order."""
        batch_size = batch_size or self.config.batch_size
        answers = []
        for start in range(0, len(scenes), batch_size):
            answers.extend(trace.answer_id for trace in self.forward(scenes[start:start + batch_size], EVAL))
        return answers
