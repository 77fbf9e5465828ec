"""
Central finite-difference checks of every module's analytic gradients.

Each suite builds a small instance (d=8, at most 5 objects and 5 tokens), runs one
backward pass and compares a sample of gradient entries per tensor with
(f(x+h) - f(x-h)) / 2h. Top-k and top-P selections are pinned to the choices
of an initial forward pass so that the checked function is smooth.
"""
from dataclasses import dataclass
import logging
import zlib

from django.conf import settings
import numpy as np

from .autograd import (
    Tensor, bce_with_logits, layer_norm, masked_softmax, matmul, mean_pool, softmax, weight_norm_linear,
)
from .config import ModelConfig
from .filtering import ObjectFilter
from .fusion import FusedGraph, GraphFusion
from .layers import EVAL
from .network import QdgfnNetwork, Vocabularies
from .optim import ParameterStore
from .predictor import AnswerClassifier, one_hot
from .question import QuestionBatch, QuestionEncoder
from .relations import ImageRelationEncoder, ObjectSet

logger = logging.getLogger(__name__)

SAMPLES_PER_TENSOR = 6
D_IN = 6
SEMANTIC_LABEL_COUNT = 5
SPATIAL_LABEL_COUNT = 7
VOCAB_SIZE = 10
ANSWER_COUNT = 6


@dataclass
class GroupResult:
    suite: str
    group: str
    max_error: float
    checked: int
    tolerance: float

    @property
    def passed(self):
        return bool(self.max_error < self.tolerance)


def relative_error(analytic, numeric):
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-6)


def numeric_gradient(loss_fn, tensor, index, step):
    original = tensor.data[index]
    tensor.data[index] = original + step
    plus = loss_fn().item()
    tensor.data[index] = original - step
    minus = loss_fn().item()
    tensor.data[index] = original
    return (plus - minus) / (2.0 * step)


def sample_indices(shape, rng, samples):
    size = int(np.prod(shape))
    chosen = np.sort(rng.choice(size, size=min(samples, size), replace=False))
    return [np.unravel_index(flat, shape) for flat in chosen]


def check_tensors(loss_fn, tensors, rng, step=None, samples=SAMPLES_PER_TENSOR):
    """Return {name: (max relative error, entries checked)} for the named tensors."""
    step = step or settings.QDGFN_GRADCHECK_STEP
    for tensor in tensors.values():
        tensor.zero_grad()
    loss_fn().backward()
    analytic = {name: tensor.grad.copy() for name, tensor in tensors.items()}
    errors = {}
    for name, tensor in tensors.items():
        worst = 0.0
        indices = sample_indices(tensor.shape, rng, samples)
        for index in indices:
            numeric = numeric_gradient(loss_fn, tensor, index, step)
            worst = max(worst, relative_error(float(analytic[name][index]), numeric))
        errors[name] = (worst, len(indices))
    return errors


def parameter_group(name):
    parts = name.split('.')
    return '.'.join(parts[:2]) if parts[0] == 'graph' else parts[0]


def grouped(suite, errors, tolerance, group=parameter_group):
    merged = {}
    for name, (error, count) in errors.items():
        worst, total = merged.get(group(name), (0.0, 0))
        merged[group(name)] = (max(worst, error), total + count)
    return [
        GroupResult(suite=suite, group=name, max_error=error, checked=count, tolerance=tolerance)
        for name, (error, count) in sorted(merged.items())
    ]


def small_config(**overrides):
    values = dict(
        d=8, heads=2, layers=1, k=2, P=3, max_question_length=5, hidden_multiplier=2,
        dropout=0.0, classifier_dropout=0.0,
    )
    values.update(overrides)
    return ModelConfig.from_preset('desk').with_overrides(**values)


def small_objects(rng, count):
    sizes = rng.uniform(0.1, 0.4, size=(count, 2))
    corners = rng.uniform(0.0, 1.0, size=(count, 2)) * (1.0 - sizes)
    boxes = np.concatenate([corners, corners + sizes], axis=1)
    labels = rng.integers(0, SEMANTIC_LABEL_COUNT + 1, size=(count, count))
    np.fill_diagonal(labels, 0)
    return ObjectSet(rng.normal(size=(count, D_IN)), boxes), labels


def randomise_label_biases(store, rng):
    for name in store.names('graph.'):
        if name.endswith('label_bias'):
            store[name].data[...] = rng.normal(scale=0.5, size=store[name].shape)


def tensor_core_suite(rng, tolerance):
    x = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    b = Tensor(rng.normal(size=(4, 2)), requires_grad=True)
    z = Tensor(rng.normal(scale=2.0, size=(5,)), requires_grad=True)
    targets = rng.uniform(0.0, 1.0, size=5)
    mask = np.array([[True, False, True, True], [False, True, False, False], [True, True, True, True]])
    valid = np.array([True, False, True])
    gain = Tensor(rng.uniform(0.5, 1.5, size=4), requires_grad=True)
    shift = Tensor(rng.normal(size=4), requires_grad=True)
    direction = Tensor(rng.normal(size=(2, 4)), requires_grad=True)
    row_gain = Tensor(rng.uniform(0.5, 1.5, size=2), requires_grad=True)
    bias = Tensor(rng.normal(size=2), requires_grad=True)
    w34, w32, w4 = rng.normal(size=(3, 4)), rng.normal(size=(3, 2)), rng.normal(size=4)
    cases = {
        'matmul': (lambda: (matmul(x, b) * w32).sum(), {'x': x, 'b': b}),
        'softmax': (lambda: (softmax(x, axis=-1) * w34).sum(), {'x': x}),
        'masked_softmax': (lambda: (masked_softmax(x, mask, axis=-1) * w34).sum(), {'x': x}),
        'mean_pool': (lambda: (mean_pool(x, valid) * w4).sum(), {'x': x}),
        'bce_loss': (lambda: bce_with_logits(z, targets), {'z': z}),
        'layer_norm': (lambda: (layer_norm(x, gain, shift) * w34).sum(), {'x': x, 'gain': gain, 'bias': shift}),
        'weight_norm_linear': (
            lambda: (weight_norm_linear(x, direction, row_gain, bias) * w32).sum(),
            {'x': x, 'direction': direction, 'gain': row_gain, 'bias': bias},
        ),
    }
    results = []
    for op, (loss_fn, tensors) in cases.items():
        errors = check_tensors(loss_fn, tensors, rng)
        results.extend(grouped('tensor-core', errors, tolerance, group=lambda _, op=op: op))
    return results


def question_suite(rng, tolerance):
    config = small_config()
    store = ParameterStore()
    encoder = QuestionEncoder(store, config, VOCAB_SIZE, rng)
    batch = QuestionBatch.pad([[1, 4, 2, 7], [3, 9]], config.max_question_length)
    token_weights = rng.normal(size=(2, config.max_question_length, config.d)) * batch.valid_mask[..., None]
    pooled_weights = rng.normal(size=(2, config.d))

    def loss():
        encoded = encoder.encode(batch)
        return (encoded.token_features * token_weights).sum() + (encoded.pooled * pooled_weights).sum()

    return grouped('question-encoder', check_tensors(loss, dict(store.items()), rng), tolerance)


def relation_suite(rng, tolerance):
    config = small_config()
    store = ParameterStore()
    encoder = ImageRelationEncoder(store, config, D_IN, SEMANTIC_LABEL_COUNT, SPATIAL_LABEL_COUNT, rng)
    randomise_label_biases(store, rng)
    objects, labels = small_objects(rng, 5)
    pinned = {g.kind: (g.neighbors, g.neighbor_mask) for g in encoder.encode_image(objects, labels)}
    node_weights = [rng.normal(size=(objects.count, config.d)) for _ in pinned]

    def loss():
        graphs = encoder.encode_image(objects, labels, neighbors=pinned)
        total = None
        for graph, weights in zip(graphs, node_weights):
            term = (graph.node_features * weights).sum()
            total = term if total is None else total + term
        return total

    return grouped('relation-encoder', check_tensors(loss, dict(store.items()), rng), tolerance)


def fusion_suite(rng, tolerance):
    config = small_config()
    store = ParameterStore()
    encoder = ImageRelationEncoder(store, config, D_IN, SEMANTIC_LABEL_COUNT, SPATIAL_LABEL_COUNT, rng)
    fusion = GraphFusion(store, config, rng)
    randomise_label_biases(store, rng)
    objects, labels = small_objects(rng, 4)
    tokens = Tensor(rng.normal(size=(5, config.d)), requires_grad=True)
    valid = np.array([True, True, True, False, False])
    pinned = {g.kind: (g.neighbors, g.neighbor_mask) for g in encoder.encode_image(objects, labels)}
    node_weights = rng.normal(size=(objects.count, config.d))
    relation_weights = rng.normal(size=(objects.count, objects.count))

    def loss():
        graphs = encoder.encode_image(objects, labels, neighbors=pinned)
        fused, _ = fusion.forward(graphs, tokens, valid)
        return (fused.node_features * node_weights).sum() + (fused.relations * relation_weights).sum()

    tensors = {name: tensor for name, tensor in store.items() if name.startswith('fusion.')}
    tensors['fusion.tokens'] = tokens
    return grouped('fusion', check_tensors(loss, tensors, rng), tolerance, group=lambda name: 'fusion')


def filter_suite(rng, tolerance):
    config = small_config()
    store = ParameterStore()
    object_filter = ObjectFilter(store, config, rng)
    count = 5
    nodes = Tensor(rng.normal(size=(count, config.d)), requires_grad=True)
    raw = rng.uniform(0.0, 1.0, size=(count, count))
    fused_alpha = Tensor(raw / raw.sum(axis=1, keepdims=True), requires_grad=True)
    kept = object_filter.forward(FusedGraph(nodes, fused_alpha, None)).kept
    visual_weights = rng.normal(size=config.d)

    def loss():
        ranking = object_filter.forward(FusedGraph(nodes, fused_alpha, None), kept=kept)
        return (ranking.visual * visual_weights).sum()

    tensors = dict(store.items())
    tensors['filter.nodes'] = nodes
    tensors['filter.fused_relations'] = fused_alpha
    return grouped('object-filter', check_tensors(loss, tensors, rng), tolerance, group=lambda name: 'filter')


def predictor_suite(rng, tolerance):
    config = small_config()
    store = ParameterStore()
    classifier = AnswerClassifier(store, config, ANSWER_COUNT, rng)
    joint_vector = Tensor(rng.normal(size=config.d), requires_grad=True)
    targets = one_hot(2, ANSWER_COUNT)

    def loss():
        return bce_with_logits(classifier.classify(joint_vector), targets)

    tensors = dict(store.items())
    tensors['answer.joint'] = joint_vector
    return grouped('predictor', check_tensors(loss, tensors, rng), tolerance)


def end_to_end_suite(rng, tolerance):
    """Question embedding to loss on a 3-object, 4-token instance."""
    config = small_config(k=2, P=2)
    sizes = Vocabularies(
        question=VOCAB_SIZE, answers=ANSWER_COUNT, semantic_labels=SEMANTIC_LABEL_COUNT,
        spatial_labels=SPATIAL_LABEL_COUNT, d_in=D_IN,
    )
    network = QdgfnNetwork(config, sizes, rng=rng)
    randomise_label_biases(network.store, rng)
    objects, labels = small_objects(rng, 3)
    batch = QuestionBatch.pad([[2, 5, 1, 8]], 4)
    targets = one_hot(1, ANSWER_COUNT)

    def forward(neighbors=None, kept=None):
        encoded = network.question.encode(batch)
        return network.forward_example(
            objects, labels, encoded.token_features[0], batch.valid_mask[0], encoded.pooled[0],
            EVAL, neighbors=neighbors, kept=kept,
        )

    first = forward()
    pinned = {g.kind: (g.neighbors, g.neighbor_mask) for g in first.graphs}
    kept = first.ranking.kept

    def loss():
        return bce_with_logits(forward(pinned, kept).logits, targets)

    return grouped('end-to-end', check_tensors(loss, dict(network.store.items()), rng), tolerance)


SUITES = {
    'tensor-core': tensor_core_suite,
    'question-encoder': question_suite,
    'relation-encoder': relation_suite,
    'fusion': fusion_suite,
    'object-filter': filter_suite,
    'predictor': predictor_suite,
    'end-to-end': end_to_end_suite,
}


def suite_rng(seed, name):
    """Generator for one suite, keyed by the seed and the suite's name only."""
    return np.random.default_rng([seed, zlib.crc32(name.encode())])


def run_suites(seed, names=None, tolerance=None):
    tolerance = tolerance or settings.QDGFN_GRADCHECK_TOLERANCE
    results = []
    for name in names or SUITES:
        suite_results = SUITES[name](suite_rng(seed, name), tolerance)
        worst = max(result.max_error for result in suite_results)
        logger.info(f"Gradcheck {name}: max relative error {worst:.2e}")
        results.extend(suite_results)
    return results
