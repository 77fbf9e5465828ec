"""Per-example attention records (graph weights, cross attention, priorities) and PNG renders."""
import json
import logging

import numpy as np
from PIL import Image, ImageDraw

from .exceptions import UsageError
from .files import atomic_output, atomic_write_text
from .relations import GRAPH_KINDS
from .synth import COLORS, OBJECT_TYPES, QUESTION_TYPES

logger = logging.getLogger(__name__)

RENDER_SIZE = 320
KEPT_COLOR = (200, 30, 30)
DROPPED_COLOR = (150, 150, 150)


def _rounded(values):
    return np.round(np.asarray(values, dtype=np.float64), 6).tolist()


def dump_record(index, split, scene, trace, corpus):
    """One JSON-ready record describing how the network answered ``scene``."""
    ranking = trace.ranking
    gamma = ranking.priority.data
    order = np.argsort(-gamma, kind='stable')
    cross_attention = None
    if trace.cross_attention is not None:
        # head-averaged, valid tokens only
        length = len(scene.question_ids)
        cross_attention = {
            kind: _rounded(attention.data.mean(axis=0)[:, :length])
            for kind, attention in zip(GRAPH_KINDS, trace.cross_attention)
        }
    return {
        'id': index,
        'split': split,
        'question': ' '.join(corpus.question_vocab.decode(scene.question_ids)),
        'question_type': QUESTION_TYPES[scene.question_type],
        'answer': corpus.answer_vocab.token(scene.answer_id),
        'predicted': corpus.answer_vocab.token(trace.answer_id),
        'objects': [
            {
                'index': i,
                'type': OBJECT_TYPES[scene.types[i]],
                'color': COLORS[scene.colors[i]],
                'box': _rounded(scene.boxes[i]),
            }
            for i in range(scene.count)
        ],
        'graph_kinds': list(GRAPH_KINDS),
        'beta': _rounded(trace.fused.weights.data),
        'cross_attention': cross_attention,
        'fused_relations': _rounded(trace.fused.relations.data),
        'gamma': _rounded(gamma),
        'ranking': [int(i) for i in order],
        'kept': [int(i) for i in ranking.kept],
        'kept_priority': _rounded(ranking.kept_priority.data),
    }


def collect(network, corpus, split, ids):
    scenes = corpus.split(split)
    for index in ids:
        if not 0 <= index < len(scenes):
            raise UsageError(f"example id {index} outside the {split} split (0..{len(scenes) - 1})")
    chosen = [scenes[index] for index in ids]
    traces = network.forward(chosen) if chosen else []
    return [dump_record(index, split, scene, trace, corpus) for index, scene, trace in zip(ids, chosen, traces)]


def write_records(records, path):
    atomic_write_text(path, ''.join(json.dumps(record, sort_keys=True) + '\n' for record in records))


def render(record, path):
    """Draw the scene's boxes; kept objects in red with their priority rank."""
    image = Image.new('RGB', (RENDER_SIZE, RENDER_SIZE + 40), 'white')
    draw = ImageDraw.Draw(image)
    draw.text((6, 4), record['question'], fill='black')
    draw.text((6, 20), f"answer {record['answer']}, predicted {record['predicted']}", fill='black')
    rank = {index: position + 1 for position, index in enumerate(record['ranking'])}
    kept = set(record['kept'])
    for obj in record['objects']:
        x1, y1, x2, y2 = (value * (RENDER_SIZE - 1) for value in obj['box'])
        y1, y2 = y1 + 40, y2 + 40
        is_kept = obj['index'] in kept
        color = KEPT_COLOR if is_kept else DROPPED_COLOR
        draw.rectangle([x1, y1, x2, y2], outline=color, width=3 if is_kept else 1)
        draw.text((x1 + 3, y1 + 2), f"#{rank[obj['index']]} {obj['color']} {obj['type']}", fill=color)
    with atomic_output(path, 'wb') as stream:
        image.save(stream, format='PNG')
    logger.debug(f"Rendered example {record['id']} to {path}")
