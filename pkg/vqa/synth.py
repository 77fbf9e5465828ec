"""
Synthetic relational scenes and templated questions with provably unique answers.

A scene is a handful of typed, coloured objects with boxes, ground-truth semantic
relations drawn from a small schema and spatial relations derived from geometry.
Questions are instantiated from templates of three kinds (semantic, spatial,
mixed) and kept only when exhaustive evaluation over the scene yields exactly one
answer. Every draw comes from a generator seeded per scene.
"""
from dataclasses import dataclass, field
import itertools
import logging
import re

import numpy as np

from .exceptions import ConfigError, DataError, GeneratorError
from .relations import ObjectSet, SPATIAL_LABELS, synthesize_spatial_labels
from .vocab import Vocabulary

logger = logging.getLogger(__name__)

GENERATOR_VERSION = 1

OBJECT_TYPES = ('person', 'dog', 'horse', 'bike', 'hat', 'ball', 'cup', 'table')
TYPE_WEIGHTS = (3.0, 2.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
COLORS = ('red', 'green', 'blue', 'yellow', 'white', 'black')
SEMANTIC_LABELS = ('holding', 'wearing', 'riding', 'chasing', 'walking')
# (subject type, relation, object type) triples a scene may contain
RELATION_SCHEMA = (
    ('person', 'holding', 'ball'),
    ('person', 'holding', 'cup'),
    ('person', 'wearing', 'hat'),
    ('person', 'riding', 'horse'),
    ('person', 'riding', 'bike'),
    ('person', 'walking', 'dog'),
    ('dog', 'chasing', 'ball'),
    ('dog', 'chasing', 'bike'),
)
SPATIAL_PHRASES = {
    1: 'left of',
    2: 'right of',
    3: 'above',
    4: 'below',
    5: 'overlapping',
    6: 'containing',
    7: 'inside',
}
ANSWERS = OBJECT_TYPES + COLORS + ('yes', 'no')
QUESTION_TYPES = ('semantic', 'spatial', 'mixed')

RELATION_PROBABILITY = 0.6
FEATURE_NOISE = 0.1
MAX_ATTEMPTS = 200

TEMPLATES = {
    'sem_object': ('semantic', 'what is the {subj} {rel}'),
    'sem_color': ('semantic', 'what color is the thing the {subj} is {rel}'),
    'sem_exists': ('semantic', 'is the {subj} {rel} a {obj}'),
    'spa_object': ('spatial', 'what is {phrase} the {ref}'),
    'spa_color': ('spatial', 'what color is the thing {phrase} the {ref}'),
    'spa_exists': ('spatial', 'is there a {obj} {phrase} the {ref}'),
    'mix_object': ('mixed', 'what is {phrase} the thing the {subj} is {rel}'),
    'mix_color': ('mixed', 'what color is the thing {phrase} the thing the {subj} is {rel}'),
    'mix_exists': ('mixed', 'is the thing the {subj} is {rel} {phrase} the {ref}'),
}


def question_vocabulary():
    words = []
    for _, pattern in TEMPLATES.values():
        words.extend(word for word in pattern.split() if not word.startswith('{'))
    for phrase in SPATIAL_PHRASES.values():
        words.extend(phrase.split())
    words.extend(OBJECT_TYPES)
    words.extend(SEMANTIC_LABELS)
    return Vocabulary(list(dict.fromkeys(words)), offset=1)


def answer_vocabulary():
    return Vocabulary(ANSWERS, offset=0)


def semantic_label_vocabulary():
    return Vocabulary(SEMANTIC_LABELS, offset=1)


def spatial_label_vocabulary():
    return Vocabulary(SPATIAL_LABELS, offset=1)


@dataclass
class SceneInstance:
    features: np.ndarray  # m x d_in, float32
    boxes: np.ndarray  # m x 4, float32
    semantic_labels: np.ndarray  # m x m, uint16
    types: np.ndarray  # m, uint8 index into OBJECT_TYPES
    colors: np.ndarray  # m, uint8 index into COLORS
    question_ids: list = field(default_factory=list)
    answer_id: int = 0
    question_type: int = 0
    seed: int = 0

    @property
    def count(self):
        return self.features.shape[0]

    def objects(self):
        return ObjectSet(self.features.astype(np.float64), self.boxes.astype(np.float64))

    def spatial_labels(self):
        return synthesize_spatial_labels(self.boxes.astype(np.float64))

    def same_as(self, other):
        """Field-by-field, bit-level equality."""
        return (
            np.array_equal(self.features, other.features)
            and self.features.dtype == other.features.dtype
            and np.array_equal(self.boxes, other.boxes)
            and np.array_equal(self.semantic_labels, other.semantic_labels)
            and np.array_equal(self.types, other.types)
            and np.array_equal(self.colors, other.colors)
            and list(self.question_ids) == list(other.question_ids)
            and self.answer_id == other.answer_id
            and self.question_type == other.question_type
            and self.seed == other.seed
        )


@dataclass(frozen=True)
class QuestionProgram:
    template: str
    subj: str = None
    rel: str = None
    obj: str = None
    phrase: int = None
    ref: str = None

    @property
    def question_type(self):
        return TEMPLATES[self.template][0]

    def words(self):
        values = {
            'subj': self.subj,
            'rel': self.rel,
            'obj': self.obj,
            'ref': self.ref,
            'phrase': SPATIAL_PHRASES.get(self.phrase),
        }
        return TEMPLATES[self.template][1].format(**values).split()


def _alternatives(options):
    return '|'.join(re.escape(option) for option in sorted(options, key=len, reverse=True))


def _template_pattern(pattern):
    slots = {
        'subj': _alternatives(OBJECT_TYPES),
        'obj': _alternatives(OBJECT_TYPES),
        'ref': _alternatives(OBJECT_TYPES),
        'rel': _alternatives(SEMANTIC_LABELS),
        'phrase': _alternatives(SPATIAL_PHRASES.values()),
    }
    regex = re.escape(pattern)
    for slot, alternatives in slots.items():
        regex = regex.replace(re.escape('{' + slot + '}'), f"(?P<{slot}>{alternatives})")
    return re.compile(regex)


_PARSERS = {name: _template_pattern(pattern) for name, (_, pattern) in TEMPLATES.items()}
_PHRASE_IDS = {phrase: label for label, phrase in SPATIAL_PHRASES.items()}


def parse_question(words):
    """Recover the program behind a question; DataError if no template matches."""
    text = ' '.join(words)
    for name, parser in _PARSERS.items():
        match = parser.fullmatch(text)
        if match:
            args = match.groupdict()
            if 'phrase' in args:
                args['phrase'] = _PHRASE_IDS[args['phrase']]
            return QuestionProgram(template=name, **args)
    raise DataError(f"question does not match any template: {text!r}")


class SceneView:
    """Exhaustive lookups over one scene, by attribute names."""

    def __init__(self, scene):
        self.types = [OBJECT_TYPES[t] for t in scene.types]
        self.colors = [COLORS[c] for c in scene.colors]
        self.semantic = np.asarray(scene.semantic_labels, dtype=np.int64)
        self.spatial = scene.spatial_labels()
        self.count = len(self.types)

    def of_type(self, type_name):
        return [i for i in range(self.count) if self.types[i] == type_name]

    def unique(self, type_name):
        matches = self.of_type(type_name)
        return matches[0] if len(matches) == 1 else None

    def related(self, subject, relation):
        label = SEMANTIC_LABELS.index(relation) + 1
        return [j for j in range(self.count) if self.semantic[subject, j] == label]

    def located(self, reference, phrase):
        return [x for x in range(self.count) if x != reference and self.spatial[x, reference] == phrase]


def evaluate(scene, program, view=None):
    """
    Answer ``program`` on ``scene`` by exhaustive search.

    Returns the answer string, or None when a referent is missing or ambiguous.
    """
    view = view or SceneView(scene)
    template = program.template

    def single(candidates):
        return candidates[0] if len(candidates) == 1 else None

    target = None
    if template.startswith('sem') or template.startswith('mix'):
        subject = view.unique(program.subj)
        if subject is None:
            return None
        targets = view.related(subject, program.rel)
        if template == 'sem_exists':
            return 'yes' if any(view.types[j] == program.obj for j in targets) else 'no'
        target = single(targets)
        if target is None:
            return None
        if template == 'sem_object':
            return view.types[target]
        if template == 'sem_color':
            return view.colors[target]

    if template == 'mix_exists':
        reference = view.unique(program.ref)
        if reference is None or reference == target:
            return None
        return 'yes' if view.spatial[target, reference] == program.phrase else 'no'

    if template.startswith('spa'):
        reference = view.unique(program.ref)
        if reference is None:
            return None
        located = view.located(reference, program.phrase)
        if template == 'spa_exists':
            return 'yes' if any(view.types[x] == program.obj for x in located) else 'no'
    else:
        located = view.located(target, program.phrase)
    found = single(located)
    if found is None:
        return None
    return view.colors[found] if template.endswith('color') else view.types[found]


def candidate_programs(view, question_type):
    """Every instantiation of the question type's templates worth evaluating on this view."""
    unique_types = [name for name in OBJECT_TYPES if len(view.of_type(name)) == 1]
    subjects = []
    for name in unique_types:
        index = view.unique(name)
        relations = sorted({SEMANTIC_LABELS[label - 1] for label in view.semantic[index] if label})
        subjects.extend((name, relation) for relation in relations)
    phrases = sorted(SPATIAL_PHRASES)
    programs = []
    if question_type == 'semantic':
        for subj, rel in subjects:
            programs.append(QuestionProgram('sem_object', subj=subj, rel=rel))
            programs.append(QuestionProgram('sem_color', subj=subj, rel=rel))
            programs.extend(QuestionProgram('sem_exists', subj=subj, rel=rel, obj=obj) for obj in OBJECT_TYPES)
    elif question_type == 'spatial':
        for ref, phrase in itertools.product(unique_types, phrases):
            programs.append(QuestionProgram('spa_object', phrase=phrase, ref=ref))
            programs.append(QuestionProgram('spa_color', phrase=phrase, ref=ref))
            programs.extend(
                QuestionProgram('spa_exists', obj=obj, phrase=phrase, ref=ref) for obj in OBJECT_TYPES if obj != ref
            )
    elif question_type == 'mixed':
        for (subj, rel), phrase in itertools.product(subjects, phrases):
            programs.append(QuestionProgram('mix_object', subj=subj, rel=rel, phrase=phrase))
            programs.append(QuestionProgram('mix_color', subj=subj, rel=rel, phrase=phrase))
            programs.extend(
                QuestionProgram('mix_exists', subj=subj, rel=rel, phrase=phrase, ref=ref) for ref in unique_types
            )
    else:
        raise ConfigError(f"unknown question type {question_type!r}")
    return programs


class SceneGenerator:
    """Draws scenes and questions; feature tables are fixed by ``feature_seed``."""

    def __init__(self, m_max=10, d_in=32, feature_seed=0, prior_shift=False):
        if not 2 <= m_max <= 255:
            raise ConfigError(f"m_max must be in [2, 255], got {m_max}")
        if d_in < 1:
            raise ConfigError(f"d_in must be >= 1, got {d_in}")
        self.m_max = m_max
        self.d_in = d_in
        self.prior_shift = prior_shift
        tables = np.random.default_rng(feature_seed)
        self.type_table = tables.normal(0.0, 1.0, size=(len(OBJECT_TYPES), d_in))
        self.color_table = tables.normal(0.0, 1.0, size=(len(COLORS), d_in))
        self.question_vocab = question_vocabulary()
        self.answer_vocab = answer_vocabulary()

    def generate_scene(self, rng):
        count = int(rng.integers(2, self.m_max + 1))
        weights = np.asarray(TYPE_WEIGHTS) / sum(TYPE_WEIGHTS)
        types = rng.choice(len(OBJECT_TYPES), size=count, p=weights).astype(np.uint8)
        colors = rng.integers(0, len(COLORS), size=count).astype(np.uint8)

        sizes = rng.uniform(0.08, 0.35, size=(count, 2))
        corners = rng.uniform(0.0, 1.0, size=(count, 2)) * (1.0 - sizes)
        boxes = np.concatenate([corners, corners + sizes], axis=1).astype(np.float32)

        semantic = np.zeros((count, count), dtype=np.uint16)
        has_subject = np.zeros(count, dtype=bool)
        for i, j in itertools.permutations(range(count), 2):
            options = [
                rel for subj, rel, obj in RELATION_SCHEMA
                if subj == OBJECT_TYPES[types[i]] and obj == OBJECT_TYPES[types[j]]
            ]
            if not options or has_subject[j] or rng.random() >= RELATION_PROBABILITY:
                continue
            semantic[i, j] = SEMANTIC_LABELS.index(options[int(rng.integers(len(options)))]) + 1
            has_subject[j] = True

        noise = rng.normal(0.0, FEATURE_NOISE, size=(count, self.d_in))
        features = (self.type_table[types] + self.color_table[colors] + noise).astype(np.float32)
        return SceneInstance(features=features, boxes=boxes, semantic_labels=semantic, types=types, colors=colors)

    def generate_question(self, scene, rng, question_type, preferred_answers=None):
        """
        Pick a uniquely answerable question of ``question_type``.

        Answers are drawn uniformly among those some instantiation yields, then one
        instantiation with that answer. Returns (program, answer) or None if the scene
        supports no such question.
        """
        view = SceneView(scene)
        by_answer = {}
        for program in candidate_programs(view, question_type):
            answer = evaluate(scene, program, view)
            if answer is not None:
                by_answer.setdefault(answer, []).append(program)
        if not by_answer:
            return None
        answers = sorted(by_answer, key=ANSWERS.index)
        if preferred_answers is not None and rng.random() < 0.8:
            favoured = [answer for answer in answers if answer in preferred_answers]
            answers = favoured or answers
        answer = answers[int(rng.integers(len(answers)))]
        options = by_answer[answer]
        return options[int(rng.integers(len(options)))], answer

    def generate(self, seed, question_type, preferred_answers=None):
        """One complete SceneInstance from a 64-bit scene seed, resampling as needed."""
        rng = np.random.default_rng(seed)
        for attempt in range(MAX_ATTEMPTS):
            scene = self.generate_scene(rng)
            picked = self.generate_question(scene, rng, question_type, preferred_answers)
            if picked is None:
                continue
            program, answer = picked
            scene.question_ids = [self.question_vocab.id(word) for word in program.words()]
            scene.answer_id = self.answer_vocab.id(answer)
            scene.question_type = QUESTION_TYPES.index(question_type)
            scene.seed = int(seed)
            if attempt:
                logger.debug(f"Scene seed {seed}: {attempt} resamples before a {question_type} question fit")
            return scene
        raise GeneratorError(f"no {question_type} question found for scene seed {seed} after {MAX_ATTEMPTS} attempts")


def scene_seed(split_seed, index):
    return int(np.random.SeedSequence([split_seed, index]).generate_state(1, dtype=np.uint64)[0])


def preferred_answers(split_name):
    """Under a prior shift, train favours the first half of the answers and val the second."""
    half = len(ANSWERS) // 2
    return set(ANSWERS[:half]) if split_name == 'train' else set(ANSWERS[half:])


def generate_split(generator, split_name, size, split_seed):
    preferred = preferred_answers(split_name) if generator.prior_shift else None
    scenes = []
    for index in range(size):
        question_type = QUESTION_TYPES[index % len(QUESTION_TYPES)]
        scenes.append(generator.generate(scene_seed(split_seed, index), question_type, preferred))
    logger.info(f"Generated {size} {split_name} scenes (seed {split_seed})")
    return scenes
