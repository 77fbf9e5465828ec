from unittest import mock

from django.test import SimpleTestCase
import numpy as np

from vqa.exceptions import ConfigError, DataError, GeneratorError
from vqa.synth import (
    ANSWERS, COLORS, OBJECT_TYPES, QUESTION_TYPES, RELATION_SCHEMA, SEMANTIC_LABELS, QuestionProgram, SceneGenerator,
    SceneInstance, SceneView, candidate_programs, evaluate, generate_split, parse_question, preferred_answers,
    scene_seed,
)


def hand_scene(types, colors, boxes, relations=()):
    """A scene from type and colour names; relations are (subject, label, object) index triples."""
    count = len(types)
    semantic = np.zeros((count, count), dtype=np.uint16)
    for subject, label, target in relations:
        semantic[subject, target] = SEMANTIC_LABELS.index(label) + 1
    return SceneInstance(
        features=np.zeros((count, 4), dtype=np.float32),
        boxes=np.asarray(boxes, dtype=np.float32),
        semantic_labels=semantic,
        types=np.array([OBJECT_TYPES.index(t) for t in types], dtype=np.uint8),
        colors=np.array([COLORS.index(c) for c in colors], dtype=np.uint8),
    )


class SceneGeneratorTest(SimpleTestCase):
    def setUp(self):
        self.generator = SceneGenerator(m_max=8, d_in=6)

    def test_same_seed_same_scene(self):
        first = self.generator.generate(1234, 'mixed')
        second = SceneGenerator(m_max=8, d_in=6).generate(1234, 'mixed')
        self.assertTrue(first.same_as(second))

    def test_different_seeds_differ(self):
        self.assertFalse(self.generator.generate(1, 'spatial').same_as(self.generator.generate(2, 'spatial')))

    def test_scene_shapes_and_dtypes(self):
        scene = self.generator.generate(5, 'semantic')
        self.assertTrue(2 <= scene.count <= 8)
        self.assertEqual(scene.features.dtype, np.float32)
        self.assertEqual(scene.features.shape, (scene.count, 6))
        self.assertEqual(scene.boxes.shape, (scene.count, 4))
        self.assertTrue(np.all(scene.boxes[:, :2] < scene.boxes[:, 2:]))
        self.assertTrue(np.all((scene.boxes >= 0.0) & (scene.boxes <= 1.0)))
        self.assertEqual(scene.question_type, QUESTION_TYPES.index('semantic'))

    def test_semantic_relations_follow_schema(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            scene = self.generator.generate_scene(rng)
            labels = scene.semantic_labels
            self.assertTrue(np.all(np.diag(labels) == 0))
            self.assertTrue(np.all((labels != 0).sum(axis=0) <= 1))
            for i, j in zip(*np.nonzero(labels)):
                triple = (OBJECT_TYPES[scene.types[i]], SEMANTIC_LABELS[labels[i, j] - 1], OBJECT_TYPES[scene.types[j]])
                self.assertIn(triple, RELATION_SCHEMA)

    def test_questions_have_unique_answers(self):
        for index in range(10_000):
            question_type = QUESTION_TYPES[index % 3]
            scene = self.generator.generate(scene_seed(99, index), question_type)
            words = self.generator.question_vocab.decode(scene.question_ids)
            program = parse_question(words)
            self.assertEqual(program.question_type, question_type)
            self.assertEqual(evaluate(scene, program), ANSWERS[scene.answer_id])
            view = SceneView(scene)
            for name in (program.subj, program.ref):
                if name is not None:
                    self.assertEqual(len(view.of_type(name)), 1, f"{' '.join(words)} names a repeated {name}")

    def test_generator_gives_up(self):
        with mock.patch.object(SceneGenerator, 'generate_question', return_value=None):
            with self.assertRaises(GeneratorError):
                self.generator.generate(3, 'spatial')

    def test_invalid_parameters(self):
        with self.assertRaises(ConfigError):
            SceneGenerator(m_max=1)
        with self.assertRaises(ConfigError):
            SceneGenerator(d_in=0)

    def test_unknown_question_type(self):
        view = SceneView(self.generator.generate(4, 'semantic'))
        with self.assertRaises(ConfigError):
            candidate_programs(view, 'counting')


class SplitTest(SimpleTestCase):
    def test_question_types_are_balanced(self):
        scenes = generate_split(SceneGenerator(m_max=6, d_in=4), 'train', 30, 17)
        counts = np.bincount([scene.question_type for scene in scenes], minlength=3)
        np.testing.assert_array_equal(counts, [10, 10, 10])

    def test_scene_seeds_differ_per_index_and_split(self):
        seeds = {scene_seed(7, i) for i in range(50)} | {scene_seed(8, i) for i in range(50)}
        self.assertEqual(len(seeds), 100)

    def test_prior_shift_favours_preferred_answers(self):
        def preferred_share(prior_shift):
            scenes = generate_split(SceneGenerator(m_max=6, d_in=4, prior_shift=prior_shift), 'train', 90, 21)
            favoured = preferred_answers('train')
            return np.mean([ANSWERS[scene.answer_id] in favoured for scene in scenes])

        self.assertGreater(preferred_share(True), preferred_share(False))

    def test_preferred_halves_partition_answers(self):
        train, val = preferred_answers('train'), preferred_answers('val')
        self.assertFalse(train & val)
        self.assertEqual(train | val, set(ANSWERS))


class QuestionProgramTest(SimpleTestCase):
    def setUp(self):
        # person (0) holds the ball (1); a dog (2) sits far right of the person
        self.scene = hand_scene(
            ['person', 'ball', 'dog'],
            ['red', 'blue', 'white'],
            [[0.1, 0.4, 0.2, 0.6], [0.25, 0.45, 0.3, 0.5], [0.6, 0.4, 0.7, 0.6]],
            relations=[(0, 'holding', 1)],
        )

    def test_semantic_object(self):
        program = QuestionProgram('sem_object', subj='person', rel='holding')
        self.assertEqual(evaluate(self.scene, program), 'ball')

    def test_semantic_color_and_exists(self):
        self.assertEqual(evaluate(self.scene, QuestionProgram('sem_color', subj='person', rel='holding')), 'blue')
        self.assertEqual(evaluate(self.scene, QuestionProgram('sem_exists', subj='person', rel='holding', obj='cup')), 'no')

    def test_spatial_object(self):
        # only the dog is right of the ball
        self.assertEqual(evaluate(self.scene, QuestionProgram('spa_object', phrase=2, ref='ball')), 'dog')
        self.assertEqual(evaluate(self.scene, QuestionProgram('spa_color', phrase=2, ref='ball')), 'white')
        self.assertEqual(evaluate(self.scene, QuestionProgram('spa_exists', obj='ball', phrase=1, ref='dog')), 'yes')

    def test_missing_or_repeated_referent(self):
        # person and ball are both left of the dog; nothing is left of the person
        self.assertIsNone(evaluate(self.scene, QuestionProgram('spa_object', phrase=1, ref='dog')))
        self.assertIsNone(evaluate(self.scene, QuestionProgram('spa_object', phrase=1, ref='person')))
        self.assertIsNone(evaluate(self.scene, QuestionProgram('spa_object', phrase=1, ref='horse')))

    def test_mixed_exists(self):
        program = QuestionProgram('mix_exists', subj='person', rel='holding', phrase=1, ref='dog')
        self.assertEqual(evaluate(self.scene, program), 'yes')

    def test_ambiguous_subject_is_rejected(self):
        scene = hand_scene(
            ['person', 'person', 'ball', 'cup'],
            ['red', 'red', 'blue', 'green'],
            [[0.1, 0.1, 0.2, 0.2], [0.5, 0.5, 0.6, 0.6], [0.3, 0.3, 0.35, 0.35], [0.7, 0.7, 0.75, 0.75]],
            relations=[(0, 'holding', 2), (1, 'holding', 3)],
        )
        self.assertIsNone(evaluate(scene, QuestionProgram('sem_object', subj='person', rel='holding')))
        self.assertNotIn('person', [p.subj for p in candidate_programs(SceneView(scene), 'semantic')])

    def test_parse_round_trip(self):
        view = SceneView(self.scene)
        for question_type in QUESTION_TYPES:
            for program in candidate_programs(view, question_type):
                self.assertEqual(parse_question(program.words()), program)

    def test_unparseable_question(self):
        with self.assertRaises(DataError):
            parse_question('what is the moon holding'.split())
