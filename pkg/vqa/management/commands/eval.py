import time

from vqa.checkpoint import load_checkpoint
from vqa.corpus import SPLITS, load_corpus
from vqa.management.base import QdgfnCommand
from vqa.network import Vocabularies
from vqa.services import RunReport, chance_accuracy, chance_band, evaluate, format_table, question_templates
from vqa.synth import QUESTION_TYPES


class Command(QdgfnCommand):
    help = 'Evaluate a checkpoint on one corpus split, overall and per question type'

    def add_arguments(self, parser):
        parser.add_argument('--checkpoint', required=True, help='Checkpoint written by train')
        parser.add_argument('--corpus', required=True, help='Corpus directory written by gen')
        parser.add_argument('--split', choices=SPLITS, default='val')
        parser.add_argument('--out', '--report', dest='report', help='Write a JSON-lines report here')
        parser.add_argument(
            '--config',
            help='Refuse the checkpoint unless it was trained with this config (plus --preset/--seed/ablation flags)',
        )
        parser.add_argument('--preset')
        parser.add_argument('--seed', type=int)
        parser.add_argument('--epochs', type=int)
        parser.add_argument('--ablate-gfm', action='store_true')
        parser.add_argument('--ablate-of', action='store_true')

    def run(self, **options):
        started = time.perf_counter()
        corpus = load_corpus(options['corpus'])
        expected = None
        if options.get('config') or options.get('preset'):
            expected = self.load_config(options).fingerprint()
        network, meta = load_checkpoint(options['checkpoint'], expected, Vocabularies.for_corpus(corpus))

        split = options['split']
        scenes = corpus.split(split)
        accuracy, predictions = evaluate(network, scenes)
        report = RunReport(
            fingerprint=meta['fingerprint'],
            variant=network.config.variant,
            seed=network.config.seed,
            split=split,
            accuracy=accuracy,
            wall_time=time.perf_counter() - started,
        )
        if options.get('report'):
            report.write(options['report'])

        rows = [(kind, accuracy.per_type[kind]) for kind in QUESTION_TYPES] + [('all', accuracy.overall)]
        self.stdout.write(format_table(['type', 'accuracy'], rows))
        self.stdout.write(self.style.SUCCESS(
            f"{network.config.variant} on {split}: {accuracy.overall:.4f} over {accuracy.count} questions"
        ))
        if scenes:
            answers = [scene.answer_id for scene in scenes]
            chance = chance_accuracy(predictions, answers, question_templates(corpus.question_vocab, scenes))
            low, high = chance_band(chance, len(scenes))
            self.stdout.write(f"Chance for these predictions: {chance:.4f} (3 sigma: {low:.4f} to {high:.4f})")
