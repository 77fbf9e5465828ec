from collections import Counter
from pathlib import Path

from vqa.corpus import CorpusManifest, generate_corpus
from vqa.exceptions import UsageError
from vqa.management.base import QdgfnCommand
from vqa.synth import QUESTION_TYPES


class Command(QdgfnCommand):
    help = 'Generate a synthetic scene/question corpus from a JSON manifest'

    def add_arguments(self, parser):
        parser.add_argument('--manifest', required=True, help='Corpus manifest (JSON)')
        parser.add_argument('--out', required=True, help='Output directory for the corpus files')

    def run(self, **options):
        manifest_path = Path(options['manifest'])
        if not manifest_path.is_file():
            raise UsageError(f"manifest not found: {manifest_path}")
        manifest = CorpusManifest.load(manifest_path)
        corpus = generate_corpus(manifest, options['out'])

        for name, scenes in corpus.splits.items():
            counts = Counter(QUESTION_TYPES[scene.question_type] for scene in scenes)
            mix = ', '.join(f"{counts[kind]} {kind}" for kind in QUESTION_TYPES)
            self.stdout.write(f"{name}: {len(scenes)} records ({mix})")
        self.stdout.write(self.style.SUCCESS(f"Corpus written to {options['out']}"))
