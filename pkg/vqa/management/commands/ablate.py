import json

from django.conf import settings

from vqa.corpus import load_corpus
from vqa.exceptions import QdgfnError
from vqa.files import atomic_write_text
from vqa.management.base import QdgfnCommand, parse_int_list
from vqa.services import AblationService, format_table, record_run


class AcceptanceFailed(QdgfnError):
    pass


class Command(QdgfnCommand):
    help = 'Train FULL, FULL-GFM, FULL-OF and FULL-OF-GFM once per seed and compare median accuracies'

    def add_arguments(self, parser):
        parser.add_argument('--corpus', required=True, help='Corpus directory written by gen')
        parser.add_argument('--seeds', default='7,8,9', help='Comma-separated seeds (default: 7,8,9)')
        parser.add_argument('--out', help='Write one JSON record per run plus a summary record here')
        parser.add_argument(
            '--check',
            action='store_true',
            help='Exit 1 unless FULL meets the accuracy floors and leads every ablation (QDGFN_ACCEPTANCE)',
        )
        self.add_config_arguments(parser, per_run=False)

    def run(self, **options):
        config = self.load_config(options)
        seeds = parse_int_list(options['seeds'])
        corpus = load_corpus(options['corpus'])
        service = AblationService(config, corpus, seeds)
        self.stdout.write(f"Ablating over seeds {seeds} ({len(service.configs)} runs of {config.epochs} epochs)")

        def show(row, report):
            self.stdout.write(
                f"  {row.variant:<12} seed {row.seed}: train {row.train_accuracy:.4f}  val {row.val_accuracy:.4f}"
            )
            record_run(report, options['corpus'], kind='ablation')

        summary = service.run(on_row=show)
        full = summary.median('FULL')
        rows = [
            [variant, summary.median(variant, 'train_accuracy'), summary.median(variant), full - summary.median(variant)]
            for variant in summary.variants()
        ]
        self.stdout.write(format_table(['variant', 'train', 'val', 'FULL lead'], rows))
        if options.get('out'):
            records = [row.record() for row in summary.rows] + [summary.record()]
            atomic_write_text(options['out'], ''.join(json.dumps(record, sort_keys=True) + '\n' for record in records))
            self.stdout.write(self.style.SUCCESS(f"Wrote {len(summary.rows)} ablation records to {options['out']}"))

        if options.get('check'):
            bars = settings.QDGFN_ACCEPTANCE
            failures = summary.failures(
                bars['train_accuracy'], bars['val_accuracy'], bars['ablation_gap'], bars['ablation_lead'],
            )
            if failures:
                raise AcceptanceFailed('; '.join(failures))
            self.stdout.write(self.style.SUCCESS('FULL meets every accuracy bar'))
