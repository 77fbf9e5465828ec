import json

from vqa.corpus import load_corpus
from vqa.files import atomic_write_text
from vqa.management.base import QdgfnCommand, parse_int_list
from vqa.services import SWEEP_PARAMETERS, SweepService, format_table, record_run
from vqa.synth import QUESTION_TYPES


class Command(QdgfnCommand):
    help = 'Train and evaluate once per value of k or P and tabulate the accuracies'

    def add_arguments(self, parser):
        parser.add_argument('--corpus', required=True, help='Corpus directory written by gen')
        parser.add_argument('--parameter', required=True, choices=SWEEP_PARAMETERS)
        parser.add_argument('--values', required=True, help='Comma-separated values, e.g. 1,2,4,8')
        parser.add_argument('--out', help='Write plot-ready JSON lines (one record per value) here')
        self.add_config_arguments(parser)

    def run(self, **options):
        config = self.load_config(options)
        values = parse_int_list(options['values'])
        corpus = load_corpus(options['corpus'])
        parameter = options['parameter']
        service = SweepService(config, corpus, parameter, values)
        self.stdout.write(f"Sweeping {parameter} over {values} ({config.variant}, seed {config.seed})")

        def show(row, report):
            self.stdout.write(f"  {parameter}={row.value}: val {row.val_accuracy:.4f}")
            record_run(report, options['corpus'], sweep_parameter=parameter, sweep_value=row.value)

        results = service.run(on_row=show)
        rows = [
            [row.value, row.train_accuracy, row.val_accuracy] + [row.val_per_type[kind] for kind in QUESTION_TYPES]
            for row, _ in results
        ]
        self.stdout.write(format_table([parameter, 'train', 'val'] + list(QUESTION_TYPES), rows))
        if options.get('out'):
            atomic_write_text(
                options['out'], ''.join(json.dumps(row.record(), sort_keys=True) + '\n' for row, _ in results),
            )
            self.stdout.write(self.style.SUCCESS(f"Wrote {len(results)} sweep records to {options['out']}"))
