from pathlib import Path

from vqa.attention_dump import collect, render, write_records
from vqa.checkpoint import load_checkpoint
from vqa.corpus import SPLITS, load_corpus
from vqa.management.base import QdgfnCommand, parse_int_list
from vqa.network import Vocabularies


class Command(QdgfnCommand):
    help = 'Write graph weights, cross attention and object priorities for chosen examples'

    def add_arguments(self, parser):
        parser.add_argument('--checkpoint', required=True, help='Checkpoint written by train')
        parser.add_argument('--corpus', required=True, help='Corpus directory written by gen')
        parser.add_argument('--ids', required=True, help='Comma-separated example ids')
        parser.add_argument('--split', choices=SPLITS, default='val')
        parser.add_argument('--out', required=True, help='JSON-lines output file')
        parser.add_argument('--render', help='Also draw each example to DIR/<split>-<id>.png')

    def run(self, **options):
        ids = parse_int_list(options['ids'])
        corpus = load_corpus(options['corpus'])
        network, _ = load_checkpoint(options['checkpoint'], sizes=Vocabularies.for_corpus(corpus))
        records = collect(network, corpus, options['split'], ids)
        write_records(records, options['out'])

        for record in records:
            kept = ', '.join(str(i) for i in record['kept'])
            self.stdout.write(
                f"#{record['id']} {record['question']!r}: predicted {record['predicted']} "
                f"(answer {record['answer']}), kept objects {kept}"
            )
        if options.get('render'):
            directory = Path(options['render'])
            for record in records:
                render(record, directory / f"{record['split']}-{record['id']}.png")
            self.stdout.write(f"Rendered {len(records)} images to {directory}")
        self.stdout.write(self.style.SUCCESS(f"Wrote {len(records)} records to {options['out']}"))
