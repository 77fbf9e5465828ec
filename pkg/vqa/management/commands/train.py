from vqa.corpus import load_corpus
from vqa.management.base import QdgfnCommand
from vqa.services import TrainingService, record_run


class Command(QdgfnCommand):
    help = 'Train a network on a generated corpus and save a checkpoint'

    def add_arguments(self, parser):
        parser.add_argument('--corpus', required=True, help='Corpus directory written by gen')
        parser.add_argument('--out', required=True, help='Checkpoint path (.npz)')
        parser.add_argument('--report', help='Write a JSON-lines run report here')
        self.add_config_arguments(parser)

    def run(self, **options):
        config = self.load_config(options)
        corpus = load_corpus(options['corpus'])
        self.stdout.write(
            f"Training {config.variant} ({config.fingerprint()[:12]}) on {len(corpus.split('train'))} scenes "
            f"for {config.epochs} epochs"
        )

        def show(epoch):
            self.stdout.write(
                f"  epoch {epoch.epoch:>3}  lr {epoch.lr:.2e}  loss {epoch.loss:.4f}  "
                f"train {epoch.train_accuracy:.3f}  val {epoch.val_accuracy:.3f}"
            )

        service = TrainingService(config, corpus)
        report = service.train(on_epoch=show)
        service.save(options['out'])
        if options.get('report'):
            report.write(options['report'])
        record_run(report, options['corpus'], options['out'], options.get('report') or '')

        last = report.epochs[-1]
        self.stdout.write(self.style.SUCCESS(
            f"Saved {options['out']}: train accuracy {report.train_accuracy.overall:.3f}, "
            f"val accuracy {last.val_accuracy:.3f} ({report.wall_time:.1f}s)"
        ))
