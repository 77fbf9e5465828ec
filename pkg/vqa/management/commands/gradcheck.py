from vqa.exceptions import QdgfnError
from vqa.gradcheck import SUITES, run_suites
from vqa.management.base import QdgfnCommand
from vqa.services import format_table


class GradcheckFailed(QdgfnError):
    pass


class Command(QdgfnCommand):
    help = 'Compare every module\'s analytic gradients with central finite differences'

    def add_arguments(self, parser):
        parser.add_argument('--seed', type=int, default=0)
        parser.add_argument(
            '--suite',
            action='append',
            choices=sorted(SUITES),
            help='Run only this suite (repeatable; default: all)',
        )

    def run(self, **options):
        results = run_suites(options['seed'], options.get('suite'))
        rows = [
            (result.suite, result.group, result.checked, f"{result.max_error:.2e}", 'ok' if result.passed else 'FAIL')
            for result in results
        ]
        self.stdout.write(format_table(['suite', 'group', 'entries', 'max rel err', 'status'], rows))

        failed = [result for result in results if not result.passed]
        if failed:
            names = ', '.join(f"{r.suite}/{r.group}" for r in failed)
            raise GradcheckFailed(f"{len(failed)} parameter groups exceed tolerance {failed[0].tolerance}: {names}")
        self.stdout.write(self.style.SUCCESS(f"All {len(results)} parameter groups pass (seed {options['seed']})"))
