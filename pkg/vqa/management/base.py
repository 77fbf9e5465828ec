"""Shared plumbing for the vqa management commands."""
import logging

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from vqa.config import ModelConfig
from vqa.exceptions import QdgfnError, UsageError

logger = logging.getLogger(__name__)

USAGE_EXIT = 2
RUNTIME_EXIT = 1


def parse_int_list(text):
    try:
        values = [int(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise UsageError(f"expected a comma-separated list of integers, got {text!r}") from None
    if not values:
        raise UsageError("the list of values is empty")
    return values


class QdgfnCommand(BaseCommand):
    """
    Subclasses implement ``run``. Usage errors exit 2, every other QdgfnError
    exits 1, both with the message on stderr.
    """

    def handle(self, *args, **options):
        try:
            return self.run(**options)
        except UsageError as e:
            raise CommandError(str(e), returncode=USAGE_EXIT) from e
        except QdgfnError as e:
            logger.error(f"{type(e).__name__}: {e}")
            raise CommandError(str(e), returncode=RUNTIME_EXIT) from e

    def run(self, **options):
        raise NotImplementedError

    def add_config_arguments(self, parser, per_run=True):
        """Config options; without ``per_run`` the seed and ablation flags are left to the command."""
        parser.add_argument('--config', help='INI file with a [settings] section of ModelConfig fields')
        parser.add_argument(
            '--preset',
            choices=sorted(settings.QDGFN_PRESETS),
            help=f"Base preset (default: {settings.QDGFN_DEFAULT_PRESET})",
        )
        parser.add_argument('--epochs', type=int, help='Override the number of training epochs')
        if per_run:
            parser.add_argument('--seed', type=int, help='Override the config seed')
            parser.add_argument('--ablate-gfm', action='store_true', help='Replace graph fusion with uniform graph weights')
            parser.add_argument('--ablate-of', action='store_true', help='Keep every object with uniform priorities')

    def load_config(self, options):
        overrides = {'seed': options.get('seed'), 'epochs': options.get('epochs')}
        if options.get('ablate_gfm'):
            overrides['enable_gfm'] = False
        if options.get('ablate_of'):
            overrides['enable_of'] = False
        return ModelConfig.load(options.get('config'), options.get('preset'), **overrides)
