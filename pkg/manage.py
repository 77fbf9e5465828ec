#!/usr/bin/env python
"""
QDGFN Lab command line: gen, train, eval, sweep, gradcheck and dump_attention,
plus Django's own commands (migrate, test).
"""
import os
import sys


def main():
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'qdgfn_lab.settings')
    try:
        from django.core.management import execute_from_command_line
    except ImportError as exc:
        raise ImportError(
            "Django is not importable; install requirements.txt into the active environment first."
        ) from exc
    execute_from_command_line(sys.argv)


if __name__ == '__main__':
    main()
