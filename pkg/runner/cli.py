"""Standalone entry point: ``python -m runner.cli <command> [options]``."""
import os
import sys
from typing import List, Optional

COMMANDS = ('train', 'unlearn', 'oracle', 'evaluate', 'run', 'gradcheck')

USAGE = (
    "usage: qunlearn {" + ",".join(COMMANDS) + "} [--config PATH] [--seed N] [--out DIR] ...\n"
    "run 'qunlearn <command> --help' for the options of one command\n"
)


def cli_main(argv: Optional[List[str]] = None) -> int:
    """
    Dispatch to the runner management commands and return the exit code.

    0 on success, 2 for usage or configuration errors, 1 for runtime failures.
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'qunlearn.settings')

    import django
    from django.core.management import load_command_class

    django.setup()
    if not argv or argv[0] not in COMMANDS:
        sys.stderr.write(USAGE)
        return 2
    command = load_command_class('runner', argv[0])
    try:
        command.run_from_argv(['qunlearn', *argv])
    except SystemExit as e:
        if e.code is None:
            return 0
        return e.code if isinstance(e.code, int) else 1
    return 0


if __name__ == '__main__':
    sys.exit(cli_main())
