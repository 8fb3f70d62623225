"""Single entry point for the experiment subcommands."""
import os
import sys

from django.core.management import ManagementUtility

COMMAND_ALIASES = {
    'tune-rs': 'tune_rs',
    'pool-eval': 'pool_eval',
}


def run_cli(argv=None):
    """
    Run one subcommand and return the exit status instead of exiting.

    Unknown subcommands print Django's usage hint and return 1; argument
    errors return 2; domain errors surface as ``CommandError`` and return 1.
    """
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'config.settings')
    argv = list(sys.argv if argv is None else argv)
    if len(argv) > 1:
        argv[1] = COMMAND_ALIASES.get(argv[1], argv[1])
    try:
        ManagementUtility(argv).execute()
    except SystemExit as exc:
        if exc.code is None:
            return 0
        return exc.code if isinstance(exc.code, int) else 1
    return 0
