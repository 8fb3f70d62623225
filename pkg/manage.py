#!/usr/bin/env python
"""Command-line utility for the defaults-miner experiments."""
import os
import sys


def main():
    """Run a defaults-miner subcommand."""
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'config.settings')
    try:
        from defaults_miner.cli import run_cli
    except ImportError as exc:
        raise ImportError(
            "Couldn't import Django. Are you sure it's installed and "
            "available on your PYTHONPATH environment variable? Did you "
            "forget to activate a virtual environment?"
        ) from exc
    sys.exit(run_cli(sys.argv))


if __name__ == '__main__':
    main()
