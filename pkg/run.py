#!/usr/bin/env python3
"""
Command-line entry point: ``python run.py <command> ...``.

See ``rustcrack/commands/cli.py`` for the commands and exit codes.
"""
import sys
from pathlib import Path

_project_root = Path(__file__).resolve().parent
if str(_project_root) not in sys.path:
    sys.path.insert(0, str(_project_root))

from rustcrack.commands.cli import main  # noqa: E402

if __name__ == '__main__':
    sys.exit(main())
