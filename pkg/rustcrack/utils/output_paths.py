"""
output_paths.py: single source of truth for where run results land.

Priority:
  1) RUSTCRACK_OUTPUT_ROOT env var (explicit override)
  2) <project_root>/out/
Each run writes into ``<root>/<run-id>/``.
"""
import os
import re
from datetime import datetime, timezone
from pathlib import Path

from rustcrack.config.constants import ENV_OUTPUT_ROOT

__all__ = ['get_output_root', 'run_directory', 'new_run_id', 'reset_cache']

_output_root_cache = ''


def _project_output_path() -> str:
    # rustcrack/utils/output_paths.py -> project root
    return str(Path(__file__).resolve().parent.parent.parent / 'out')


def get_output_root(environ=None) -> str:
    """Resolve (and cache) the output root directory."""
    global _output_root_cache
    if _output_root_cache and environ is None:
        return _output_root_cache

    env = os.environ if environ is None else environ
    explicit = str(env.get(ENV_OUTPUT_ROOT, '') or '').strip()
    root = explicit or _project_output_path()
    if environ is None:
        _output_root_cache = root
    return root


def _slug(name: str) -> str:
    slug = re.sub(r'[^A-Za-z0-9_.-]+', '-', str(name or 'run')).strip('-')
    return slug or 'run'


def new_run_id(name: str) -> str:
    stamp = datetime.now(timezone.utc).strftime('%Y%m%dT%H%M%SZ')
    return f'{_slug(name)}-{stamp}'


def run_directory(run_id: str, root=None) -> Path:
    base = Path(root) if root is not None else Path(get_output_root())
    return base / _slug(run_id)


def reset_cache():
    """Clear the cached output root (useful for testing or env change)."""
    global _output_root_cache
    _output_root_cache = ''
