#!/usr/bin/env python3
"""
Logging System
Structured JSON file logs, key=value progress lines and solver timing events.
"""
import json
import logging
import logging.handlers
import os
import sys
import time
import traceback
from contextlib import contextmanager
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Optional

from rustcrack.config.constants import ENV_LOG_LEVEL, LOGGING

_RESERVED = frozenset([
    'name', 'msg', 'args', 'levelname', 'levelno', 'pathname', 'filename',
    'module', 'lineno', 'funcName', 'created', 'msecs', 'relativeCreated',
    'thread', 'threadName', 'processName', 'process', 'getMessage',
    'exc_info', 'exc_text', 'stack_info', 'taskName', 'message',
])


def _extra_fields(record):
    return {k: v for k, v in record.__dict__.items() if k not in _RESERVED}


class StructuredFormatter(logging.Formatter):
    """Custom formatter for structured JSON logging"""

    def format(self, record):
        log_entry = {
            'timestamp': datetime.fromtimestamp(record.created).isoformat(),
            'level': record.levelname,
            'logger': record.name,
            'message': record.getMessage(),
            'module': record.module,
            'function': record.funcName,
            'line': record.lineno,
        }

        if record.exc_info:
            log_entry['exception'] = {
                'type': record.exc_info[0].__name__,
                'message': str(record.exc_info[1]),
                'traceback': traceback.format_exception(*record.exc_info),
            }

        log_entry.update(_extra_fields(record))
        return json.dumps(log_entry, ensure_ascii=False, default=str)


class KeyValueFormatter(logging.Formatter):
    """Machine-parseable ``key=value`` lines built from ``extra`` fields."""

    def format(self, record):
        fields = _extra_fields(record)
        parts = [f'{key}={_format_value(value)}' for key, value in fields.items()]
        if not parts:
            parts.append(f'message={record.getMessage()}')
        return ' '.join(parts)


def _format_value(value):
    if isinstance(value, float):
        return f'{value:.6g}'
    return str(value).replace(' ', '_')


class SolverLogger:
    """Logger for linear and nonlinear solver performance"""

    def __init__(self, name: str = 'rustcrack.solver'):
        self.logger = logging.getLogger(name)

    @contextmanager
    def timed(self, operation: str, **details):
        """Log the wall time of the wrapped block at DEBUG level."""
        start = time.perf_counter()
        try:
            yield
        finally:
            self.logger.debug(
                f'{operation} finished',
                extra={
                    'event_type': 'timing',
                    'operation': operation,
                    'duration_ms': (time.perf_counter() - start) * 1000.0,
                    **details,
                },
            )

    def log_linear_solve(self, size: int, residual: float, duration_ms: float):
        self.logger.debug(
            'Linear solve',
            extra={
                'event_type': 'linear_solve',
                'size': size,
                'relative_residual': residual,
                'duration_ms': duration_ms,
            },
        )

    def log_newton_solve(self, iterations: int, residual: float, active_nodes: int):
        self.logger.debug(
            'Phase-field Newton solve',
            extra={
                'event_type': 'newton_solve',
                'iterations': iterations,
                'relative_residual': residual,
                'active_nodes': active_nodes,
            },
        )

    def log_step(self, step: int, time_s: float, dt: float, details: Optional[Dict[str, Any]] = None):
        self.logger.info(
            'Step completed',
            extra={
                'event_type': 'step',
                'step': step,
                'time_s': time_s,
                'dt_s': dt,
                **(details or {}),
            },
        )


class ProgressLogger:
    """Stdout progress lines for running simulations"""

    def __init__(self, name: str = 'rustcrack.progress'):
        self.logger = logging.getLogger(name)

    def log_progress(self, **fields):
        self.logger.info('progress', extra=fields)


def setup_logging(level: Optional[str] = None, log_dir: Optional[Path] = None, environ=None):
    """
    Configure console and rotating file logging.

    Progress lines go to stdout through their own handler; everything else
    goes to stderr and, when ``log_dir`` is given, to JSON log files.
    """
    env = os.environ if environ is None else environ
    level_name = str(level or env.get(ENV_LOG_LEVEL, '') or 'INFO').upper()
    log_level = getattr(logging, level_name, logging.INFO)

    root = logging.getLogger('rustcrack')
    root.setLevel(logging.DEBUG)
    for handler in list(root.handlers):
        if getattr(handler, '_rustcrack_owned', False):
            root.removeHandler(handler)
            handler.close()

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(log_level)
    console_handler.setFormatter(logging.Formatter(LOGGING['CONSOLE_FORMAT']))
    console_handler.addFilter(lambda record: not record.name.startswith('rustcrack.progress'))
    console_handler._rustcrack_owned = True
    root.addHandler(console_handler)

    progress = logging.getLogger('rustcrack.progress')
    progress.propagate = False
    progress.setLevel(logging.INFO)
    for handler in list(progress.handlers):
        progress.removeHandler(handler)
        handler.close()
    progress_handler = logging.StreamHandler(sys.stdout)
    progress_handler.setFormatter(KeyValueFormatter())
    progress.addHandler(progress_handler)

    if log_dir is not None:
        log_dir = Path(log_dir)
        log_dir.mkdir(parents=True, exist_ok=True)

        file_handler = logging.handlers.RotatingFileHandler(
            log_dir / 'run.log',
            maxBytes=LOGGING['MAX_BYTES'],
            backupCount=LOGGING['BACKUP_COUNT'],
        )
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(StructuredFormatter())
        file_handler._rustcrack_owned = True
        root.addHandler(file_handler)

        error_handler = logging.handlers.RotatingFileHandler(
            log_dir / 'errors.log',
            maxBytes=LOGGING['MAX_BYTES'],
            backupCount=LOGGING['BACKUP_COUNT'],
        )
        error_handler.setLevel(logging.ERROR)
        error_handler.setFormatter(StructuredFormatter())
        error_handler._rustcrack_owned = True
        root.addHandler(error_handler)

    return root


def close_file_handlers():
    """Detach run-scoped file handlers (one run directory per simulation)."""
    root = logging.getLogger('rustcrack')
    for handler in list(root.handlers):
        if isinstance(handler, logging.FileHandler):
            root.removeHandler(handler)
            handler.close()


def get_logger(name: str) -> logging.Logger:
    """Get a logger in the rustcrack namespace"""
    if not name.startswith('rustcrack'):
        name = f'rustcrack.{name}'
    return logging.getLogger(name)


_solver_logger = None
_progress_logger = None


def get_solver_logger() -> SolverLogger:
    global _solver_logger
    if _solver_logger is None:
        _solver_logger = SolverLogger()
    return _solver_logger


def get_progress_logger() -> ProgressLogger:
    global _progress_logger
    if _progress_logger is None:
        _progress_logger = ProgressLogger()
    return _progress_logger
