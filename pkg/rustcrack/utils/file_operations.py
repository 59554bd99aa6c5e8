#!/usr/bin/env python3
"""
File Operations Utility
Result files (time series, probes, snapshots, final state) are written to a
temporary sibling and renamed into place under a per-file lock, so a sweep
worker killed mid-write leaves the previous file or nothing.
"""
import hashlib
import os
import tempfile
import time
from contextlib import contextmanager, suppress
from pathlib import Path
from typing import Iterator, Optional

_POLL_SECONDS = 0.05


def lock_path_for(target: Path) -> Path:
    target = Path(target)
    return target.with_name(f'.{target.name}.lock')


class FileLock:
    """Exclusive lock held as a marker file containing the owner pid.

    A marker older than ``stale_after`` seconds belongs to a run that died
    while writing and is removed by the next waiter.
    """

    def __init__(self, lock_file: Path, timeout: float = 30, stale_after: float = 60):
        self.lock_file = Path(lock_file)
        self.timeout = timeout
        self.stale_after = stale_after
        self.acquired = False

    def _create_marker(self) -> bool:
        try:
            fd = os.open(self.lock_file, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            return False
        with os.fdopen(fd, 'w') as marker:
            marker.write(str(os.getpid()))
        return True

    def _marker_age(self) -> Optional[float]:
        try:
            return time.time() - self.lock_file.stat().st_mtime
        except OSError:
            return None

    def _drop_stale_marker(self) -> None:
        age = self._marker_age()
        if age is not None and age > self.stale_after:
            with suppress(OSError):
                self.lock_file.unlink()

    def acquire(self) -> bool:
        deadline = time.monotonic() + self.timeout
        while not self._create_marker():
            self._drop_stale_marker()
            if time.monotonic() >= deadline:
                return False
            time.sleep(_POLL_SECONDS)
        self.acquired = True
        return True

    def release(self) -> None:
        if not self.acquired:
            return
        with suppress(FileNotFoundError):
            self.lock_file.unlink()
        self.acquired = False

    def __enter__(self) -> 'FileLock':
        if not self.acquire():
            raise TimeoutError(f'Could not acquire lock on {self.lock_file}')
        return self

    def __exit__(self, exc_type, exc_val, exc_tb) -> None:
        self.release()


@contextmanager
def atomic_output(file_path: Path, lock_timeout: float = 30) -> Iterator[Path]:
    """
    Yield a scratch path in the target's directory, keeping the target's
    suffix so meshio and numpy pick the right format. The scratch file
    replaces the target only if the block finishes without raising.
    """
    target = Path(file_path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with FileLock(lock_path_for(target), timeout=lock_timeout):
        handle, scratch_name = tempfile.mkstemp(
            dir=target.parent,
            prefix=f'.{target.stem}.',
            suffix=f'.tmp{target.suffix}',
        )
        os.close(handle)
        scratch = Path(scratch_name)
        committed = False
        try:
            yield scratch
            scratch.replace(target)
            committed = True
        finally:
            if not committed:
                with suppress(FileNotFoundError):
                    scratch.unlink()


def atomic_write_text(file_path: Path, content: str, lock_timeout: float = 30) -> None:
    with atomic_output(file_path, lock_timeout=lock_timeout) as scratch:
        with scratch.open('w', encoding='utf-8', newline='') as stream:
            stream.write(content)
            stream.flush()
            os.fsync(stream.fileno())


def text_sha256(text: str) -> str:
    """Hex digest used as the config hash in meta.txt."""
    return hashlib.sha256(text.encode('utf-8')).hexdigest()
