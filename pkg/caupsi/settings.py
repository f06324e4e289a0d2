import os
from typing import Optional

from .errors import ConfigError

THREADS_VARIABLE = "CAUPSI_THREADS"


def worker_threads(threads: Optional[int] = None) -> int:
    """
    Number of worker threads for data generation and batch prefetching. An
    explicit value wins over the CAUPSI_THREADS environment variable, which
    wins over the CPU count.
    """
    if threads is None:
        value = os.environ.get(THREADS_VARIABLE)
        if value is None:
            return max(1, min(8, os.cpu_count() or 1))
        try:
            threads = int(value)
        except ValueError:
            raise ConfigError(f"{THREADS_VARIABLE} must be an integer, got {value!r}")
    if threads < 1:
        raise ConfigError(f"at least one worker thread is required, got {threads}")
    return threads
