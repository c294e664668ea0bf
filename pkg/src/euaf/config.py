import os

__all__ = ["thread_count", "VERSION"]

VERSION = "0.1.0"


def thread_count() -> int:
    """Worker cap from EUAF_THREADS, defaulting to the machine's CPU count."""
    raw = os.environ.get("EUAF_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return max(1, os.cpu_count() or 1)
