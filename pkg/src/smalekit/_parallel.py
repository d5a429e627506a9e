import os


def worker_count(default: int = 1) -> int:
    """Worker cap from SMALEKIT_THREADS (results never depend on it)."""
    raw = os.environ.get("SMALEKIT_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return default
