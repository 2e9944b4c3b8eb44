import os


def workers() -> int:
    """Worker-count hint for FFTs, from PMFLOW_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("PMFLOW_THREADS", "1")))
    except ValueError:
        return 1
