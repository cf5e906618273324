"""Small shared helpers: numerics, CSV formatting, parallelism cap."""

from __future__ import annotations

import os

import numpy as np


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    """Numerically stable softmax along ``axis``."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def thread_count() -> int:
    """Parallelism cap from SEGFUSE_THREADS; defaults to 1 (sequential)."""
    raw = os.environ.get("SEGFUSE_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"SEGFUSE_THREADS must be an integer, got {raw!r}")
    return max(1, n)


def format_cell(value) -> str:
    """Deterministic CSV cell: shortest round-trip repr for floats."""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def rows_to_csv(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_cell(v) for v in row))
    return "\n".join(lines) + "\n"
