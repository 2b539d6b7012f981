"""Shared numerical helpers: chunked maps and adaptive quadrature."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np


def thread_cap() -> int:
    """Worker cap for internal parallelism, from MKT_THREADS (default 1)."""
    raw = os.environ.get("MKT_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def chunked_rows(n_rows: int, chunk: int):
    for k0 in range(0, n_rows, chunk):
        yield k0, min(k0 + chunk, n_rows)


def map_chunks(func, n_rows: int, chunk: int):
    """Apply ``func(lo, hi)`` over row blocks, optionally threaded.

    Results are returned in block order regardless of worker count, so
    outputs never depend on scheduling.
    """
    spans = list(chunked_rows(n_rows, chunk))
    workers = thread_cap()
    if workers <= 1 or len(spans) <= 1:
        return [func(lo, hi) for lo, hi in spans]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda span: func(*span), spans))


def circ_dist(a, b, period):
    """Distance on a circle of the given period."""
    d = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
    d = np.mod(d, period)
    return np.minimum(d, period - d)


def adaptive_simpson(f, a: float, b: float, tol: float, max_depth: int = 20):
    """Adaptive composite Simpson on [a, b].

    Returns ``(value, error_estimate)``.  ``tol`` is an absolute tolerance
    for the whole interval, distributed proportionally to sub-interval
    length; recursion is capped at ``max_depth`` splits.
    """
    if b <= a:
        return 0.0, 0.0
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    total = 0.0
    err = 0.0
    stack = [(a, b, fa, fm, fb, whole, 0)]
    inv_len = 1.0 / (b - a)
    while stack:
        a0, b0, fa0, fm0, fb0, whole0, depth = stack.pop()
        m0 = 0.5 * (a0 + b0)
        lm = f(0.5 * (a0 + m0))
        rm = f(0.5 * (m0 + b0))
        left = (m0 - a0) / 6.0 * (fa0 + 4.0 * lm + fm0)
        right = (b0 - m0) / 6.0 * (fm0 + 4.0 * rm + fb0)
        delta = left + right - whole0
        if depth >= max_depth or abs(delta) <= 15.0 * tol * (b0 - a0) * inv_len:
            total += left + right + delta / 15.0
            err += abs(delta) / 15.0
        else:
            stack.append((a0, m0, fa0, lm, fm0, left, depth + 1))
            stack.append((m0, b0, fm0, rm, fb0, right, depth + 1))
    return total, err
