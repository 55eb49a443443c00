"""Small shared helpers: window codes, distances, confidence intervals.

A context window over an alphabet of size K is a length-C tuple of token ids.
Where dense tables are useful (reachability sweeps, game value iteration) a
window is packed into a single integer code in mixed radix K, oldest token in
the highest digit, so that appending a token is ``code % K**(C-1) * K + tok``.
"""

from __future__ import annotations

import hashlib
import math

import numpy as np


def encode_window(window, K: int) -> int:
    """Pack a token-id tuple into an integer code (oldest token = high digit)."""
    code = 0
    for tok in window:
        code = code * K + tok
    return code


def decode_window(code: int, K: int, C: int) -> tuple:
    """Inverse of encode_window."""
    out = [0] * C
    for i in range(C - 1, -1, -1):
        out[i] = code % K
        code //= K
    return tuple(out)


def all_window_digits(K: int, C: int) -> np.ndarray:
    """(K**C, C) array whose row ``code`` is decode_window(code)."""
    codes = np.arange(K**C)
    digits = np.empty((K**C, C), dtype=np.int64)
    for i in range(C - 1, -1, -1):
        digits[:, i] = codes % K
        codes = codes // K
    return digits


def tv_distance(p, q) -> float:
    """Total variation distance between two distributions on the same support."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return 0.5 * float(np.abs(p - q).sum())


def wilson_interval(successes: int, n: int, z: float = 1.96):
    """Wilson score interval for a binomial proportion.

    Returns (low, high). With the default z this is the standard 95% interval.
    """
    if n <= 0:
        raise ValueError("wilson_interval needs n >= 1")
    phat = successes / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = (z / denom) * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n))
    return max(0.0, center - half), min(1.0, center + half)


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
