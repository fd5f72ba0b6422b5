"""Small shared helpers: atomic file writes and the seeded PRNG.

All computation parameters that feed a PRNG go through SplitMix64, a fixed
64-bit generator implemented here in plain integer arithmetic so sampled
subsets are byte-identical across platforms and library versions.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """SplitMix64 stream seeded directly with a non-negative integer."""

    def __init__(self, seed: int):
        if seed < 0:
            raise ValueError("seed must be non-negative")
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Uniform integer in [0, n) without modulo bias (rejection sampling)."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = ((1 << 64) // n) * n
        while True:
            v = self.next_u64()
            if v < limit:
                return v % n


def sample_without_replacement(items: list, k: int, rng: SplitMix64) -> list:
    """First k entries of a seeded Fisher-Yates shuffle of `items`.

    `items` is taken in the given (canonical) order; the caller owns ordering.
    """
    if not 0 <= k <= len(items):
        raise ValueError(f"cannot pick {k} of {len(items)} items")
    pool = list(items)
    n = len(pool)
    for i in range(k):
        j = i + rng.below(n - i)
        pool[i], pool[j] = pool[j], pool[i]
    return pool[:k]


def atomic_write_bytes(path: Path | str, data: bytes) -> Path:
    """Write `data` to `path` via a temp file + rename: never leaves a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise
    return path


def atomic_write_text(path: Path | str, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))
