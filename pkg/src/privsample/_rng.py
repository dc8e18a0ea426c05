"""Deterministic per-key randomness.

Every random decision in this package is a pure function of
(seed, key, purpose).  This makes samples reproducible bit-for-bit across
runs and platforms, lets keys be processed in any order or in parallel,
and keeps the independent decisions (sampling, keeping, token choice,
noise) on separated streams.
"""

from __future__ import annotations

import hashlib
import math

PURPOSE_SAMPLE = b"sample"
PURPOSE_KEEP = b"keep"
PURPOSE_TOKEN = b"token"
PURPOSE_LAPLACE = b"laplace"

_TWO53 = float(1 << 53)


def key_uniform(seed: int, key: str, purpose: bytes) -> float:
    """Uniform draw in the open interval (0, 1) for (seed, key, purpose)."""
    h = hashlib.blake2b(
        key.encode("utf-8"),
        digest_size=8,
        key=(seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little"),
        person=purpose,
    )
    bits = int.from_bytes(h.digest(), "little") >> 11
    # +0.5 keeps the draw strictly inside (0, 1) so inverse CDFs stay finite
    return (bits + 0.5) / _TWO53


def key_exponential(seed: int, key: str, purpose: bytes) -> float:
    """Exp(1) draw via inverse CDF of the per-key uniform."""
    return -math.log1p(-key_uniform(seed, key, purpose))


def key_laplace(seed: int, key: str, purpose: bytes, scale: float) -> float:
    """Laplace(scale) draw via inverse CDF of the per-key uniform."""
    u = key_uniform(seed, key, purpose) - 0.5
    return -scale * math.copysign(math.log1p(-2.0 * abs(u)), u)
