"""Threshold weighted sampling of key-frequency data.

A scheme is defined by a per-key random draw u compared against
f(frequency) * tau: Exp(1) draws give probability-proportional-to-size
without replacement (ppswor), uniform draws give Poisson PPS.  Inclusion
probabilities q_i are non-decreasing in the frequency i, with q_0 = 0.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from ._rng import PURPOSE_SAMPLE, key_exponential, key_uniform

__all__ = [
    "SamplingScheme",
    "FrequencyHistogram",
    "WeightedSample",
    "aggregate_elements",
    "draw_sample",
]

SCHEME_KINDS = ("ppswor", "pps", "none")


@dataclass(frozen=True)
class SamplingScheme:
    """Threshold sampling spec: keep a key iff its random score u < w**power * tau.

    kind "ppswor" draws u from Exp(1), "pps" from Uniform(0,1) and "none"
    keeps every key (q_i = 1 for i >= 1, no threshold).  power is restricted
    to [0, 2], the range for which the weight w**power is sketchable.
    """

    kind: str
    tau: float | None = None
    power: float = 1.0

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise ValueError(f"unknown scheme kind {self.kind!r}, expected one of {SCHEME_KINDS}")
        if self.kind == "none":
            if self.tau is not None:
                raise ValueError("scheme 'none' takes no threshold")
        else:
            if self.tau is None or not (math.isfinite(self.tau) and self.tau >= 0.0):
                raise ValueError(f"threshold tau must be a finite value >= 0, got {self.tau!r}")
        if not (0.0 <= self.power <= 2.0):
            raise ValueError(f"power must be in [0, 2], got {self.power!r}")

    @classmethod
    def none(cls) -> "SamplingScheme":
        return cls(kind="none")

    @classmethod
    def ppswor(cls, tau: float, power: float = 1.0) -> "SamplingScheme":
        return cls(kind="ppswor", tau=tau, power=power)

    @classmethod
    def pps(cls, tau: float, power: float = 1.0) -> "SamplingScheme":
        return cls(kind="pps", tau=tau, power=power)

    def weight(self, w: float) -> float:
        return float(w) ** self.power

    def inclusion_prob(self, i: int) -> float:
        """Probability q_i that a key with integer frequency i is sampled."""
        if i <= 0:
            return 0.0
        return self.inclusion_prob_real(float(i))

    def inclusion_prob_real(self, w: float) -> float:
        """q extended to real-valued frequencies (used for already-noised data)."""
        if w <= 0.0:
            return 0.0
        if self.kind == "none":
            return 1.0
        x = self.weight(w) * self.tau
        if self.kind == "ppswor":
            return -math.expm1(-x)
        return min(1.0, x)

    def probs(self, max_frequency: int) -> np.ndarray:
        """Vector (q_0, ..., q_max_frequency)."""
        if max_frequency < 0:
            raise ValueError("max_frequency must be >= 0")
        i = np.arange(max_frequency + 1, dtype=float)
        if self.kind == "none":
            q = np.ones(max_frequency + 1)
        else:
            x = i**self.power * self.tau
            if self.kind == "ppswor":
                q = -np.expm1(-x)
            else:
                q = np.minimum(1.0, x)
        q[0] = 0.0
        return q


@dataclass(eq=False)
class FrequencyHistogram:
    """Aggregated key-frequency data.

    counts maps each frequency value (>= 1) to the number of distinct keys
    with that frequency; by_key optionally retains the key -> frequency map
    needed to actually draw samples.  Exact expectation computations only
    need counts.
    """

    counts: dict[int, int]
    by_key: dict[str, int] | None = None

    def __post_init__(self):
        for freq, count in self.counts.items():
            if freq < 1:
                raise ValueError(f"frequencies must be >= 1, got {freq}")
            if count < 0:
                raise ValueError(f"key counts must be >= 0, got {count} at frequency {freq}")

    @classmethod
    def from_keys(cls, by_key: Mapping[str, int]) -> "FrequencyHistogram":
        counts = Counter(by_key.values())
        return cls(counts=dict(counts), by_key=dict(by_key))

    @classmethod
    def from_counts(cls, counts: Mapping[int, int]) -> "FrequencyHistogram":
        return cls(counts={int(f): int(c) for f, c in counts.items()})

    @property
    def n_keys(self) -> int:
        return sum(self.counts.values())

    @property
    def max_frequency(self) -> int:
        return max(self.counts) if self.counts else 0

    def frequencies_and_counts(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct frequencies in increasing order with their key counts."""
        if not self.counts:
            return np.empty(0, dtype=int), np.empty(0, dtype=int)
        freqs = np.array(sorted(self.counts), dtype=int)
        counts = np.array([self.counts[int(f)] for f in freqs], dtype=int)
        return freqs, counts

    def require_keyed(self) -> dict[str, int]:
        if self.by_key is None:
            raise ValueError("this operation needs the keyed form (key -> frequency)")
        return self.by_key


@dataclass(eq=False)
class WeightedSample:
    """A sample of (key, frequency) pairs together with the scheme that drew it."""

    pairs: dict[str, int]
    scheme: SamplingScheme


def aggregate_elements(elements: Iterable[str]) -> FrequencyHistogram:
    """Single-pass aggregation of an element stream into a keyed histogram."""
    by_key = Counter()
    for key in elements:
        by_key[key] += 1
    return FrequencyHistogram.from_keys(by_key)


def draw_sample(data: FrequencyHistogram, scheme: SamplingScheme, seed: int) -> WeightedSample:
    """Threshold-sample a keyed histogram, deterministically in the seed.

    Each key is included independently iff its per-key draw u satisfies
    u < weight(frequency) * tau.  Decisions are per-key functions of
    (seed, key), so partitioning keys across workers cannot change the result.
    """
    by_key = data.require_keyed()
    if scheme.kind == "none":
        return WeightedSample(pairs=dict(by_key), scheme=scheme)

    pairs: dict[str, int] = {}
    for key, freq in by_key.items():
        threshold = scheme.weight(freq) * scheme.tau
        if scheme.kind == "ppswor":
            score = key_exponential(seed, key, PURPOSE_SAMPLE)
        else:
            score = key_uniform(seed, key, PURPOSE_SAMPLE)
        if score < threshold:
            pairs[key] = freq
    return WeightedSample(pairs=pairs, scheme=scheme)
