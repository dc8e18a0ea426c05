"""Ordinal quality of sanitized frequencies.

A pair of keys is concordant when their sanitized order matches their true
frequency order; equal sanitized values count one half.  A key that is not
reported carries the minimum sanitized value (token 0), tied with other
non-reported keys under the same convention.  All quantities here are exact
expectations over the sanitizer's randomness, not simulations.
"""

from __future__ import annotations

import math

import numpy as np

from .frequencies import SanitizerTable
from .privacy import check_distribution
from .sampling import FrequencyHistogram

__all__ = [
    "concordance_prob",
    "concordance_matrix",
    "expected_kendall_tau",
]


def concordance_prob(row_high, row_low) -> float:
    """Pr[J_high > J_low] + 0.5 Pr[J_high = J_low] for independent draws.

    ``row_high`` is the token law of the strictly larger true frequency.
    Token 0 participates as the minimum token.
    """
    p = check_distribution(row_high, tol=1e-9)
    q = check_distribution(row_low, tol=1e-9)
    if p.shape != q.shape:
        raise ValueError("rows must share one ordered token set")
    upper = 1.0 - np.cumsum(p)  # Pr[J_high > token j]
    return float(q @ upper + 0.5 * (p @ q))


def concordance_matrix(rows: np.ndarray) -> np.ndarray:
    """Concordance probabilities C[i1, i2] for all row pairs at once.

    C[i1, i2] treats i1 as the larger true frequency; C + C^T = 1 on
    off-diagonal pairs and the diagonal is 0.5.
    """
    mat = np.asarray(rows, dtype=float)
    cum = np.cumsum(mat, axis=1)
    return (1.0 - cum) @ mat.T + 0.5 * (mat @ mat.T)


def expected_kendall_tau(histogram: FrequencyHistogram, table: SanitizerTable) -> float:
    """Expected rank correlation between true and sanitized key orders.

    Averages the pair sign E[sign] = 2 * concordance - 1 over all key pairs
    with distinct true frequencies; pairs tied in truth are excluded from
    the normalizer (they carry no order information).  Returns NaN when no
    truth-distinct pair exists.  Exact in O(#distinct frequencies^2).
    """
    freqs, counts = histogram.frequencies_and_counts()
    if freqs.size and freqs[-1] > table.max_frequency:
        raise ValueError(
            f"histogram contains frequency {int(freqs[-1])} beyond the table"
        )
    if freqs.size < 2:
        return math.nan

    rows = table.rows[freqs]
    conc = concordance_matrix(rows)
    c = counts.astype(float)
    pair_counts = np.outer(c, c)

    total_sign = 0.0
    total_pairs = 0.0
    for hi in range(1, len(freqs)):
        for lo in range(hi):
            n_pairs = pair_counts[hi, lo]
            total_sign += n_pairs * (2.0 * conc[hi, lo] - 1.0)
            total_pairs += n_pairs
    if total_pairs == 0.0:
        return math.nan
    return total_sign / total_pairs
