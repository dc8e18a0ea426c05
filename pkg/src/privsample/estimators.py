"""Per-token estimate coefficients and exact moment computations.

Estimates of linear statistics sum L(x) g(w_x) are formed from the private
sample alone: each reported key contributes the coefficient of its token,
keys absent contribute 0.  Expectation, bias, variance and MSE of the
per-key estimate are computed exactly from the token table, and statistic
moments follow by summation over a frequency histogram; no simulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .frequencies import SanitizerTable
from .keys import ReportingVector
from .sampling import FrequencyHistogram, SamplingScheme

__all__ = [
    "EstimatorCoeffs",
    "PerKeyMoments",
    "MomentTable",
    "StatisticMoments",
    "g_identity",
    "g_power",
    "inverse_prob_coeffs",
    "unbiased_coeffs",
    "mle_coeffs",
    "per_key_moments",
    "moments_by_frequency",
    "nonprivate_moment_table",
    "statistic_moments",
    "estimate_statistic",
]

FrequencyFunc = Callable[[np.ndarray], np.ndarray]


def g_identity(w):
    return np.asarray(w, dtype=float)


def g_power(p: float) -> FrequencyFunc:
    def g(w):
        return np.asarray(w, dtype=float) ** p

    return g


@dataclass(frozen=True, eq=False)
class EstimatorCoeffs:
    """Per-token estimate values a_j (a_0 = 0 for "not reported").

    ``defined[j]`` marks tokens that some frequency can actually emit;
    estimating with an undefined token is an error.
    """

    values: np.ndarray
    defined: np.ndarray
    kind: str

    def value(self, token: int) -> float:
        if not 0 <= token < len(self.values):
            raise ValueError(f"token {token} outside coefficient range")
        if token > 0 and not self.defined[token]:
            raise ValueError(f"token {token} is never emitted; no coefficient defined")
        return float(self.values[token])


@dataclass(frozen=True)
class PerKeyMoments:
    """Exact moments of the per-key estimate for one true frequency."""

    expectation: float
    bias: float
    variance: float
    mse: float


def inverse_prob_coeffs(
    scheme: SamplingScheme, g: FrequencyFunc, max_frequency: int
) -> EstimatorCoeffs:
    """Non-private coefficients a_i = g(i) / q_i over true frequencies.

    Unbiased by construction: q_i * a_i = g(i) for every estimable i.
    """
    q = scheme.probs(max_frequency)
    gv = np.zeros(max_frequency + 1)
    gv[1:] = g(np.arange(1, max_frequency + 1))
    bad = (q[1:] <= 0.0) & (gv[1:] > 0.0)
    if np.any(bad):
        i = int(np.nonzero(bad)[0][0]) + 1
        raise ValueError(f"q_{i} = 0 with g({i}) > 0: statistic is inestimable")
    values = np.zeros(max_frequency + 1)
    nz = q > 0.0
    values[nz] = gv[nz] / q[nz]
    defined = np.ones(max_frequency + 1, dtype=bool)
    defined[0] = False
    return EstimatorCoeffs(values=values, defined=defined, kind="inverse-prob")


def unbiased_coeffs(table: SanitizerTable, g: FrequencyFunc) -> EstimatorCoeffs:
    """The unique unbiased coefficients for an integer-token table.

    Forward substitution on the triangular unbiasedness system
    sum_{j<=i} pi_{i,j} a_j = g(i).  Coefficients may be negative; that is
    inherent, not a defect (see tests).
    """
    if table.token_edges is not None or table.n_tokens != table.max_frequency:
        raise ValueError("unbiased coefficients need the square integer-token table")
    m = table.max_frequency
    rows = table.rows
    gv = np.zeros(m + 1)
    gv[1:] = g(np.arange(1, m + 1))
    a = np.zeros(m + 1)
    for i in range(1, m + 1):
        diag = rows[i, i]
        if diag <= 0.0:
            raise ValueError(f"zero diagonal at frequency {i}: system is singular there")
        a[i] = (gv[i] - float(rows[i, 1:i] @ a[1:i])) / diag
    defined = np.ones(m + 1, dtype=bool)
    defined[0] = False
    return EstimatorCoeffs(values=a, defined=defined, kind="unbiased")


def mle_coeffs(
    table: SanitizerTable, rv: ReportingVector, g: FrequencyFunc
) -> EstimatorCoeffs:
    """Most-likely-frequency coefficients a_j = g(i*) / pi_{i*}.

    i* is the frequency whose row puts the most mass on token j, ties broken
    toward the smaller frequency.  Nonnegative whenever g is.  The argmax
    searches the table's whole frequency range; size the table comfortably
    past the largest frequency you will estimate, because the most likely
    frequency behind a top token lies above that token.
    """
    if rv.max_frequency < table.max_frequency:
        raise ValueError("reporting vector must cover the table's frequency range")
    cols = table.rows[:, 1:]
    i_star = np.argmax(cols, axis=0)  # first occurrence = smallest frequency
    defined = np.concatenate([[False], cols.max(axis=0) > 0.0])
    values = np.zeros(table.n_tokens + 1)
    gv = g(i_star.astype(float))
    pi_star = rv.pi[i_star]
    ok = defined[1:]
    values[1:][ok] = gv[ok] / pi_star[ok]
    return EstimatorCoeffs(values=values, defined=defined, kind="mle")


def per_key_moments(
    table: SanitizerTable, coeffs: EstimatorCoeffs, g: FrequencyFunc, i: int
) -> PerKeyMoments:
    """Exact moments of the estimate a_J for a key with true frequency i."""
    if not 0 <= i <= table.max_frequency:
        raise ValueError(f"frequency {i} outside table range 0..{table.max_frequency}")
    if len(coeffs.values) != table.n_tokens + 1:
        raise ValueError("coefficients do not match the table's token set")
    row = table.rows[i]
    a = coeffs.values
    gi = float(g(np.array([i]))[0]) if i > 0 else 0.0
    expectation = float(row[1:] @ a[1:])
    bias = expectation - gi
    mse = float(row[0]) * gi * gi + float(row[1:] @ (a[1:] - gi) ** 2)
    variance = max(0.0, mse - bias * bias)
    return PerKeyMoments(expectation=expectation, bias=bias, variance=variance, mse=mse)


@dataclass(frozen=True, eq=False)
class MomentTable:
    """Per-frequency estimate moments, vectorized over 0..max_frequency."""

    g_values: np.ndarray
    expectation: np.ndarray
    bias: np.ndarray
    variance: np.ndarray
    mse: np.ndarray

    @property
    def max_frequency(self) -> int:
        return len(self.g_values) - 1


def moments_by_frequency(
    table: SanitizerTable, coeffs: EstimatorCoeffs, g: FrequencyFunc
) -> MomentTable:
    """Exact per-key moments for every frequency in the table at once."""
    if len(coeffs.values) != table.n_tokens + 1:
        raise ValueError("coefficients do not match the table's token set")
    m = table.max_frequency
    gv = np.zeros(m + 1)
    gv[1:] = g(np.arange(1, m + 1))
    a = coeffs.values[1:]
    reported = table.rows[:, 1:]
    pi_m = reported.sum(axis=1)
    expectation = reported @ a
    bias = expectation - gv
    # MSE_i = (1 - pi_i) g^2 + sum_j pi_ij (a_j - g)^2, expanded
    mse = table.rows[:, 0] * gv**2 + reported @ a**2 - 2.0 * gv * expectation + pi_m * gv**2
    variance = np.maximum(0.0, mse - bias**2)
    return MomentTable(
        g_values=gv, expectation=expectation, bias=bias, variance=variance, mse=mse
    )


def nonprivate_moment_table(
    scheme: SamplingScheme, g: FrequencyFunc, max_frequency: int
) -> MomentTable:
    """Moments of the non-private inverse-probability estimate per frequency.

    Unbiased with per-key variance g(i)^2 (1/q_i - 1).
    """
    q = scheme.probs(max_frequency)
    gv = np.zeros(max_frequency + 1)
    gv[1:] = g(np.arange(1, max_frequency + 1))
    bad = (q[1:] <= 0.0) & (gv[1:] > 0.0)
    if np.any(bad):
        i = int(np.nonzero(bad)[0][0]) + 1
        raise ValueError(f"q_{i} = 0 with g({i}) > 0: statistic is inestimable")
    variance = np.zeros(max_frequency + 1)
    nz = q > 0.0
    variance[nz] = gv[nz] ** 2 * (1.0 / q[nz] - 1.0)
    return MomentTable(
        g_values=gv,
        expectation=gv.copy(),
        bias=np.zeros(max_frequency + 1),
        variance=variance,
        mse=variance.copy(),
    )


@dataclass(frozen=True)
class StatisticMoments:
    """Exact moments of a statistic estimate over a selection of keys."""

    statistic: float
    bias: float
    variance: float
    mse: float
    nrmse: float  # NaN when the true statistic is 0

    @property
    def nrmse_defined(self) -> bool:
        return not math.isnan(self.nrmse)


def statistic_moments(
    selection: FrequencyHistogram, moments: MomentTable, weights=None
) -> StatisticMoments:
    """Moments of sum L(x) g(w_x) over the selection, exactly from counts.

    ``weights`` is the constant L value per key (scalar, or a mapping from
    frequency to weight for selections where L is constant per frequency);
    default 1.  Bias adds linearly in L, variance in L^2.
    """
    freqs, counts = selection.frequencies_and_counts()
    if freqs.size and freqs[-1] > moments.max_frequency:
        raise ValueError(
            f"selection contains frequency {int(freqs[-1])} beyond the moment table"
        )
    if weights is None:
        w = np.ones(len(freqs))
    elif np.isscalar(weights):
        w = np.full(len(freqs), float(weights))
    else:
        w = np.array([float(weights[int(f)]) for f in freqs])

    c = counts.astype(float)
    statistic = float(np.sum(c * w * moments.g_values[freqs]))
    bias = float(np.sum(c * w * moments.bias[freqs]))
    variance = float(np.sum(c * w**2 * moments.variance[freqs]))
    mse = variance + bias * bias
    nrmse = math.sqrt(mse) / statistic if statistic > 0.0 else math.nan
    return StatisticMoments(
        statistic=statistic, bias=bias, variance=variance, mse=mse, nrmse=nrmse
    )


def estimate_statistic(
    sanitized, coeffs: EstimatorCoeffs, selection: set[str] | None = None, weights=None
) -> float:
    """Evaluate sum L(x) a_{j_x} over a sanitized sample of (key, token) pairs.

    Reads only the private output and public coefficients.  ``selection``
    restricts to keys with L(x) = 1 (None selects everything); ``weights``
    optionally maps keys to L values.
    """
    total = 0.0
    for key, token in sanitized:
        if selection is not None and key not in selection:
            continue
        lx = 1.0 if weights is None else float(weights.get(key, 0.0))
        if lx == 0.0:
            continue
        total += lx * coeffs.value(token)
    return total
