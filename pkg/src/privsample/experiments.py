"""Exact sweep harness: reporting fractions and estimation error over grids.

All sweep outputs are exact expectations computed from frequency counts and
per-frequency probabilities or moments; nothing here simulates.  Results
come back as flat rows ready for CSV: (sweep_var, value, method, metric,
result).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .estimators import g_identity, mle_coeffs, moments_by_frequency, nonprivate_moment_table, statistic_moments
from .frequencies import compute_pdfs, compute_pij, discretize_pdfs
from .keys import compute_pi
from .privacy import PrivacyParams, l_value
from .sampling import FrequencyHistogram, SamplingScheme
from .sbh import SbhConfig, sampled_sbh_report_prob, sbh_moment_table, sbh_report_prob

__all__ = [
    "SweepConfig",
    "SweepRow",
    "DELTA_GRID_DEFAULT",
    "TAU_GRID_DEFAULT",
    "zipf_histogram",
    "uniform_histogram",
    "expected_reported_fraction",
    "run_sweep",
    "nrmse_experiment",
]

DELTA_GRID_DEFAULT = tuple(10.0**-k for k in range(0, 9))  # 1 down to 1e-8
TAU_GRID_DEFAULT = tuple(
    m * 10.0**-k for k in range(0, 5) for m in (1.0, 0.5, 0.2)
) + (1e-5,)  # 1, 0.5, 0.2, 0.1, ... , 1e-5

REPORTING_METHODS = ("pws-keys", "sbh", "sampled-sbh", "nonprivate")
NRMSE_METHODS = ("pws-freq-mle", "sampled-sbh", "nonprivate")


def zipf_histogram(n_keys: int, alpha: float, w_max: int) -> FrequencyHistogram:
    """Power-law frequencies: rank r gets max(1, round(w_max * r^-alpha))."""
    if n_keys < 1 or w_max < 1:
        raise ValueError("n_keys and w_max must be >= 1")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    ranks = np.arange(1, n_keys + 1, dtype=float)
    freqs = np.maximum(1, np.rint(w_max * ranks**-alpha)).astype(np.int64)
    values, counts = np.unique(freqs, return_counts=True)
    return FrequencyHistogram.from_counts(dict(zip(values.tolist(), counts.tolist())))


def uniform_histogram(n_keys: int, low: int, high: int) -> FrequencyHistogram:
    """n_keys spread as evenly as possible over frequencies low..high.

    Deterministic stand-in for 'frequencies drawn uniformly': each value
    gets n_keys // span keys and the first n_keys % span values get one more.
    """
    if not 1 <= low <= high:
        raise ValueError("need 1 <= low <= high")
    span = high - low + 1
    base, extra = divmod(n_keys, span)
    counts = {low + k: base + (1 if k < extra else 0) for k in range(span)}
    return FrequencyHistogram.from_counts({f: c for f, c in counts.items() if c > 0})


def expected_reported_fraction(histogram: FrequencyHistogram, report_probs) -> float:
    """Exact expected fraction of keys reported, given per-frequency probabilities.

    ``report_probs`` is an array indexed by frequency or a mapping; it must
    cover every frequency present.
    """
    freqs, counts = histogram.frequencies_and_counts()
    if freqs.size == 0:
        raise ValueError("histogram is empty")
    if isinstance(report_probs, np.ndarray):
        if freqs[-1] >= len(report_probs):
            raise ValueError("report_probs does not cover the histogram's frequencies")
        probs = report_probs[freqs]
    else:
        probs = np.array([float(report_probs[int(f)]) for f in freqs])
    c = counts.astype(float)
    return float(np.sum(c * probs) / np.sum(c))


@dataclass(frozen=True)
class SweepRow:
    sweep_var: str
    value: float
    method: str
    metric: str
    result: float


@dataclass(eq=False)
class SweepConfig:
    """One sweep: a histogram, a parameter grid, and methods to compare.

    ``sweep`` is "delta" (scheme fixed, delta varies) or "tau" (params
    fixed, threshold varies).  ``scheme_kind``/``power`` describe the
    sampling family used at each tau grid point; "delta" sweeps use the
    fixed ``scheme``.
    """

    histogram: FrequencyHistogram
    epsilon: float
    delta: float = 1e-2
    sweep: str = "tau"
    grid: tuple = ()
    methods: tuple = REPORTING_METHODS
    scheme: SamplingScheme = field(default_factory=SamplingScheme.none)
    scheme_kind: str = "ppswor"
    power: float = 1.0

    def __post_init__(self):
        if self.sweep not in ("delta", "tau"):
            raise ValueError("sweep must be 'delta' or 'tau'")
        if not self.grid:
            self.grid = DELTA_GRID_DEFAULT if self.sweep == "delta" else TAU_GRID_DEFAULT
        if self.histogram.n_keys == 0:
            raise ValueError("histogram is empty")

    def scheme_at(self, tau: float) -> SamplingScheme:
        return SamplingScheme(kind=self.scheme_kind, tau=tau, power=self.power)


def _reported_fraction(config: SweepConfig, method: str, params: PrivacyParams,
                       scheme: SamplingScheme) -> float:
    hist = config.histogram
    freqs, _ = hist.frequencies_and_counts()
    max_f = int(freqs[-1])
    if method == "pws-keys":
        rv = compute_pi(params, scheme, max_f)
        return expected_reported_fraction(hist, rv.pi)
    if method == "nonprivate":
        return expected_reported_fraction(hist, scheme.probs(max_f))
    config_sbh = SbhConfig(params)
    if method == "sbh":
        probs = {int(f): sbh_report_prob(config_sbh, int(f)) for f in freqs}
        return expected_reported_fraction(hist, probs)
    if method == "sampled-sbh":
        probs = {
            int(f): sampled_sbh_report_prob(config_sbh, scheme, int(f)) for f in freqs
        }
        return expected_reported_fraction(hist, probs)
    raise ValueError(f"unknown reporting method {method!r}")


def run_sweep(config: SweepConfig) -> list[SweepRow]:
    """Expected reported fraction per grid point and method."""
    rows: list[SweepRow] = []
    for value in config.grid:
        if config.sweep == "delta":
            params = PrivacyParams(config.epsilon, float(value))
            scheme = config.scheme
        else:
            params = PrivacyParams(config.epsilon, config.delta)
            scheme = config.scheme_at(float(value))
        for method in config.methods:
            frac = _reported_fraction(config, method, params, scheme)
            rows.append(
                SweepRow(config.sweep, float(value), method, "reported_fraction", frac)
            )
    return rows


def _pws_mle_nrmse(params: PrivacyParams, scheme: SamplingScheme,
                   selection: FrequencyHistogram, max_f: int) -> float:
    # The most likely frequency behind a top token lies above the token, so
    # the public table must extend past the largest estimated frequency or
    # the boundary rows get truncation-distorted coefficients.
    reach = max_f + 2 * math.ceil(l_value(params)) + 2
    q = scheme.probs(reach)
    rv = compute_pi(params, scheme, reach)
    if np.all(q[1:] == 1.0):
        table = compute_pij(params, scheme, reach)
    else:
        table = discretize_pdfs(compute_pdfs(params, scheme, reach))
    coeffs = mle_coeffs(table, rv, g_identity)
    moments = moments_by_frequency(table, coeffs, g_identity)
    return statistic_moments(selection, moments).nrmse


def nrmse_experiment(config: SweepConfig) -> list[SweepRow]:
    """Estimation error of the frequency-sum statistic across the tau grid.

    Compares the private sample with most-likely-frequency coefficients, the
    noise-then-sample baseline with its inverse-probability estimate, and
    the non-private sample.  With the pps family (scheme_kind="pps"),
    tau = 1 makes q = 1 on every frequency >= 1, so that grid point is
    exactly "no sampling".  Undefined grid points yield NaN, not failure.
    """
    if config.sweep != "tau":
        raise ValueError("the estimation-error experiment sweeps tau")
    params = PrivacyParams(config.epsilon, config.delta)
    selection = config.histogram
    freqs, _ = selection.frequencies_and_counts()
    max_f = int(freqs[-1])
    methods = config.methods if config.methods != REPORTING_METHODS else NRMSE_METHODS

    rows: list[SweepRow] = []
    for tau in config.grid:
        scheme = config.scheme_at(float(tau))
        for method in methods:
            try:
                if method == "pws-freq-mle":
                    result = _pws_mle_nrmse(params, scheme, selection, max_f)
                elif method == "sampled-sbh":
                    table = sbh_moment_table(SbhConfig(params), scheme, g_identity, max_f)
                    result = statistic_moments(selection, table).nrmse
                elif method == "nonprivate":
                    table = nonprivate_moment_table(scheme, g_identity, max_f)
                    result = statistic_moments(selection, table).nrmse
                else:
                    raise ValueError(f"unknown estimation method {method!r}")
            except ValueError as exc:
                if "unknown estimation method" in str(exc):
                    raise
                result = math.nan  # undefined at this grid point; flagged, not fatal
            rows.append(SweepRow("tau", float(tau), method, "nrmse", result))
    return rows
