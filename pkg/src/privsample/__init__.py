"""Differentially private post-processing of weighted key-frequency samples.

The pipeline: threshold-sample aggregated (key, frequency) data, then
sanitize the sample so that reporting a key, and the token reported for
its frequency, satisfy element-level (epsilon, delta) privacy with the
maximum possible reporting probability per frequency.  Exact estimators,
ordinal diagnostics, a stability-histogram baseline and a sweep harness
round out the analysis surface.
"""

from .estimators import (
    EstimatorCoeffs,
    MomentTable,
    PerKeyMoments,
    StatisticMoments,
    estimate_statistic,
    g_identity,
    g_power,
    inverse_prob_coeffs,
    mle_coeffs,
    moments_by_frequency,
    nonprivate_moment_table,
    per_key_moments,
    statistic_moments,
    unbiased_coeffs,
)
from .experiments import (
    SweepConfig,
    SweepRow,
    expected_reported_fraction,
    nrmse_experiment,
    run_sweep,
    uniform_histogram,
    zipf_histogram,
)
from .frequencies import (
    PdfFamily,
    PiecewisePdf,
    SanitizerTable,
    compute_pdfs,
    compute_pij,
    discretize_pdfs,
    sanitize_frequencies,
)
from .keys import (
    ReportingVector,
    compute_pi,
    pi_star_closed_form,
    ppswor_structure,
    sanitize_keys,
)
from .ordinal import concordance_matrix, concordance_prob, expected_kendall_tau
from .privacy import (
    DpReport,
    PrivacyParams,
    hockey_stick,
    l_value,
    l_value_approx,
    verify_dp,
)
from .sampling import (
    FrequencyHistogram,
    SamplingScheme,
    WeightedSample,
    aggregate_elements,
    draw_sample,
)
from .sbh import (
    SbhConfig,
    sampled_sbh,
    sampled_sbh_report_prob,
    sbh_concordance_prob,
    sbh_moment_table,
    sbh_moments,
    sbh_report_prob,
    sbh_sanitize,
)

__version__ = "0.1.0"
