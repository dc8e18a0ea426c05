"""Batch command-line surface.

Every subcommand is deterministic: identical flags, inputs and seed give
byte-identical outputs.  Randomized subcommands require --seed explicitly.
Exit status: 0 on success, 1 on data errors, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import contextlib
import sys

import numpy as np

from . import formats
from .estimators import (
    estimate_statistic,
    g_power,
    mle_coeffs,
    moments_by_frequency,
    unbiased_coeffs,
)
from .experiments import (
    DELTA_GRID_DEFAULT,
    NRMSE_METHODS,
    REPORTING_METHODS,
    TAU_GRID_DEFAULT,
    SweepConfig,
    nrmse_experiment,
    run_sweep,
    uniform_histogram,
    zipf_histogram,
)
from .frequencies import compute_pdfs, compute_pij, discretize_pdfs, sanitize_frequencies
from .keys import compute_pi, sanitize_keys
from .ordinal import concordance_matrix, expected_kendall_tau
from .privacy import PrivacyParams, verify_dp
from .sampling import FrequencyHistogram, SamplingScheme, WeightedSample, aggregate_elements, draw_sample
from .sbh import SbhConfig, sampled_sbh, sbh_concordance_prob, sbh_sanitize


class UsageError(ValueError):
    """Invalid flag combination; maps to exit status 2."""


def _add_privacy_flags(parser):
    parser.add_argument("--epsilon", type=float, required=True, help="privacy parameter epsilon (> 0)")
    parser.add_argument("--delta", type=float, required=True, help="privacy parameter delta in (0, 1]")


def _add_scheme_flags(parser, default="none"):
    parser.add_argument(
        "--scheme", choices=["none", "ppswor", "pps"], default=default, help="sampling scheme"
    )
    parser.add_argument("--tau", type=float, default=None, help="sampling threshold (tau >= 0)")
    parser.add_argument("--power", type=float, default=1.0, help="frequency weight exponent in [0, 2]")


def _params(args) -> PrivacyParams:
    try:
        return PrivacyParams(args.epsilon, args.delta)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _scheme(args) -> SamplingScheme:
    if args.scheme == "none":
        if args.tau is not None:
            raise UsageError("--tau is meaningless with --scheme none")
        return SamplingScheme.none()
    if args.tau is None:
        raise UsageError(f"--scheme {args.scheme} requires --tau")
    try:
        return SamplingScheme(kind=args.scheme, tau=args.tau, power=args.power)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _open_out(path: str):
    # never close the process streams
    if path == "-":
        return contextlib.nullcontext(sys.stdout)
    return open(path, "w", encoding="utf-8")


def _open_in(path: str):
    if path == "-":
        return contextlib.nullcontext(sys.stdin)
    return open(path, "r", encoding="utf-8")


def _read_histogram(args) -> FrequencyHistogram:
    with _open_in(args.input) as fp:
        if getattr(args, "aggregate", False):
            return aggregate_elements(formats.read_element_stream(fp))
        return FrequencyHistogram.from_keys(formats.read_keyed_tsv(fp))


def _build_table(params, scheme, max_freq, which: str):
    if which == "alg4":
        return compute_pij(params, scheme, max_freq)
    return discretize_pdfs(compute_pdfs(params, scheme, max_freq))


def _dist_histogram(args) -> FrequencyHistogram:
    if args.dist == "zipf":
        return zipf_histogram(args.n_keys, args.alpha, args.w_max)
    if args.dist == "uniform":
        return uniform_histogram(args.n_keys, args.freq_min, args.freq_max)
    with _open_in(args.input) as fp:
        return FrequencyHistogram.from_keys(formats.read_keyed_tsv(fp))


def _add_dist_flags(parser):
    parser.add_argument("--dist", choices=["zipf", "uniform", "file"], default="zipf")
    parser.add_argument("--n-keys", type=int, default=100_000)
    parser.add_argument("--alpha", type=float, default=1.0, help="zipf exponent")
    parser.add_argument("--w-max", type=int, default=10_000, help="zipf top frequency")
    parser.add_argument("--freq-min", type=int, default=1)
    parser.add_argument("--freq-max", type=int, default=200)
    parser.add_argument("--input", default="-", help="histogram TSV for --dist file")


def cmd_pi(args) -> int:
    rv = compute_pi(_params(args), _scheme(args), args.max_freq)
    with _open_out(args.out) as fp:
        formats.write_pi_csv(fp, rv)
    return 0


def cmd_pij(args) -> int:
    table = _build_table(_params(args), _scheme(args), args.max_freq, args.table)
    with _open_out(args.out) as fp:
        formats.write_pij_csv(fp, table)
    return 0


def cmd_pdfs(args) -> int:
    family = compute_pdfs(_params(args), _scheme(args), args.max_freq)
    with _open_out(args.segments_out) as fp:
        formats.write_pdf_segments_csv(fp, family)
    with _open_out(args.atoms_out) as fp:
        formats.write_pdf_atoms_csv(fp, family)
    if args.table_out:
        with _open_out(args.table_out) as fp:
            formats.write_pij_csv(fp, discretize_pdfs(family))
    return 0


def cmd_sample(args) -> int:
    hist = _read_histogram(args)
    sample = draw_sample(hist, _scheme(args), args.seed)
    with _open_out(args.out) as fp:
        formats.write_keyed_tsv(fp, sample.pairs)
    return 0


def cmd_sanitize(args) -> int:
    params, scheme = _params(args), _scheme(args)
    with _open_in(args.input) as fp:
        pairs = formats.read_keyed_tsv(fp)
    sample = WeightedSample(pairs=pairs, scheme=scheme)
    max_freq = max(pairs.values(), default=1)
    if args.max_freq:
        max_freq = max(max_freq, args.max_freq)
    if args.mode == "keys":
        rv = compute_pi(params, scheme, max_freq)
        kept = sanitize_keys(sample, rv, args.seed)
        with _open_out(args.out) as fp:
            formats.write_key_lines(fp, kept)
    else:
        table = _build_table(params, scheme, max_freq, args.table)
        sanitized = sanitize_frequencies(sample, table, args.seed)
        with _open_out(args.out) as fp:
            formats.write_keyed_tsv(fp, sanitized)
    return 0


def cmd_estimate(args) -> int:
    params, scheme = _params(args), _scheme(args)
    if args.estimator == "unbiased" and args.table == "alg5":
        raise UsageError("--estimator unbiased needs the integer-token table (--table alg4)")
    with _open_in(args.input) as fp:
        sanitized = list(formats.read_keyed_tsv(fp).items())
    table = _build_table(params, scheme, args.max_freq, args.table)
    g = g_power(args.g_power)
    if args.estimator == "mle":
        rv = compute_pi(params, scheme, args.max_freq)
        coeffs = mle_coeffs(table, rv, g)
    else:
        coeffs = unbiased_coeffs(table, g)
    selection = None
    if args.select:
        with _open_in(args.select) as fp:
            selection = set(formats.read_element_stream(fp))
    value = estimate_statistic(sanitized, coeffs, selection)
    print(formats.fmt(value))
    return 0


def cmd_baseline(args) -> int:
    params = _params(args)
    config = SbhConfig(params)
    with _open_in(args.input) as fp:
        by_key = formats.read_keyed_tsv(fp)
    if args.baseline == "sbh":
        out = sbh_sanitize(by_key, config, args.seed)
    else:
        out = sampled_sbh(by_key, config, _scheme(args), args.seed)
    with _open_out(args.out) as fp:
        formats.write_keyed_tsv(fp, out, float_values=True)
    return 0


def cmd_analyze_sweep(args) -> int:
    hist = _dist_histogram(args)
    grid = tuple(float(x) for x in args.grid.split(",")) if args.grid else ()
    config = SweepConfig(
        histogram=hist,
        epsilon=args.epsilon,
        delta=args.delta,
        sweep=args.sweep,
        grid=grid,
        methods=tuple(args.methods.split(",")),
        scheme=_scheme(args) if args.sweep == "delta" else SamplingScheme.none(),
        scheme_kind=args.scheme if args.scheme != "none" else "ppswor",
        power=args.power,
    )
    rows = run_sweep(config)
    with _open_out(args.out) as fp:
        formats.write_sweep_csv(fp, rows)
    return 0


def cmd_analyze_nrmse(args) -> int:
    hist = _dist_histogram(args)
    grid = tuple(float(x) for x in args.grid.split(",")) if args.grid else TAU_GRID_DEFAULT
    config = SweepConfig(
        histogram=hist,
        epsilon=args.epsilon,
        delta=args.delta,
        sweep="tau",
        grid=grid,
        methods=tuple(args.methods.split(",")),
        scheme_kind=args.scheme_kind,
        power=args.power,
    )
    rows = nrmse_experiment(config)
    with _open_out(args.out) as fp:
        formats.write_sweep_csv(fp, rows)
    return 0


def cmd_analyze_concordance(args) -> int:
    params = _params(args)
    m = args.max_freq
    triples = []
    table = None
    if args.method == "pws":
        table = discretize_pdfs(compute_pdfs(params, _scheme(args), m))
        conc = concordance_matrix(table.rows)
        for i1 in range(1, m + 1):
            for i2 in range(1, i1):
                triples.append((i1, i2, float(conc[i1, i2])))
    else:
        config = SbhConfig(params)
        for i1 in range(1, m + 1):
            for i2 in range(1, i1):
                triples.append((i1, i2, sbh_concordance_prob(config, i1, i2)))
    with _open_out(args.out) as fp:
        formats.write_concordance_csv(fp, triples)
    if args.kendall:
        if table is None:
            raise UsageError("--kendall needs --method pws (token table required)")
        hist = _dist_histogram(args)
        if hist.max_frequency > m:
            raise ValueError("--kendall distribution exceeds --max-freq")
        tau = expected_kendall_tau(hist, table)
        print(f"kendall_tau,{formats.fmt(tau)}")
    return 0


def cmd_analyze_moments(args) -> int:
    params, scheme = _params(args), _scheme(args)
    if args.estimator == "unbiased" and args.table == "alg5":
        raise UsageError("--estimator unbiased needs the integer-token table (--table alg4)")
    g = g_power(args.g_power)
    table = _build_table(params, scheme, args.max_freq, args.table)
    if args.estimator == "mle":
        rv = compute_pi(params, scheme, args.max_freq)
        coeffs = mle_coeffs(table, rv, g)
    else:
        coeffs = unbiased_coeffs(table, g)
    moment_table = moments_by_frequency(table, coeffs, g)
    with _open_out(args.out) as fp:
        formats.write_moments_csv(fp, moment_table)
    return 0


def cmd_verify_dp(args) -> int:
    params = _params(args)
    with _open_in(args.table) as fp:
        if args.kind == "pi":
            pi = formats.read_pi_csv(fp)
            rows = np.stack([1.0 - pi, pi], axis=1)
        else:
            rows = formats.read_pij_csv(fp)
    report = verify_dp(rows, params)
    status = "pass" if report.ok else "FAIL"
    print(
        f"verify-dp {status} worst_divergence={formats.fmt(report.worst_divergence)} "
        f"pair={report.worst_pair[0]},{report.worst_pair[1]} direction={report.direction} "
        f"delta={formats.fmt(params.delta)}"
    )
    return 0 if report.ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="privsample",
        description="Private post-processing of weighted key-frequency samples.",
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=1,
        help="worker cap (reserved; execution is single-threaded and outputs do not depend on it)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pi", help="per-frequency reporting probability table (CSV i,q_i,pi_i,p_i)")
    _add_privacy_flags(p)
    _add_scheme_flags(p)
    p.add_argument("--max-freq", type=int, required=True)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_pi)

    p = sub.add_parser("pij", help="integer-token frequency table (CSV i,j,pi_ij)")
    _add_privacy_flags(p)
    _add_scheme_flags(p)
    p.add_argument("--max-freq", type=int, required=True)
    p.add_argument("--table", choices=["alg4", "alg5"], default="alg4",
                   help="integer-token table or discretized density table")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_pij)

    p = sub.add_parser("pdfs", help="piecewise densities (CSV segments + atoms, optional table)")
    _add_privacy_flags(p)
    _add_scheme_flags(p)
    p.add_argument("--max-freq", type=int, required=True)
    p.add_argument("--segments-out", required=True, help="CSV i,left,right,density")
    p.add_argument("--atoms-out", required=True, help="CSV i,atom0")
    p.add_argument("--table-out", default=None, help="optional discretized CSV i,j,pi_ij")
    p.set_defaults(func=cmd_pdfs)

    p = sub.add_parser("sample", help="threshold-sample a histogram (TSV key<TAB>frequency)")
    p.add_argument("--input", default="-", help="histogram TSV, or element stream with --aggregate")
    p.add_argument("--aggregate", action="store_true", help="input is one key per line")
    _add_scheme_flags(p, default="ppswor")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("sanitize", help="sanitize a weighted sample privately")
    p.add_argument("--mode", choices=["keys", "freqs"], required=True)
    p.add_argument("--input", default="-", help="sample TSV key<TAB>frequency")
    _add_privacy_flags(p)
    _add_scheme_flags(p)
    p.add_argument("--max-freq", type=int, default=None, help="extend tables at least this far")
    p.add_argument("--table", choices=["alg4", "alg5"], default="alg5")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_sanitize)

    p = sub.add_parser("estimate", help="linear statistic from a sanitized sample")
    p.add_argument("--input", default="-", help="sanitized TSV key<TAB>token")
    _add_privacy_flags(p)
    _add_scheme_flags(p)
    p.add_argument("--max-freq", type=int, required=True)
    p.add_argument("--table", choices=["alg4", "alg5"], default="alg4")
    p.add_argument("--estimator", choices=["mle", "unbiased"], default="mle")
    p.add_argument("--g-power", type=float, default=1.0)
    p.add_argument("--select", default=None, help="file of selected keys, one per line")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("baseline", help="stability-histogram baseline sanitizers")
    p.add_argument("baseline", choices=["sbh", "sampled-sbh"])
    p.add_argument("--input", default="-", help="histogram TSV key<TAB>frequency")
    _add_privacy_flags(p)
    _add_scheme_flags(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("analyze", help="exact sweeps and comparisons")
    asub = p.add_subparsers(dest="analysis", required=True)

    pa = asub.add_parser("sweep", help="expected reported fraction over a grid")
    _add_privacy_flags(pa)
    _add_scheme_flags(pa, default="ppswor")
    pa.add_argument("--sweep", choices=["delta", "tau"], default="tau")
    pa.add_argument("--grid", default=None, help="comma-separated grid values")
    pa.add_argument("--methods", default=",".join(REPORTING_METHODS))
    _add_dist_flags(pa)
    pa.add_argument("--out", default="-")
    pa.set_defaults(func=cmd_analyze_sweep)

    pa = asub.add_parser("nrmse", help="estimation error across sampling rates")
    _add_privacy_flags(pa)
    pa.add_argument("--scheme-kind", choices=["ppswor", "pps"], default="pps",
                    help="pps makes tau=1 exactly no-sampling")
    pa.add_argument("--power", type=float, default=1.0)
    pa.add_argument("--grid", default=None)
    pa.add_argument("--methods", default=",".join(NRMSE_METHODS))
    _add_dist_flags(pa)
    pa.add_argument("--out", default="-")
    pa.set_defaults(func=cmd_analyze_nrmse)

    pa = asub.add_parser("concordance", help="pairwise concordance probabilities")
    _add_privacy_flags(pa)
    _add_scheme_flags(pa)
    pa.add_argument("--max-freq", type=int, required=True)
    pa.add_argument("--method", choices=["pws", "sbh"], default="pws")
    pa.add_argument("--kendall", action="store_true",
                    help="also print the expected rank correlation for --dist "
                         "(averaged over truth-distinct key pairs; ties in true "
                         "frequency are excluded from the normalizer)")
    _add_dist_flags(pa)
    pa.add_argument("--out", default="-")
    pa.set_defaults(func=cmd_analyze_concordance)

    pa = asub.add_parser("moments", help="per-frequency estimate moments (CSV)")
    _add_privacy_flags(pa)
    _add_scheme_flags(pa)
    pa.add_argument("--max-freq", type=int, required=True)
    pa.add_argument("--table", choices=["alg4", "alg5"], default="alg4")
    pa.add_argument("--estimator", choices=["mle", "unbiased"], default="mle")
    pa.add_argument("--g-power", type=float, default=1.0)
    pa.add_argument("--out", default="-")
    pa.set_defaults(func=cmd_analyze_moments)

    p = sub.add_parser("verify-dp", help="privacy oracle over an exported table")
    _add_privacy_flags(p)
    p.add_argument("--table", required=True, help="CSV exported by pi or pij")
    p.add_argument("--kind", choices=["pi", "pij"], default="pij")
    p.set_defaults(func=cmd_verify_dp)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))  # exits 2
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
