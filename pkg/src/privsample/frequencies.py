"""Sanitized-frequency output laws.

Two constructions are provided for the distribution of the reported token
given a key's true frequency:

* an integer-token table (``compute_pij``) where frequency i is reported as
  some token j <= i, with the reporting mass pushed to the highest tokens
  the privacy constraints against the previous row allow; and

* a family of piecewise-constant densities (``compute_pdfs``) on (0, i]
  plus an atom at 0 for "not reported", which separates the laws of
  different frequencies to the maximum extent possible and is then
  discretized (``discretize_pdfs``) over the union of its breakpoints.

In both constructions row i's total reporting mass equals the optimal
key-reporting probability pi_i, so reporting is never sacrificed for
frequency information.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._rng import PURPOSE_TOKEN, key_uniform
from .keys import _pi_step
from .privacy import DpReport, PrivacyParams, verify_dp
from .sampling import SamplingScheme, WeightedSample

__all__ = [
    "SanitizerTable",
    "PiecewisePdf",
    "PdfFamily",
    "compute_pij",
    "compute_pdfs",
    "discretize_pdfs",
    "sanitize_frequencies",
]

# Forgiveness for float rounding when locating breakpoints; the piecewise
# integrals themselves are exact segment arithmetic.
_SOLVE_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class SanitizerTable:
    """End-to-end token laws per frequency: rows[i, j] = Pr[report token j].

    Token 0 means "not reported"; tokens are ordered and only their order
    carries meaning downstream.  For integer-token tables token j stands for
    the value j itself; for discretized density tables ``token_edges[j - 1]``
    is the right edge of token j's interval.
    """

    params: PrivacyParams
    scheme: SamplingScheme
    rows: np.ndarray
    token_edges: np.ndarray | None = None

    @property
    def max_frequency(self) -> int:
        return self.rows.shape[0] - 1

    @property
    def n_tokens(self) -> int:
        return self.rows.shape[1] - 1

    def row(self, i: int) -> np.ndarray:
        if not 0 <= i <= self.max_frequency:
            raise ValueError(f"frequency {i} outside table range 0..{self.max_frequency}")
        return self.rows[i]

    def pi_marginals(self) -> np.ndarray:
        """Total reporting mass per row; matches the key-reporting solution."""
        return self.rows[:, 1:].sum(axis=1)

    def verify(self, *, slack: float = 1e-12) -> DpReport:
        return verify_dp(self.rows, self.params, slack=slack)


def compute_pij(
    params: PrivacyParams, scheme: SamplingScheme, max_frequency: int
) -> SanitizerTable:
    """Integer-token table: row i spreads mass pi_i over tokens 1..i.

    Per row, first set the forced lower bounds implied by the previous row
    (privacy in the shrinking direction), then assign the remaining mass
    from token i downward, capping each entry by the budget the previous
    row leaves in the growing direction.
    """
    if max_frequency < 1:
        raise ValueError("max_frequency must be >= 1")
    eps, delta = params.epsilon, params.delta
    e_eps, e_neg = math.exp(eps), math.exp(-eps)
    m = max_frequency
    q = scheme.probs(m)

    rows = np.zeros((m + 1, m + 1))
    rows[0, 0] = 1.0
    pi_prev = 0.0
    for i in range(1, m + 1):
        pi_i = _pi_step(pi_prev, float(q[i]), e_eps, e_neg, delta)
        prev = rows[i - 1]
        row = rows[i]
        row[0] = 1.0 - pi_i
        gap = max(0.0, e_neg * prev[0] - row[0])

        if i > 1:
            # Forced minimum on tokens 1..i-1.  The running sum of the
            # clamped increments telescopes to max(0, target_j), because the
            # targets are non-decreasing in j.
            targets = e_neg * (np.cumsum(prev[1:i]) - delta) + gap
            cum = np.maximum(targets, 0.0)
            row[1:i] = np.diff(cum, prepend=0.0)
            assigned = float(cum[-1])
        else:
            assigned = 0.0

        # The forced mass never exceeds pi_i; clamp float dust only.
        remaining = max(0.0, pi_i - assigned)
        suffix_prev = 0.0  # sum of prev[j..i-1]
        suffix_cur = 0.0  # sum of row[j+1..i]
        for j in range(i, 0, -1):
            if remaining == 0.0:
                break
            cap = e_eps * suffix_prev + delta - suffix_cur
            room = cap - row[j]
            if room <= remaining:
                remaining -= room
                row[j] = cap
            else:
                row[j] += remaining
                remaining = 0.0
            suffix_prev += prev[j - 1]
            suffix_cur += row[j]
        pi_prev = pi_i
    return SanitizerTable(params=params, scheme=scheme, rows=rows)


@dataclass(frozen=True, eq=False)
class PiecewisePdf:
    """Law of one sanitized frequency: atom at 0 plus a piecewise-constant
    density on (0, top].

    ``bounds`` are the breakpoints 0 = b_0 < ... < b_K = top and
    ``densities[k]`` is the constant density on (b_k, b_{k+1}].  Zero-density
    segments are kept so breakpoint bookkeeping stays explicit.
    """

    atom0: float
    bounds: np.ndarray
    densities: np.ndarray

    @property
    def top(self) -> float:
        return float(self.bounds[-1])

    def segment_masses(self) -> np.ndarray:
        return self.densities * np.diff(self.bounds)

    def mass(self) -> float:
        return self.atom0 + float(self.segment_masses().sum())

    def node_cumulative(self) -> np.ndarray:
        """Mass on (0, bounds[k]] at every breakpoint."""
        out = np.zeros(len(self.bounds))
        np.cumsum(self.segment_masses(), out=out[1:])
        return out


@dataclass(frozen=True, eq=False)
class PdfFamily:
    """Piecewise densities for frequencies 0..max_frequency of one scheme."""

    params: PrivacyParams
    scheme: SamplingScheme
    pdfs: tuple[PiecewisePdf, ...]

    def __len__(self) -> int:
        return len(self.pdfs)

    def __getitem__(self, i: int) -> PiecewisePdf:
        return self.pdfs[i]

    def __iter__(self):
        return iter(self.pdfs)

    @property
    def max_frequency(self) -> int:
        return len(self.pdfs) - 1


def _split_at(bounds: np.ndarray, densities: np.ndarray, z: float):
    """Insert breakpoint z into a segmentation; no-op if already a node."""
    k = int(np.searchsorted(bounds, z))
    if k < len(bounds) and bounds[k] == z:
        return bounds, densities
    if k == 0 or k == len(bounds):
        raise ValueError(f"split point {z} outside support [{bounds[0]}, {bounds[-1]}]")
    return np.insert(bounds, k, z), np.insert(densities, k, densities[k - 1])


def _smallest_crossing(bounds: np.ndarray, node_values: np.ndarray, slopes, target: float,
                       *, increasing: bool) -> float:
    """Smallest z with a piecewise-linear node function equal to target.

    ``node_values`` holds the function at the breakpoints; within segment k
    it is linear with slope ``slopes[k]``.  Assumes the function is monotone
    (non-decreasing if ``increasing`` else non-increasing) and that the
    target is within its range.
    """
    values = node_values if increasing else -node_values
    goal = target if increasing else -target
    k = int(np.searchsorted(values, goal, side="left"))
    if k == 0:
        return float(bounds[0])
    if k == len(bounds):
        raise ValueError("target outside the function's range")
    v_lo = node_values[k - 1]
    if v_lo == target:
        return float(bounds[k - 1])
    slope = slopes[k - 1]
    return float(bounds[k - 1] + (target - v_lo) / slope)


def compute_pdfs(
    params: PrivacyParams, scheme: SamplingScheme, max_frequency: int
) -> PdfFamily:
    """Build the maximally separating piecewise densities f_0..f_max.

    Each f_i has an atom 1 - pi_i at zero, density min(pi_i, delta) on
    (i-1, i], and below i-1 follows the privacy-tight lower bound up to a
    crossover point c_i and e^eps times the previous density above it.  The
    crossover is the point where the remaining mass balances exactly; all
    integrals are exact segment arithmetic and any tie in the crossover
    equation is broken toward the smallest solution.
    """
    if max_frequency < 1:
        raise ValueError("max_frequency must be >= 1")
    eps, delta = params.epsilon, params.delta
    e_eps, e_neg = math.exp(eps), math.exp(-eps)
    q = scheme.probs(max_frequency)

    pdfs = [PiecewisePdf(atom0=1.0, bounds=np.array([0.0]), densities=np.empty(0))]
    pi_prev = 0.0
    for i in range(1, max_frequency + 1):
        pi_i = _pi_step(pi_prev, float(q[i]), e_eps, e_neg, delta)
        atom = 1.0 - pi_i
        top_density = min(pi_i, delta)
        prev = pdfs[-1]

        if i == 1:
            pdfs.append(
                PiecewisePdf(
                    atom0=atom,
                    bounds=np.array([0.0, 1.0]),
                    densities=np.array([top_density]),
                )
            )
            pi_prev = pi_i
            continue

        gap = max(0.0, e_neg * prev.atom0 - atom)
        prev_cum = prev.node_cumulative()
        total_prev = float(prev_cum[-1])

        # Lower-bound density on (0, i-1]: zero up to a budget point b, then
        # e^-eps times the previous density.  The shrink-direction divergence
        # is e^eps gap + (mass zeroed out), so the atom gap costs e^eps gap
        # of the delta budget; gap <= e^-eps delta is guaranteed by the
        # recurrence, which keeps the budget nonnegative.
        atom_spend = e_eps * gap
        if atom_spend + total_prev <= delta:
            grid, dens_prev = prev.bounds, prev.densities
            dens_lower = np.zeros_like(dens_prev)
        else:
            target_b = max(0.0, delta - atom_spend)
            b = _smallest_crossing(
                prev.bounds, prev_cum, prev.densities, target_b, increasing=True
            )
            grid, dens_prev = _split_at(prev.bounds, prev.densities, b)
            dens_lower = np.where(grid[1:] <= b, 0.0, e_neg * dens_prev)

        # Crossover c: mass below c follows the lower bound, mass above c is
        # e^eps times the previous density, and the total on (0, i-1] must be
        # pi_i - top_density.
        target_c = pi_i - top_density
        cum_prev_grid = np.zeros(len(grid))
        np.cumsum(dens_prev * np.diff(grid), out=cum_prev_grid[1:])
        cum_lower_grid = np.zeros(len(grid))
        np.cumsum(dens_lower * np.diff(grid), out=cum_lower_grid[1:])
        balance = cum_lower_grid + e_eps * (total_prev - cum_prev_grid)

        if target_c > balance[0]:
            if target_c - balance[0] > _SOLVE_SLACK:
                raise RuntimeError(
                    f"no crossover solution at frequency {i}: need {target_c}, "
                    f"maximum attainable {balance[0]}"
                )
            c = 0.0
        elif target_c < balance[-1]:
            if balance[-1] - target_c > _SOLVE_SLACK:
                raise RuntimeError(
                    f"no crossover solution at frequency {i}: need {target_c}, "
                    f"minimum attainable {balance[-1]}"
                )
            c = float(grid[-1])
        else:
            c = _smallest_crossing(
                grid, balance, dens_lower - e_eps * dens_prev, target_c, increasing=False
            )

        grid_i, dens_prev_i = _split_at(grid, dens_prev, c) if 0.0 < c < grid[-1] else (grid, dens_prev)
        dens_lower_i = dens_lower if grid_i is grid else _split_at(grid, dens_lower, c)[1]
        dens_i = np.where(grid_i[1:] <= c, dens_lower_i, e_eps * dens_prev_i)

        bounds_i = np.append(grid_i, float(i))
        dens_i = np.append(dens_i, top_density)
        pdfs.append(_merged(atom, bounds_i, dens_i))
        pi_prev = pi_i
    return PdfFamily(params=params, scheme=scheme, pdfs=tuple(pdfs))


def _merged(atom: float, bounds: np.ndarray, densities: np.ndarray) -> PiecewisePdf:
    """Merge adjacent segments of (relatively) equal density.

    Exactly equal runs keep their density bit-for-bit; runs equal only to
    relative 1e-12 take the mass-preserving average.
    """
    keep_bounds = [float(bounds[0])]
    out_dens: list[float] = []

    def flush(start_idx: int, end_idx: int):
        # merge segments start_idx..end_idx-1 into one
        d0 = densities[start_idx]
        if np.all(densities[start_idx:end_idx] == d0):
            merged = float(d0)
        else:
            mass = float((densities[start_idx:end_idx] * np.diff(bounds)[start_idx:end_idx]).sum())
            merged = mass / (bounds[end_idx] - bounds[start_idx])
        out_dens.append(merged)
        keep_bounds.append(float(bounds[end_idx]))

    run_start = 0
    for k in range(1, len(densities)):
        d, d_prev = densities[k], densities[run_start]
        if abs(d - d_prev) <= 1e-12 * max(abs(d), abs(d_prev)):
            continue
        flush(run_start, k)
        run_start = k
    flush(run_start, len(densities))
    return PiecewisePdf(
        atom0=atom, bounds=np.array(keep_bounds), densities=np.array(out_dens)
    )


def discretize_pdfs(family: PdfFamily) -> SanitizerTable:
    """Turn the densities into a token table over their shared breakpoints.

    Tokens are the maximal intervals between consecutive breakpoints of any
    density in the family, in increasing position order; every density is
    constant on each token interval, so masses and all pairwise divergences
    are preserved exactly.
    """
    all_bounds = np.unique(np.concatenate([pdf.bounds for pdf in family]))
    edges = all_bounds[1:]
    widths = np.diff(all_bounds)
    n_tokens = len(edges)

    rows = np.zeros((len(family), n_tokens + 1))
    rows[0, 0] = 1.0
    for i in range(1, len(family)):
        pdf = family[i]
        rows[i, 0] = pdf.atom0
        cover = int(np.searchsorted(edges, pdf.top, side="right"))
        seg = np.searchsorted(pdf.bounds, edges[:cover], side="left") - 1
        rows[i, 1 : cover + 1] = pdf.densities[seg] * widths[:cover]
    return SanitizerTable(
        params=family.params, scheme=family.scheme, rows=rows, token_edges=edges
    )


def sanitize_frequencies(
    sample: WeightedSample, table: SanitizerTable, seed: int
) -> list[tuple[str, int]]:
    """Draw a sanitized token for each sampled key; keys drawing 0 are dropped.

    The conditional row for a sampled key with frequency w is the table row
    divided by q_w, with the leftover mass on token 0, so the end-to-end law
    over sampling and sanitization is exactly the table row.  Deterministic
    in the seed; output preserves input order.
    """
    if table.scheme != sample.scheme:
        raise ValueError(
            f"table was built for {table.scheme}, sample drawn with {sample.scheme}"
        )
    cum_by_freq: dict[int, np.ndarray] = {}
    out: list[tuple[str, int]] = []
    for key, freq in sample.pairs.items():
        if not 1 <= freq <= table.max_frequency:
            raise ValueError(
                f"frequency {freq} outside table range 1..{table.max_frequency}; "
                "rebuild the table with a larger max_frequency"
            )
        cum = cum_by_freq.get(freq)
        if cum is None:
            q_w = table.scheme.inclusion_prob(freq)
            if q_w <= 0.0:
                raise ValueError(
                    f"q_{freq} = 0 but a sampled key with frequency {freq} exists; "
                    "input is corrupt"
                )
            cond = table.rows[freq] / q_w
            cond[0] = max(0.0, 1.0 - float(cond[1:].sum()))
            cum = np.cumsum(cond)
            cum_by_freq[freq] = cum
        u = key_uniform(seed, key, PURPOSE_TOKEN)
        token = int(np.searchsorted(cum, u, side="right"))
        token = min(token, len(cum) - 1)
        if token > 0:
            out.append((key, token))
    return out
