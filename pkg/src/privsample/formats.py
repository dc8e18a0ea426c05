"""File formats: TSV for key data, CSV for tables and analysis output.

Probabilities and other reals are serialized with 17 significant digits so
that parsing them back reproduces the exact double.
"""

from __future__ import annotations

import csv
from typing import Iterable, TextIO

import numpy as np

from .frequencies import PdfFamily, SanitizerTable
from .keys import ReportingVector


def fmt(x: float) -> str:
    return format(float(x), ".17g")


# ---------------------------------------------------------------- key data


def read_element_stream(fp: TextIO) -> Iterable[str]:
    for line in fp:
        key = line.rstrip("\n")
        if key:
            yield key


def read_keyed_tsv(fp: TextIO, *, value_type=int) -> dict:
    """Read `key<TAB>value` lines into an ordered mapping."""
    out = {}
    for lineno, line in enumerate(fp, 1):
        line = line.rstrip("\n")
        if not line:
            continue
        try:
            key, value = line.split("\t")
            out[key] = value_type(value)
        except ValueError as exc:
            raise ValueError(f"line {lineno}: expected 'key<TAB>value', got {line!r}") from exc
    return out


def write_keyed_tsv(fp: TextIO, pairs, *, float_values: bool = False) -> None:
    items = pairs.items() if hasattr(pairs, "items") else pairs
    for key, value in items:
        fp.write(f"{key}\t{fmt(value) if float_values else value}\n")


def write_key_lines(fp: TextIO, keys: Iterable[str]) -> None:
    for key in keys:
        fp.write(f"{key}\n")


# ---------------------------------------------------------------- tables


def write_pi_csv(fp: TextIO, rv: ReportingVector) -> None:
    writer = csv.writer(fp)
    writer.writerow(["i", "q_i", "pi_i", "p_i"])
    for i in range(1, rv.max_frequency + 1):
        q_i = float(rv.q[i])
        p_i = rv.pi[i] / q_i if q_i > 0 else 0.0
        writer.writerow([i, fmt(q_i), fmt(rv.pi[i]), fmt(p_i)])


def write_pij_csv(fp: TextIO, table: SanitizerTable) -> None:
    writer = csv.writer(fp)
    writer.writerow(["i", "j", "pi_ij"])
    rows = table.rows
    for i in range(rows.shape[0]):
        for j in range(rows.shape[1]):
            # token 0 anchors the row; zero entries elsewhere are implicit
            if j == 0 or rows[i, j] != 0.0:
                writer.writerow([i, j, fmt(rows[i, j])])


def read_pij_csv(fp: TextIO) -> np.ndarray:
    """Rebuild the row matrix from an `i,j,pi_ij` export."""
    reader = csv.reader(fp)
    header = next(reader, None)
    if header is None or [h.strip() for h in header[:3]] != ["i", "j", "pi_ij"]:
        raise ValueError("expected a CSV with header i,j,pi_ij")
    entries = [(int(r[0]), int(r[1]), float(r[2])) for r in reader if r]
    if not entries:
        raise ValueError("table file holds no entries")
    n_rows = max(e[0] for e in entries) + 1
    n_cols = max(e[1] for e in entries) + 1
    rows = np.zeros((n_rows, n_cols))
    for i, j, v in entries:
        rows[i, j] = v
    return rows


def read_pi_csv(fp: TextIO) -> np.ndarray:
    """Rebuild per-frequency reporting probabilities from an `i,q_i,pi_i,p_i` export."""
    reader = csv.reader(fp)
    header = next(reader, None)
    if header is None or [h.strip() for h in header[:3]] != ["i", "q_i", "pi_i"]:
        raise ValueError("expected a CSV with header i,q_i,pi_i,p_i")
    entries = [(int(r[0]), float(r[2])) for r in reader if r]
    if not entries:
        raise ValueError("table file holds no entries")
    pi = np.zeros(max(e[0] for e in entries) + 1)
    for i, v in entries:
        pi[i] = v
    return pi


def write_pdf_segments_csv(fp: TextIO, family: PdfFamily) -> None:
    writer = csv.writer(fp)
    writer.writerow(["i", "left", "right", "density"])
    for i, pdf in enumerate(family):
        for k in range(len(pdf.densities)):
            writer.writerow([i, fmt(pdf.bounds[k]), fmt(pdf.bounds[k + 1]), fmt(pdf.densities[k])])


def write_pdf_atoms_csv(fp: TextIO, family: PdfFamily) -> None:
    writer = csv.writer(fp)
    writer.writerow(["i", "atom0"])
    for i, pdf in enumerate(family):
        writer.writerow([i, fmt(pdf.atom0)])


# ---------------------------------------------------------------- analysis


def write_sweep_csv(fp: TextIO, rows) -> None:
    writer = csv.writer(fp)
    writer.writerow(["sweep_var", "value", "method", "metric", "result"])
    for r in rows:
        writer.writerow([r.sweep_var, fmt(r.value), r.method, r.metric, fmt(r.result)])


def write_concordance_csv(fp: TextIO, pairs) -> None:
    """pairs: iterable of (i1, i2, concordance)."""
    writer = csv.writer(fp)
    writer.writerow(["i1", "i2", "concordance"])
    for i1, i2, c in pairs:
        writer.writerow([i1, i2, fmt(c)])


def write_moments_csv(fp: TextIO, moment_table) -> None:
    writer = csv.writer(fp)
    writer.writerow(["i", "E_i", "Bias_i", "Var_i", "MSE_i"])
    for i in range(1, moment_table.max_frequency + 1):
        writer.writerow(
            [
                i,
                fmt(moment_table.expectation[i]),
                fmt(moment_table.bias[i]),
                fmt(moment_table.variance[i]),
                fmt(moment_table.mse[i]),
            ]
        )
