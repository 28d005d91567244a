"""File formats used by the command line.

Panel CSV
    header ``date,<label>,<label>...``; one row per day, ISO date first, decimal
    shocks after. Empty cells are rejected.
Matrix CSV (covariance / correlation)
    header ``<any>,<label>...``; each row ``<label>,<values>...``.
Scenario CSV
    header of labels and exactly one row of shocks.
Portfolio file
    INI-style sections::

        [factors]
        labels = eq_spread, credit_spread

        [linear]
        omega = 1, -1

    or a quadratic book, ``A`` given as its dense lower triangle, one row per
    line::

        [quadratic]
        A = 2
            0.5 -2
        B = 1, 0

    plus an optional ``[clusters]`` section mapping cluster names to member
    labels (``equity = spx, sx5e``).
"""
from __future__ import annotations

import configparser
import csv
import datetime as dt
from pathlib import Path

import numpy as np

from .errors import DimensionError, DomainError
from .pnl_model import LinearPortfolio, QuadraticPortfolio
from .reduction import ClusterMap
from .sigma_tools import SeriesPanel


class InputError(DomainError):
    """Malformed or inconsistent input file."""


def _floats(cells, where):
    out = []
    for c in cells:
        c = c.strip()
        if c == "":
            raise InputError(f"{where}: missing value")
        try:
            out.append(float(c))
        except ValueError:
            raise InputError(f"{where}: not a number: {c!r}") from None
    return out


def _rows(path):
    path = Path(path)
    if not path.is_file():
        raise InputError(f"file not found: {path}")
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise InputError(f"{path}: empty file")
    return path, rows


def read_panel_csv(path):
    path, rows = _rows(path)
    labels = tuple(c.strip() for c in rows[0][1:])
    if not labels:
        raise InputError(f"{path}: no factor columns")
    dates, values = [], []
    for k, row in enumerate(rows[1:], start=2):
        if len(row) != len(labels) + 1:
            raise InputError(f"{path}:{k}: expected {len(labels) + 1} cells, got {len(row)}")
        try:
            dates.append(dt.date.fromisoformat(row[0].strip()))
        except ValueError:
            raise InputError(f"{path}:{k}: bad ISO date {row[0]!r}") from None
        values.append(_floats(row[1:], f"{path}:{k}"))
    if not values:
        raise InputError(f"{path}: no data rows")
    return SeriesPanel(np.array(values), labels, tuple(dates))


def read_matrix_csv(path):
    path, rows = _rows(path)
    labels = tuple(c.strip() for c in rows[0][1:])
    body = rows[1:]
    if len(body) != len(labels):
        raise InputError(f"{path}: {len(labels)} columns but {len(body)} rows")
    values = []
    for k, row in enumerate(body, start=2):
        if len(row) != len(labels) + 1:
            raise InputError(f"{path}:{k}: expected {len(labels) + 1} cells")
        if row[0].strip() != labels[k - 2]:
            raise InputError(f"{path}:{k}: row label {row[0]!r} does not match column {labels[k - 2]!r}")
        values.append(_floats(row[1:], f"{path}:{k}"))
    return labels, np.array(values)


def format_float(x):
    return repr(float(x))


def write_matrix_csv(path, labels, matrix):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["factor", *labels])
        for lab, row in zip(labels, matrix):
            w.writerow([lab, *(format_float(v) for v in row)])


def read_scenario_csv(path):
    path, rows = _rows(path)
    if len(rows) != 2:
        raise InputError(f"{path}: expected a header and exactly one row of shocks")
    labels = [c.strip() for c in rows[0]]
    if len(rows[1]) != len(labels):
        raise InputError(f"{path}: {len(labels)} labels but {len(rows[1])} values")
    return dict(zip(labels, _floats(rows[1], str(path))))


def _split(text):
    return [t for t in text.replace(",", " ").split() if t]


def read_portfolio_spec(path):
    """Return ``(portfolio, cluster_map or None)``."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"file not found: {path}")
    cp = configparser.ConfigParser()
    cp.optionxform = str
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise InputError(f"{path}: {exc}") from None
    if not cp.has_option("factors", "labels"):
        raise InputError(f"{path}: missing [factors] labels")
    labels = tuple(_split(cp.get("factors", "labels")))
    n = len(labels)
    if cp.has_section("linear") == cp.has_section("quadratic"):
        raise InputError(f"{path}: exactly one of [linear] or [quadratic] is required")
    if cp.has_section("linear"):
        omega = _floats(_split(cp.get("linear", "omega", fallback="")), f"{path} omega")
        if len(omega) != n:
            raise InputError(f"{path}: omega has {len(omega)} entries for {n} factors")
        portfolio = LinearPortfolio(omega, labels)
    else:
        lines = [ln for ln in cp.get("quadratic", "A", fallback="").splitlines() if ln.strip()]
        if len(lines) != n:
            raise InputError(f"{path}: A needs {n} lower-triangle rows, got {len(lines)}")
        A = np.zeros((n, n))
        for i, ln in enumerate(lines):
            row = _floats(_split(ln), f"{path} A row {i + 1}")
            if len(row) != i + 1:
                raise InputError(f"{path}: A row {i + 1} needs {i + 1} entries, got {len(row)}")
            A[i, : i + 1] = row
            A[: i + 1, i] = row
        B = _floats(_split(cp.get("quadratic", "B", fallback="")), f"{path} B")
        if len(B) != n:
            raise InputError(f"{path}: B has {len(B)} entries for {n} factors")
        portfolio = QuadraticPortfolio(A, B, labels)
    clusters = None
    if cp.has_section("clusters"):
        groups = {name: _split(v) for name, v in cp.items("clusters")}
        clusters = ClusterMap.from_groups(labels, groups)
    return portfolio, clusters


def align_portfolio(portfolio, labels):
    """Reorder a portfolio's factors to ``labels`` (same set required)."""
    if tuple(portfolio.labels) == tuple(labels):
        return portfolio
    if sorted(portfolio.labels) != sorted(labels):
        extra = sorted(set(portfolio.labels) - set(labels))
        missing = sorted(set(labels) - set(portfolio.labels))
        raise DimensionError(f"portfolio factors do not match: unknown {extra}, missing {missing}")
    idx = [portfolio.labels.index(lab) for lab in labels]
    if isinstance(portfolio, LinearPortfolio):
        return LinearPortfolio(portfolio.omega[idx], labels)
    return QuadraticPortfolio(portfolio.A[np.ix_(idx, idx)], portfolio.B[idx], labels)
