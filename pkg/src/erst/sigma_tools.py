"""Covariance estimation and stressing.

* sample covariance (unbiased) of a panel of factor shocks;
* variance-preserving linear shrinkage towards the diagonal, to force
  positive definiteness of short-window estimates;
* single-factor correlation stress: each series is blended with the
  cross-sectional average (globally or within blocks), correlations are
  recomputed and recombined with the original volatilities;
* calibration of the stress intensity against a target covariance.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import DegenerateError, DimensionError, DomainError, NotPositiveDefiniteError

SYMMETRY_TOL = 1e-12
PD_REL_TOL = 1e-12
SHRINK_FLOOR = 1e-8
THETA_GRID_STEP = 0.005
THETA_MAX = 0.995


@dataclass(frozen=True)
class SeriesPanel:
    """Daily factor shocks: ``values`` is ``n_days x m``, one column per factor."""

    values: np.ndarray
    labels: tuple = None
    dates: tuple = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise DimensionError(f"panel must be 2-D, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DomainError("panel contains missing or non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        labels = self.labels
        if labels is None:
            labels = tuple(f"f{i}" for i in range(values.shape[1]))
        labels = tuple(str(lab) for lab in labels)
        if len(labels) != values.shape[1]:
            raise DimensionError(f"{len(labels)} labels for {values.shape[1]} columns")
        object.__setattr__(self, "labels", labels)
        dates = self.dates
        if dates is None:
            dates = tuple(range(values.shape[0]))
        dates = tuple(dates)
        if len(dates) != values.shape[0]:
            raise DimensionError(f"{len(dates)} dates for {values.shape[0]} rows")
        object.__setattr__(self, "dates", dates)

    @property
    def n_days(self):
        return self.values.shape[0]

    @property
    def m(self):
        return self.values.shape[1]

    def with_values(self, values):
        return SeriesPanel(values, self.labels, self.dates)


@dataclass(frozen=True)
class Sample:
    def describe(self):
        return {"kind": "sample"}


@dataclass(frozen=True)
class Shrunk:
    delta: float

    def describe(self):
        return {"kind": "shrunk", "delta": self.delta, "target": "diagonal"}


@dataclass(frozen=True)
class ThetaStress:
    """``thetas`` maps each block ``(start, stop)`` (half-open) to its intensity."""

    thetas: tuple
    n_days: int

    def describe(self):
        return {
            "kind": "theta-stress",
            "blocks": [{"start": a, "stop": b, "theta": t} for (a, b), t in self.thetas],
            "base_window_days": self.n_days,
        }


@dataclass(frozen=True)
class StressedCovariance:
    sigma: np.ndarray
    provenance: object = field(default_factory=Sample)

    @property
    def correlation(self):
        return cov_to_corr(self.sigma)


@dataclass(frozen=True)
class PDReport:
    positive_definite: bool
    min_eigenvalue: float
    threshold: float

    def __bool__(self):
        return self.positive_definite


@dataclass(frozen=True)
class Block:
    """Half-open column range ``[start, stop)`` stressed with intensity ``theta``."""

    start: int
    stop: int
    theta: float


@dataclass(frozen=True)
class ThetaCalibration:
    theta: float
    error: float
    at_boundary: bool


def _check_symmetric(sigma):
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise DimensionError(f"matrix must be square, got shape {sigma.shape}")
    if sigma.size and np.max(np.abs(sigma - sigma.T)) > SYMMETRY_TOL * max(1.0, np.max(np.abs(sigma))):
        raise DomainError("matrix is not symmetric")
    return sigma


def cov_to_corr(sigma):
    sd = np.sqrt(np.diag(sigma))
    if np.any(sd <= 0.0):
        raise DegenerateError("zero-variance factor: correlation undefined")
    corr = sigma / np.outer(sd, sd)
    np.fill_diagonal(corr, 1.0)
    return corr


def estimate_cov(panel):
    """Unbiased sample covariance (divisor ``n_days - 1``) of the panel columns."""
    if panel.n_days < 2:
        raise DomainError(f"need at least 2 days, got {panel.n_days}")
    x = panel.values - panel.values.mean(axis=0)
    cov = x.T @ x / (panel.n_days - 1)
    return 0.5 * (cov + cov.T)


def is_positive_definite(sigma):
    """Smallest-eigenvalue test with threshold ``1e-12 * trace / m``."""
    sigma = _check_symmetric(sigma)
    m = sigma.shape[0]
    lam_min = float(np.linalg.eigvalsh(sigma)[0])
    threshold = PD_REL_TOL * float(np.trace(sigma)) / m
    return PDReport(lam_min > threshold, lam_min, threshold)


def _shrink(sigma0, delta):
    return (1.0 - delta) * sigma0 + delta * np.diag(np.diag(sigma0))


def shrink_to_pd(sigma0, delta="auto"):
    """Linear shrinkage ``(1 - delta) sigma0 + delta diag(sigma0)``.

    With ``delta="auto"`` the smallest intensity on a geometric grid is taken
    such that the smallest eigenvalue reaches ``1e-8`` times the mean
    variance (``delta = 0`` when that already holds).
    """
    sigma0 = _check_symmetric(sigma0)
    diag = np.diag(sigma0)
    if np.any(diag <= 0.0):
        raise DegenerateError("zero-variance factor cannot be shrunk to positive definite")
    floor = SHRINK_FLOOR * float(diag.mean())
    if delta == "auto":
        grid = np.concatenate(([0.0], np.geomspace(1e-6, 1.0, 121)))
        for d in grid:
            if np.linalg.eigvalsh(_shrink(sigma0, d))[0] >= floor:
                delta = float(d)
                break
    delta = float(delta)
    if not 0.0 <= delta <= 1.0:
        raise DomainError(f"shrinkage intensity must lie in [0, 1], got {delta}")
    sigma = _shrink(sigma0, delta)
    np.fill_diagonal(sigma, diag)
    return StressedCovariance(sigma, Shrunk(delta))


def _normalize_blocks(blocks, m):
    out = []
    for b in blocks:
        if not isinstance(b, Block):
            b = Block(*b)
        if not 0 <= b.start < b.stop <= m:
            raise DimensionError(f"block [{b.start}, {b.stop}) outside 0..{m}")
        if not 0.0 <= b.theta < 1.0:
            raise DomainError(f"theta must lie in [0, 1), got {b.theta}")
        out.append(b)
    out.sort(key=lambda b: b.start)
    for a, b in zip(out, out[1:]):
        if b.start < a.stop:
            raise DomainError(f"blocks [{a.start}, {a.stop}) and [{b.start}, {b.stop}) overlap")
    return out


def stress_series(values, blocks):
    """Blend in-block series with their block average; other columns are untouched."""
    out = np.array(values, dtype=float)
    for b in blocks:
        cols = values[:, b.start:b.stop]
        out[:, b.start:b.stop] = (1.0 - b.theta) * cols + b.theta * cols.mean(axis=1, keepdims=True)
    return out


def block_stress(panel, blocks):
    """Correlation stress applied block-wise, recombined with the original volatilities."""
    blocks = _normalize_blocks(blocks, panel.m)
    base = estimate_cov(panel)
    if not is_positive_definite(base):
        raise NotPositiveDefiniteError("base sample covariance is not positive definite; shrink first")
    vols = np.sqrt(np.diag(base))
    if all(b.theta == 0.0 for b in blocks):
        sigma = base.copy()
    else:
        stressed = estimate_cov(panel.with_values(stress_series(panel.values, blocks)))
        sigma = cov_to_corr(stressed) * np.outer(vols, vols)
        np.fill_diagonal(sigma, np.diag(base))
    prov = ThetaStress(tuple(((b.start, b.stop), b.theta) for b in blocks), panel.n_days)
    return StressedCovariance(sigma, prov)


def single_factor_stress(panel, theta):
    """Stress all correlations at once: one block spanning every factor."""
    return block_stress(panel, [Block(0, panel.m, theta)])


def calibrate_theta(panel, sigma_target, blocks=None):
    """Intensity minimizing the Frobenius distance between the stressed and target covariances.

    A grid search with step 0.005 on [0, 0.995] is refined by a bounded
    scalar minimization around the best grid point. ``blocks`` (a list of
    ``(start, stop)`` ranges) restricts the stress; one common theta is fitted.
    """
    target = _check_symmetric(sigma_target)
    if target.shape != (panel.m, panel.m):
        raise DimensionError(f"target has shape {target.shape}, expected {(panel.m, panel.m)}")
    ranges = [(0, panel.m)] if blocks is None else [tuple(b)[:2] for b in blocks]

    def err(theta):
        s = block_stress(panel, [Block(a, b, theta) for a, b in ranges]).sigma
        return float(np.linalg.norm(s - target, "fro"))

    grid = np.round(np.arange(0.0, THETA_MAX + 1e-12, THETA_GRID_STEP), 10)
    errors = np.array([err(t) for t in grid])
    k = int(np.argmin(errors))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, grid.size - 1)]
    theta, best = float(grid[k]), float(errors[k])
    if hi > lo:
        res = optimize.minimize_scalar(err, bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-8})
        if res.fun < best:
            theta, best = float(res.x), float(res.fun)
    at_boundary = bool(theta <= grid[0] + 1e-9 or theta >= grid[-1] - 1e-9)
    return ThetaCalibration(theta, best, at_boundary)
