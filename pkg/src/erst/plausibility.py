"""Scenario-driven reverse stress test: plausibility of a scenario and homothetic fitting."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .elliptical import maha_sq_cdf, maha_sq_quantile
from .errors import DegenerateError, DimensionError, DomainError


@dataclass(frozen=True)
class Scenario:
    """Vector of risk-factor shocks (returns and implied-vol changes, as decimals)."""

    values: np.ndarray
    labels: tuple = field(default=None)

    def __post_init__(self):
        values = np.array(self.values, dtype=float).ravel()
        if not np.all(np.isfinite(values)):
            raise DomainError("scenario entries must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        labels = self.labels
        if labels is None:
            labels = tuple(f"f{i}" for i in range(values.size))
        labels = tuple(str(lab) for lab in labels)
        if len(labels) != values.size:
            raise DimensionError(f"{len(labels)} labels for {values.size} values")
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return self.values.size

    def as_dict(self):
        return dict(zip(self.labels, self.values.tolist()))


def as_vector(s, n=None):
    """Return the shock vector of a :class:`Scenario` or array-like, checking length."""
    vec = s.values if isinstance(s, Scenario) else np.asarray(s, dtype=float).ravel()
    if n is not None and vec.size != n:
        raise DimensionError(f"scenario has length {vec.size}, expected {n}")
    if not np.all(np.isfinite(vec)):
        raise DomainError("scenario entries must be finite")
    return vec


@dataclass(frozen=True)
class FitReport:
    scenario: Scenario
    plausibility: float
    alpha_max: float
    ratio: float
    fitted: Scenario | None
    maha_sq: float
    fitted_maha_sq: float | None

    @property
    def was_fitted(self):
        return self.fitted is not None


def mahalanobis_sq(s, model):
    """Squared Mahalanobis distance ``(s - mu)' sigma^-1 (s - mu)`` via a Cholesky solve."""
    d = as_vector(s, model.n) - model.mu
    w = linalg.solve_triangular(model.cho, d, lower=True)
    return float(w @ w)


def scenario_plausibility(s, model):
    """Probability that a random scenario is no more extreme than ``s``."""
    return maha_sq_cdf(model, mahalanobis_sq(s, model))


def fit_scenario(s0, alpha_max, model):
    """Shrink an implausible scenario onto the ``alpha_max`` ellipsoid along its own direction.

    The fitted scenario is ``mu + K (s0 - mu)`` with ``K = sqrt(q / Maha^2(s0))``
    where ``q`` is the ``alpha_max`` quantile of the squared distance; it lands
    exactly on the ellipsoid. Scenarios already inside are returned with K = 1.
    """
    alpha_max = float(alpha_max)
    if not 0.0 < alpha_max < 1.0:
        raise DomainError(f"alpha_max must lie in (0, 1), got {alpha_max}")
    if not isinstance(s0, Scenario):
        s0 = Scenario(s0)
    m2 = mahalanobis_sq(s0, model)
    alpha0 = maha_sq_cdf(model, m2)
    if alpha0 <= alpha_max:
        return FitReport(s0, alpha0, alpha_max, 1.0, None, m2, None)
    if m2 == 0.0:
        raise DegenerateError("scenario equals the mean: no direction to fit along")
    q = maha_sq_quantile(model, alpha_max)
    ratio = math.sqrt(q / m2)
    fitted = Scenario(model.mu + ratio * (s0.values - model.mu), s0.labels)
    return FitReport(s0, alpha0, alpha_max, ratio, fitted, m2, mahalanobis_sq(fitted, model))
