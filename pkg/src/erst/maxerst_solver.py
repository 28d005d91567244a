"""Plausibility-driven reverse stress test (MaxERST).

Worst-case P&L over the ellipsoid ``Maha^2(S) <= q``. Linear portfolios have
a closed form; quadratic ones reduce, after whitening, to the trust-region
subproblem ``min 0.5 x'Ahat x + Bhat'x  s.t. |x| <= sqrt(q)``, solved exactly
in the eigenbasis of ``Ahat`` by a safeguarded Newton iteration on the
Lagrange shift (including the interior and hard cases).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .elliptical import cholesky_factor, maha_sq_quantile
from .errors import DegenerateError, DimensionError, DomainError
from .plausibility import Scenario, as_vector, mahalanobis_sq
from .pnl_model import LinearPortfolio, QuadraticPortfolio, pnl
from .whitening import WhitenedProblem, whiten

RADIUS_TOL = 1e-14
MAX_ITER = 500


@dataclass(frozen=True)
class Multiplicity:
    kind: str
    dim: int = 0

    def __str__(self):
        return f"continuum({self.dim})" if self.kind == "continuum" else self.kind


UNIQUE = Multiplicity("unique")
PAIR = Multiplicity("pair")


def continuum(dim):
    return Multiplicity("continuum", int(dim))


@dataclass(frozen=True)
class SolverOutcome:
    """Result of a reverse-stress solve.

    ``scenarios`` holds every reported optimum (two antipodal representatives
    for a continuum). For pair/continuum results the full solution set is
    ``center + free_directions @ c`` for any ``c`` with ``|c| = free_radius``.
    ``mu`` is the Lagrange shift of ``(Ahat + mu I) x = -Bhat`` (``inf`` for
    the null scenario, which is the limit of the shift).
    """

    scenarios: tuple
    multiplicity: Multiplicity
    pnl: float
    maha_sq: float
    mu: float
    case: str
    center: Scenario | None = None
    free_directions: np.ndarray | None = field(default=None, repr=False)
    free_radius: float = 0.0

    @property
    def scenario(self):
        return self.scenarios[0]


@dataclass(frozen=True)
class QuantileBudget:
    alpha: float


@dataclass(frozen=True)
class HistoricalBudget:
    scenario: Scenario


@dataclass(frozen=True)
class PlausibilityBudget:
    mode: object
    q: float


def plausibility_budget(mode, model):
    """Resolve a quantile or historical-scenario budget into a squared radius ``q``.

    The ellipsoid stays centred on the model mean in historical mode; only the
    radius is taken from the historical scenario.
    """
    if isinstance(mode, QuantileBudget):
        if not 0.0 < mode.alpha < 1.0:
            raise DomainError(f"alpha must lie in (0, 1), got {mode.alpha}")
        return PlausibilityBudget(mode, maha_sq_quantile(model, mode.alpha))
    if isinstance(mode, HistoricalBudget):
        return PlausibilityBudget(mode, mahalanobis_sq(mode.scenario, model))
    raise TypeError(f"unknown budget mode {mode!r}")


def _resolve_q(budget):
    q = budget.q if isinstance(budget, PlausibilityBudget) else float(budget)
    if not (q >= 0.0 and math.isfinite(q)):
        raise DomainError(f"budget q must be finite and >= 0, got {q}")
    return q


def build_outcome(p, sigma, vectors, multiplicity, mu, case, center=None,
                  free_directions=None, free_radius=0.0):
    """Wrap scenario-space vectors into a :class:`SolverOutcome`.

    P&L and Mahalanobis distance are evaluated on the first scenario in the
    original coordinates.
    """
    labels = p.labels
    scenarios = tuple(Scenario(v, labels) for v in vectors)
    first = scenarios[0].values
    low = cholesky_factor(np.asarray(sigma, dtype=float))
    w = linalg.solve_triangular(low, first, lower=True)
    return SolverOutcome(
        scenarios=scenarios,
        multiplicity=multiplicity,
        pnl=pnl(p, first),
        maha_sq=float(w @ w),
        mu=float(mu),
        case=case,
        center=None if center is None else Scenario(center, labels),
        free_directions=free_directions,
        free_radius=float(free_radius),
    )


def maxerst_linear(p, sigma, budget):
    """Closed-form worst P&L of a linear portfolio over the ellipsoid."""
    q = _resolve_q(budget)
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (p.n, p.n):
        raise DimensionError(f"sigma has shape {sigma.shape}, expected {(p.n, p.n)}")
    cholesky_factor(sigma)
    if not np.any(p.omega):
        raise DegenerateError("zero weights: the objective is flat")
    sw = sigma @ p.omega
    sd = math.sqrt(float(p.omega @ sw))
    s_star = -math.sqrt(q) * sw / sd
    mu = sd / math.sqrt(q) if q > 0 else math.inf
    return build_outcome(p, sigma, [s_star], UNIQUE, mu, "boundary" if q > 0 else "null")


def _secular_norm(w, delta, beta):
    d = w.gaps + delta
    x = -beta / d
    return x, float(np.linalg.norm(x))


def _solve_radius(w, beta, radius, delta_lo):
    """Find the shift ``delta`` (``lambda_i + mu = gap_i + delta``) where ``|x| = radius``.

    ``|x(delta)|`` is decreasing and exceeds the radius at ``delta_lo``.
    """
    bnorm = float(np.linalg.norm(beta))
    lo, hi = delta_lo, delta_lo + bnorm / radius
    delta = hi
    for _ in range(MAX_ITER):
        x, nx = _secular_norm(w, delta, beta)
        resid = nx - radius
        if abs(resid) <= RADIUS_TOL * radius:
            break
        if resid > 0.0:
            lo = delta
        else:
            hi = delta
        # Newton on 1/|x| - 1/radius
        d = w.gaps + delta
        dnorm2 = -2.0 * float(np.sum(beta ** 2 / d ** 3))
        phi = 1.0 / nx - 1.0 / radius
        dphi = -0.5 * nx ** -3 * dnorm2
        step = delta - phi / dphi if dphi > 0.0 else math.nan
        if lo < step < hi:
            delta = step
        else:
            delta = 0.5 * (lo + hi)
        if hi - lo <= 4.0 * np.finfo(float).eps * max(abs(hi), 1e-300):
            break
    return delta


def _trust_region(w, radius):
    """Solve the whitened trust-region subproblem; returns eigen-coordinates and metadata."""
    lam_m = w.lam_min
    beta = np.array(w.beta)
    bottom = w.bottom
    hard = w.is_hard
    if hard:
        beta[bottom] = 0.0
    rest = np.setdiff1d(np.arange(w.n), bottom)

    # interior: unconstrained minimizer (minimum-norm one when lam_m == 0) fits inside
    if lam_m > 0.0 or (lam_m == 0.0 and hard):
        x0 = np.zeros(w.n)
        x0[rest] = -beta[rest] / w.lambdas[rest]
        if lam_m > 0.0:
            x0[bottom] = -beta[bottom] / lam_m
        if np.linalg.norm(x0) <= radius:
            return x0, 0.0, UNIQUE, "interior", 0.0

    if hard and lam_m < 0.0:
        x_rest = np.zeros(w.n)
        x_rest[rest] = -beta[rest] / w.gaps[rest]
        nr = float(np.linalg.norm(x_rest))
        if nr <= radius:
            tau = math.sqrt(max(radius ** 2 - nr ** 2, 0.0))
            if tau <= RADIUS_TOL * radius:
                return x_rest, -lam_m, UNIQUE, "hard-case", 0.0
            mult = PAIR if bottom.size == 1 else continuum(bottom.size)
            return x_rest, -lam_m, mult, "hard-case", tau

    delta_lo = lam_m if lam_m > 0.0 else 0.0
    delta = _solve_radius(w, beta, radius, delta_lo)
    x = -beta / (w.gaps + delta)
    return x, delta - lam_m, UNIQUE, "boundary", 0.0


def _hard_case_vectors(w, x_center, tau):
    first = np.zeros(w.n)
    first[w.bottom[0]] = tau
    vectors = [w.from_eigen(x_center + first), w.from_eigen(x_center - first)]
    free = w.U.T @ w.basis[:, w.bottom]
    return vectors, w.from_eigen(x_center), free


def maxerst_quadratic(p, sigma, budget):
    """Global minimum of ``0.5 S'AS + B'S`` over ``Maha^2(S) <= q``.

    Returns every optimum: a pair of antipodal scenarios when the bottom
    eigenvalue of the whitened gamma is simple and the hard case occurs, a
    continuum (two representatives plus the parametrization) when it is
    repeated.
    """
    if isinstance(p, LinearPortfolio):
        p = QuadraticPortfolio.from_linear(p)
    q = _resolve_q(budget)
    w = whiten(p, sigma)
    if q == 0.0:
        return build_outcome(p, sigma, [np.zeros(p.n)], UNIQUE, math.inf, "null")
    radius = math.sqrt(q)
    x, mu, mult, case, tau = _trust_region(w, radius)
    if mult == UNIQUE:
        return build_outcome(p, sigma, [w.from_eigen(x)], mult, mu, case)
    vectors, center, free = _hard_case_vectors(w, x, tau)
    return build_outcome(p, sigma, vectors, mult, mu, case, center, free, tau)


def maxerst(p, sigma, budget):
    """Dispatch to the linear closed form or the quadratic solver."""
    if isinstance(p, LinearPortfolio):
        return maxerst_linear(p, sigma, budget)
    return maxerst_quadratic(p, sigma, budget)


def stationarity_residual(w: WhitenedProblem, s, mu):
    """Norm of ``(Ahat + mu I) Shat + Bhat`` for a scenario-space ``s``."""
    shat = w.to_whitened(as_vector(s, w.n))
    return float(np.linalg.norm((w.Ahat + mu * np.eye(w.n)) @ shat + w.Bhat))
