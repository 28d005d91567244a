"""Linear and delta-gamma portfolio P&L, with the VaR / ES baselines.

Sign convention: VaR and ES are P&L levels, so a loss is a negative number.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .elliptical import (
    StudentT,
    std_normal_density,
    std_normal_quantile,
)
from .errors import DimensionError, DomainError, NotPositiveDefiniteError
from .plausibility import as_vector

SYMMETRY_TOL = 1e-12
PSD_TOL = 1e-12
MC_CHUNK = 1 << 16


def _labels(labels, n):
    if labels is None:
        return tuple(f"f{i}" for i in range(n))
    labels = tuple(str(lab) for lab in labels)
    if len(labels) != n:
        raise DimensionError(f"{len(labels)} labels for {n} factors")
    return labels


@dataclass(frozen=True)
class QuadraticPortfolio:
    """P&L(S) = 0.5 S'AS + B'S.

    ``A`` is symmetrized by averaging with its transpose; ``symmetrized``
    records whether that changed anything beyond ``SYMMETRY_TOL``.
    """

    A: np.ndarray
    B: np.ndarray
    labels: tuple = None
    symmetrized: bool = field(default=False, init=False)

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        B = np.array(self.B, dtype=float).ravel()
        if A.ndim != 2 or A.shape != (B.size, B.size):
            raise DimensionError(f"A has shape {A.shape} but B has length {B.size}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
            raise DomainError("sensitivities must be finite")
        asym = float(np.max(np.abs(A - A.T))) if A.size else 0.0
        A = 0.5 * (A + A.T)
        A.setflags(write=False)
        B.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "labels", _labels(self.labels, B.size))
        object.__setattr__(self, "symmetrized", asym > SYMMETRY_TOL)

    @property
    def n(self):
        return self.B.size

    @property
    def is_linear(self):
        return not np.any(self.A)

    @classmethod
    def from_linear(cls, p):
        return cls(np.zeros((p.n, p.n)), p.omega, p.labels)

    def __neg__(self):
        return QuadraticPortfolio(-self.A, -self.B, self.labels)


@dataclass(frozen=True)
class LinearPortfolio:
    """P&L(S) = omega'S."""

    omega: np.ndarray
    labels: tuple = None

    def __post_init__(self):
        omega = np.array(self.omega, dtype=float).ravel()
        if not np.all(np.isfinite(omega)):
            raise DomainError("weights must be finite")
        omega.setflags(write=False)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "labels", _labels(self.labels, omega.size))

    @property
    def n(self):
        return self.omega.size


class MCEstimate(NamedTuple):
    value: float
    stderr: float


def pnl(p, s):
    """Exact P&L of a scenario (linear or quadratic portfolio)."""
    if isinstance(p, LinearPortfolio):
        return float(p.omega @ as_vector(s, p.n))
    x = as_vector(s, p.n)
    return float(0.5 * x @ p.A @ x + p.B @ x)


def _pnl_many(p, S):
    # S has one scenario per row
    if isinstance(p, LinearPortfolio):
        return S @ p.omega
    return 0.5 * np.einsum("ki,ij,kj->k", S, p.A, S) + S @ p.B


def _sd_linear(p, sigma):
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (p.n, p.n):
        raise DimensionError(f"sigma has shape {sigma.shape}, expected {(p.n, p.n)}")
    # only omega' sigma omega is needed, so singular (perfectly hedged) sigma is fine
    if np.max(np.abs(sigma - sigma.T), initial=0.0) > SYMMETRY_TOL * max(1.0, np.max(np.abs(sigma))):
        raise DomainError("sigma is not symmetric")
    lam_min = float(np.linalg.eigvalsh(sigma)[0])
    if lam_min < -PSD_TOL * max(float(np.trace(sigma)), 1e-300):
        raise NotPositiveDefiniteError(f"sigma is not positive semidefinite (min eigenvalue {lam_min:.3g})")
    return math.sqrt(max(float(p.omega @ sigma @ p.omega), 0.0))


def var_linear_normal(p, sigma, alpha):
    """Analytic VaR of a linear portfolio under centred normal shocks."""
    return -std_normal_quantile(alpha) * _sd_linear(p, sigma)


def es_linear_normal(p, sigma, alpha):
    """Expected P&L conditional on being beyond the alpha-VaR (a negative number)."""
    z = std_normal_quantile(alpha)
    return -std_normal_density(z) / (1.0 - alpha) * _sd_linear(p, sigma)


def _chunk_rng(seed, index):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def simulate_scenarios(model, nsim, seed):
    """Draw ``nsim`` scenarios from ``model`` (one per row).

    Draws are generated in fixed-size chunks whose generators derive from
    ``(seed, chunk index)``, so results do not depend on how the work is split.
    """
    low = model.cho
    out = np.empty((nsim, model.n))
    for index, start in enumerate(range(0, nsim, MC_CHUNK)):
        stop = min(start + MC_CHUNK, nsim)
        rng = _chunk_rng(seed, index)
        z = rng.standard_normal((stop - start, model.n))
        if isinstance(model.family, StudentT):
            w = rng.chisquare(model.family.nu, size=stop - start) / model.family.nu
            z = z / np.sqrt(w)[:, None]
        out[start:stop] = z @ low.T + model.mu
    return out


def empirical_var(values, alpha):
    """Lower order statistic at rank ceil((1 - alpha) N) with a bracketing standard error."""
    x = np.sort(np.asarray(values, dtype=float))
    nsim = x.size
    tail = 1.0 - alpha
    k = max(math.ceil(tail * nsim - 1e-9), 1)
    half = max(math.ceil(math.sqrt(nsim * tail * alpha)), 1)
    hi = x[min(k - 1 + half, nsim - 1)]
    lo = x[max(k - 1 - half, 0)]
    return MCEstimate(float(x[k - 1]), float(0.5 * (hi - lo)))


def var_monte_carlo(p, model, alpha, nsim=100_000, seed=42):
    """Monte Carlo VaR of a (quadratic or linear) portfolio under an elliptical model."""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if nsim < 1000:
        raise DomainError(f"nsim must be >= 1000, got {nsim}")
    if model.n != p.n:
        raise DimensionError(f"model has {model.n} factors, portfolio {p.n}")
    scenarios = simulate_scenarios(model, nsim, seed)
    return empirical_var(_pnl_many(p, scenarios), alpha)
