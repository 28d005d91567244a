"""Closed-form and brute-force oracles used to audit the solvers.

The pure-gamma formulas use the convention ``P&L = S'AS`` (no 1/2) with
``A = diag(1, -1)`` and two factors of common volatility ``sigma`` and
correlation ``rho``. In the package's ``0.5 S'AS`` convention that portfolio
is ``A = diag(2, -2)``. The brute-force searches never use the eigenbasis or
the secular equation: they sample directions in the whitened ball.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .elliptical import chi2_quantile, cholesky_factor, std_normal_quantile
from .errors import DimensionError, DomainError, UnreachableTargetError
from .pnl_model import LinearPortfolio, QuadraticPortfolio

MAX_DIM = 3
DEFAULT_POINTS = 1_000_000
CHUNK = 1 << 17


@dataclass(frozen=True)
class PureGammaSpec:
    sigma: float
    rho: float
    alpha: float

    def __post_init__(self):
        if not self.sigma > 0.0:
            raise DomainError(f"volatility must be > 0, got {self.sigma}")
        if not -1.0 < self.rho < 1.0:
            raise DomainError(f"correlation must lie in (-1, 1), got {self.rho}")
        if not 0.0 < self.alpha < 1.0:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha}")

    def covariance(self):
        s2 = self.sigma ** 2
        return np.array([[s2, self.rho * s2], [self.rho * s2, s2]])

    def portfolio(self):
        """The same portfolio in the ``0.5 S'AS + B'S`` convention."""
        return QuadraticPortfolio(np.diag([2.0, -2.0]), np.zeros(2))


def pure_gamma_maxerst(spec):
    """``-q sigma^2 sqrt(1 - rho^2)`` with ``q`` the chi2(2) quantile."""
    q = chi2_quantile(spec.alpha, 2)
    return -q * spec.sigma ** 2 * math.sqrt(1.0 - spec.rho ** 2)


def pure_gamma_var(spec):
    """VaR under the normal approximation of the product of two independent normals."""
    return -2.0 * std_normal_quantile(spec.alpha) * spec.sigma ** 2 * math.sqrt(1.0 - spec.rho ** 2)


class BruteForceResult(NamedTuple):
    value: float
    argmin: np.ndarray


def _as_quadratic(p):
    return QuadraticPortfolio.from_linear(p) if isinstance(p, LinearPortfolio) else p


def _setup(p, sigma):
    p = _as_quadratic(p)
    if p.n > MAX_DIM:
        raise DimensionError(f"brute force limited to {MAX_DIM} factors, got {p.n}")
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (p.n, p.n):
        raise DimensionError(f"sigma has shape {sigma.shape}, expected {(p.n, p.n)}")
    return p, cholesky_factor(sigma)


def _directions(rng, k, n):
    d = rng.standard_normal((k, n))
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def _pnl_rows(p, S):
    return 0.5 * np.einsum("ki,ij,kj->k", S, p.A, S) + S @ p.B


def brute_force_maxerst(p, sigma, q, resolution=DEFAULT_POINTS, seed=0):
    """Minimum P&L over ``resolution`` points of the ellipsoid ``Maha^2 <= q``.

    Half of the points lie on the boundary sphere, half inside with radius
    ``U^(1/n) sqrt(q)``; all are mapped through the Cholesky factor.
    """
    p, low = _setup(p, sigma)
    if q < 0.0:
        raise DomainError(f"q must be >= 0, got {q}")
    best = BruteForceResult(0.0, np.zeros(p.n))
    if q == 0.0:
        return best
    radius = math.sqrt(q)
    rng = np.random.default_rng(seed)
    done = 0
    while done < resolution:
        k = min(CHUNK, resolution - done)
        d = _directions(rng, k, p.n)
        r = np.full(k, radius)
        inner = k // 2
        r[:inner] = radius * rng.random(inner) ** (1.0 / p.n)
        S = (d * r[:, None]) @ low.T
        vals = _pnl_rows(p, S)
        i = int(np.argmin(vals))
        if vals[i] < best.value:
            best = BruteForceResult(float(vals[i]), S[i].copy())
        done += k
    return best


def _ray_radius(a, b, level):
    """Smallest t >= 0 with ``a t^2 + b t <= level`` (``level < 0``); inf if none."""
    t = np.full(a.shape, np.inf)
    lin = np.abs(a) <= 1e-300
    with np.errstate(invalid="ignore", divide="ignore"):
        lin_t = level / b
        t = np.where(lin & (b < 0.0), lin_t, t)
        disc = b * b + 4.0 * a * level
        root = np.sqrt(np.where(disc >= 0.0, disc, np.nan))
        # a > 0: feasible between the roots; a < 0: beyond the positive root.
        # The same expression gives the first crossing in both cases.
        t_pos = (-b - root) / (2.0 * a)
    ok = ~lin & (disc >= 0.0) & (t_pos >= 0.0)
    t = np.where(ok, t_pos, t)
    return t


def brute_force_loss_scenario(p, sigma, l, resolution=DEFAULT_POINTS, seed=0, refine_steps=200):
    """Smallest ``Maha^2`` among scenarios with P&L at most ``l``.

    Every sampled whitened direction is followed to the first radius where the
    P&L reaches ``l`` (a scalar quadratic), then the best direction is refined
    by a shrinking random local search.

    Returns ``(maha_sq, scenario)``.
    """
    p, low = _setup(p, sigma)
    l = float(l)
    if l > 0.0:
        raise DomainError("target must be a loss (<= 0)")
    if l == 0.0:
        return BruteForceResult(0.0, np.zeros(p.n))
    Ahat = low.T @ p.A @ low
    Bhat = low.T @ p.B
    rng = np.random.default_rng(seed)

    def radii(d):
        a = 0.5 * np.einsum("ki,ij,kj->k", d, Ahat, d)
        b = d @ Bhat
        return _ray_radius(a, b, l)

    best_t, best_d = np.inf, None
    done = 0
    while done < resolution:
        k = min(CHUNK, resolution - done)
        d = _directions(rng, k, p.n)
        t = radii(d)
        i = int(np.argmin(t))
        if t[i] < best_t:
            best_t, best_d = float(t[i]), d[i].copy()
        done += k
    if not math.isfinite(best_t):
        raise UnreachableTargetError(f"no sampled scenario reaches P&L {l:.6g}", None)

    step = 0.1
    for _ in range(refine_steps):
        trial = best_d + step * rng.standard_normal((64, p.n))
        trial /= np.linalg.norm(trial, axis=1, keepdims=True)
        t = radii(trial)
        i = int(np.argmin(t))
        if t[i] < best_t:
            best_t, best_d = float(t[i]), trial[i]
        else:
            step *= 0.7
    return BruteForceResult(best_t ** 2, low @ (best_t * best_d))
