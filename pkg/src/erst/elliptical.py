"""Elliptical risk-factor models and the law of the squared Mahalanobis distance.

For a normal model the squared distance follows a chi-squared law with ``n``
degrees of freedom. For a multivariate Student-t model with scatter matrix
``sigma`` the squared distance divided by ``n`` follows an F(n, nu) law; the
quantiles are nevertheless taken from a Monte Carlo table, which keeps the
machinery usable for elliptical families without a closed form.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy import linalg, special

from .errors import DimensionError, DomainError, NotPositiveDefiniteError

SYMMETRY_TOL = 1e-12
CHI2_TOL = 1e-10
DEFAULT_MC_SAMPLES = 1_000_000
DEFAULT_MC_SEED = 42


@dataclass(frozen=True)
class Normal:
    """Multivariate normal family."""

    def __str__(self):
        return "normal"


@dataclass(frozen=True)
class StudentT:
    """Multivariate Student-t family; ``sigma`` is its scatter matrix."""

    nu: float

    def __post_init__(self):
        if not (self.nu >= 1 and math.isfinite(self.nu)):
            raise DomainError(f"degrees of freedom must be >= 1, got {self.nu}")

    def __str__(self):
        return f"student-t(nu={self.nu:g})"


def std_normal_quantile(alpha):
    """Inverse of the standard normal CDF."""
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    return float(special.ndtri(alpha))


def std_normal_density(z):
    return math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


def chi2_cdf(q, n):
    if q <= 0.0:
        return 0.0
    return float(special.gammainc(0.5 * n, 0.5 * q))


def chi2_quantile(alpha, n):
    """Quantile of the chi-squared law with ``n`` degrees of freedom.

    Bracketed bisection on the regularized lower incomplete gamma function,
    polished with safeguarded Newton steps, to an absolute CDF residual of
    ``CHI2_TOL``.
    """
    alpha = float(alpha)
    if n < 1 or int(n) != n:
        raise DomainError(f"dimension must be a positive integer, got {n}")
    if not 0.0 <= alpha < 1.0:
        raise DomainError(f"alpha must lie in [0, 1), got {alpha}")
    if alpha == 0.0:
        return 0.0

    k = 0.5 * n
    lo, hi = 0.0, max(2.0 * n, 1.0)
    while chi2_cdf(hi, n) < alpha:
        lo, hi = hi, 2.0 * hi
    x = 0.5 * (lo + hi)
    for _ in range(400):
        resid = chi2_cdf(x, n) - alpha
        if abs(resid) <= 0.01 * CHI2_TOL:
            break
        if resid < 0.0:
            lo = x
        else:
            hi = x
        # chi2 density at x, evaluated in log space
        log_pdf = (k - 1.0) * math.log(x) - 0.5 * x - k * math.log(2.0) - math.lgamma(k)
        pdf = math.exp(log_pdf)
        step = x - resid / pdf if pdf > 0.0 else None
        if step is not None and lo < step < hi:
            x = step
        else:
            x = 0.5 * (lo + hi)
        if hi - lo <= 1e-15 * hi:
            break
    return x


class MahaLaw:
    """Distribution of the squared Mahalanobis distance for one family and dimension.

    Student-t quantiles come from a sorted Monte Carlo sample built once on
    first use. The draws are ``n * (chi2(n)/n) / (chi2(nu)/nu)``, so no
    multivariate sampling (and no ``sigma``) is needed.
    """

    def __init__(self, family, dim, mc_samples=DEFAULT_MC_SAMPLES, mc_seed=DEFAULT_MC_SEED):
        self.family = family
        self.dim = int(dim)
        self.mc_samples = int(mc_samples)
        self.mc_seed = int(mc_seed)
        self._table = None
        self._lock = threading.Lock()

    @property
    def is_analytic(self):
        return isinstance(self.family, Normal)

    @property
    def table(self):
        """Sorted Monte Carlo sample, prefixed with 0 (``None`` for normal)."""
        if self.is_analytic:
            return None
        if self._table is None:
            with self._lock:
                if self._table is None:
                    self._table = self._build_table()
        return self._table

    def _build_table(self):
        rng = np.random.default_rng(self.mc_seed)
        nu = self.family.nu
        num = rng.chisquare(self.dim, size=self.mc_samples)
        den = rng.chisquare(nu, size=self.mc_samples) / nu
        draws = np.sort(num / den)
        table = np.concatenate(([0.0], draws))
        table.setflags(write=False)
        return table

    def _grid(self):
        return np.arange(self.mc_samples + 1, dtype=float) / self.mc_samples

    def quantile(self, alpha):
        alpha = float(alpha)
        if not 0.0 <= alpha < 1.0:
            raise DomainError(f"alpha must lie in [0, 1), got {alpha}")
        if self.is_analytic:
            return chi2_quantile(alpha, self.dim)
        return float(np.interp(alpha, self._grid(), self.table))

    def cdf(self, m2):
        m2 = float(m2)
        if not m2 >= 0.0:
            raise DomainError(f"squared distance must be >= 0, got {m2}")
        if self.is_analytic:
            return chi2_cdf(m2, self.dim)
        return float(np.interp(m2, self.table, self._grid(), right=1.0))

    def standard_error(self, alpha):
        """Monte Carlo standard error of the probability estimate (0 when analytic)."""
        if self.is_analytic:
            return 0.0
        return math.sqrt(alpha * (1.0 - alpha) / self.mc_samples)


class EllipticalModel:
    """Mean, covariance (scatter) matrix and family of the risk-factor shocks.

    Parameters
    ----------
    mu : array_like, shape (n,)
        Mean scenario.
    sigma : array_like, shape (n, n)
        Symmetric positive definite covariance matrix (the scatter matrix for
        the Student-t family).
    family : Normal or StudentT
    mc_samples, mc_seed : int
        Size and seed of the Monte Carlo quantile table (Student-t only).
    """

    def __init__(self, mu, sigma, family=None, mc_samples=DEFAULT_MC_SAMPLES,
                 mc_seed=DEFAULT_MC_SEED):
        sigma = np.array(sigma, dtype=float)
        if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
            raise DimensionError(f"sigma must be square, got shape {sigma.shape}")
        mu = np.zeros(sigma.shape[0]) if mu is None else np.array(mu, dtype=float).ravel()
        if mu.shape[0] != sigma.shape[0]:
            raise DimensionError(
                f"mu has length {mu.shape[0]} but sigma is {sigma.shape[0]}x{sigma.shape[0]}")
        if not (np.all(np.isfinite(sigma)) and np.all(np.isfinite(mu))):
            raise DomainError("mu and sigma must be finite")
        asym = np.max(np.abs(sigma - sigma.T)) if sigma.size else 0.0
        if asym > SYMMETRY_TOL:
            raise DomainError(f"sigma is not symmetric (max asymmetry {asym:.3g})")
        self.cho = cholesky_factor(sigma)
        self.mu = mu
        self.sigma = sigma
        self.family = Normal() if family is None else family
        self.law = MahaLaw(self.family, self.n, mc_samples, mc_seed)
        self.mu.setflags(write=False)
        self.sigma.setflags(write=False)

    @property
    def n(self):
        return self.sigma.shape[0]

    def __repr__(self):
        return f"EllipticalModel(n={self.n}, family={self.family})"


def cholesky_factor(sigma):
    """Lower Cholesky factor ``L`` with ``sigma = L @ L.T``.

    Raises :class:`NotPositiveDefiniteError` when the factorization fails or
    the smallest eigenvalue is not strictly positive.
    """
    try:
        low = linalg.cholesky(sigma, lower=True)
    except linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"sigma is not positive definite: {exc}") from None
    if np.any(np.diag(low) <= 0.0):
        raise NotPositiveDefiniteError("sigma is not positive definite")
    return low


def maha_sq_quantile(model, alpha):
    return model.law.quantile(alpha)


def maha_sq_cdf(model, m2):
    return model.law.cdf(m2)
