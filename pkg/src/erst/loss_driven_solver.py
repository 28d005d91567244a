"""P&L-driven reverse stress test: the most plausible scenario reaching a loss.

Solves ``min |Shat|^2  s.t.  0.5 Shat'Ahat Shat + Bhat'Shat <= l`` in the
eigenbasis of the whitened gamma. Optimal points satisfy
``(Ahat + mu I) Shat = -Bhat`` with ``mu >= max(0, -lambda_min)``; the P&L
along that curve is the secular function ``f(mu)``, nondecreasing in ``mu``,
which is inverted by safeguarded bisection / Newton. When ``Bhat`` has no
component on the bottom eigenspace and ``lambda_min < 0`` the optimum may sit
at ``mu = -lambda_min`` with free coordinates on that eigenspace.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import DomainError, PoleError, UnreachableTargetError
from .maxerst_solver import (
    PAIR,
    UNIQUE,
    SolverOutcome,
    build_outcome,
    continuum,
    stationarity_residual,
)
from .pnl_model import LinearPortfolio, QuadraticPortfolio
from .whitening import WhitenedProblem, whiten

__all__ = [
    "WhitenedProblem",
    "whiten",
    "secular_f",
    "most_plausible_scenario",
    "profit_scenario",
    "stationarity_residual",
]

F_TOL = 1e-13
MAX_ITER = 500


def _f_shift(w, delta, beta):
    """Secular value at ``lam_i + mu = gap_i + delta``."""
    d = w.gaps + delta
    return float(np.sum(0.5 * w.lambdas * (beta / d) ** 2 - beta ** 2 / d))


def _df_shift(w, delta, beta):
    d = w.gaps + delta
    mu = delta - w.lam_min
    return float(mu * np.sum(beta ** 2 / d ** 3))


def secular_f(w, mu, free=None):
    """P&L attained along ``(Ahat + mu I) Shat = -Bhat`` as a function of ``mu``.

    At ``mu = -lambda_min`` the bottom-cluster terms are dropped (their
    coefficients must vanish) and, when ``free`` coordinates on the bottom
    eigenspace are given, ``0.5 * lambda_min * |free|^2`` is added.
    """
    mu = float(mu)
    lower = max(0.0, -w.lam_min)
    if mu < lower:
        raise DomainError(f"mu must be >= {lower}, got {mu}")
    delta = mu + w.lam_min
    if delta <= 0.0:
        if not w.is_hard:
            raise PoleError(f"pole at mu = {-w.lam_min} with nonzero bottom coefficient")
        value = _f_shift_rest(w)
        if free is not None:
            value += 0.5 * w.lam_min * float(np.sum(np.square(free)))
        return value
    return _f_shift(w, delta, np.asarray(w.beta))


def _f_shift_rest(w):
    rest = np.flatnonzero(w.gaps > 0.0)
    if rest.size == 0:
        return 0.0
    g = w.gaps[rest]
    b = w.beta[rest]
    lam = w.lambdas[rest]
    return float(np.sum(0.5 * lam * (b / g) ** 2 - b ** 2 / g))


def _solve_level(w, beta, level, delta_lo):
    """Find ``delta > delta_lo`` with ``f = level``; ``f(delta_lo) < level < 0``."""
    tol = F_TOL * (1.0 + abs(level))
    hi = delta_lo + max(float(beta @ beta) / abs(level), abs(w.lam_min), 1e-12)
    while _f_shift(w, hi, beta) < level:
        hi = delta_lo + 2.0 * (hi - delta_lo)
    lo = delta_lo
    delta = hi
    for _ in range(MAX_ITER):
        resid = _f_shift(w, delta, beta) - level
        if abs(resid) <= tol:
            break
        if resid < 0.0:
            lo = delta
        else:
            hi = delta
        slope = _df_shift(w, delta, beta)
        step = delta - resid / slope if slope > 0.0 else math.nan
        delta = step if lo < step < hi else 0.5 * (lo + hi)
        if hi - lo <= 4.0 * np.finfo(float).eps * max(abs(hi), 1e-300):
            break
    return delta


def _null_outcome(p, sigma):
    return build_outcome(p, sigma, [np.zeros(p.n)], UNIQUE, math.inf, "null")


def most_plausible_scenario(p, sigma, l):
    """Scenario(s) of smallest Mahalanobis distance with P&L at most ``l`` (``l <= 0``).

    Raises
    ------
    DomainError
        ``l > 0`` (use :func:`profit_scenario`).
    UnreachableTargetError
        ``l`` lies below the infimum P&L; ``bound`` carries the infimum.
    """
    if isinstance(p, LinearPortfolio):
        p = QuadraticPortfolio.from_linear(p)
    l = float(l)
    if l > 0.0:
        raise DomainError("target must be a loss (<= 0); use profit_scenario for profits")
    w = whiten(p, sigma)
    if l == 0.0:
        return _null_outcome(p, sigma)

    lam_m = w.lam_min
    hard = w.is_hard
    beta = np.array(w.beta)
    if hard:
        beta[w.bottom] = 0.0
    tol = 1e-10 * (1.0 + abs(l))
    rest = np.flatnonzero(w.gaps > 0.0)

    if lam_m > 0.0 or (lam_m == 0.0 and hard):
        # global minimum of the P&L is finite and attained at mu = 0
        if lam_m > 0.0:
            x0 = -beta / w.lambdas
        else:
            x0 = np.zeros(w.n)
            x0[rest] = -beta[rest] / w.gaps[rest]
        f0 = float(0.5 * np.sum(w.lambdas * x0 ** 2) + beta @ x0)
        if l < f0 - tol:
            raise UnreachableTargetError(
                f"loss {l:.6g} is below the minimum attainable P&L {f0:.6g}", f0)
        if l <= f0 + tol:
            return build_outcome(p, sigma, [w.from_eigen(x0)], UNIQUE, 0.0, "global-minimum")
        delta = _solve_level(w, beta, l, lam_m if lam_m > 0.0 else 0.0)
        x = -beta / (w.gaps + delta)
        return build_outcome(p, sigma, [w.from_eigen(x)], UNIQUE, delta - lam_m, "secular")

    if lam_m == 0.0:
        delta = _solve_level(w, beta, l, 0.0)
        x = -beta / (w.gaps + delta)
        return build_outcome(p, sigma, [w.from_eigen(x)], UNIQUE, delta, "secular")

    # lam_m < 0: collect the hard-case and secular candidates, keep the closest
    candidates = []
    if hard:
        x_rest = np.zeros(w.n)
        x_rest[rest] = -beta[rest] / w.gaps[rest]
        f_rest = _f_shift_rest(w)
        tau2 = 2.0 * (l - f_rest) / lam_m
        if tau2 >= 0.0:
            candidates.append(("hard-case", float(x_rest @ x_rest) + tau2, x_rest, math.sqrt(tau2)))
        if f_rest < l:
            delta = _solve_level(w, beta, l, 0.0)
            x = -beta / (w.gaps + delta)
            candidates.append(("secular", float(x @ x), x, delta))
    else:
        delta = _solve_level(w, beta, l, 0.0)
        x = -beta / (w.gaps + delta)
        candidates.append(("secular", float(x @ x), x, delta))

    best = min(c[1] for c in candidates)
    chosen = [c for c in candidates if c[1] <= best + 1e-10 * (1.0 + best)]
    case, _, x, extra = chosen[0]
    if case == "secular":
        return build_outcome(p, sigma, [w.from_eigen(x)], UNIQUE, extra - lam_m, "secular")
    tau = extra
    if tau <= 1e-14 * (1.0 + math.sqrt(best)):
        return build_outcome(p, sigma, [w.from_eigen(x)], UNIQUE, -lam_m, "hard-case")
    first = np.zeros(w.n)
    first[w.bottom[0]] = tau
    vectors = [w.from_eigen(x + first), w.from_eigen(x - first)]
    mult = PAIR if w.bottom.size == 1 else continuum(w.bottom.size)
    free = w.U.T @ w.basis[:, w.bottom]
    return build_outcome(p, sigma, vectors, mult, -lam_m, "hard-case",
                         w.from_eigen(x), free, tau)


def profit_scenario(p, sigma, target_profit):
    """Most plausible scenario(s) with P&L at least ``target_profit`` (> 0).

    Solved as the loss problem of the negated portfolio; the reported P&L is
    that of the original portfolio.
    """
    if isinstance(p, LinearPortfolio):
        p = QuadraticPortfolio.from_linear(p)
    target_profit = float(target_profit)
    if target_profit <= 0.0:
        raise DomainError(f"target profit must be > 0, got {target_profit}")
    try:
        flipped = most_plausible_scenario(-p, sigma, -target_profit)
    except UnreachableTargetError as exc:
        raise UnreachableTargetError(
            f"profit {target_profit:.6g} exceeds the maximum attainable P&L {-exc.bound:.6g}",
            -exc.bound) from None
    return SolverOutcome(
        scenarios=flipped.scenarios,
        multiplicity=flipped.multiplicity,
        pnl=-flipped.pnl,
        maha_sq=flipped.maha_sq,
        mu=flipped.mu,
        case=flipped.case,
        center=flipped.center,
        free_directions=flipped.free_directions,
        free_radius=flipped.free_radius,
    )
