"""Change of variable mapping the plausibility ellipsoid onto a Euclidean ball.

With ``sigma = U'U`` (``U`` upper triangular) the whitened scenario is
``Shat = U^-T S``, so that ``Maha^2(S) = |Shat|^2`` and the portfolio becomes
``0.5 Shat' Ahat Shat + Bhat' Shat`` with ``Ahat = U A U'`` and ``Bhat = U B``.
Both reverse-stress solvers work in the eigenbasis of ``Ahat``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .elliptical import cholesky_factor
from .errors import DimensionError

CLUSTER_TOL = 1e-10
BETA_TOL = 1e-12


def _sign_fix(vecs):
    # make the largest-magnitude component of each eigenvector positive
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


@dataclass(frozen=True)
class WhitenedProblem:
    """Whitened quadratic portfolio expressed in the eigenbasis of ``Ahat``.

    Attributes
    ----------
    U : upper Cholesky factor, ``sigma = U.T @ U``
    Ahat, Bhat : whitened sensitivities
    eigenvalues : ascending eigenvalues of ``Ahat``
    basis : orthonormal eigenvectors (columns)
    beta : coordinates of ``Bhat`` in ``basis``
    bottom : indices of the smallest-eigenvalue cluster
    lam_min : smallest eigenvalue, snapped to exactly 0 when within tolerance
    gaps : ``eigenvalues - lam_min``, exactly 0 on the bottom cluster
    """

    U: np.ndarray
    Ahat: np.ndarray
    Bhat: np.ndarray
    eigenvalues: np.ndarray
    basis: np.ndarray
    beta: np.ndarray
    bottom: np.ndarray
    lam_min: float
    gaps: np.ndarray
    cluster_tol: float

    @property
    def n(self):
        return self.Bhat.size

    @property
    def bottom_beta_norm(self):
        return float(np.linalg.norm(self.beta[self.bottom]))

    @property
    def is_hard(self):
        """True when ``Bhat`` has no component on the bottom eigenspace."""
        return self.bottom_beta_norm <= BETA_TOL * float(np.linalg.norm(self.beta))

    @property
    def lambdas(self):
        return self.lam_min + self.gaps

    def to_whitened(self, s):
        return linalg.solve_triangular(self.U, np.asarray(s, dtype=float), trans="T")

    def from_whitened(self, shat):
        return self.U.T @ shat

    def from_eigen(self, coords):
        """Scenario-space vector(s) from eigenbasis coordinates."""
        return self.U.T @ (self.basis @ coords)


def whiten(p, sigma):
    """Whiten portfolio ``p`` against covariance ``sigma`` and diagonalize."""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (p.n, p.n):
        raise DimensionError(f"sigma has shape {sigma.shape}, expected {(p.n, p.n)}")
    U = cholesky_factor(sigma).T
    Ahat = U @ p.A @ U.T
    Ahat = 0.5 * (Ahat + Ahat.T)
    Bhat = U @ p.B
    lam, vecs = linalg.eigh(Ahat)
    vecs = _sign_fix(vecs)
    scale = float(np.max(np.abs(lam))) if lam.size else 0.0
    tol = CLUSTER_TOL * scale
    bottom = np.flatnonzero(lam - lam[0] <= tol)
    lam_min = float(lam[0])
    if abs(lam_min) <= tol:
        lam_min = 0.0
    gaps = np.maximum(lam - lam_min, 0.0)
    gaps[bottom] = 0.0
    beta = vecs.T @ Bhat
    for arr in (U, Ahat, Bhat, lam, vecs, beta, gaps):
        arr.setflags(write=False)
    return WhitenedProblem(U, Ahat, Bhat, lam, vecs, beta, bottom, lam_min, gaps, tol)
