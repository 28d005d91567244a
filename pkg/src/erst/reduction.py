"""Dimension reduction: factor selection through the first principal component of
per-factor P&L, and cluster compression via betas."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import AmbiguityError, DegenerateError, DimensionError, DomainError
from .plausibility import Scenario, as_vector
from .pnl_model import QuadraticPortfolio
from .sigma_tools import SeriesPanel, estimate_cov

TIE_TOL = 1e-10


def per_factor_pnl_panel(p, panel):
    """Daily P&L of each factor taken alone: ``0.5 A_ii s_i^2 + B_i s_i``.

    Cross-gamma terms have no single owner and are left out.
    """
    if panel.m != p.n:
        raise DimensionError(f"panel has {panel.m} factors, portfolio {p.n}")
    s = panel.values
    values = 0.5 * np.diag(p.A) * s ** 2 + p.B * s
    return SeriesPanel(values, panel.labels, panel.dates)


@dataclass(frozen=True)
class FPCSelection:
    indices: tuple
    labels: tuple
    loadings: np.ndarray
    explained_variance_ratio: float


def pca_fpc_select(pnl_panel, k):
    """Rank factors by the absolute loading in the first principal component.

    The loading vector is sign-normalized (largest absolute entry positive);
    ties in absolute loading are broken by ascending index.
    """
    if not 1 <= k <= pnl_panel.m:
        raise DomainError(f"k must lie in 1..{pnl_panel.m}, got {k}")
    cov = estimate_cov(pnl_panel)
    lam, vecs = linalg.eigh(cov)
    top = lam[-1]
    if top <= 0.0:
        raise DegenerateError("P&L panel has zero variance")
    tied = np.flatnonzero(top - lam <= TIE_TOL * top)
    if tied.size > 1:
        raise AmbiguityError(
            f"top eigenvalue {top:.6g} has multiplicity {tied.size}; "
            "first principal component is not unique")
    v = vecs[:, -1]
    v = v * np.sign(v[np.argmax(np.abs(v))])
    mag = np.abs(v)
    # stable sort on rounded magnitudes keeps ascending index among ties
    key = -np.round(mag / mag.max(), 12)
    order = np.argsort(key, kind="stable")[:k]
    return FPCSelection(
        indices=tuple(int(i) for i in order),
        labels=tuple(pnl_panel.labels[i] for i in order),
        loadings=v,
        explained_variance_ratio=float(top / lam.sum()),
    )


@dataclass(frozen=True)
class ClusterMap:
    """Assignment of each factor to one cluster, with betas once estimated."""

    names: tuple
    assignment: tuple
    betas: np.ndarray | None = None

    def __post_init__(self):
        names = tuple(str(n) for n in self.names)
        assignment = tuple(int(a) for a in self.assignment)
        if any(not 0 <= a < len(names) for a in assignment):
            raise DomainError("cluster assignment refers to an unknown cluster")
        for c in range(len(names)):
            if c not in assignment:
                raise DomainError(f"cluster {names[c]!r} has no members")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "assignment", assignment)
        if self.betas is not None:
            betas = np.array(self.betas, dtype=float).ravel()
            if betas.size != len(assignment) or not np.all(np.isfinite(betas)):
                raise DomainError("betas must be finite, one per factor")
            object.__setattr__(self, "betas", betas)

    @classmethod
    def from_groups(cls, factor_labels, groups):
        """Build from ``{cluster name: [factor labels]}``; every factor exactly once."""
        index = {lab: i for i, lab in enumerate(factor_labels)}
        assignment = [None] * len(factor_labels)
        names = list(groups)
        for c, members in enumerate(groups.values()):
            for lab in members:
                if lab not in index:
                    raise DomainError(f"unknown factor {lab!r} in cluster {names[c]!r}")
                if assignment[index[lab]] is not None:
                    raise DomainError(f"factor {lab!r} assigned twice")
                assignment[index[lab]] = c
        missing = [lab for lab, a in zip(factor_labels, assignment) if a is None]
        if missing:
            raise DomainError(f"factors without a cluster: {missing}")
        return cls(tuple(names), tuple(assignment))

    @property
    def n_clusters(self):
        return len(self.names)

    def members(self, c):
        return [i for i, a in enumerate(self.assignment) if a == c]


def cluster_aggregates(panel, clusters):
    """Equal-weighted mean series of each cluster (one column per cluster)."""
    if len(clusters.assignment) != panel.m:
        raise DimensionError(f"cluster map covers {len(clusters.assignment)} factors, panel {panel.m}")
    cols = [panel.values[:, clusters.members(c)].mean(axis=1) for c in range(clusters.n_clusters)]
    return SeriesPanel(np.column_stack(cols), clusters.names, panel.dates)


def cluster_betas(panel, clusters):
    """``beta_i = cov(s_i, aggregate) / var(aggregate)`` for the factor's own cluster."""
    agg = cluster_aggregates(panel, clusters).values
    x = panel.values - panel.values.mean(axis=0)
    g = agg - agg.mean(axis=0)
    betas = np.empty(panel.m)
    for i, c in enumerate(clusters.assignment):
        var = float(g[:, c] @ g[:, c])
        if var <= 0.0:
            raise DegenerateError(f"cluster {clusters.names[c]!r} aggregate has zero variance")
        betas[i] = float(x[:, i] @ g[:, c]) / var
    return ClusterMap(clusters.names, clusters.assignment, betas)


def reconstruct_scenario(cluster_scenario, clusters, labels=None):
    """Factor-level shocks ``beta_i * shock(cluster of i)``."""
    if clusters.betas is None:
        raise DomainError("cluster map has no betas; run cluster_betas first")
    shocks = as_vector(cluster_scenario, clusters.n_clusters)
    values = clusters.betas * shocks[np.asarray(clusters.assignment)]
    return Scenario(values, labels)


def cluster_portfolio(p, clusters):
    """Sensitivities of ``p`` expressed on cluster shocks through the betas.

    With ``S = M c`` (``M[i, cluster(i)] = beta_i``) the cluster portfolio is
    ``A_c = M'AM`` and ``B_c = M'B``.
    """
    if clusters.betas is None:
        raise DomainError("cluster map has no betas; run cluster_betas first")
    if len(clusters.assignment) != p.n:
        raise DimensionError(f"cluster map covers {len(clusters.assignment)} factors, portfolio {p.n}")
    M = np.zeros((p.n, clusters.n_clusters))
    M[np.arange(p.n), np.asarray(clusters.assignment)] = clusters.betas
    return QuadraticPortfolio(M.T @ p.A @ M, M.T @ p.B, clusters.names)
