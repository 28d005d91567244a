"""Reverse stress testing for linear and delta-gamma portfolios.

Three entry points share one elliptical model of the risk-factor shocks:

* scenario driven: :func:`scenario_plausibility` and :func:`fit_scenario`;
* plausibility driven: :func:`maxerst`, the worst P&L over an ellipsoid;
* P&L driven: :func:`most_plausible_scenario` and :func:`profit_scenario`.
"""
from .elliptical import (
    EllipticalModel,
    MahaLaw,
    Normal,
    StudentT,
    chi2_quantile,
    maha_sq_cdf,
    maha_sq_quantile,
)
from .errors import (
    AmbiguityError,
    DegenerateError,
    DimensionError,
    DomainError,
    ERSTError,
    NotPositiveDefiniteError,
    PoleError,
    SelfAuditError,
    UnreachableTargetError,
)
from .loss_driven_solver import most_plausible_scenario, profit_scenario, secular_f
from .maxerst_solver import (
    PAIR,
    UNIQUE,
    HistoricalBudget,
    Multiplicity,
    QuantileBudget,
    SolverOutcome,
    continuum,
    maxerst,
    maxerst_linear,
    maxerst_quadratic,
    plausibility_budget,
)
from .plausibility import FitReport, Scenario, fit_scenario, mahalanobis_sq, scenario_plausibility
from .pnl_model import (
    LinearPortfolio,
    QuadraticPortfolio,
    es_linear_normal,
    pnl,
    var_linear_normal,
    var_monte_carlo,
)
from .whitening import WhitenedProblem, whiten

__version__ = "0.1.0"

__all__ = [
    "AmbiguityError",
    "chi2_quantile",
    "continuum",
    "DegenerateError",
    "DimensionError",
    "DomainError",
    "EllipticalModel",
    "ERSTError",
    "es_linear_normal",
    "fit_scenario",
    "FitReport",
    "HistoricalBudget",
    "LinearPortfolio",
    "maha_sq_cdf",
    "maha_sq_quantile",
    "mahalanobis_sq",
    "MahaLaw",
    "maxerst",
    "maxerst_linear",
    "maxerst_quadratic",
    "most_plausible_scenario",
    "Multiplicity",
    "Normal",
    "NotPositiveDefiniteError",
    "PAIR",
    "plausibility_budget",
    "pnl",
    "PoleError",
    "profit_scenario",
    "QuadraticPortfolio",
    "QuantileBudget",
    "Scenario",
    "scenario_plausibility",
    "secular_f",
    "SelfAuditError",
    "SolverOutcome",
    "StudentT",
    "UNIQUE",
    "UnreachableTargetError",
    "var_linear_normal",
    "var_monte_carlo",
    "whiten",
    "WhitenedProblem",
]
