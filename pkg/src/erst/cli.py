"""Command-line front end.

Subcommands::

    erst fit      plausibility of a scenario, homothetic fit onto an ellipsoid
    erst maxerst  worst P&L over a plausibility ellipsoid
    erst loss     most plausible scenario reaching a loss (or a profit)
    erst sigma    sample, shrunk or correlation-stressed covariance matrices
    erst sweep    VaR versus MaxERST over correlation / linear-delta grids

Exit codes: 0 ok, 2 input error, 3 numeric precondition (non positive
definite, degenerate, ambiguous), 4 infeasible target, 5 failed self-audit.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .elliptical import EllipticalModel, Normal, StudentT, maha_sq_cdf, maha_sq_quantile
from .errors import (
    AmbiguityError,
    DegenerateError,
    DimensionError,
    DomainError,
    NotPositiveDefiniteError,
    PoleError,
    SelfAuditError,
    UnreachableTargetError,
)
from .io import (
    InputError,
    align_portfolio,
    format_float,
    read_matrix_csv,
    read_panel_csv,
    read_portfolio_spec,
    read_scenario_csv,
    write_matrix_csv,
)
from .loss_driven_solver import most_plausible_scenario, profit_scenario
from .maxerst_solver import (
    HistoricalBudget,
    QuantileBudget,
    maxerst,
    plausibility_budget,
)
from .oracle import MAX_DIM, brute_force_loss_scenario, brute_force_maxerst
from .plausibility import Scenario, fit_scenario, mahalanobis_sq
from .pnl_model import (
    LinearPortfolio,
    QuadraticPortfolio,
    es_linear_normal,
    pnl,
    var_linear_normal,
    var_monte_carlo,
)
from .reduction import cluster_aggregates, cluster_betas, cluster_portfolio, reconstruct_scenario
from .sigma_tools import (
    Block,
    block_stress,
    calibrate_theta,
    cov_to_corr,
    estimate_cov,
    is_positive_definite,
    shrink_to_pd,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3
EXIT_INFEASIBLE = 4
EXIT_AUDIT = 5

SEED_ENV = "ERST_SEED"
DEFAULT_SEED = 42
AUDIT_TOL = 1e-8
VERIFY_POINTS = 400_000
VERIFY_TOL = 1e-2


@dataclass
class RunConfig:
    """Everything one invocation needs, resolved from the command line."""

    command: str
    cov: Path | None = None
    panel: Path | None = None
    portfolio: Path | None = None
    family: str = "normal"
    nu: float | None = None
    mc_samples: int = 1_000_000
    nsim: int = 100_000
    seed: int = DEFAULT_SEED
    json: bool = False
    output: Path | None = None
    verify: bool = False
    use_clusters: bool = False
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("cov", "panel", "portfolio"):
            path = getattr(self, name)
            if path is not None and not Path(path).is_file():
                raise InputError(f"file not found: {path}")
        if self.family == "student" and self.nu is None:
            raise InputError("--family student requires --nu")


# ---------------------------------------------------------------- loading

def _family(config):
    return StudentT(config.nu) if config.family == "student" else Normal()


def load_covariance(config):
    """``(labels, sigma, panel or None)`` from ``--cov`` or ``--panel``."""
    if (config.cov is None) == (config.panel is None):
        raise InputError("exactly one of --cov or --panel is required")
    if config.cov is not None:
        labels, sigma = read_matrix_csv(config.cov)
        return labels, sigma, None
    panel = read_panel_csv(config.panel)
    return panel.labels, estimate_cov(panel), panel


def load_model(config, labels, sigma):
    report = is_positive_definite(sigma)
    if not report:
        raise NotPositiveDefiniteError(
            f"covariance is not positive definite (min eigenvalue {report.min_eigenvalue:.3g}); "
            "run 'erst sigma --shrink auto' first")
    return EllipticalModel(None, sigma, _family(config), config.mc_samples, config.seed)


def load_portfolio(config, labels):
    if config.portfolio is None:
        raise InputError("--portfolio is required")
    p, clusters = read_portfolio_spec(config.portfolio)
    return align_portfolio(p, labels), clusters


def parse_shocks(items, labels):
    """``label=value`` pairs; factors not mentioned are left unshocked."""
    index = {lab: i for i, lab in enumerate(labels)}
    values = np.zeros(len(labels))
    for item in items:
        name, sep, raw = item.partition("=")
        name = name.strip()
        if not sep:
            raise InputError(f"shock must look like label=value, got {item!r}")
        if name not in index:
            raise InputError(f"unknown factor label {name!r}")
        try:
            values[index[name]] = float(raw)
        except ValueError:
            raise InputError(f"shock for {name!r} is not a number: {raw!r}") from None
    return Scenario(values, labels)


def scenario_from_mapping(mapping, labels):
    unknown = [k for k in mapping if k not in labels]
    if unknown:
        raise InputError(f"unknown factor label {unknown[0]!r}")
    return Scenario([mapping.get(lab, 0.0) for lab in labels], labels)


# ---------------------------------------------------------------- reports

def _num(x):
    x = float(x)
    return None if not math.isfinite(x) else x


def _scenario_doc(s):
    return {lab: float(v) for lab, v in zip(s.labels, s.values)}


def outcome_doc(outcome):
    doc = {
        "case": outcome.case,
        "multiplicity": str(outcome.multiplicity),
        "pnl": outcome.pnl,
        "maha_sq": outcome.maha_sq,
        "mu": _num(outcome.mu),
        "scenarios": [_scenario_doc(s) for s in outcome.scenarios],
    }
    if outcome.center is not None:
        doc["center"] = _scenario_doc(outcome.center)
        doc["free_directions"] = np.asarray(outcome.free_directions).tolist()
        doc["free_radius"] = outcome.free_radius
    return doc


def _render_text(doc, indent=0):
    pad = "  " * indent
    lines = []
    for key, value in doc.items():
        if isinstance(value, dict):
            lines.append(f"{pad}{key}:")
            lines.extend(_render_text(value, indent + 1))
        elif isinstance(value, list) and value and isinstance(value[0], dict):
            for k, item in enumerate(value, start=1):
                lines.append(f"{pad}{key}[{k}]:")
                lines.extend(_render_text(item, indent + 1))
        else:
            lines.append(f"{pad}{key}: {_text_value(value)}")
    return lines


def _text_value(value):
    if value is None:
        return "inf"
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return f"{value:.10g}"
    if isinstance(value, list):
        return "[" + ", ".join(_text_value(v) for v in value) + "]"
    return str(value)


def emit(doc, config, out=None):
    out = sys.stdout if out is None else out
    if config.json:
        text = json.dumps(doc, indent=2, allow_nan=False) + "\n"
    else:
        text = "\n".join(_render_text(doc)) + "\n"
    if config.output is not None:
        Path(config.output).write_text(text)
    else:
        out.write(text)


# ---------------------------------------------------------------- audits

def _close(a, b, tol=AUDIT_TOL):
    return abs(a - b) <= tol * (1.0 + abs(a) + abs(b))


def audit_outcome(p, model, outcome, q=None, loss=None, profit=None):
    """Re-evaluate every emitted scenario before anything is printed."""
    for k, s in enumerate(outcome.scenarios, start=1):
        value = pnl(p, s)
        m2 = mahalanobis_sq(s, model)
        if not _close(value, outcome.pnl):
            raise SelfAuditError(f"scenario {k}: P&L {value!r} differs from reported {outcome.pnl!r}")
        if not _close(m2, outcome.maha_sq):
            raise SelfAuditError(f"scenario {k}: Maha^2 {m2!r} differs from reported {outcome.maha_sq!r}")
        if q is not None and m2 > q + AUDIT_TOL * (1.0 + q):
            raise SelfAuditError(f"scenario {k}: Maha^2 {m2!r} exceeds the budget {q!r}")
        if loss is not None and value > loss + AUDIT_TOL * (1.0 + abs(loss)):
            raise SelfAuditError(f"scenario {k}: P&L {value!r} does not reach the loss {loss!r}")
        if profit is not None and value < profit - AUDIT_TOL * (1.0 + abs(profit)):
            raise SelfAuditError(f"scenario {k}: P&L {value!r} does not reach the profit {profit!r}")


def _verify(kind, p, sigma, solver_value, run, seed):
    """Brute-force cross-check; ``run`` returns the oracle value."""
    if p.n > MAX_DIM:
        return {"status": "skipped", "reason": f"more than {MAX_DIM} factors"}
    oracle = run(p, sigma, seed)
    scale = max(abs(solver_value), abs(oracle), 1e-12)
    gap = abs(oracle - solver_value) / scale
    # sampling can only do worse than the exact optimum
    if kind == "min" and oracle < solver_value - AUDIT_TOL * (1.0 + abs(solver_value)):
        ok = False
    else:
        ok = gap <= VERIFY_TOL
    doc = {"status": "pass" if ok else "fail", "oracle": oracle, "relative_gap": gap,
           "points": VERIFY_POINTS}
    if not ok:
        raise SelfAuditError(f"brute-force oracle {oracle!r} disagrees with solver {solver_value!r}")
    return doc


# ---------------------------------------------------------------- clusters

def _cluster_problem(config, p, clusters, panel):
    if clusters is None:
        raise InputError("--use-clusters needs a [clusters] section in the portfolio spec")
    if panel is None:
        raise InputError("--use-clusters needs --panel to estimate betas")
    clusters = cluster_betas(panel, clusters)
    agg = cluster_aggregates(panel, clusters)
    pc = cluster_portfolio(QuadraticPortfolio.from_linear(p) if isinstance(p, LinearPortfolio) else p,
                           clusters)
    sigma_c = estimate_cov(agg)
    return pc, sigma_c, clusters


# ---------------------------------------------------------------- commands

def cmd_fit(config):
    labels, sigma, _ = load_covariance(config)
    model = load_model(config, labels, sigma)
    opts = config.options
    if opts.get("scenario") is not None and opts.get("shocks"):
        raise InputError("give either --shock or --scenario, not both")
    if opts.get("scenario") is not None:
        s0 = scenario_from_mapping(read_scenario_csv(opts["scenario"]), labels)
    else:
        s0 = parse_shocks(opts.get("shocks") or [], labels)
    alpha_max = opts["alpha_max"]
    report = fit_scenario(s0, alpha_max, model)

    if not _close(mahalanobis_sq(s0, model), report.maha_sq):
        raise SelfAuditError("scenario Maha^2 changed on re-evaluation")
    doc = {
        "family": str(model.family),
        "scenario": _scenario_doc(s0),
        "maha_sq": report.maha_sq,
        "plausibility": report.plausibility,
        "alpha_max": alpha_max,
        "fitted": report.was_fitted,
    }
    if report.was_fitted:
        q = maha_sq_quantile(model, alpha_max)
        m2 = mahalanobis_sq(report.fitted, model)
        if not _close(m2, q, 1e-9):
            raise SelfAuditError(f"fitted Maha^2 {m2!r} misses the quantile {q!r}")
        doc.update({
            "ratio": report.ratio,
            "fitted_scenario": _scenario_doc(report.fitted),
            "fitted_maha_sq": report.fitted_maha_sq,
            "quantile_maha_sq": q,
        })
    return doc


def cmd_maxerst(config):
    labels, sigma, panel = load_covariance(config)
    model = load_model(config, labels, sigma)
    p, clusters = load_portfolio(config, labels)
    opts = config.options
    if (opts.get("alpha") is None) == (opts.get("historical_scenario") is None):
        raise InputError("choose exactly one budget: --alpha or --historical-scenario")
    if opts.get("alpha") is not None:
        budget = plausibility_budget(QuantileBudget(opts["alpha"]), model)
        budget_doc = {"mode": "quantile", "alpha": opts["alpha"], "q": budget.q}
    else:
        s_h = scenario_from_mapping(read_scenario_csv(opts["historical_scenario"]), labels)
        budget = plausibility_budget(HistoricalBudget(s_h), model)
        budget_doc = {"mode": "historical", "scenario": _scenario_doc(s_h), "q": budget.q,
                      "plausibility": maha_sq_cdf(model, budget.q)}

    doc = {"family": str(model.family), "budget": budget_doc}
    if config.use_clusters:
        pc, sigma_c, clusters = _cluster_problem(config, p, clusters, panel)
        cmodel = EllipticalModel(None, sigma_c, model.family, config.mc_samples, config.seed)
        outcome = maxerst(pc, sigma_c, budget)
        audit_outcome(pc, cmodel, outcome, q=budget.q)
        full = reconstruct_scenario(outcome.scenario, clusters, labels)
        doc["clusters"] = {"names": list(clusters.names), "betas": clusters.betas.tolist()}
        doc["maxerst"] = outcome.pnl
        doc["outcome"] = outcome_doc(outcome)
        doc["factor_scenario"] = _scenario_doc(full)
        doc["factor_scenario_pnl"] = pnl(p, full)
        doc["factor_scenario_maha_sq"] = mahalanobis_sq(full, model)
        return doc

    outcome = maxerst(p, sigma, budget)
    audit_outcome(p, model, outcome, q=budget.q)
    doc["maxerst"] = outcome.pnl
    doc["outcome"] = outcome_doc(outcome)

    alpha = opts.get("alpha")
    if alpha is not None:
        comparators = {}
        if isinstance(p, LinearPortfolio) and isinstance(model.family, Normal):
            comparators["var"] = var_linear_normal(p, sigma, alpha)
            comparators["es"] = es_linear_normal(p, sigma, alpha)
        else:
            est = var_monte_carlo(p, model, alpha, config.nsim, config.seed)
            comparators["var_mc"] = est.value
            comparators["var_mc_stderr"] = est.stderr
            comparators["nsim"] = config.nsim
        doc["comparators"] = comparators

    if config.verify:
        q = budget.q
        doc["verify"] = _verify(
            "min", p, sigma, outcome.pnl,
            lambda pp, ss, seed: brute_force_maxerst(pp, ss, q, VERIFY_POINTS, seed).value,
            config.seed)
    return doc


def cmd_loss(config):
    labels, sigma, panel = load_covariance(config)
    model = load_model(config, labels, sigma)
    p, clusters = load_portfolio(config, labels)
    opts = config.options
    loss, profit = opts.get("loss"), opts.get("profit")
    if (loss is None) == (profit is None):
        raise InputError("choose exactly one target: --loss or --profit")
    if loss is not None and loss > 0.0:
        raise InputError("--loss must be <= 0 (use --profit for gains)")
    if profit is not None and profit <= 0.0:
        raise InputError("--profit must be > 0")

    solve_p, solve_sigma, solve_model = p, sigma, model
    if config.use_clusters:
        solve_p, solve_sigma, clusters = _cluster_problem(config, p, clusters, panel)
        solve_model = EllipticalModel(None, solve_sigma, model.family, config.mc_samples, config.seed)
    if loss is not None:
        outcome = most_plausible_scenario(solve_p, solve_sigma, loss)
        target = {"kind": "loss", "level": loss}
    else:
        outcome = profit_scenario(solve_p, solve_sigma, profit)
        target = {"kind": "profit", "level": profit}
    audit_outcome(solve_p, solve_model, outcome, loss=loss, profit=profit)

    doc = {"family": str(model.family), "target": target, "outcome": outcome_doc(outcome),
           "maha_sq": outcome.maha_sq,
           "plausibility": maha_sq_cdf(solve_model, outcome.maha_sq)}
    if config.use_clusters:
        full = reconstruct_scenario(outcome.scenario, clusters, labels)
        doc["clusters"] = {"names": list(clusters.names), "betas": clusters.betas.tolist()}
        doc["factor_scenario"] = _scenario_doc(full)
        doc["factor_scenario_pnl"] = pnl(p, full)
        doc["factor_scenario_maha_sq"] = mahalanobis_sq(full, model)
    elif config.verify:
        qp = p if loss is not None else -(QuadraticPortfolio.from_linear(p)
                                          if isinstance(p, LinearPortfolio) else p)
        level = loss if loss is not None else -profit
        doc["verify"] = _verify(
            "max", qp, sigma, outcome.maha_sq,
            lambda pp, ss, seed: brute_force_loss_scenario(pp, ss, level, VERIFY_POINTS, seed).value,
            config.seed)
    return doc


def _parse_block(text):
    parts = text.split(":")
    if len(parts) != 3:
        raise InputError(f"block must look like start:stop:theta, got {text!r}")
    try:
        return Block(int(parts[0]), int(parts[1]), float(parts[2]))
    except ValueError:
        raise InputError(f"block must look like start:stop:theta, got {text!r}") from None


def cmd_sigma(config):
    opts = config.options
    if config.panel is None:
        raise InputError("--panel is required")
    out_dir = opts.get("out_dir")
    if out_dir is None:
        raise InputError("--out-dir is required")
    panel = read_panel_csv(config.panel)
    base = estimate_cov(panel)
    pd = is_positive_definite(base)
    lam = np.linalg.eigvalsh(base)
    numerical_rank = int(np.sum(lam > pd.threshold))
    doc = {
        "panel": {"file": Path(config.panel).name, "days": panel.n_days, "factors": panel.m,
                  "first_date": str(panel.dates[0]), "last_date": str(panel.dates[-1])},
        "sample": {"positive_definite": pd.positive_definite,
                   "min_eigenvalue": pd.min_eigenvalue,
                   "numerical_rank": numerical_rank,
                   "rank_bound": min(panel.n_days - 1, panel.m)},
    }

    blocks = [_parse_block(b) for b in opts.get("blocks") or []]
    if opts.get("theta") is not None:
        if blocks:
            raise InputError("give either --theta or --block, not both")
        blocks = [Block(0, panel.m, opts["theta"])]
    shrink = opts.get("shrink")

    if blocks:
        if shrink is not None:
            raise InputError("--shrink cannot be combined with a correlation stress")
        result = block_stress(panel, blocks)
    elif shrink is not None or not pd:
        delta = "auto" if shrink in (None, "auto") else _parse_delta(shrink)
        result = shrink_to_pd(base, delta)
        if not pd:
            doc["sample"]["note"] = (
                f"sample covariance has rank at most {min(panel.n_days - 1, panel.m)} "
                f"for {panel.m} factors; shrinkage applied")
    else:
        result = block_stress(panel, [])

    if opts.get("calibrate_theta") is not None:
        tlabels, target = read_matrix_csv(opts["calibrate_theta"])
        if tuple(tlabels) != tuple(panel.labels):
            raise InputError("target covariance labels do not match the panel")
        cal = calibrate_theta(panel, target)
        doc["calibration"] = {"theta": cal.theta, "frobenius_error": cal.error,
                              "at_boundary": cal.at_boundary}

    final = is_positive_definite(result.sigma)
    doc["result"] = {"provenance": result.provenance.describe(),
                     "positive_definite": final.positive_definite,
                     "min_eigenvalue": final.min_eigenvalue}
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_matrix_csv(out_dir / "covariance.csv", panel.labels, result.sigma)
    write_matrix_csv(out_dir / "correlation.csv", panel.labels, cov_to_corr(result.sigma))
    (out_dir / "provenance.json").write_text(json.dumps(doc, indent=2) + "\n")
    doc["files"] = ["covariance.csv", "correlation.csv", "provenance.json"]
    return doc


def _parse_delta(text):
    try:
        return float(text)
    except ValueError:
        raise InputError(f"--shrink takes 'auto' or a number in [0, 1], got {text!r}") from None


def parse_grid(text):
    """``a,b,c`` or ``start:stop:step`` (inclusive)."""
    text = text.strip()
    if not text:
        raise InputError("grid is empty")
    try:
        if ":" in text:
            start, stop, step = (float(x) for x in text.split(":"))
            if step <= 0.0 or stop < start:
                raise InputError(f"bad grid {text!r}")
            count = int(round((stop - start) / step)) + 1
            return [float(v) for v in np.round(np.linspace(start, start + (count - 1) * step, count), 12)]
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise InputError(f"bad grid {text!r}") from None


def sweep_rows(rhos, betas, alpha=0.95, nsim=100_000, seed=DEFAULT_SEED, vol=1.0):
    """VaR (Monte Carlo) and MaxERST of ``0.5 S'diag(1,-1)S + beta (1, 2)'S`` per grid cell."""
    if not rhos or not betas:
        raise InputError("grid is empty")
    rows = []
    A = np.diag([1.0, -1.0])
    for beta in betas:
        p = QuadraticPortfolio(A, beta * np.array([1.0, 2.0]), ("s1", "s2"))
        for rho in rhos:
            sigma = vol ** 2 * np.array([[1.0, rho], [rho, 1.0]])
            model = EllipticalModel(None, sigma)
            budget = plausibility_budget(QuantileBudget(alpha), model)
            outcome = maxerst(p, sigma, budget)
            audit_outcome(p, model, outcome, q=budget.q)
            var = var_monte_carlo(p, model, alpha, nsim, seed)
            rows.append({"rho": rho, "beta": beta, "var_mc": var.value, "var_stderr": var.stderr,
                         "maxerst": outcome.pnl, "ratio": outcome.pnl / var.value})
    return rows


def range_summary(rows):
    """Per beta: relative range (peak-to-peak over mean absolute value) of MaxERST, VaR and their ratio."""
    out = {}
    for beta in sorted({r["beta"] for r in rows}):
        cell = [r for r in rows if r["beta"] == beta]
        stats = {}
        for key in ("maxerst", "var_mc", "ratio"):
            v = np.array([r[key] for r in cell])
            stats[key] = float(np.ptp(v) / np.mean(np.abs(v)))
        out[beta] = stats
    return out


def cmd_sweep(config):
    opts = config.options
    rows = sweep_rows(parse_grid(opts["rho"]), parse_grid(opts["beta"]), opts["alpha"],
                      config.nsim, config.seed, opts["vol"])
    header = ["rho", "beta", "var_mc", "var_stderr", "maxerst", "ratio"]
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(format_float(r[k]) for k in header))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- parser

def _probability(text):
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 < x < 1.0:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {x}")
    return x


def _positive_int(text):
    try:
        x = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if x <= 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {x}")
    return x


def _default_seed():
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return DEFAULT_SEED
    try:
        return int(raw)
    except ValueError:
        raise InputError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("model")
    g.add_argument("--cov", type=Path, help="covariance matrix CSV")
    g.add_argument("--panel", type=Path, help="daily shocks CSV (sample covariance is used)")
    g.add_argument("--family", choices=("normal", "student"), default="normal")
    g.add_argument("--nu", type=float, help="Student-t degrees of freedom")
    g.add_argument("--mc-samples", type=_positive_int, default=1_000_000,
                   help="size of the Student-t quantile table (default 1e6)")
    g.add_argument("--nsim", type=_positive_int, default=100_000,
                   help="Monte Carlo paths for VaR (default 1e5)")
    g.add_argument("--seed", type=int, default=None,
                   help=f"random seed (default ${SEED_ENV} or {DEFAULT_SEED})")
    o = common.add_argument_group("output")
    o.add_argument("--json", action="store_true", help="machine-readable report")
    o.add_argument("--output", type=Path, help="write the report here instead of stdout")

    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--portfolio", type=Path, required=True, help="portfolio spec (INI)")
    solver.add_argument("--verify", action="store_true",
                        help=f"brute-force audit (up to {MAX_DIM} factors)")
    solver.add_argument("--use-clusters", action="store_true",
                        help="solve on cluster aggregates (needs --panel and a [clusters] section)")

    parser = _Parser(prog="erst", description="Reverse stress testing of linear and delta-gamma portfolios.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", parents=[common], help="plausibility and homothetic fit of a scenario")
    p.add_argument("--shock", action="append", dest="shocks", metavar="LABEL=VALUE", default=[])
    p.add_argument("--scenario", type=Path, help="scenario CSV (header of labels, one row)")
    p.add_argument("--alpha-max", type=_probability, required=True)

    p = sub.add_parser("maxerst", parents=[common, solver], help="worst P&L over a plausibility ellipsoid")
    p.add_argument("--alpha", type=_probability)
    p.add_argument("--historical-scenario", type=Path)

    p = sub.add_parser("loss", parents=[common, solver], help="most plausible scenario reaching a P&L")
    p.add_argument("--loss", type=float)
    p.add_argument("--profit", type=float)

    p = sub.add_parser("sigma", parents=[common], help="sample, shrunk or stressed covariance")
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--theta", type=float, help="single-factor stress of all correlations")
    p.add_argument("--block", action="append", dest="blocks", metavar="START:STOP:THETA", default=[],
                   help="stress columns [START, STOP) (0-based, repeatable)")
    p.add_argument("--shrink", metavar="DELTA|auto", help="shrink towards the diagonal")
    p.add_argument("--calibrate-theta", type=Path, metavar="TARGET_CSV",
                   help="fit theta to a target covariance")

    p = sub.add_parser("sweep", parents=[common], help="VaR vs MaxERST over (rho, beta) grids")
    p.add_argument("--rho", default="-0.8:0.8:0.1", help="correlation grid (a,b,c or start:stop:step)")
    p.add_argument("--beta", default="0,1.5", help="linear-delta grid")
    p.add_argument("--alpha", type=_probability, default=0.95)
    p.add_argument("--vol", type=float, default=1.0)
    return parser


_COMMON = {"command", "cov", "panel", "portfolio", "family", "nu", "mc_samples", "nsim", "seed",
           "json", "output", "verify", "use_clusters"}


def config_from_args(args):
    seed = args.seed if args.seed is not None else _default_seed()
    return RunConfig(
        command=args.command,
        cov=args.cov,
        panel=args.panel,
        portfolio=getattr(args, "portfolio", None),
        family=args.family,
        nu=args.nu,
        mc_samples=args.mc_samples,
        nsim=args.nsim,
        seed=seed,
        json=args.json,
        output=args.output,
        verify=getattr(args, "verify", False),
        use_clusters=getattr(args, "use_clusters", False),
        options={k: v for k, v in vars(args).items() if k not in _COMMON},
    )


COMMANDS = {"fit": cmd_fit, "maxerst": cmd_maxerst, "loss": cmd_loss, "sigma": cmd_sigma,
            "sweep": cmd_sweep}


def run(config, out=None):
    result = COMMANDS[config.command](config)
    if isinstance(result, str):
        out = sys.stdout if out is None else out
        if config.output is not None:
            Path(config.output).write_text(result)
        else:
            out.write(result)
    else:
        emit(result, config, out)
    return EXIT_OK


def _fail(code, message, extra=None):
    sys.stderr.write(f"erst: error: {message}\n")
    if extra:
        sys.stderr.write(extra)
    return code


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # usage errors exit with EXIT_INPUT; --help and --version with 0
        return exc.code
    try:
        config = config_from_args(args)
        return run(config)
    except UnreachableTargetError as exc:
        return _fail(EXIT_INFEASIBLE, str(exc), f"attainable bound: {exc.bound!r}\n")
    except SelfAuditError as exc:
        return _fail(EXIT_AUDIT, f"self-audit failed: {exc}")
    except (NotPositiveDefiniteError, DegenerateError, AmbiguityError, PoleError) as exc:
        return _fail(EXIT_NUMERIC, str(exc))
    except (InputError, DomainError, DimensionError, OSError) as exc:
        return _fail(EXIT_INPUT, str(exc))


if __name__ == "__main__":
    sys.exit(main())
