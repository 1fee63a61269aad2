"""The six commands. Each turns a ``RunConfig`` into a ``Report``: rows for the
command's table plus any side documents (joint risk JSON, bound curves, sample
dumps). Writing them out is the CLI's job.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from .config import (
    limit_columns,
    risk_report_columns,
    sample_columns,
    simulation_columns,
    sweep_columns,
    topology_columns,
    tradeoff_columns,
    tradeoff_curve_columns,
)
from .dde import transient_mean, transient_variance
from .errors import ConfigError
from .graph import (
    Spectrum,
    WeightedGraph,
    check_stable,
    graph_spectrum,
    laplacian,
    pairwise_effective_resistance,
)
from .joint import joint_risk_report, steady_covariance
from .limits import limit_report, tradeoff_scatter, vector_hard_limits, vector_tradeoff
from .observables import Observable, ObservableKind
from .risk import (
    Classification,
    RiskValue,
    exp_risk_from_sigma,
    exp_risk_from_sigma_alternate,
    exp_risk_gaussian,
    quad_risk_from_sigma,
    quad_risk_gaussian,
    steady_sigma_trace,
    steady_sigmas,
    var_risk_gaussian,
)
from .scenarios import RunConfig
from .simulator import SimConfig, ensemble_stats
from .special import risk_aversion_factor, s_epsilon
from .topology import cross_validate, ordering_checks, topology_profile

log = logging.getLogger(__name__)

_SQRT2 = math.sqrt(2.0)
_RANK = {Classification.SAFE: 0, Classification.MARGINAL: 1, Classification.UNSAFE: 2}


@dataclass
class Report:
    name: str
    columns: List[str]
    rows: List[dict]
    documents: Dict[str, Any] = field(default_factory=dict)
    related: List["Report"] = field(default_factory=list)
    checks: Dict[str, Any] = field(default_factory=dict)


def _risk_row(tau, t, label, measure, value: float, classify: bool = True) -> dict:
    return {
        "tau": tau,
        "t": t,
        "observable": label,
        "measure": measure,
        "value": value,
        "classification": RiskValue(value).classification.value if classify else None,
    }


def _steady_rows(cfg: RunConfig, s: Spectrum, sigmas: np.ndarray) -> List[dict]:
    p = cfg.params
    rows = []
    for c, sigma in zip(cfg.observable_set, sigmas):
        sigma = float(sigma)
        rows.append(_risk_row(p.tau, None, c.label, "sigma", sigma, classify=False))
        if p.eps < 1:
            var = _SQRT2 * s_epsilon(p.eps, 0.0) * sigma
            rows.append(_risk_row(p.tau, None, c.label, "var", var))
        rows.append(_risk_row(p.tau, None, c.label, "quad", quad_risk_from_sigma(sigma, p.eps)))
        if p.beta is not None:
            rows.append(
                _risk_row(p.tau, None, c.label, "exp", exp_risk_from_sigma(sigma, p.eps, p.beta))
            )
            if cfg.verbose:
                alternate = exp_risk_from_sigma_alternate(sigma, p.eps, p.beta)
                rows.append(_risk_row(p.tau, None, c.label, "exp_alt", alternate))
        if cfg.theta is not None:
            aversion = risk_aversion_factor(cfg.theta) * sigma - p.eps
            rows.append(_risk_row(p.tau, None, c.label, "exp_aversion", aversion))
        if cfg.verbose and math.isfinite(sigma):
            trace = steady_sigma_trace(laplacian(cfg.graph), c, p)
            if abs(trace - sigma) > 1e-8 * max(1.0, sigma):
                log.warning(f"{c.label}: spectral sigma {sigma} and trace form {trace} disagree")
            rows.append(_risk_row(p.tau, None, c.label, "sigma_trace", trace, classify=False))
    return rows


def _transient_rows(cfg: RunConfig, s: Spectrum) -> List[dict]:
    p = cfg.params
    h = cfg.history_function()
    times = np.asarray(cfg.times, dtype=float)
    rows = []
    for c in cfg.observable_set:
        means = np.atleast_1d(transient_mean(s, c, h, times))
        variances = np.atleast_1d(transient_variance(s, c, p.b, p.tau, times))
        for t, mu, variance in zip(times, means, variances):
            sd = math.sqrt(max(float(variance), 0.0))
            t = float(t)
            rows.append(_risk_row(p.tau, t, c.label, "mean", float(mu), classify=False))
            rows.append(_risk_row(p.tau, t, c.label, "variance", float(variance), classify=False))
            if p.eps < 1:
                rows.append(_risk_row(p.tau, t, c.label, "var", var_risk_gaussian(mu, sd, p.eps)))
            rows.append(_risk_row(p.tau, t, c.label, "quad", quad_risk_gaussian(mu, sd, p.eps)))
            if p.beta is not None:
                rows.append(
                    _risk_row(p.tau, t, c.label, "exp", exp_risk_gaussian(mu, sd, p.eps, p.beta))
                )
    return rows


def cmd_analyze(cfg: RunConfig) -> Report:
    """Steady risks of every observable, transient risks at ``cfg.times`` and,
    on request, the joint risk document."""
    s = graph_spectrum(cfg.graph)
    check_stable(s, cfg.params.tau)
    C = cfg.observable_set
    log.info(f"Analyzing {len(C)} observables at tau={cfg.params.tau}")
    sigmas = steady_sigmas(s, C, cfg.params)
    report = Report("analyze", risk_report_columns, _steady_rows(cfg, s, sigmas))
    if cfg.times:
        report.rows.extend(_transient_rows(cfg, s))
    if cfg.joint:
        if not C.in_kernel:
            log.warning("Skipping the joint report: some observables are unbounded")
        else:
            out = steady_covariance(s, C, cfg.params)
            report.documents["joint"] = joint_risk_report(
                out, cfg.params.eps, cfg.split, cfg.params.beta, cfg.samples, cfg.seed
            )
    return report


def connectivity(c: Observable, g: WeightedGraph, s: Spectrum) -> float:
    """Weighted degree for single-node observables, effective resistance for pairs."""
    if c.kind in (ObservableKind.DEVIATION, ObservableKind.NEIGHBOR):
        return float(g.weighted_degrees()[int(np.argmax(c.vector))])
    if c.kind == ObservableKind.PAIRWISE:
        i, j = int(np.argmax(c.vector)) + 1, int(np.argmin(c.vector)) + 1
        return pairwise_effective_resistance(s, i, j)
    return math.nan


def _measure(cfg: RunConfig) -> Callable[[float], float]:
    p = cfg.params
    if cfg.measure == "var":
        p.require_probability()
        scale = _SQRT2 * s_epsilon(p.eps, 0.0)
        return lambda sigma: scale * sigma
    if cfg.measure == "exp":
        beta = p.require_beta()
        return lambda sigma: exp_risk_from_sigma(sigma, p.eps, beta)
    return lambda sigma: quad_risk_from_sigma(sigma, p.eps)


def _class_mean(values: np.ndarray, mask: np.ndarray) -> Optional[float]:
    picked = values[mask & ~np.isnan(values)]
    return float(picked.mean()) if len(picked) else None


def cmd_sweep(cfg: RunConfig) -> Report:
    """Safe/marginal/unsafe counts along the delay grid with the mean
    connectivity of each class."""
    if cfg.tau_grid is None:
        raise ConfigError("sweep needs --tau-grid")
    s = graph_spectrum(cfg.graph)
    C = cfg.observable_set
    links = np.array([connectivity(c, cfg.graph, s) for c in C])
    measure = _measure(cfg)
    log.info(f"Sweeping {len(cfg.tau_grid)} delays over {len(C)} observables")

    rows, ranks = [], []
    for tau in cfg.tau_grid:
        sigmas = steady_sigmas(s, C, cfg.params.with_tau(float(tau)))
        classes = [RiskValue(measure(float(sd))).classification for sd in sigmas]
        rank = np.array([_RANK[k] for k in classes])
        ranks.append(rank)
        row = {"tau": float(tau)}
        for klass in Classification:
            mask = rank == _RANK[klass]
            row[klass.value] = int(mask.sum())
            row[f"{klass.value}_connectivity"] = _class_mean(links, mask)
        rows.append(row)

    staircase = bool(np.all(np.diff(np.array(ranks), axis=0) >= 0))
    if not staircase:
        log.warning("An observable moved to a safer class as the delay grew")
    return Report("sweep", sweep_columns, rows, checks={"staircase": staircase})


def cmd_tradeoff(cfg: RunConfig) -> Report:
    p = cfg.params
    scatter = tradeoff_scatter(
        n=cfg.nodes,
        count=cfg.count,
        tau=p.tau,
        eps=p.eps,
        seed=cfg.seed,
        b=p.b,
        edge_prob=cfg.edge_prob,
    )
    violations = scatter.violations
    if violations:
        log.error(f"{violations} of {cfg.count} graphs violate a bound")
    curves = Report("tradeoff_curves", tradeoff_curve_columns, scatter.curves.to_dict("records"))
    return Report(
        "tradeoff",
        tradeoff_columns,
        scatter.points.to_dict("records"),
        related=[curves],
        checks={"violations": violations},
    )


def cmd_table(cfg: RunConfig) -> Report:
    kind = cfg.topology
    p = cfg.params
    profile = topology_profile(kind, p)
    deviation = cross_validate(kind, p)
    ordering = ordering_checks(kind, p)
    log.info(f"{kind}: closed form vs spectral pipeline deviation {deviation:.3e}")
    return Report(
        "table",
        topology_columns,
        profile.rows(),
        documents={
            "ordering": {
                "crossing": ordering.crossing,
                "small_delay": ordering.small_delay,
                "near_critical": ordering.near_critical,
                "checks": ordering.checks,
            }
        },
        checks={"cross_validation": deviation, "ordering": ordering.passed},
    )


def _default_times(s: Spectrum, tau: float) -> tuple:
    span = 10.0 / s.algebraic_connectivity
    return tuple(float(t) for t in np.linspace(span / 10.0, span, 10))


def cmd_simulate(cfg: RunConfig) -> Report:
    """Empirical moments from the simulator next to the closed forms, with
    z-scores of the variance differences."""
    g = cfg.graph
    p = cfg.params
    s = graph_spectrum(g)
    C = cfg.observable_set
    h = cfg.history_function()
    times = cfg.times or _default_times(s, p.tau)
    sim = SimConfig(
        trajectories=cfg.trajectories,
        base_seed=cfg.seed,
        times=times,
        pool_per_trajectory=cfg.pool,
        dt=cfg.dt,
        burn_in=cfg.burn_in,
    )
    stats = ensemble_stats(g, p, C, h, sim)

    rows = []
    for index, c in enumerate(C):
        means = np.atleast_1d(transient_mean(s, c, h, stats.times))
        variances = np.atleast_1d(transient_variance(s, c, p.b, p.tau, stats.times))
        for k, t in enumerate(stats.times):
            rows.append(
                _comparison_row(
                    float(t), c.label, means[k], stats.mean[k, index], variances[k],
                    stats.variance[k, index], stats.variance_se[k, index],
                )
            )
    if cfg.pool:
        pool_variance, pool_se = stats.pool_variance()
        pool_mean = stats.pool.mean(axis=0)
        for index, (c, sigma) in enumerate(zip(C, steady_sigmas(s, C, p))):
            if math.isfinite(sigma):
                rows.append(
                    _comparison_row(
                        None, c.label, 0.0, pool_mean[index], float(sigma) ** 2,
                        pool_variance[index], pool_se[index],
                    )
                )

    scores = np.array([abs(r["z_score"]) for r in rows if r["z_score"] is not None])
    within = float(np.mean(scores < 3.0)) if len(scores) else 1.0
    log.info(f"{100 * within:.1f}% of checkpoints within 3 standard errors")
    report = Report("simulate", simulation_columns, rows, checks={"within_3se": within})
    if cfg.dump_samples:
        report.related.append(
            Report(
                "samples",
                sample_columns,
                [
                    {"trajectory": m, "time": float(t), "obs_index": q, "value": float(value)}
                    for k, t in enumerate(stats.times)
                    for m in range(stats.trajectories)
                    for q, value in enumerate(stats.samples[k, m])
                ],
            )
        )
    return report


def _comparison_row(t, label, mean, empirical_mean, variance, empirical_variance, se) -> dict:
    return {
        "time": t,
        "observable": label,
        "analytic_mean": float(mean),
        "empirical_mean": float(empirical_mean),
        "analytic_variance": float(variance),
        "empirical_variance": float(empirical_variance),
        "variance_se": float(se),
        "z_score": float((empirical_variance - variance) / se) if se > 0 else None,
    }


def _finite(values: np.ndarray) -> List[Optional[float]]:
    return [float(v) if math.isfinite(v) else None for v in values]


def cmd_limits(cfg: RunConfig) -> Report:
    """Per-observable hard limits and tradeoff floors, and the vector forms."""
    s = graph_spectrum(cfg.graph)
    p = cfg.params
    check_stable(s, p.tau)
    C = cfg.observable_set
    rows = []
    for c in C:
        if not c.in_kernel:
            log.warning(f"Skipping {c.label}: its steady risk is unbounded")
            continue
        rows.append(limit_report(s, c, p).as_row())
    hard = vector_hard_limits(C, p)
    documents = {
        "vector": {
            "labels": C.labels,
            "tradeoff_floor": _finite(vector_tradeoff(C, p, s.n)) if p.eps < 1 else None,
            "sigma_star": _finite(hard.sigma_star),
            "var_hard_limit": _finite(hard.var),
            "quad_hard_limit": _finite(hard.quad),
            "exp_sum_floor": hard.exp_sum,
        }
    }
    passes = all(row["passes"] for row in rows)
    return Report("limits", limit_columns, rows, documents=documents, checks={"passes": passes})


COMMANDS: Dict[str, Callable[[RunConfig], Report]] = {
    "analyze": cmd_analyze,
    "sweep": cmd_sweep,
    "tradeoff": cmd_tradeoff,
    "table": cmd_table,
    "simulate": cmd_simulate,
    "limits": cmd_limits,
}


def run_command(cfg: RunConfig) -> Report:
    return COMMANDS[cfg.command](cfg)
