"""Delay-induced hard limits and risk/connectivity tradeoffs.

Every check in ``LimitReport`` is an inequality that must hold for any stable
network; a failing flag means a bug, not an unlucky graph.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Dict

import numpy as np
import pandas as pd

from .errors import ConfigError
from .graph import (
    Spectrum,
    check_stable,
    graph_spectrum,
    random_connected_graph,
    total_effective_resistance,
)
from .config import half_pi
from .observables import Observable, ObservableSet, custom
from .risk import (
    RiskParams,
    exp_risk_from_sigma,
    quad_risk_from_sigma,
    steady_sigma,
)
from .special import erf, f_energy, p_dagger, s_epsilon, z_plus

log = logging.getLogger(__name__)

_SQRT2 = math.sqrt(2.0)
_FOLD = 1.0 - 2.0 / math.pi
_RELATIVE_SLACK = 1e-9


def _one_minus_sin_z() -> float:
    return 1.0 - math.sin(z_plus())


def resistance_floor(n: int, tau: float) -> float:
    """2n(n-1)tau/pi; every graph stable at tau has larger total effective resistance."""
    return 2.0 * n * (n - 1) * tau / math.pi


def sigma_star(c: Observable, p: RiskParams) -> float:
    """Least achievable steady standard deviation of c at delay tau."""
    return p.b * c.norm * math.sqrt(p.tau / (2.0 * _one_minus_sin_z()))


def var_hard_limit(c: Observable, p: RiskParams) -> float:
    """kappa_* sqrt(tau) with kappa_* = |c| b S_eps(0) / sqrt(1 - sin z+)."""
    p.require_probability()
    kappa = c.norm * p.b * s_epsilon(p.eps, 0.0) / math.sqrt(_one_minus_sin_z())
    return kappa * math.sqrt(p.tau)


def quad_hard_limit(c: Observable, p: RiskParams) -> float:
    return quad_risk_from_sigma(sigma_star(c, p), p.eps)


def exp_hard_limit(c: Observable, p: RiskParams) -> float:
    return exp_risk_from_sigma(sigma_star(c, p), p.eps, p.require_beta())


def _rho_star(c: Observable, p: RiskParams, n: int) -> float:
    """Floor on sigma_bar * sqrt(Xi_G)."""
    if n < 2:
        raise ConfigError(f"Tradeoffs need n >= 2, got {n}")
    return c.norm * p.b * p.tau * math.sqrt(n * p_dagger(n) / 2.0)


def var_tradeoff_floor(c: Observable, p: RiskParams, n: int) -> float:
    """theta_* tau sqrt(n), theta_* = |c| b S_eps(0) sqrt(p_dagger)."""
    p.require_probability()
    return _SQRT2 * s_epsilon(p.eps, 0.0) * _rho_star(c, p, n)


def quad_tradeoff_delta(c: Observable, p: RiskParams, n: int) -> float:
    rho = _rho_star(c, p, n)
    return (math.sqrt(2.0 / math.pi) + _FOLD * sigma_star(c, p) / (2.0 * p.eps)) * rho


def exp_tradeoff_delta(c: Observable, p: RiskParams, n: int) -> float:
    beta = p.require_beta()
    rho = _rho_star(c, p, n)
    sigma = sigma_star(c, p)
    return beta * sigma * rho / 2.0 + float(erf(beta * sigma / _SQRT2)) / (
        2.0 * beta
    ) * math.sqrt(resistance_floor(n, p.tau))


def vector_tradeoff(C: ObservableSet, p: RiskParams, n: int) -> np.ndarray:
    return np.array([var_tradeoff_floor(c, p, n) for c in C])


@dataclass(frozen=True, eq=False)
class VectorHardLimits:
    sigma_star: np.ndarray
    var: np.ndarray
    quad: np.ndarray
    exp_sum: float


def vector_hard_limits(C: ObservableSet, p: RiskParams) -> VectorHardLimits:
    """Per-coordinate value-at-risk and quadratic floors, and the floor on
    the sum of exponential thresholds."""
    sigmas = np.array([sigma_star(c, p) for c in C])
    radicand = p.eps**2 - _FOLD * float(np.sum(sigmas**2))
    if radicand < 0:
        quad = np.full(len(sigmas), math.inf)
    else:
        quad = math.sqrt(2.0 / math.pi) * sigmas - math.sqrt(radicand)
    var = (
        np.array([var_hard_limit(c, p) for c in C]) if p.eps < 1 else np.full(len(sigmas), np.nan)
    )
    return VectorHardLimits(
        sigma_star=sigmas,
        var=var,
        quad=quad,
        exp_sum=math.sqrt(2.0 / math.pi) * float(np.sum(sigmas)) - p.eps,
    )


def _at_least(value: float, floor: float) -> bool:
    if math.isinf(value) and value > 0:
        return True
    return value >= floor - _RELATIVE_SLACK * max(1.0, abs(floor))


def _above(value: float, floor: float) -> bool:
    if math.isinf(value) and value > 0:
        return True
    return value > floor


@dataclass
class LimitReport:
    observable: str
    tau: float
    resistance: float
    resistance_floor: float
    var_risk: float
    var_hard_limit: float
    sigma: float
    sigma_star: float
    quad_risk: float
    quad_hard_limit: float
    exp_risk: float = math.nan
    exp_hard_limit: float = math.nan
    var_tradeoff: float = math.nan
    var_tradeoff_floor: float = math.nan
    quad_tradeoff: float = math.nan
    quad_tradeoff_delta: float = math.nan
    exp_tradeoff: float = math.nan
    exp_tradeoff_delta: float = math.nan
    flags: Dict[str, bool] = field(default_factory=dict)

    @property
    def passes(self) -> bool:
        return all(self.flags.values())

    def as_row(self) -> dict:
        row = asdict(self)
        row.pop("flags")
        row["passes"] = self.passes
        return row


def limit_report(s: Spectrum, c: Observable, p: RiskParams) -> LimitReport:
    """Actual risks of c next to every floor that applies at p."""
    check_stable(s, p.tau)
    n = s.n
    resistance = total_effective_resistance(s)
    sigma = steady_sigma(s, c, p)
    sqrt_resistance = math.sqrt(resistance)
    var_risk = _SQRT2 * s_epsilon(p.eps, 0.0) * sigma
    quad_risk = quad_risk_from_sigma(sigma, p.eps)

    report = LimitReport(
        observable=c.label,
        tau=p.tau,
        resistance=resistance,
        resistance_floor=resistance_floor(n, p.tau),
        var_risk=var_risk,
        var_hard_limit=var_hard_limit(c, p),
        sigma=sigma,
        sigma_star=sigma_star(c, p),
        quad_risk=quad_risk,
        quad_hard_limit=quad_hard_limit(c, p),
        var_tradeoff=var_risk * sqrt_resistance,
        var_tradeoff_floor=var_tradeoff_floor(c, p, n),
        quad_tradeoff=(quad_risk + p.eps) * sqrt_resistance,
        quad_tradeoff_delta=quad_tradeoff_delta(c, p, n),
    )
    report.flags = {
        "resistance": resistance > report.resistance_floor,
        "sigma": _at_least(sigma, report.sigma_star),
        "var_hard": _at_least(var_risk, report.var_hard_limit),
        "quad_hard": _at_least(quad_risk, report.quad_hard_limit),
        "var_tradeoff": _above(report.var_tradeoff, report.var_tradeoff_floor),
        "quad_tradeoff": _above(report.quad_tradeoff, report.quad_tradeoff_delta),
    }
    if p.beta is not None:
        report.exp_risk = exp_risk_from_sigma(sigma, p.eps, p.beta)
        report.exp_hard_limit = exp_hard_limit(c, p)
        report.exp_tradeoff = (report.exp_risk + p.eps) * sqrt_resistance
        report.exp_tradeoff_delta = exp_tradeoff_delta(c, p, n)
        report.flags["exp_hard"] = _at_least(report.exp_risk, report.exp_hard_limit)
        report.flags["exp_tradeoff"] = _above(report.exp_tradeoff, report.exp_tradeoff_delta)
    if not report.passes:
        failed = [name for name, ok in report.flags.items() if not ok]
        log.error(f"Observable {c.label} violates {failed} at tau={p.tau}")
    return report


def random_kernel_observable(n: int, rng: np.random.Generator, label: str = "c") -> Observable:
    """Unit vector orthogonal to the all-ones vector with a random direction."""
    z = rng.standard_normal(n)
    z -= z.mean()
    return custom(z / np.linalg.norm(z), label)


@dataclass(frozen=True, eq=False)
class TradeoffScatter:
    points: pd.DataFrame
    curves: pd.DataFrame

    @property
    def violations(self) -> int:
        return int((~(self.points["passes_hard"] & self.points["passes_tradeoff"])).sum())


def complete_family_curve(n: int, tau: float, b: float = 1.0, points: int = 200) -> pd.DataFrame:
    """Complete graphs with lambda tau sweeping (0, pi/2): the curve that meets
    the hard limit at lambda tau = z+."""
    x = np.linspace(0.0, half_pi, points + 2)[1:-1]
    sqrt_resistance = np.sqrt(n * (n - 1) * tau / x)
    risk = b * np.sqrt(tau * f_energy(x))
    return pd.DataFrame({"curve": "complete", "sqrt_resistance": sqrt_resistance, "risk": risk})


def tradeoff_scatter(
    n: int,
    count: int,
    tau: float,
    eps: float,
    seed: int,
    b: float = 1.0,
    edge_prob: float = 0.5,
    weight_range=(0.1, 1.0),
    include_family: bool = True,
) -> TradeoffScatter:
    """Random stable graphs with random unit observables, each point being
    (sqrt(Xi_G), R_eps / (sqrt(2) S_eps(0))), plus the bounding curves."""
    if tau <= 0:
        raise ConfigError(f"The tradeoff scatter needs tau > 0, got {tau}")
    p = RiskParams(eps=eps, b=b, tau=tau)
    p.require_probability()
    scale = _SQRT2 * s_epsilon(eps, 0.0)
    unit = custom(np.concatenate([[1.0], -np.ones(n - 1) / (n - 1)]) / math.sqrt(n / (n - 1)))

    rows = []
    for index, child in enumerate(np.random.SeedSequence(seed).spawn(count)):
        rng = np.random.Generator(np.random.Philox(child))
        g = random_connected_graph(
            n, edge_prob, *weight_range, seed=int(rng.integers(2**32))
        )
        # random operating point strictly inside the stability region
        target = rng.uniform(0.05, 0.95) * half_pi
        g = g.scaled(target / (tau * graph_spectrum(g).lambda_max))
        s = graph_spectrum(g)
        c = random_kernel_observable(n, rng, label=f"c{index}")
        report = limit_report(s, c, p)
        rows.append(
            {
                "sqrt_resistance": math.sqrt(report.resistance),
                "risk": report.var_risk / scale,
                "passes_hard": report.flags["resistance"] and report.flags["var_hard"],
                "passes_tradeoff": report.flags["var_tradeoff"],
            }
        )
    points = pd.DataFrame(rows)

    lo = math.sqrt(resistance_floor(n, tau))
    hi = max(float(points["sqrt_resistance"].max()) if len(points) else lo, lo) * 1.5
    grid = np.linspace(lo, hi, 200)
    rho = _rho_star(unit, p, n)
    curves = [
        pd.DataFrame({"curve": "hard_limit", "sqrt_resistance": grid, "risk": sigma_star(unit, p)}),
        pd.DataFrame(
            {"curve": "resistance_floor", "sqrt_resistance": lo, "risk": [0.0, float(points["risk"].max()) if len(points) else 1.0]}
        ),
        pd.DataFrame({"curve": "tradeoff", "sqrt_resistance": grid, "risk": rho / grid}),
    ]
    if include_family:
        curves.append(complete_family_curve(n, tau, b))
    log.info(f"Tradeoff scatter: {count} graphs, n={n}, tau={tau}")
    return TradeoffScatter(points=points, curves=pd.concat(curves, ignore_index=True))
