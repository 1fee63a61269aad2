"""Scalar risk measures of a single observable.

Value-at-risk (risk in probability) and risk in expectation with quadratic or
exponential utility, transient and steady state. A risk that has no finite
solution is reported as an infinite ``RiskValue``, never as an error.
"""

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import linalg

from .dde import HistoryFunction, mode_energies, transient_mean, transient_variance
from .errors import ConfigError
from .graph import Spectrum, check_stable, spectrum as laplacian_spectrum, stability_margin
from .observables import Observable, ObservableSet
from .special import (
    folded_moments,
    log_half_kappa,
    risk_aversion_factor,
    s_epsilon,
)

log = logging.getLogger(__name__)

_SQRT2 = math.sqrt(2.0)
_FOLD = 1.0 - 2.0 / math.pi


class Classification(Enum):
    SAFE = "safe"
    MARGINAL = "marginal"
    UNSAFE = "unsafe"


@dataclass(frozen=True)
class RiskValue:
    value: float

    @classmethod
    def infinite(cls) -> "RiskValue":
        return cls(math.inf)

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.value)

    @property
    def classification(self) -> Classification:
        if not self.is_finite:
            return Classification.UNSAFE
        return Classification.SAFE if self.value < 0 else Classification.MARGINAL

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class RiskParams:
    """eps is a probability for value-at-risk and a utility threshold for
    risk in expectation; the same number serves both."""

    eps: float
    b: float = 1.0
    tau: float = 0.0
    beta: Optional[float] = None

    def __post_init__(self):
        if not self.eps > 0:
            raise ConfigError(f"eps must be positive, got {self.eps}")
        if self.b < 0:
            raise ConfigError(f"b must be non-negative, got {self.b}")
        if self.tau < 0:
            raise ConfigError(f"tau must be non-negative, got {self.tau}")
        if self.beta is not None and not self.beta > 0:
            raise ConfigError(f"beta must be positive, got {self.beta}")

    def with_tau(self, tau: float) -> "RiskParams":
        return replace(self, tau=tau)

    def require_probability(self) -> None:
        if not self.eps < 1:
            raise ConfigError(f"Value-at-risk needs eps in (0, 1), got {self.eps}")

    def require_beta(self) -> float:
        if self.beta is None:
            raise ConfigError("Exponential risk needs beta")
        return self.beta


# Gaussian building blocks, y ~ N(mu, sigma^2)


def var_risk_gaussian(mu: float, sigma: float, eps: float) -> float:
    """sqrt(2) sigma S_eps(|mu| / (sqrt(2) sigma)) + |mu|; |mu| when sigma = 0."""
    mu = abs(mu)
    if not math.isfinite(sigma):
        return math.inf
    if sigma == 0.0:
        return mu
    return _SQRT2 * sigma * s_epsilon(eps, mu / (_SQRT2 * sigma)) + mu


def quad_risk_gaussian(mu: float, sigma: float, eps: float) -> float:
    """mu_|y| - sqrt(eps^2 - sigma_|y|^2), infinite when eps < sigma_|y|."""
    if not math.isfinite(sigma):
        return math.inf
    moments = folded_moments(mu, sigma)
    discriminant = eps**2 - moments.variance
    if discriminant < 0:
        return math.inf
    return moments.mean - math.sqrt(discriminant)


def exp_risk_gaussian(mu: float, sigma: float, eps: float, beta: float) -> float:
    """beta sigma^2 / 2 + ln(kappa / 2) / beta - eps; |mu| - eps when sigma = 0."""
    if not math.isfinite(sigma):
        return math.inf
    if sigma == 0.0:
        return abs(mu) - eps
    value = beta * sigma**2 / 2.0 + log_half_kappa(mu, sigma, beta) / beta - eps
    if not math.isfinite(value):
        log.warning(f"Exponential risk overflowed for mu={mu}, sigma={sigma}, beta={beta}")
        return math.inf
    return value


def quad_risk_from_sigma(sigma: float, eps: float) -> float:
    """Steady quadratic risk sqrt(2/pi) sigma - sqrt(eps^2 - (1 - 2/pi) sigma^2)."""
    if not math.isfinite(sigma):
        return math.inf
    discriminant = eps**2 - _FOLD * sigma**2
    if discriminant < 0:
        return math.inf
    return math.sqrt(2.0 / math.pi) * sigma - math.sqrt(discriminant)


def exp_risk_from_sigma(sigma: float, eps: float, beta: float) -> float:
    """Steady exponential risk, erf(beta sigma / sqrt(2)) form."""
    if not math.isfinite(sigma):
        return math.inf
    return (
        beta * sigma**2 / 2.0
        + math.log1p(math.erf(beta * sigma / _SQRT2)) / beta
        - eps
    )


def exp_risk_from_sigma_alternate(sigma: float, eps: float, beta: float) -> float:
    """The erf(beta sigma / 2) variant, reported next to the main form in verbose output."""
    if not math.isfinite(sigma):
        return math.inf
    return beta * sigma**2 / 2.0 + math.log1p(math.erf(beta * sigma / 2.0)) / beta - eps


# Steady state


def steady_variance(s: Spectrum, c: Observable, p: RiskParams) -> float:
    """b^2 sum_{k>=2} (c_k^Q)^2 tau f(lambda_k tau); infinite outside the kernel."""
    check_stable(s, p.tau)
    if not c.in_kernel:
        log.debug(f"Observable {c.label} sees the consensus mode; steady variance is unbounded")
        return math.inf
    coefficients = c.coefficients(s)
    return float(p.b**2 * np.sum(coefficients[1:] ** 2 * mode_energies(s.eigenvalues, p.tau)))


def steady_sigma(s: Spectrum, c: Observable, p: RiskParams) -> float:
    return math.sqrt(steady_variance(s, c, p))


def steady_sigmas(s: Spectrum, C: ObservableSet, p: RiskParams) -> np.ndarray:
    """steady_sigma for every row at once; infinite for rows outside the kernel."""
    check_stable(s, p.tau)
    coefficients = C.coefficient_matrix(s)
    variances = p.b**2 * (coefficients[:, 1:] ** 2) @ mode_energies(s.eigenvalues, p.tau)
    bounded = np.array([c.in_kernel for c in C])
    return np.where(bounded, np.sqrt(variances), math.inf)


def steady_sigma_trace(L: np.ndarray, c: Observable, p: RiskParams) -> float:
    """Same quantity from (b^2/2) Tr[c c^T L^+ cos(tau L) (M_n - sin(tau L))^+],
    built with matrix functions instead of the eigenbasis."""
    L = np.asarray(L, dtype=float)
    check_stable(laplacian_spectrum(L), p.tau)
    if not c.in_kernel:
        return math.inf
    n = L.shape[0]
    centering = np.eye(n) - np.full((n, n), 1.0 / n)
    kernel = np.linalg.pinv(L, hermitian=True)
    if p.tau > 0:
        kernel = (
            kernel
            @ linalg.cosm(p.tau * L)
            @ np.linalg.pinv(centering - linalg.sinm(p.tau * L), hermitian=True)
        )
    c_vec = c.vector
    variance = 0.5 * p.b**2 * float(c_vec @ kernel @ c_vec)
    return math.sqrt(max(variance, 0.0))


def var_risk_steady(s: Spectrum, c: Observable, p: RiskParams) -> RiskValue:
    """sqrt(2) S_eps(0) sigma_bar."""
    p.require_probability()
    sigma = steady_sigma(s, c, p)
    if not math.isfinite(sigma):
        return RiskValue.infinite()
    return RiskValue(_SQRT2 * s_epsilon(p.eps, 0.0) * sigma)


def quad_risk_steady(s: Spectrum, c: Observable, p: RiskParams) -> RiskValue:
    return RiskValue(quad_risk_from_sigma(steady_sigma(s, c, p), p.eps))


def exp_risk_steady(s: Spectrum, c: Observable, p: RiskParams) -> RiskValue:
    return RiskValue(exp_risk_from_sigma(steady_sigma(s, c, p), p.eps, p.require_beta()))


def exp_risk_steady_aversion(s: Spectrum, c: Observable, p: RiskParams, theta: float) -> RiskValue:
    """Exponential risk with beta = theta / sigma_bar, which collapses to
    kappa(theta) sigma_bar - eps."""
    sigma = steady_sigma(s, c, p)
    if not math.isfinite(sigma):
        return RiskValue.infinite()
    return RiskValue(risk_aversion_factor(theta) * sigma - p.eps)


# Transient


def _transient_moments(s, c, h: HistoryFunction, p: RiskParams, t):
    if abs(h.tau - p.tau) > 1e-12:
        raise ConfigError(f"History covers [-{h.tau}, 0] but tau={p.tau}")
    check_stable(s, p.tau)
    times = np.atleast_1d(np.asarray(t, dtype=float))
    means = np.atleast_1d(transient_mean(s, c, h, times))
    variances = np.atleast_1d(transient_variance(s, c, p.b, p.tau, times))
    return times, means, np.sqrt(np.maximum(variances, 0.0))


def _per_time(values: List[RiskValue], t):
    return values[0] if np.ndim(t) == 0 else values


def var_risk_transient(s: Spectrum, c: Observable, h: HistoryFunction, p: RiskParams, t):
    p.require_probability()
    _, means, sigmas = _transient_moments(s, c, h, p, t)
    values = [RiskValue(var_risk_gaussian(m, sd, p.eps)) for m, sd in zip(means, sigmas)]
    return _per_time(values, t)


def quad_risk_transient(s: Spectrum, c: Observable, h: HistoryFunction, p: RiskParams, t):
    _, means, sigmas = _transient_moments(s, c, h, p, t)
    values = [RiskValue(quad_risk_gaussian(m, sd, p.eps)) for m, sd in zip(means, sigmas)]
    return _per_time(values, t)


def exp_risk_transient(s: Spectrum, c: Observable, h: HistoryFunction, p: RiskParams, t):
    beta = p.require_beta()
    _, means, sigmas = _transient_moments(s, c, h, p, t)
    values = [RiskValue(exp_risk_gaussian(m, sd, p.eps, beta)) for m, sd in zip(means, sigmas)]
    return _per_time(values, t)


# Delay dependence


def steady_variance_derivative(s: Spectrum, c: Observable, p: RiskParams) -> float:
    """d sigma_bar^2 / d tau = (b^2/2) sum_{k>=2} (c_k^Q)^2 / (1 - sin(lambda_k tau))."""
    check_stable(s, p.tau)
    if not c.in_kernel:
        return math.inf
    coefficients = c.coefficients(s)
    return float(
        0.5 * p.b**2 * np.sum(coefficients[1:] ** 2 / (1.0 - np.sin(s.eigenvalues[1:] * p.tau)))
    )


def _strictly_increasing(values: Sequence[float]) -> bool:
    previous = -math.inf
    for value in values:
        if math.isinf(previous) and previous > 0:
            if math.isfinite(value):
                return False
            continue
        if math.isfinite(value) and not value > previous:
            return False
        previous = value
    return True


@dataclass(frozen=True)
class MonotonicityReport:
    table: pd.DataFrame
    increasing: dict
    max_derivative_error: float

    @property
    def passed(self) -> bool:
        return all(self.increasing.values())


def delay_monotonicity_report(
    s: Spectrum, c: Observable, p: RiskParams, tau_grid: Sequence[float]
) -> MonotonicityReport:
    """Steady risks along a delay grid plus the analytic variance slope checked
    against central differences."""
    tau_max = stability_margin(s)
    rows = []
    for tau in tau_grid:
        params = p.with_tau(float(tau))
        check_stable(s, params.tau)
        sigma = steady_sigma(s, c, params)
        slope = steady_variance_derivative(s, c, params)
        step = 1e-4 * min(tau_max - tau, tau_max) if tau > 0 else 0.0
        if step > 0 and tau - step > 0:
            forward = steady_variance(s, c, params.with_tau(tau + step))
            backward = steady_variance(s, c, params.with_tau(tau - step))
            finite_difference = (forward - backward) / (2.0 * step)
        else:
            finite_difference = math.nan
        rows.append(
            {
                "tau": float(tau),
                "sigma2": sigma**2,
                "var": _SQRT2 * s_epsilon(p.eps, 0.0) * sigma if p.eps < 1 else math.nan,
                "quad": quad_risk_from_sigma(sigma, p.eps),
                "exp": exp_risk_from_sigma(sigma, p.eps, p.beta) if p.beta else math.nan,
                "dsigma2_dtau": slope,
                "finite_difference": finite_difference,
            }
        )
    table = pd.DataFrame(rows)
    relative = (
        (table["dsigma2_dtau"] - table["finite_difference"]).abs() / table["dsigma2_dtau"].abs()
    ).dropna()
    increasing = {
        column: _strictly_increasing(table[column].tolist())
        for column in ("sigma2", "var", "quad", "exp")
        if not table[column].isna().all()
    }
    return MonotonicityReport(
        table=table,
        increasing=increasing,
        max_derivative_error=float(relative.max()) if len(relative) else 0.0,
    )
