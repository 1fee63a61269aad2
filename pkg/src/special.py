"""Scalar special functions behind the closed-form risk formulas.

Everything here is a pure function of floats. Error functions come from
``scipy.special``; roots are bracketed and refined with ``scipy.optimize``.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import optimize, special

from .config import (
    bisection_max_iterations,
    bisection_tolerance,
    golden_section_tolerance,
    half_pi,
)
from .errors import ConfigError, NumericalError

log = logging.getLogger(__name__)

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class FoldedMoments:
    mean: float
    variance: float


def erf(x):
    return special.erf(x)


def erf_inv(p: float) -> float:
    """Inverse error function on the open interval (-1, 1).

    Raises:
        ConfigError: |p| >= 1
    """
    if not -1.0 < p < 1.0:
        raise ConfigError(f"erf_inv is defined on (-1, 1), got {p}")
    return float(special.erfinv(p))


def f_energy(x):
    """cos(x) / (2x(1 - sin x)), the steady energy of a unit mode at x = lambda * tau.

    Accepts scalars or arrays; every entry must lie in (0, pi/2).
    """
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr <= 0.0) or np.any(x_arr >= half_pi):
        raise ConfigError(f"f_energy is defined on (0, pi/2), got {x}")
    value = np.cos(x_arr) / (2.0 * x_arr * (1.0 - np.sin(x_arr)))
    return float(value) if value.ndim == 0 else value


def _bisect(func, lo: float, hi: float) -> float:
    return optimize.bisect(
        func,
        lo,
        hi,
        xtol=bisection_tolerance,
        maxiter=bisection_max_iterations,
    )


@lru_cache(maxsize=None)
def z_plus() -> float:
    """Positive root of cos(z) = z; the minimiser of f_energy."""
    return _bisect(lambda z: math.cos(z) - z, 0.0, 1.0)


def s_epsilon(eps: float, alpha: float) -> float:
    """Smallest delta >= 0 with (erf(delta) + erf(delta + 2 alpha)) / 2 >= 1 - eps."""
    if not 0.0 < eps < 1.0:
        raise ConfigError(f"eps must lie in (0, 1), got {eps}")
    if alpha < 0:
        raise ConfigError(f"alpha must be non-negative, got {alpha}")

    def excess(delta):
        return 0.5 * (math.erf(delta) + math.erf(delta + 2.0 * alpha)) - (1.0 - eps)

    if excess(0.0) >= 0.0:
        return 0.0
    hi = erf_inv(1.0 - eps)
    if alpha == 0.0:
        return hi
    return _bisect(excess, 0.0, hi)


def folded_moments(mu: float, sigma: float) -> FoldedMoments:
    """Mean and variance of |y| for y ~ N(mu, sigma^2)."""
    if sigma < 0:
        raise ConfigError(f"sigma must be non-negative, got {sigma}")
    if sigma == 0.0:
        return FoldedMoments(mean=abs(mu), variance=0.0)
    mean = sigma * math.sqrt(2.0 / math.pi) * math.exp(
        -(mu**2) / (2.0 * sigma**2)
    ) + mu * math.erf(mu / (_SQRT2 * sigma))
    variance = max(mu**2 + sigma**2 - mean**2, 0.0)
    return FoldedMoments(mean=mean, variance=variance)


def log_half_kappa(mu: float, sigma: float, beta: float) -> float:
    """ln(kappa(mu, sigma, beta) / 2) evaluated without forming exp(beta * mu)."""
    if sigma <= 0 or beta <= 0:
        raise ConfigError(f"sigma and beta must be positive, got {sigma}, {beta}")
    # 1 + erf(x) = 2 Phi(sqrt(2) x)
    upper = beta * mu + special.log_ndtr(mu / sigma + beta * sigma)
    lower = -beta * mu + special.log_ndtr(-mu / sigma + beta * sigma)
    return float(np.logaddexp(upper, lower))


def kappa_exp(mu: float, sigma: float, beta: float) -> float:
    """kappa with E[exp(beta |y|)] = exp(beta^2 sigma^2 / 2) * kappa / 2.

    Raises:
        NumericalError: kappa does not fit in a double
    """
    log_kappa = math.log(2.0) + log_half_kappa(mu, sigma, beta)
    if log_kappa > math.log(np.finfo(float).max):
        raise NumericalError(
            f"kappa overflows for mu={mu}, sigma={sigma}, beta={beta} (ln kappa={log_kappa:.1f})"
        )
    return math.exp(log_kappa)


def risk_aversion_factor(theta: float) -> float:
    """Steady exponential risk per unit sigma when beta = theta / sigma."""
    if theta <= 0:
        raise ConfigError(f"theta must be positive, got {theta}")
    return theta / 2.0 + math.log1p(math.erf(theta / _SQRT2)) / theta


def p_k(x, k: int, n: int):
    return (
        ((k - 1) + 2.0 * (n - k) * x / math.pi)
        * np.cos(x)
        / (x**2 * (1.0 - np.sin(x)))
    )


@lru_cache(maxsize=None)
def p_k_minimum(k: int, n: int) -> float:
    """Minimum of p_k over (0, pi/2), found by bounded golden-section/Brent search."""
    if not 2 <= k <= n:
        raise ConfigError(f"p_k needs 2 <= k <= n, got k={k}, n={n}")
    edge = 1e-9
    result = optimize.minimize_scalar(
        lambda x: p_k(x, k, n),
        bounds=(edge, half_pi - edge),
        method="bounded",
        options={"xatol": golden_section_tolerance, "maxiter": 500},
    )
    if not result.success:
        raise NumericalError(f"p_{k} minimisation failed for n={n}: {result.message}")
    return float(result.fun)


@lru_cache(maxsize=None)
def p_dagger(n: int) -> float:
    """min over k = 2..n of p_k_minimum(k, n); independent of the delay."""
    if n < 2:
        raise ConfigError(f"p_dagger needs n >= 2, got {n}")
    return min(p_k_minimum(k, n) for k in range(2, n + 1))
