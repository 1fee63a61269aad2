"""Risk of several observables at once.

All quantities act on the steady output covariance. Probability bounds are
closed form; the exponential sum and joint probabilities are Monte Carlo
estimates drawn in fixed-size blocks with per-block seeds, so the result does
not depend on how blocks are scheduled.
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence, Tuple

import numpy as np
from scipy import special

from .config import covariance_clamp, mc_block_size, mc_default_samples
from .errors import ConfigError, NumericalError
from .graph import Spectrum, check_stable
from .dde import mode_energies
from .observables import ObservableSet
from .risk import RiskParams, RiskValue, quad_risk_from_sigma
from .special import s_epsilon

log = logging.getLogger(__name__)

_SQRT2 = math.sqrt(2.0)
_FOLD = 1.0 - 2.0 / math.pi


@dataclass(frozen=True, eq=False)
class SteadyOutput:
    covariance: np.ndarray
    labels: Tuple[str, ...] = ()

    def __post_init__(self):
        covariance = np.atleast_2d(np.array(self.covariance, dtype=float))
        if covariance.shape[0] != covariance.shape[1]:
            raise ConfigError(f"Covariance must be square, got {covariance.shape}")
        if not np.allclose(covariance, covariance.T, atol=1e-9):
            raise ConfigError("Covariance is not symmetric")
        covariance = 0.5 * (covariance + covariance.T)
        covariance.setflags(write=False)
        object.__setattr__(self, "covariance", covariance)

    @property
    def q(self) -> int:
        return self.covariance.shape[0]

    @property
    def sigmas(self) -> np.ndarray:
        return np.sqrt(np.maximum(np.diag(self.covariance), 0.0))


@dataclass(frozen=True, eq=False)
class RiskBox:
    """Per-coordinate value-at-risk floor and the Bonferroni ceiling of a split."""

    lower: np.ndarray
    sigmas: np.ndarray
    eps: float

    def upper(self, split: Sequence[float]) -> np.ndarray:
        split = validate_split(split, self.eps, len(self.sigmas))
        return np.array(
            [_SQRT2 * s_epsilon(e, 0.0) * sd for e, sd in zip(split, self.sigmas)]
        )


@dataclass(frozen=True, eq=False)
class QuadRiskSphere:
    feasible: bool
    center: np.ndarray
    radius: float

    def membership(self, delta: Sequence[float], tol: float = 1e-8) -> bool:
        return membership(self, delta, tol)


@dataclass(frozen=True)
class MonteCarloEstimate:
    value: float
    std_error: float
    samples: int


def steady_covariance(s: Spectrum, C: ObservableSet, p: RiskParams) -> SteadyOutput:
    """b^2 sum_{k>=2} tau f(lambda_k tau) (C q_k)(C q_k)^T.

    Raises:
        ConfigError: some row sees the consensus mode, so the output is unbounded
    """
    check_stable(s, p.tau)
    if not C.in_kernel:
        raise ConfigError(
            "Steady output is unbounded: an observable row is not orthogonal to the all-ones vector"
        )
    coefficients = C.coefficient_matrix(s)[:, 1:]
    energies = mode_energies(s.eigenvalues, p.tau)
    covariance = p.b**2 * (coefficients * energies) @ coefficients.T
    return SteadyOutput(covariance=covariance, labels=tuple(C.labels))


def validate_split(split: Sequence[float], eps: float, q: int) -> np.ndarray:
    split = np.asarray(split, dtype=float)
    if split.shape != (q,):
        raise ConfigError(f"eps split needs {q} entries, got {split.size}")
    if np.any(split <= 0):
        raise ConfigError(f"eps split entries must be positive, got {split.tolist()}")
    if abs(split.sum() - eps) > 1e-9 * max(1.0, eps):
        raise ConfigError(f"eps split sums to {split.sum()}, expected {eps}")
    return split


def equal_split(eps: float, q: int) -> np.ndarray:
    return np.full(q, eps / q)


def probability_risk_bounds(
    out: SteadyOutput, eps: float, split: Optional[Sequence[float]] = None
) -> RiskBox:
    """Floor sqrt(2) S_eps(0) sigma_i; ceilings through ``RiskBox.upper``."""
    if split is not None:
        validate_split(split, eps, out.q)
    sigmas = out.sigmas
    return RiskBox(lower=_SQRT2 * s_epsilon(eps, 0.0) * sigmas, sigmas=sigmas, eps=eps)


def scalar_joint_var_bounds(out: SteadyOutput, eps: float) -> Tuple[float, float]:
    """Bracket of the smallest scalar delta with P(max_i |y_i| > delta) < eps."""
    sigma_max = float(out.sigmas.max())
    lo = _SQRT2 * s_epsilon(eps, 0.0) * sigma_max
    hi = _SQRT2 * s_epsilon(eps / out.q, 0.0) * sigma_max
    return lo, hi


def joint_quad_risk(out: SteadyOutput, eps: float) -> QuadRiskSphere:
    if not eps > 0:
        raise ConfigError(f"eps must be positive, got {eps}")
    sigmas = out.sigmas
    r = eps**2 - _FOLD * float(np.sum(sigmas**2))
    return QuadRiskSphere(
        feasible=r > 0,
        center=math.sqrt(2.0 / math.pi) * sigmas,
        radius=math.sqrt(r) if r > 0 else 0.0,
    )


def membership(sphere: QuadRiskSphere, delta: Sequence[float], tol: float = 1e-8) -> bool:
    """True when delta = center + z with z <= 0 and |z| = radius."""
    if not sphere.feasible:
        return False
    z = np.asarray(delta, dtype=float) - sphere.center
    return bool(np.all(z <= tol) and abs(np.linalg.norm(z) - sphere.radius) <= tol)


def quad_split(out: SteadyOutput, eps: float, weights: Optional[Sequence[float]] = None) -> np.ndarray:
    """Per-coordinate thresholds eps_i with sum eps_i^2 = eps^2.

    eps_i^2 = (1 - 2/pi) sigma_i^2 + w_i r; weights default to equal shares.
    """
    sphere = joint_quad_risk(out, eps)
    if not sphere.feasible:
        raise ConfigError(f"Quadratic joint risk is infeasible at eps={eps}")
    q = out.q
    weights = np.full(q, 1.0 / q) if weights is None else np.asarray(weights, dtype=float)
    if weights.shape != (q,) or np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
        raise ConfigError("Split weights must be non-negative and sum to 1")
    return np.sqrt(_FOLD * out.sigmas**2 + weights * sphere.radius**2)


def split_point(out: SteadyOutput, eps: float, weights: Optional[Sequence[float]] = None) -> np.ndarray:
    """Vector of scalar quadratic risks at the thresholds of ``quad_split``."""
    thresholds = quad_split(out, eps, weights)
    return np.array([quad_risk_from_sigma(sd, e) for sd, e in zip(out.sigmas, thresholds)])


def homogeneous_quad_joint(out: SteadyOutput, eps: float) -> RiskValue:
    """Common threshold for all coordinates of the quadratic joint risk."""
    sigmas = out.sigmas
    total = float(np.sum(sigmas))
    discriminant = eps**2 - float(np.sum(sigmas**2)) + (2.0 / math.pi) * total**2
    if discriminant <= 0:
        return RiskValue.infinite()
    return RiskValue(math.sqrt(2.0 / math.pi) * total - math.sqrt(discriminant))


def covariance_root(covariance: np.ndarray) -> np.ndarray:
    """Symmetric square root via the eigen decomposition; small negative
    eigenvalues are clamped to zero.

    Raises:
        NumericalError: an eigenvalue below -covariance_clamp
    """
    values, vectors = np.linalg.eigh(covariance)
    if values.min() < -covariance_clamp:
        raise NumericalError(
            f"Covariance is not positive semidefinite (eigenvalue {values.min():.3e})"
        )
    if values.min() < 0:
        log.warning(f"Clamped covariance eigenvalue {values.min():.3e} to zero")
    return (vectors * np.sqrt(np.clip(values, 0.0, None))) @ vectors.T


def _sample_blocks(out: SteadyOutput, samples: int, seed: int) -> Iterator[np.ndarray]:
    if samples < 1:
        raise ConfigError(f"Need at least one sample, got {samples}")
    root = covariance_root(out.covariance)
    blocks = math.ceil(samples / mc_block_size)
    for index, child in enumerate(np.random.SeedSequence(seed).spawn(blocks)):
        size = min(mc_block_size, samples - index * mc_block_size)
        rng = np.random.Generator(np.random.Philox(child))
        yield rng.standard_normal((size, out.q)) @ root


def mc_joint_probability(
    out: SteadyOutput, delta: Sequence[float], samples: int = mc_default_samples, seed: int = 1
) -> MonteCarloEstimate:
    """Fraction of draws of N(0, covariance) with |y| <= delta componentwise."""
    delta = np.broadcast_to(np.asarray(delta, dtype=float), (out.q,))
    hits = 0
    for block in _sample_blocks(out, samples, seed):
        hits += int(np.count_nonzero(np.all(np.abs(block) <= delta, axis=1)))
    p = hits / samples
    return MonteCarloEstimate(value=p, std_error=math.sqrt(p * (1.0 - p) / samples), samples=samples)


def exp_joint_sum(
    out: SteadyOutput,
    eps: float,
    beta: float,
    samples: int = mc_default_samples,
    seed: int = 1,
) -> MonteCarloEstimate:
    """sum_i delta_i = ln(E exp(beta sum_i |y_i|)) / beta - eps.

    ``std_error`` is the delta-method error of the log estimate divided by beta.
    """
    if not beta > 0:
        raise ConfigError(f"beta must be positive, got {beta}")
    exponents = np.concatenate(
        [beta * np.abs(block).sum(axis=1) for block in _sample_blocks(out, samples, seed)]
    )
    log_mean = float(special.logsumexp(exponents) - math.log(samples))
    if not math.isfinite(log_mean):
        log.warning(f"Exponential moment overflowed at beta={beta}")
        return MonteCarloEstimate(value=math.inf, std_error=math.inf, samples=samples)
    ratios = np.exp(exponents - log_mean)
    std_error = float(ratios.std(ddof=1) / math.sqrt(samples)) / beta if samples > 1 else 0.0
    return MonteCarloEstimate(value=log_mean / beta - eps, std_error=std_error, samples=samples)


def joint_risk_report(
    out: SteadyOutput,
    eps: float,
    split: Optional[Sequence[float]] = None,
    beta: Optional[float] = None,
    samples: int = mc_default_samples,
    seed: int = 1,
) -> dict:
    """JSON-ready summary: the probability box, its MC coverage, the quadratic
    sphere and the homogeneous quadratic risk."""
    split = equal_split(eps, out.q) if split is None else validate_split(split, eps, out.q)
    box = probability_risk_bounds(out, eps, split)
    upper = box.upper(split)
    coverage = mc_joint_probability(out, upper, samples, seed)
    sphere = joint_quad_risk(out, eps)
    homogeneous = homogeneous_quad_joint(out, eps)
    lo, hi = scalar_joint_var_bounds(out, eps)
    report = {
        "labels": list(out.labels),
        "lower": box.lower.tolist(),
        "upper": upper.tolist(),
        "split": split.tolist(),
        "mc": {"p": coverage.value, "se": coverage.std_error},
        "scalar": {"lo": lo, "hi": hi},
        "sphere": {
            "feasible": sphere.feasible,
            "center": sphere.center.tolist(),
            "radius": sphere.radius,
        },
        "homogeneous": homogeneous.value if homogeneous.is_finite else None,
    }
    if beta is not None:
        total = exp_joint_sum(out, eps, beta, samples, seed)
        report["exp_sum"] = {"value": total.value, "se": total.std_error}
    log.debug(f"Joint report for {out.q} observables: {report}")
    return report
