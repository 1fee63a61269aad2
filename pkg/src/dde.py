"""Deterministic solutions of the scalar delay equation phi'(t) = -lambda phi(t - tau).

The fundamental solution has phi = 0 on [-tau, 0) and phi(0) = 1. Every mode of
the network decouples into this scalar equation, so transient means and
variances of any observable are sums over these solutions.

The right-hand side only depends on the delayed state, so one classic RK4 step
reduces to Simpson's rule over the previous delay window; midpoints come from
cubic Hermite interpolation of that window. A whole window is advanced at once.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import PPoly

from .config import (
    dde_decay_threshold,
    dde_horizon_cap,
    dde_min_steps_per_delay,
    dde_steps_per_delay,
    dde_zero_delay_steps,
    half_pi,
)
from .errors import ConfigError, InstabilityError
from .graph import Spectrum
from .observables import Observable
from .special import f_energy

log = logging.getLogger(__name__)

_GAUSS_NODES, _GAUSS_WEIGHTS = leggauss(4)

# widest window count solved so far per (lambda, tau)
_solved_windows: Dict[Tuple[float, float], int] = {}


def _check_mode(lam: float, tau: float) -> None:
    if lam < 0 or tau < 0:
        raise ConfigError(f"lambda and tau must be non-negative, got {lam}, {tau}")
    if lam * tau >= half_pi:
        raise InstabilityError(tau, half_pi / lam)


def _gauss_integrate(func, breaks: np.ndarray) -> float:
    """Sum of 4-point Gauss-Legendre rules over consecutive breakpoints."""
    breaks = np.unique(breaks)
    if len(breaks) < 2:
        return 0.0
    a, b = breaks[:-1], breaks[1:]
    half = (b - a) / 2.0
    points = (a + half)[:, None] + half[:, None] * _GAUSS_NODES[None, :]
    return float(np.sum(half[:, None] * _GAUSS_WEIGHTS[None, :] * func(points)))


@dataclass(frozen=True, eq=False)
class HistoryFunction:
    """Initial segment of the state on a uniform grid over [-tau, 0].

    ``values`` has one row per grid point and one column per node.
    """

    tau: float
    values: np.ndarray

    def __post_init__(self):
        values = np.atleast_2d(np.array(self.values, dtype=float))
        if self.tau < 0:
            raise ConfigError(f"History delay must be non-negative, got {self.tau}")
        if self.tau > 0 and values.shape[0] < 2:
            raise ConfigError("History needs at least two grid points when tau > 0")
        if not np.all(np.isfinite(values)):
            raise ConfigError("History contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def grid(self) -> np.ndarray:
        if self.tau == 0:
            return np.zeros(1)
        return np.linspace(-self.tau, 0.0, self.values.shape[0])

    @property
    def initial(self) -> np.ndarray:
        """State at t = 0."""
        return self.values[-1]

    @classmethod
    def constant(cls, state, tau: float, points: int = 3) -> "HistoryFunction":
        state = np.asarray(state, dtype=float)
        rows = 1 if tau == 0 else points
        return cls(tau, np.tile(state, (rows, 1)))

    @classmethod
    def from_callable(cls, func, n: int, tau: float, points: int = 65) -> "HistoryFunction":
        """Samples ``func(s) -> vector of length n`` on the grid."""
        grid = np.zeros(1) if tau == 0 else np.linspace(-tau, 0.0, points)
        values = np.array([np.asarray(func(s), dtype=float).reshape(n) for s in grid])
        return cls(tau, values)

    @classmethod
    def zero(cls, n: int, tau: float) -> "HistoryFunction":
        return cls.constant(np.zeros(n), tau)

    def __call__(self, s) -> np.ndarray:
        """Piecewise-linear interpolation, shape (len(s), n)."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if self.tau == 0:
            return np.tile(self.values[-1], (len(s), 1))
        grid = self.grid
        return np.column_stack(
            [np.interp(s, grid, self.values[:, node]) for node in range(self.n)]
        )

    def spectral(self, s: Spectrum) -> np.ndarray:
        """Q^T phi(s) on the grid, shape (grid points, n)."""
        if s.n != self.n:
            raise ConfigError(f"History has {self.n} nodes, spectrum has {s.n}")
        return self.values @ s.basis


@dataclass(frozen=True, eq=False)
class ModeSolution:
    lam: float
    tau: float
    step: float
    grid: np.ndarray
    values: np.ndarray
    interpolator: PPoly

    @property
    def horizon(self) -> float:
        return float(self.grid[-1])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t > self.horizon * (1.0 + 1e-12)):
            raise ConfigError(
                f"t={np.max(t):.6g} is beyond the computed horizon {self.horizon:.6g}"
            )
        inside = np.clip(t, 0.0, self.horizon)
        return np.where(t < 0.0, 0.0, self.interpolator(inside))

    def energy(self, T) -> np.ndarray:
        """int_0^T phi^2 for each entry of T, exact for the Hermite interpolant."""
        T = np.atleast_1d(np.asarray(T, dtype=float))
        if self.lam == 0.0:
            return T.copy()
        cells = self._cell_energies()
        cumulative = np.concatenate([[0.0], np.cumsum(cells)])
        index = np.clip(np.floor(T / self.step).astype(int), 0, len(cells))
        start = self.grid[np.minimum(index, len(self.grid) - 1)]
        half = (T - start) / 2.0
        points = (start + half)[:, None] + half[:, None] * _GAUSS_NODES[None, :]
        partial = np.sum(half[:, None] * _GAUSS_WEIGHTS * self(points) ** 2, axis=1)
        return cumulative[index] + partial

    def _cell_energies(self) -> np.ndarray:
        a, b = self.grid[:-1], self.grid[1:]
        half = (b - a) / 2.0
        points = (a + half)[:, None] + half[:, None] * _GAUSS_NODES[None, :]
        return np.sum(half[:, None] * _GAUSS_WEIGHTS * self.interpolator(points) ** 2, axis=1)

    def tail_amplitude(self) -> float:
        """max |phi| over the last full delay window."""
        window = self.tau if self.tau > 0 else self.step * dde_zero_delay_steps / 8
        return float(np.max(np.abs(self.values[self.grid >= self.horizon - window])))


def _hermite(grid, values, d_right, d_left) -> PPoly:
    h = np.diff(grid)
    slope = np.diff(values) / h
    d0, d1 = d_right[:-1], d_left[1:]
    coefficients = np.vstack(
        [
            (d0 + d1 - 2.0 * slope) / h**2,
            (3.0 * slope - 2.0 * d0 - d1) / h,
            d0,
            values[:-1],
        ]
    )
    return PPoly(coefficients, grid, extrapolate=False)


def _steps_per_delay(tau: float, step: float | None) -> int:
    if step is None:
        return dde_steps_per_delay
    if step <= 0:
        raise ConfigError(f"step must be positive, got {step}")
    steps = int(round(tau / step))
    if steps < dde_min_steps_per_delay or not math.isclose(steps * step, tau, rel_tol=1e-9):
        raise ConfigError(
            f"step {step} must divide tau={tau} into at least {dde_min_steps_per_delay} parts"
        )
    return steps


def fundamental_solution(
    lam: float, tau: float, horizon: float, step: float | None = None
) -> ModeSolution:
    """Solves phi' = -lam phi(t - tau) on [0, horizon] from unit impulse data.

    Args:
        lam (float): Laplacian eigenvalue of the mode
        tau (float): Delay
        horizon (float): Last time needed; rounded up to whole delay windows
        step (float): Step size; must divide tau into at least 64 parts. Defaults to tau/256

    Raises:
        InstabilityError: lam * tau >= pi / 2
        ConfigError: invalid step or negative inputs
    """
    _check_mode(lam, tau)
    horizon = max(float(horizon), 0.0)

    if lam == 0.0:
        grid = np.array([0.0, max(horizon, 1.0)])
        values = np.ones(2)
        zeros = np.zeros(2)
        return ModeSolution(lam, tau, grid[1], grid, values, _hermite(grid, values, zeros, zeros))

    if tau == 0.0:
        cells = dde_zero_delay_steps * max(1, math.ceil(lam * horizon / 8.0))
        grid = np.linspace(0.0, max(horizon, 1.0 / lam), cells + 1)
        values = np.exp(-lam * grid)
        derivative = -lam * values
        return ModeSolution(
            lam, tau, grid[1] - grid[0], grid, values, _hermite(grid, values, derivative, derivative)
        )

    d = _steps_per_delay(tau, step)
    h = tau / d
    windows = max(1, math.ceil(horizon / tau - 1e-12))
    total = windows * d
    values = np.empty(total + 1)
    values[: d + 1] = 1.0

    # delayed derivative limits: right limit at t_j is -lam phi(t_j - tau),
    # left limit differs only at t = tau where phi jumps from 0 to 1 underneath
    def d_right(j):
        out = np.zeros(len(j))
        known = j >= d
        out[known] = -lam * values[j[known] - d]
        return out

    def d_left(j):
        out = np.zeros(len(j))
        known = j > d
        out[known] = -lam * values[j[known] - d]
        return out

    for w in range(1, windows):
        j = np.arange((w - 1) * d, w * d)
        y0, y1 = values[j], values[j + 1]
        midpoint = 0.5 * (y0 + y1) + h * (d_right(j) - d_left(j + 1)) / 8.0
        increments = -lam * h / 6.0 * (y0 + 4.0 * midpoint + y1)
        values[w * d + 1 : (w + 1) * d + 1] = values[w * d] + np.cumsum(increments)

    grid = np.linspace(0.0, windows * tau, total + 1)
    index = np.arange(total + 1)
    interpolator = _hermite(grid, values, d_right(index), d_left(index))
    return ModeSolution(lam, tau, h, grid, values, interpolator)


@lru_cache(maxsize=512)
def _cached_solution(lam: float, tau: float, windows: int) -> ModeSolution:
    span = tau if tau > 0 else 1.0 / max(lam, 1e-12)
    return fundamental_solution(lam, tau, windows * span)


def mode_solution(lam: float, tau: float, horizon: float, warn: bool = True) -> ModeSolution:
    """Cached solution covering at least ``horizon``; the horizon is extended by doubling.

    Logs a warning when a request reaches past the span already solved for this mode.
    """
    _check_mode(lam, tau)
    span = tau if tau > 0 else 1.0 / max(lam, 1e-12)
    windows = 1
    while windows * span < horizon:
        windows *= 2
    key = (float(lam), float(tau))
    solved = _solved_windows.get(key)
    if warn and solved is not None and windows > solved:
        log.warning(
            f"Extending horizon for lambda={lam:g}, tau={tau:g} from {solved * span:g} to {windows * span:g}"
        )
    _solved_windows[key] = max(windows, solved or 0)
    return _cached_solution(key[0], key[1], windows)


def decay_horizon(lam: float, tau: float) -> Tuple[float, bool]:
    """Time after which |phi| stays below the decay threshold for a full window.

    Returns (horizon, converged); gives up at 200 / lam.
    """
    _check_mode(lam, tau)
    if lam == 0.0:
        return math.inf, False
    cap = dde_horizon_cap / lam
    horizon = max(tau, 1.0 / lam)
    while True:
        solution = mode_solution(lam, tau, horizon, warn=False)
        if solution.tail_amplitude() < dde_decay_threshold:
            return solution.horizon, True
        if solution.horizon >= cap:
            return solution.horizon, False
        horizon = min(2.0 * solution.horizon, cap)


def steady_energy(lam: float, tau: float) -> float:
    """int_0^inf phi^2 = tau f(lam tau); 1/(2 lam) without delay."""
    _check_mode(lam, tau)
    if lam == 0.0:
        return math.inf
    if tau == 0.0:
        return 1.0 / (2.0 * lam)
    return tau * f_energy(lam * tau)


def mode_energies(eigenvalues: np.ndarray, tau: float) -> np.ndarray:
    """steady_energy for every non-zero eigenvalue (the first entry is skipped)."""
    lam = np.asarray(eigenvalues[1:], dtype=float)
    if np.any(lam * tau >= half_pi):
        raise InstabilityError(tau, half_pi / float(np.max(lam)))
    if tau == 0.0:
        return 1.0 / (2.0 * lam)
    return tau * np.atleast_1d(f_energy(lam * tau))


def energy_integral(lam: float, tau: float, T):
    """int_0^T phi^2 by Gauss-Legendre quadrature on the solution cells.

    Exact for the mode lam = 0 (returns T) and for tau = 0.
    """
    _check_mode(lam, tau)
    T_arr = np.atleast_1d(np.asarray(T, dtype=float))
    if np.any(T_arr < 0):
        raise ConfigError("Integration horizon must be non-negative")
    if lam == 0.0:
        result = T_arr.copy()
    elif tau == 0.0:
        result = -np.expm1(-2.0 * lam * T_arr) / (2.0 * lam)
    else:
        result = mode_solution(lam, tau, float(np.max(T_arr))).energy(T_arr)
    return float(result[0]) if np.ndim(T) == 0 else result


def steady_energy_quadrature(lam: float, tau: float) -> float:
    """Quadrature of the full energy; falls back to the closed form on slow decay."""
    horizon, converged = decay_horizon(lam, tau)
    if not converged:
        log.warning(
            f"Mode lambda={lam:.6g} tau={tau:.6g} has not decayed by t={horizon:.6g}; using closed form"
        )
        return steady_energy(lam, tau)
    return energy_integral(lam, tau, horizon)


def autocorrelation_V(lam: float, tau: float, rho: float) -> float:
    """V(rho) = int_0^inf phi(t) phi(t - rho) dt, truncated once phi has decayed."""
    _check_mode(lam, tau)
    if lam == 0.0:
        raise ConfigError("V is unbounded for the zero mode")
    horizon, _ = decay_horizon(lam, tau)
    solution = mode_solution(lam, tau, horizon + abs(rho))
    start = max(rho, 0.0)
    breaks = np.concatenate([solution.grid, solution.grid + rho, [start, horizon]])
    breaks = breaks[(breaks >= start) & (breaks <= horizon)]
    return _gauss_integrate(lambda t: solution(t) * solution(t - rho), breaks)


def _mode_mean(lam: float, tau: float, history_grid, history_mode, t: float) -> float:
    """phi(t) h(0) - lam int_{-tau}^0 phi(t - s - tau) h(s) ds for one mode."""
    if lam == 0.0:
        return float(history_mode[-1])
    if tau == 0.0:
        return float(math.exp(-lam * t) * history_mode[-1])
    solution = mode_solution(lam, tau, t)
    upper = min(0.0, t - tau)
    mean = float(solution(t)) * history_mode[-1]
    if upper <= -tau:
        return mean
    shifted = t - tau - solution.grid
    breaks = np.concatenate([history_grid, shifted, [-tau, upper]])
    breaks = breaks[(breaks >= -tau) & (breaks <= upper)]
    integral = _gauss_integrate(
        lambda s: solution(t - s - tau) * np.interp(s, history_grid, history_mode), breaks
    )
    return mean - lam * integral


def transient_mean(s: Spectrum, c: Observable, h: HistoryFunction, t):
    """E[c^T x_t] for deterministic history h; accepts scalar or array t."""
    times = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(times < 0):
        raise ConfigError("Transient quantities need t >= 0")
    coefficients = c.coefficients(s)
    history_modes = h.spectral(s)
    grid = h.grid
    active = [
        k
        for k in range(s.n)
        if abs(coefficients[k]) > 0 and np.any(history_modes[:, k] != 0)
    ]
    result = np.zeros(len(times))
    for idx, time in enumerate(times):
        result[idx] = sum(
            coefficients[k]
            * _mode_mean(float(s.eigenvalues[k]), h.tau, grid, history_modes[:, k], time)
            for k in active
        )
    return float(result[0]) if np.ndim(t) == 0 else result


def transient_variance(s: Spectrum, c: Observable, b: float, tau: float, t):
    """b^2 sum_k (c_k^Q)^2 int_0^t phi_k^2; the zero mode contributes (c_1^Q)^2 t."""
    times = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(times < 0):
        raise ConfigError("Transient quantities need t >= 0")
    coefficients = c.coefficients(s)
    total = np.zeros(len(times))
    for k in range(s.n):
        weight = coefficients[k] ** 2
        if weight == 0.0:
            continue
        lam = 0.0 if k == 0 else float(s.eigenvalues[k])
        total += weight * np.atleast_1d(energy_integral(lam, tau, times))
    total *= b**2
    return float(total[0]) if np.ndim(t) == 0 else total
