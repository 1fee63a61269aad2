"""Euler-Maruyama Monte Carlo for dx = -L x(t - tau) dt + b dw.

Each trajectory draws its noise from its own counter-based generator keyed by
(base_seed, trajectory index), in fixed-length chunks of steps. Trajectories
are stepped together in blocks for speed, and the block layout never changes
the numbers a trajectory sees.
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .config import (
    sim_burn_in_factor,
    sim_chunk_steps,
    sim_decimation_delays,
    sim_max_dt_lambda,
    sim_steps_per_delay,
)
from .dde import HistoryFunction
from .errors import ConfigError
from .graph import Spectrum, WeightedGraph, check_stable, graph_spectrum, laplacian
from .observables import ObservableSet
from .risk import RiskParams

log = logging.getLogger(__name__)

# noise buffer per block is capped at this many doubles
_BLOCK_BUDGET = 4_000_000


@dataclass(frozen=True)
class SimConfig:
    """``dt`` defaults to tau/100, ``burn_in`` to 30/lambda_2 and ``decimation``
    to 5 tau (1/lambda_2 without delay). A delay-free run needs an explicit dt.
    """

    trajectories: int = 1000
    base_seed: int = 1
    times: Tuple[float, ...] = ()
    pool_per_trajectory: int = 0
    horizon: Optional[float] = None
    dt: Optional[float] = None
    burn_in: Optional[float] = None
    decimation: Optional[float] = None
    block_size: int = 256

    def __post_init__(self):
        if self.trajectories < 1:
            raise ConfigError(f"Need at least one trajectory, got {self.trajectories}")
        if self.pool_per_trajectory < 0:
            raise ConfigError("pool_per_trajectory must be non-negative")
        if any(t < 0 for t in self.times):
            raise ConfigError("Checkpoint times must be non-negative")
        for name in ("horizon", "dt", "burn_in", "decimation"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ConfigError(f"{name} must be positive, got {value}")


@dataclass(frozen=True)
class _Schedule:
    dt: float
    delay_steps: int
    total_steps: int
    checkpoint_steps: np.ndarray
    pool_steps: np.ndarray


def _schedule(cfg: SimConfig, s: Spectrum, tau: float) -> _Schedule:
    if cfg.dt is None:
        if tau == 0:
            raise ConfigError("A delay-free simulation needs an explicit dt")
        dt = tau / sim_steps_per_delay
    else:
        dt = cfg.dt
    delay_steps = int(round(tau / dt))
    if abs(delay_steps * dt - tau) > 1e-9 * max(tau, dt):
        raise ConfigError(f"dt={dt} does not divide tau={tau}")
    if not dt * s.lambda_max < sim_max_dt_lambda:
        raise ConfigError(
            f"dt * lambda_n = {dt * s.lambda_max:.3g} must stay below {sim_max_dt_lambda}"
        )

    lambda_2 = s.algebraic_connectivity
    burn_in = cfg.burn_in if cfg.burn_in is not None else sim_burn_in_factor / lambda_2
    if cfg.decimation is not None:
        decimation = cfg.decimation
    else:
        decimation = sim_decimation_delays * tau if tau > 0 else 1.0 / lambda_2

    checkpoint_steps = np.array([int(round(t / dt)) for t in cfg.times], dtype=int)
    if cfg.pool_per_trajectory:
        first = int(round(burn_in / dt))
        stride = max(1, int(round(decimation / dt)))
        pool_steps = first + stride * np.arange(cfg.pool_per_trajectory)
    else:
        pool_steps = np.zeros(0, dtype=int)
    horizon_steps = int(round(cfg.horizon / dt)) if cfg.horizon is not None else 0
    total = max(
        [horizon_steps]
        + ([int(checkpoint_steps.max())] if len(checkpoint_steps) else [])
        + ([int(pool_steps.max())] if len(pool_steps) else [])
    )
    return _Schedule(dt, delay_steps, total, checkpoint_steps, pool_steps)


def trajectory_generator(base_seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([base_seed, index])))


def _noise_chunks(
    generators: Sequence[np.random.Generator], n: int, total_steps: int
) -> Iterator[np.ndarray]:
    """Standard normal increments shaped (chunk, trajectories, n)."""
    for start in range(0, total_steps, sim_chunk_steps):
        length = sim_chunk_steps
        chunk = np.stack([g.standard_normal((length, n)) for g in generators], axis=1)
        yield chunk[: min(length, total_steps - start)]


def _run_block(
    L: np.ndarray,
    b: float,
    h: HistoryFunction,
    schedule: _Schedule,
    indices: Sequence[int],
    base_seed: int,
    record_steps: np.ndarray,
    C: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Steps one block of trajectories and returns the state (or C x) at
    ``record_steps``, shape (len(record_steps), trajectories, n or q)."""
    n = L.shape[0]
    d = schedule.delay_steps
    dt = schedule.dt
    M = len(indices)

    history_times = -(d - np.arange(d + 1)) * dt
    seeded = h(history_times) if d > 0 else h.initial[None, :]
    buffer = np.repeat(seeded[:, None, :], M, axis=1)
    position = d

    def observe(x):
        return x if C is None else x @ C.T

    width = n if C is None else C.shape[0]
    records = np.empty((len(record_steps), M, width))
    wanted = {}
    for slot, step in enumerate(record_steps):
        wanted.setdefault(int(step), []).append(slot)
    for slot in wanted.get(0, []):
        records[slot] = observe(buffer[position])

    generators = [trajectory_generator(base_seed, index) for index in indices]
    noise_scale = b * math.sqrt(dt)
    step = 0
    for chunk in _noise_chunks(generators, n, schedule.total_steps):
        for xi in chunk:
            oldest = (position + 1) % (d + 1)
            new = buffer[position] - dt * (buffer[oldest] @ L) + noise_scale * xi
            buffer[oldest] = new
            position = oldest
            step += 1
            for slot in wanted.get(step, ()):
                records[slot] = observe(new)
    return records


def _check_inputs(g: WeightedGraph, p: RiskParams, h: HistoryFunction) -> Spectrum:
    if h.n != g.n:
        raise ConfigError(f"History has {h.n} nodes, graph has {g.n}")
    if abs(h.tau - p.tau) > 1e-12:
        raise ConfigError(f"History covers [-{h.tau}, 0] but tau={p.tau}")
    s = graph_spectrum(g)
    check_stable(s, p.tau)
    return s


def _blocks(cfg: SimConfig, n: int) -> Iterator[range]:
    size = max(1, min(cfg.block_size, _BLOCK_BUDGET // (sim_chunk_steps * n)))
    for start in range(0, cfg.trajectories, size):
        yield range(start, min(start + size, cfg.trajectories))


@dataclass(frozen=True, eq=False)
class TrajectoryPath:
    times: np.ndarray
    states: np.ndarray


def simulate_trajectory(
    g: WeightedGraph, p: RiskParams, h: HistoryFunction, cfg: SimConfig, index: int
) -> TrajectoryPath:
    """Full state path of one trajectory on [0, horizon]."""
    s = _check_inputs(g, p, h)
    schedule = _schedule(cfg, s, p.tau)
    steps = np.arange(schedule.total_steps + 1)
    states = _run_block(laplacian(g), p.b, h, schedule, [index], cfg.base_seed, steps)
    return TrajectoryPath(times=steps * schedule.dt, states=states[:, 0, :])


@dataclass(frozen=True, eq=False)
class EnsembleStats:
    times: np.ndarray
    labels: Tuple[str, ...]
    mean: np.ndarray
    variance: np.ndarray
    mean_se: np.ndarray
    variance_se: np.ndarray
    samples: np.ndarray
    pool: np.ndarray

    @property
    def trajectories(self) -> int:
        return self.samples.shape[1]

    def pool_variance(self) -> Tuple[np.ndarray, np.ndarray]:
        """Variance of each observable over the steady pool, with its standard error."""
        centered = self.pool - self.pool.mean(axis=0)
        squares = centered**2
        return squares.mean(axis=0), squares.std(axis=0, ddof=1) / math.sqrt(len(self.pool))


def _moments(samples: np.ndarray):
    """samples has shape (times, trajectories, q)."""
    M = samples.shape[1]
    mean = samples.mean(axis=1)
    variance = samples.var(axis=1, ddof=1) if M > 1 else np.zeros_like(mean)
    squares = (samples - mean[:, None, :]) ** 2
    variance_se = squares.std(axis=1, ddof=1) / math.sqrt(M) if M > 1 else np.zeros_like(mean)
    return mean, variance, np.sqrt(variance / M), variance_se


def ensemble_stats(
    g: WeightedGraph, p: RiskParams, C: ObservableSet, h: HistoryFunction, cfg: SimConfig
) -> EnsembleStats:
    """Empirical mean and variance of every row of C x at the checkpoint times,
    plus a pool of decimated post-burn-in samples."""
    s = _check_inputs(g, p, h)
    if C.matrix.shape[1] != g.n:
        raise ConfigError(f"Observables have {C.matrix.shape[1]} columns, graph has {g.n} nodes")
    schedule = _schedule(cfg, s, p.tau)
    L = laplacian(g)
    record_steps = np.concatenate([schedule.checkpoint_steps, schedule.pool_steps])
    matrix = C.matrix
    log.info(
        f"Simulating {cfg.trajectories} trajectories, {schedule.total_steps} steps of dt={schedule.dt:.3g}"
    )

    parts: List[np.ndarray] = []
    for block in _blocks(cfg, g.n):
        parts.append(_run_block(L, p.b, h, schedule, block, cfg.base_seed, record_steps, matrix))
        log.debug(f"Finished trajectories {block.start}..{block.stop - 1}")
    records = np.concatenate(parts, axis=1)

    checkpoints = len(schedule.checkpoint_steps)
    samples = records[:checkpoints]
    pool = records[checkpoints:].reshape(-1, matrix.shape[0])
    if checkpoints:
        mean, variance, mean_se, variance_se = _moments(samples)
    else:
        mean = variance = mean_se = variance_se = np.zeros((0, matrix.shape[0]))
    return EnsembleStats(
        times=schedule.checkpoint_steps * schedule.dt,
        labels=tuple(C.labels),
        mean=mean,
        variance=variance,
        mean_se=mean_se,
        variance_se=variance_se,
        samples=samples,
        pool=pool,
    )


def empirical_var_risk(pool: Sequence[float], eps: float) -> float:
    """(1 - eps) empirical quantile of |y|, lower order statistic.

    Raises:
        ConfigError: fewer than 100 / eps samples
    """
    if not 0 < eps < 1:
        raise ConfigError(f"eps must lie in (0, 1), got {eps}")
    values = np.abs(np.asarray(pool, dtype=float).ravel())
    if len(values) < 100.0 / eps:
        raise ConfigError(f"Pool of {len(values)} samples is too small for eps={eps}")
    return float(np.quantile(values, 1.0 - eps, method="lower"))
