"""Run configurations: YAML/JSON files, canned examples and CLI overrides
resolved into one validated ``RunConfig``."""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np

from .config import (
    configs_dir,
    default_b,
    default_eps,
    default_seed,
    mc_default_samples,
)
from .dde import HistoryFunction
from .errors import ConfigError, RiskError
from .graph import (
    TopologyKind,
    WeightedGraph,
    generate_topology,
    graph_spectrum,
    random_connected_graph,
    read_graph,
    stability_margin,
)
from .observables import ObservableSet, observable_set
from .risk import RiskParams
from .utils import load_config_file

log = logging.getLogger(__name__)

COMMANDS = ("analyze", "sweep", "tradeoff", "table", "simulate", "limits")
MEASURES = ("var", "quad", "exp")


def example_path(number: int) -> Path:
    path = configs_dir / f"example{number}.yaml"
    if not path.exists():
        raise ConfigError(f"No canned example {number}; expected {path}")
    return path


def parse_tau_grid(spec) -> np.ndarray:
    """``LO:HI:STEP`` (HI included when the step lands on it) or a list of delays."""
    if isinstance(spec, (list, tuple)):
        grid = np.asarray(spec, dtype=float)
    else:
        try:
            lo, hi, step = (float(part) for part in str(spec).split(":"))
        except ValueError as e:
            raise ConfigError(f"tau grid must look like LO:HI:STEP, got '{spec}'") from e
        if not step > 0 or hi < lo:
            raise ConfigError(f"tau grid '{spec}' is empty")
        count = int(math.floor((hi - lo) / step + 1e-9)) + 1
        grid = lo + step * np.arange(count)
    if grid.size == 0:
        raise ConfigError("tau grid is empty")
    if np.any(np.diff(grid) <= 0):
        raise ConfigError("tau grid must be strictly increasing")
    return grid


def build_graph(spec: Any, weight: float = 1.0) -> WeightedGraph:
    """Graph from a file path, an inline ``{n, edges}`` mapping, a
    ``{random: {...}}`` mapping or a ``{topology: KIND:PARAMS}`` mapping."""
    if isinstance(spec, (str, Path)):
        try:
            return read_graph(spec)
        except FileNotFoundError as e:
            raise ConfigError(str(e)) from e
    if not isinstance(spec, Mapping):
        raise ConfigError(f"Cannot build a graph from {spec!r}")
    if "random" in spec:
        options = dict(spec["random"])
        try:
            return random_connected_graph(
                n=int(options["n"]),
                edge_prob=float(options.get("edge_prob", 0.3)),
                weight_lo=float(options.get("weight_lo", 0.1)),
                weight_hi=float(options.get("weight_hi", 1.0)),
                tau_target=options.get("tau_target"),
                seed=options.get("seed"),
            )
        except KeyError as e:
            raise ConfigError(f"random graph needs {e}") from e
    if "topology" in spec:
        return generate_topology(TopologyKind.parse(spec["topology"]), spec.get("weight", weight))
    try:
        return WeightedGraph.from_edges(spec["n"], [tuple(e) for e in spec["edges"]])
    except (KeyError, TypeError) as e:
        raise ConfigError(f"Inline graph needs n and edges: {e}") from e


@dataclass
class RunConfig:
    command: str
    params: RiskParams
    graph: Optional[WeightedGraph] = None
    topology: Optional[TopologyKind] = None
    observables: List[Any] = field(default_factory=lambda: ["centering"])
    tau_grid: Optional[np.ndarray] = None
    theta: Optional[float] = None
    times: Tuple[float, ...] = ()
    history: Optional[List[float]] = None
    seed: int = default_seed
    samples: int = mc_default_samples
    trajectories: int = 1000
    pool: int = 0
    dt: Optional[float] = None
    burn_in: Optional[float] = None
    nodes: int = 8
    count: int = 500
    edge_prob: float = 0.5
    measure: str = "quad"
    split: Optional[List[float]] = None
    joint: bool = False
    verbose: bool = False
    out: Optional[str] = None
    format: Optional[str] = None
    dump_samples: Optional[str] = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"Unknown command '{self.command}'; expected one of {COMMANDS}")
        if self.measure not in MEASURES:
            raise ConfigError(f"Unknown measure '{self.measure}'; expected one of {MEASURES}")
        if self.command in ("analyze", "sweep", "simulate", "limits") and self.graph is None:
            raise ConfigError(f"{self.command} needs --graph, --topology or an example")
        if self.command == "table" and self.topology is None:
            raise ConfigError("table needs --topology")
        if self.history is not None and self.graph is not None and len(self.history) != self.graph.n:
            raise ConfigError(
                f"History has {len(self.history)} entries, graph has {self.graph.n} nodes"
            )
        if self.tau_grid is not None and self.graph is not None:
            tau_max = stability_margin(graph_spectrum(self.graph))
            if self.tau_grid[0] <= 0 or self.tau_grid[-1] >= tau_max:
                raise ConfigError(
                    f"tau grid must lie strictly inside (0, {tau_max:.6g}), got "
                    f"[{self.tau_grid[0]:.6g}, {self.tau_grid[-1]:.6g}]"
                )

    @property
    def observable_set(self) -> ObservableSet:
        return observable_set(self.observables, self.graph)

    def history_function(self) -> HistoryFunction:
        """Constant history; zeros unless configured."""
        n = self.graph.n
        state = np.zeros(n) if self.history is None else np.asarray(self.history, dtype=float)
        return HistoryFunction.constant(state, self.params.tau)


def _pick(mapping: Mapping, key: str, default=None):
    value = mapping.get(key)
    return default if value is None else value


def run_config_from_mapping(mapping: Mapping[str, Any]) -> RunConfig:
    """Validates and resolves a flat mapping of run options."""
    unknown = set(mapping) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"Unknown configuration keys: {sorted(unknown)}")
    command = _pick(mapping, "command", "analyze")

    topology = TopologyKind.parse(mapping["topology"]) if mapping.get("topology") else None
    weight = float(_pick(mapping, "weight", 1.0))
    if mapping.get("graph") is not None:
        graph = build_graph(mapping["graph"], weight)
    elif topology is not None:
        graph = generate_topology(topology, weight)
    else:
        graph = None

    try:
        beta = mapping.get("beta")
        params = RiskParams(
            eps=float(_pick(mapping, "eps", default_eps)),
            b=float(_pick(mapping, "b", default_b)),
            tau=float(_pick(mapping, "tau", 0.0)),
            beta=None if beta is None else float(beta),
        )
        tau_grid = parse_tau_grid(mapping["tau_grid"]) if mapping.get("tau_grid") else None
        observables = mapping.get("observables") or ["centering"]
        if isinstance(observables, str):
            observables = [observables]
        cfg = RunConfig(
            command=command,
            params=params,
            graph=graph,
            topology=topology,
            observables=list(observables),
            tau_grid=tau_grid,
            theta=mapping.get("theta"),
            times=tuple(float(t) for t in _pick(mapping, "times", ())),
            history=mapping.get("history"),
            seed=int(_pick(mapping, "seed", default_seed)),
            samples=int(_pick(mapping, "samples", mc_default_samples)),
            trajectories=int(_pick(mapping, "trajectories", 1000)),
            pool=int(_pick(mapping, "pool", 0)),
            dt=mapping.get("dt"),
            burn_in=mapping.get("burn_in"),
            nodes=int(_pick(mapping, "nodes", 8)),
            count=int(_pick(mapping, "count", 500)),
            edge_prob=float(_pick(mapping, "edge_prob", 0.5)),
            measure=str(_pick(mapping, "measure", "quad")),
            split=mapping.get("split"),
            joint=bool(_pick(mapping, "joint", False)),
            verbose=bool(_pick(mapping, "verbose", False)),
            out=mapping.get("out"),
            format=mapping.get("format"),
            dump_samples=mapping.get("dump_samples"),
        )
    except (TypeError, ValueError) as e:
        if isinstance(e, RiskError):
            raise
        raise ConfigError(f"Invalid configuration value: {e}") from e
    log.debug(f"Resolved run configuration for {cfg.command}")
    return cfg


def load_run_config(
    path: Optional[str | Path] = None,
    example: Optional[int] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> RunConfig:
    """Layers CLI overrides (non-None values) over a config file or canned example."""
    mapping: Dict[str, Any] = {}
    if example is not None:
        mapping.update(load_config_file(example_path(example)))
    if path is not None:
        try:
            mapping.update(load_config_file(path))
        except (FileNotFoundError, ValueError) as e:
            raise ConfigError(str(e)) from e
    for key, value in (overrides or {}).items():
        if value is not None:
            mapping[key] = value
    return run_config_from_mapping(mapping)


_KNOWN_KEYS = {
    "command",
    "graph",
    "topology",
    "weight",
    "observables",
    "tau",
    "tau_grid",
    "eps",
    "b",
    "beta",
    "theta",
    "times",
    "history",
    "seed",
    "samples",
    "trajectories",
    "pool",
    "dt",
    "burn_in",
    "nodes",
    "count",
    "edge_prob",
    "measure",
    "split",
    "joint",
    "verbose",
    "out",
    "format",
    "dump_samples",
}
