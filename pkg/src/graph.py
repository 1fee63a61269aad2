"""Weighted coupling graphs, their Laplacians and spectra.

Node indices are 1-based everywhere outside this module's numpy arrays.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, List, Optional, Tuple

import networkx as nx
import numpy as np

from .config import (
    disconnection_tolerance,
    null_eigenvalue_tolerance,
    random_graph_margin,
    random_graph_resamples_per_node,
)
from .errors import ConfigError, InstabilityError, NumericalError
from .utils import open_file, slurp_json

log = logging.getLogger(__name__)

Edge = Tuple[int, int, float]

_tokens = itertools.count(1)


@dataclass(frozen=True)
class WeightedGraph:
    n: int
    edges: Tuple[Edge, ...]

    def __post_init__(self):
        if self.n < 2:
            raise ConfigError(f"A graph needs at least 2 nodes, got {self.n}")
        seen = set()
        for i, j, w in self.edges:
            if not (1 <= i <= self.n and 1 <= j <= self.n):
                raise ConfigError(f"Edge ({i}, {j}) references a node outside 1..{self.n}")
            if i == j:
                raise ConfigError(f"Self-loop on node {i} is not allowed")
            if not w > 0 or not math.isfinite(w):
                raise ConfigError(f"Edge ({i}, {j}) has non-positive weight {w}")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise ConfigError(f"Duplicate edge ({i}, {j})")
            seen.add(key)
        if not nx.is_connected(self.to_networkx()):
            raise ConfigError("Graph is not connected")

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Tuple[int, int, float]]) -> "WeightedGraph":
        """Builds a graph, dropping zero-weight edges."""
        kept = tuple(
            (int(i), int(j), float(w)) for i, j, w in edges if float(w) != 0.0
        )
        return cls(n=int(n), edges=kept)

    @classmethod
    def from_networkx(cls, graph: nx.Graph, weight: float = 1.0) -> "WeightedGraph":
        """Relabels nodes 0..n-1 in insertion order to 1..n."""
        index = {node: pos + 1 for pos, node in enumerate(graph.nodes)}
        edges = [
            (index[u], index[v], float(data.get("weight", weight)))
            for u, v, data in graph.edges(data=True)
        ]
        return cls.from_edges(graph.number_of_nodes(), edges)

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(range(1, self.n + 1))
        graph.add_weighted_edges_from(self.edges)
        return graph

    def scaled(self, factor: float) -> "WeightedGraph":
        return WeightedGraph(self.n, tuple((i, j, w * factor) for i, j, w in self.edges))

    def weighted_degrees(self) -> np.ndarray:
        degrees = np.zeros(self.n)
        for i, j, w in self.edges:
            degrees[i - 1] += w
            degrees[j - 1] += w
        return degrees

    def neighbors(self, i: int) -> List[int]:
        return sorted(self.to_networkx().neighbors(i))


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Ascending Laplacian eigenvalues and an orthonormal eigenbasis (columns).

    ``token`` identifies this decomposition; spectral coefficients are cached
    against it.
    """

    eigenvalues: np.ndarray
    basis: np.ndarray
    token: int = field(default_factory=lambda: next(_tokens), compare=False)

    def __post_init__(self):
        self.eigenvalues.setflags(write=False)
        self.basis.setflags(write=False)

    @property
    def n(self) -> int:
        return len(self.eigenvalues)

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def algebraic_connectivity(self) -> float:
        return float(self.eigenvalues[1])


class TopologyFamily(Enum):
    COMPLETE = "complete"
    WHEEL = "wheel"
    BIPARTITE = "bipartite"
    PATH = "path"
    RING = "ring"
    STAR = "star"


@dataclass(frozen=True)
class TopologyKind:
    """Closed-form family. ``size`` is n for every family except wheel (rim
    nodes) and bipartite (n1, n2)."""

    family: TopologyFamily
    size: Tuple[int, ...]

    def __post_init__(self):
        minimum = {
            TopologyFamily.COMPLETE: 2,
            TopologyFamily.WHEEL: 3,
            TopologyFamily.PATH: 2,
            TopologyFamily.RING: 3,
            TopologyFamily.STAR: 3,
        }
        if self.family == TopologyFamily.BIPARTITE:
            if len(self.size) != 2:
                raise ConfigError("bipartite needs two group sizes n1,n2")
            n1, n2 = self.size
            if n1 < 1 or n2 < 1 or n1 > n2:
                raise ConfigError(f"bipartite needs 1 <= n1 <= n2, got {n1},{n2}")
        else:
            if len(self.size) != 1 or self.size[0] < minimum[self.family]:
                raise ConfigError(
                    f"{self.family.value} needs n >= {minimum[self.family]}, got {self.size}"
                )

    @classmethod
    def parse(cls, spec: str) -> "TopologyKind":
        """Parses ``KIND:PARAMS`` such as ``complete:4``, ``wheel:6`` or ``bipartite:2,8``."""
        name, _, params = spec.partition(":")
        try:
            family = TopologyFamily(name.strip().lower())
            size = tuple(int(p) for p in params.split(",") if p.strip())
        except ValueError as e:
            raise ConfigError(f"Cannot parse topology '{spec}': {e}") from e
        return cls(family, size)

    @property
    def n(self) -> int:
        if self.family == TopologyFamily.WHEEL:
            return self.size[0] + 1
        if self.family == TopologyFamily.BIPARTITE:
            return self.size[0] + self.size[1]
        return self.size[0]

    def bipartite_sizes(self) -> Tuple[int, int]:
        if self.family == TopologyFamily.STAR:
            return 1, self.size[0] - 1
        if self.family == TopologyFamily.BIPARTITE:
            return self.size
        raise ConfigError(f"{self.family.value} is not bipartite")

    def __str__(self) -> str:
        return f"{self.family.value}:{','.join(str(s) for s in self.size)}"


def laplacian(g: WeightedGraph) -> np.ndarray:
    """Dense weighted Laplacian; row sums are zero."""
    return nx.laplacian_matrix(
        g.to_networkx(), nodelist=list(range(1, g.n + 1)), weight="weight"
    ).toarray().astype(float)


def spectrum(L: np.ndarray) -> Spectrum:
    """Ascending eigen-decomposition with q_1 fixed to (1/sqrt n) * 1.

    Raises:
        ConfigError: L is not square and symmetric
        NumericalError: the eigensolver did not converge or L has no zero eigenvalue
    """
    L = np.asarray(L, dtype=float)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise ConfigError(f"Laplacian must be square, got shape {L.shape}")
    if not np.allclose(L, L.T, atol=1e-12):
        raise ConfigError("Laplacian must be symmetric")
    n = L.shape[0]
    try:
        eigenvalues, basis = np.linalg.eigh(L)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"Eigensolver failed: {e}") from e

    if abs(eigenvalues[0]) > null_eigenvalue_tolerance * max(1.0, abs(eigenvalues[-1])):
        raise NumericalError(
            f"Smallest eigenvalue {eigenvalues[0]:.3e} is not zero; input is not a Laplacian"
        )
    eigenvalues = eigenvalues.copy()
    eigenvalues[0] = 0.0

    q1 = np.full(n, 1.0 / math.sqrt(n))
    rest = basis[:, 1:]
    rest = rest - np.outer(q1, q1 @ rest)
    rest = rest / np.linalg.norm(rest, axis=0)
    return Spectrum(eigenvalues=eigenvalues, basis=np.column_stack([q1, rest]))


def graph_spectrum(g: WeightedGraph) -> Spectrum:
    return spectrum(laplacian(g))


def _require_connected(s: Spectrum) -> None:
    if s.algebraic_connectivity < disconnection_tolerance:
        raise NumericalError(
            f"lambda_2={s.algebraic_connectivity:.3e} is below {disconnection_tolerance}; graph is nearly disconnected"
        )


def total_effective_resistance(s: Spectrum) -> float:
    """n * sum_{k>=2} 1/lambda_k."""
    _require_connected(s)
    return float(s.n * np.sum(1.0 / s.eigenvalues[1:]))


def effective_resistance_matrix(s: Spectrum) -> np.ndarray:
    """Pairwise effective resistances from the pseudo-inverse built on the spectrum."""
    _require_connected(s)
    pinv = (s.basis[:, 1:] / s.eigenvalues[1:]) @ s.basis[:, 1:].T
    diag = np.diag(pinv)
    return diag[:, None] + diag[None, :] - 2.0 * pinv


def pairwise_effective_resistance(s: Spectrum, i: int, j: int) -> float:
    """sum_{k>=2} (q_k(i) - q_k(j))^2 / lambda_k for 1-based nodes i != j."""
    if i == j:
        raise ConfigError("pairwise effective resistance needs two distinct nodes")
    _require_connected(s)
    diff = s.basis[i - 1, 1:] - s.basis[j - 1, 1:]
    return float(np.sum(diff**2 / s.eigenvalues[1:]))


def stability_margin(s: Spectrum) -> float:
    """tau_max = pi / (2 lambda_n); the delay must stay strictly below it."""
    return math.pi / (2.0 * s.lambda_max)


def check_stable(s: Spectrum, tau: float) -> None:
    if tau < 0:
        raise ConfigError(f"Delay must be non-negative, got {tau}")
    tau_max = stability_margin(s)
    if not tau < tau_max:
        raise InstabilityError(tau, tau_max)


def generate_topology(kind: TopologyKind, weight: float = 1.0) -> WeightedGraph:
    """Canonical labelling: wheel hub is node 1, bipartite group G1 comes first."""
    family = kind.family
    if family == TopologyFamily.COMPLETE:
        graph = nx.complete_graph(kind.n)
    elif family == TopologyFamily.WHEEL:
        graph = nx.wheel_graph(kind.n)
    elif family == TopologyFamily.BIPARTITE:
        graph = nx.complete_bipartite_graph(*kind.size)
    elif family == TopologyFamily.STAR:
        graph = nx.star_graph(kind.n - 1)
    elif family == TopologyFamily.PATH:
        graph = nx.path_graph(kind.n)
    else:
        graph = nx.cycle_graph(kind.n)
    return WeightedGraph.from_networkx(graph, weight=weight)


def _helmert(size: int) -> np.ndarray:
    """size x (size-1) orthonormal basis of the zero-sum subspace."""
    columns = []
    for k in range(2, size + 1):
        v = np.zeros(size)
        v[: k - 1] = 1.0
        v[k - 1] = -(k - 1)
        columns.append(v / math.sqrt(k * (k - 1)))
    return np.array(columns).T.reshape(size, size - 1)


def _circulant_modes(n: int, diagonal: float) -> Tuple[List[float], List[np.ndarray]]:
    """Real cosine/sine basis of the non-constant cycle modes."""
    values, vectors = [], []
    positions = np.arange(n)
    for m in range(1, n // 2 + 1):
        value = diagonal - 2.0 * math.cos(2.0 * math.pi * m / n)
        angle = 2.0 * math.pi * m * positions / n
        if 2 * m == n:
            values.append(value)
            vectors.append(np.cos(angle) / math.sqrt(n))
        else:
            values.extend([value, value])
            vectors.append(np.cos(angle) * math.sqrt(2.0 / n))
            vectors.append(np.sin(angle) * math.sqrt(2.0 / n))
    return values, vectors


def analytic_spectrum(kind: TopologyKind) -> Spectrum:
    """Closed-form eigenstructure of the family, ordered ascending."""
    n = kind.n
    family = kind.family
    values: List[float] = [0.0]
    vectors: List[np.ndarray] = [np.full(n, 1.0 / math.sqrt(n))]

    if family == TopologyFamily.COMPLETE:
        values += [float(n)] * (n - 1)
        vectors += list(_helmert(n).T)
    elif family in (TopologyFamily.BIPARTITE, TopologyFamily.STAR):
        n1, n2 = kind.bipartite_sizes()
        for group_size, offset, value in ((n2, n1, n1), (n1, 0, n2)):
            for column in _helmert(group_size).T:
                v = np.zeros(n)
                v[offset : offset + group_size] = column
                values.append(float(value))
                vectors.append(v)
        v = np.concatenate([np.full(n1, float(n2)), np.full(n2, -float(n1))])
        values.append(float(n))
        vectors.append(v / math.sqrt(n1 * n2 * n))
    elif family == TopologyFamily.WHEEL:
        rim = kind.size[0]
        rim_values, rim_vectors = _circulant_modes(rim, 3.0)
        values += rim_values
        vectors += [np.concatenate([[0.0], v]) for v in rim_vectors]
        v = np.concatenate([[float(rim)], -np.ones(rim)])
        values.append(float(rim + 1))
        vectors.append(v / math.sqrt(rim * (rim + 1)))
    elif family == TopologyFamily.PATH:
        positions = np.arange(1, n + 1)
        for k in range(2, n + 1):
            values.append(2.0 * (1.0 - math.cos(math.pi * (k - 1) / n)))
            vectors.append(
                math.sqrt(2.0 / n)
                * np.cos(math.pi * (k - 1) * (2 * positions - 1) / (2 * n))
            )
    else:
        ring_values, ring_vectors = _circulant_modes(n, 2.0)
        values += ring_values
        vectors += ring_vectors

    values_arr = np.array(values)
    order = np.argsort(values_arr, kind="stable")
    basis = np.column_stack(vectors)[:, order]
    return Spectrum(eigenvalues=values_arr[order], basis=basis)


def random_connected_graph(
    n: int,
    edge_prob: float,
    weight_lo: float,
    weight_hi: float,
    tau_target: Optional[float] = None,
    seed: Optional[int] = None,
) -> WeightedGraph:
    """Erdos-Renyi draw resampled until connected, with uniform weights.

    With ``tau_target`` all weights are rescaled by one factor so that
    lambda_n * tau_target = 0.95 * pi / 2.

    Raises:
        ConfigError: invalid probability or weight range
        NumericalError: no connected draw within 10 * n attempts
    """
    if not 0.0 < edge_prob <= 1.0:
        raise ConfigError(f"edge_prob must lie in (0, 1], got {edge_prob}")
    if not 0.0 < weight_lo <= weight_hi:
        raise ConfigError(f"Need 0 < weight_lo <= weight_hi, got {weight_lo}, {weight_hi}")
    rng = np.random.default_rng(seed)

    topology = None
    if n == 2:
        topology = nx.complete_graph(2)
    else:
        for _ in range(random_graph_resamples_per_node * n):
            candidate = nx.gnp_random_graph(
                n, edge_prob, seed=int(rng.integers(2**32))
            )
            if nx.is_connected(candidate):
                topology = candidate
                break
    if topology is None:
        raise NumericalError(
            f"No connected graph with n={n}, p={edge_prob} after {random_graph_resamples_per_node * n} draws"
        )

    edges = [
        (u + 1, v + 1, float(rng.uniform(weight_lo, weight_hi)))
        for u, v in sorted(topology.edges())
    ]
    g = WeightedGraph.from_edges(n, edges)
    if tau_target is not None:
        if tau_target <= 0:
            raise ConfigError(f"tau_target must be positive, got {tau_target}")
        lambda_max = graph_spectrum(g).lambda_max
        g = g.scaled(random_graph_margin * (math.pi / 2.0) / (tau_target * lambda_max))
    return g


def read_graph(path: str | Path) -> WeightedGraph:
    """Reads the text edge-list format (first line n, then ``i j w``) or JSON
    ``{"n": int, "edges": [[i, j, w], ...]}``. Compressed files are supported.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Graph file not found: {path}")
    if ".json" in [s.lower() for s in path.suffixes]:
        blob = slurp_json(path)
        try:
            return WeightedGraph.from_edges(blob["n"], [tuple(e) for e in blob["edges"]])
        except (KeyError, TypeError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(f"Malformed graph JSON {path}: {e}") from e

    n = None
    edges = []
    with open_file(path) as fh:
        for line_number, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            try:
                if n is None:
                    n = int(parts[0])
                    continue
                i, j, w = int(parts[0]), int(parts[1]), float(parts[2])
            except (ValueError, IndexError) as e:
                raise ConfigError(f"{path}:{line_number}: cannot parse '{line}'") from e
            edges.append((i, j, w))
    if n is None:
        raise ConfigError(f"{path}: missing node count")
    return WeightedGraph.from_edges(n, edges)
