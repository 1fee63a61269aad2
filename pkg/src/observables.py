import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from .config import kernel_tolerance
from .errors import ConfigError
from .graph import Spectrum, WeightedGraph

log = logging.getLogger(__name__)


class ObservableKind(Enum):
    DEVIATION = "deviation"
    PAIRWISE = "pairwise"
    NEIGHBOR = "neighbor"
    AVERAGE = "average"
    CUSTOM = "custom"


@dataclass(frozen=True, eq=False)
class Observable:
    """One output row c. Spectral coefficients are cached per Spectrum token."""

    kind: ObservableKind
    vector: np.ndarray
    label: str
    _coefficients: Dict[int, np.ndarray] = field(
        default_factory=dict, repr=False, compare=False
    )

    def __post_init__(self):
        vector = np.array(self.vector, dtype=float)
        if vector.ndim != 1:
            raise ConfigError(f"Observable {self.label} must be a vector")
        if not np.linalg.norm(vector) > 0:
            raise ConfigError(f"Observable {self.label} has zero norm")
        if self.kind not in (ObservableKind.AVERAGE, ObservableKind.CUSTOM):
            if abs(vector.sum()) > 1e-12 * max(1.0, np.abs(vector).sum()):
                raise ConfigError(f"Observable {self.label} must be orthogonal to 1")
        vector.setflags(write=False)
        object.__setattr__(self, "vector", vector)

    @property
    def n(self) -> int:
        return len(self.vector)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))

    @property
    def in_kernel(self) -> bool:
        """True when the all-ones direction is unobservable (c_1^Q = 0)."""
        return abs(self.vector.sum()) / math.sqrt(self.n) < kernel_tolerance

    def coefficients(self, s: Spectrum) -> np.ndarray:
        if s.n != self.n:
            raise ConfigError(
                f"Observable {self.label} has {self.n} entries but the spectrum has {s.n}"
            )
        cached = self._coefficients.get(s.token)
        if cached is None:
            cached = spectral_coefficients(self.vector, s)
            cached.setflags(write=False)
            self._coefficients[s.token] = cached
        return cached

    def scaled(self, factor: float) -> "Observable":
        return Observable(self.kind, self.vector * factor, f"{factor:g}*{self.label}")


@dataclass(frozen=True)
class ObservableSet:
    """Ordered rows of the output matrix C."""

    observables: Tuple[Observable, ...]

    def __post_init__(self):
        if not self.observables:
            raise ConfigError("An observable set needs at least one row")
        sizes = {o.n for o in self.observables}
        if len(sizes) != 1:
            raise ConfigError(f"Observable rows disagree on dimension: {sorted(sizes)}")

    def __len__(self) -> int:
        return len(self.observables)

    def __iter__(self):
        return iter(self.observables)

    def __getitem__(self, index: int) -> Observable:
        return self.observables[index]

    @property
    def matrix(self) -> np.ndarray:
        return np.vstack([o.vector for o in self.observables])

    @property
    def labels(self) -> List[str]:
        return [o.label for o in self.observables]

    @property
    def in_kernel(self) -> bool:
        return kernel_check(self.matrix)

    def coefficient_matrix(self, s: Spectrum) -> np.ndarray:
        """q x n matrix whose row r holds the spectral coefficients of row r."""
        return np.vstack([o.coefficients(s) for o in self.observables])


def _check_node(i: int, n: int) -> None:
    if not 1 <= i <= n:
        raise ConfigError(f"Node {i} is outside 1..{n}")


def deviation_from_average(i: int, n: int) -> Observable:
    """c = e_i - (1/n) 1, the i'th column of the centering matrix."""
    _check_node(i, n)
    c = np.full(n, -1.0 / n)
    c[i - 1] += 1.0
    return Observable(ObservableKind.DEVIATION, c, f"m{i}")


def pairwise(i: int, j: int, n: int) -> Observable:
    """c = e_i - e_j."""
    _check_node(i, n)
    _check_node(j, n)
    if i == j:
        raise ConfigError("pairwise observable needs two distinct nodes")
    c = np.zeros(n)
    c[i - 1] = 1.0
    c[j - 1] = -1.0
    return Observable(ObservableKind.PAIRWISE, c, f"x{i}-x{j}")


def neighbor_average_deviation(g: WeightedGraph, i: int) -> Observable:
    """c = e_i - (1/n_i) sum over the neighbours j of i of e_j."""
    _check_node(i, g.n)
    neighbors = g.neighbors(i)
    if not neighbors:
        raise ConfigError(f"Node {i} has no neighbours")
    c = np.zeros(g.n)
    c[i - 1] = 1.0
    c[np.array(neighbors) - 1] -= 1.0 / len(neighbors)
    return Observable(ObservableKind.NEIGHBOR, c, f"nbr{i}")


def average_state(n: int) -> Observable:
    """c = (1/n) 1. Not in the kernel; its steady risks are infinite."""
    return Observable(ObservableKind.AVERAGE, np.full(n, 1.0 / n), "avg")


def custom(vector: Sequence[float], label: str = "custom") -> Observable:
    return Observable(ObservableKind.CUSTOM, np.asarray(vector, dtype=float), label)


def centering_matrix(n: int) -> np.ndarray:
    return np.eye(n) - np.full((n, n), 1.0 / n)


def reduced_identity(n: int) -> np.ndarray:
    """E_n: the identity with its (1, 1) entry set to zero, so M_n = Q E_n Q^T."""
    e = np.eye(n)
    e[0, 0] = 0.0
    return e


def complete_incidence(n: int) -> np.ndarray:
    """n(n-1)/2 x n incidence of the complete graph; B^T B = n M_n."""
    rows = []
    for i in range(n):
        for j in range(i + 1, n):
            row = np.zeros(n)
            row[i], row[j] = 1.0, -1.0
            rows.append(row)
    return np.array(rows)


def incidence(g: WeightedGraph) -> np.ndarray:
    """Unweighted incidence of g, one row per stored edge."""
    B = np.zeros((len(g.edges), g.n))
    for row, (i, j, _) in enumerate(g.edges):
        B[row, i - 1] = 1.0
        B[row, j - 1] = -1.0
    return B


def structural_matrices(n: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(M_n, E_n, B_n)."""
    return centering_matrix(n), reduced_identity(n), complete_incidence(n)


def spectral_coefficients(c: np.ndarray, s: Spectrum) -> np.ndarray:
    """c^Q with c_k^Q = q_k^T c."""
    c = np.asarray(c, dtype=float)
    if c.shape[-1] != s.n:
        raise ConfigError(f"Vector of length {c.shape[-1]} does not match spectrum of size {s.n}")
    return c @ s.basis


def kernel_check(C: np.ndarray) -> bool:
    """True iff every row of C annihilates the all-ones vector."""
    C = np.atleast_2d(np.asarray(C, dtype=float))
    n = C.shape[1]
    return bool(np.all(np.abs(C.sum(axis=1)) / math.sqrt(n) < kernel_tolerance))


def centering_set(n: int) -> ObservableSet:
    """C = M_n, one deviation-from-average row per node."""
    return ObservableSet(tuple(deviation_from_average(i, n) for i in range(1, n + 1)))


def all_pairs_set(n: int) -> ObservableSet:
    """C = B_n, one pairwise row per unordered pair."""
    return ObservableSet(
        tuple(pairwise(i, j, n) for i in range(1, n + 1) for j in range(i + 1, n + 1))
    )


def _single(params: str, kind: str) -> int:
    nodes = _ints(params)
    if len(nodes) != 1:
        raise ConfigError(f"{kind} needs exactly one node, got '{params}'")
    return nodes[0]


def _ints(params: str) -> List[int]:
    try:
        return [int(p) for p in params.split(",") if p.strip()]
    except ValueError as e:
        raise ConfigError(f"Expected comma separated node indices, got '{params}'") from e


def parse_observable(spec: str | dict, g: WeightedGraph) -> List[Observable]:
    """Expands one observable spec into rows.

    String specs: ``deviation:I``, ``pairwise:I,J``, ``neighbor:I``, ``average``,
    ``custom:v1,v2,...``, ``centering`` (all deviations), ``all-pairs`` (B_n),
    ``edges`` (incidence of the graph). Dict specs use the same kinds with
    ``node``/``nodes``/``vector`` keys.
    """
    if isinstance(spec, dict):
        kind = str(spec.get("kind", "")).lower()
        if "vector" in spec:
            params = ",".join(str(v) for v in spec["vector"])
        elif "nodes" in spec:
            params = ",".join(str(v) for v in spec["nodes"])
        elif "node" in spec:
            params = str(spec["node"])
        else:
            params = ""
        label = spec.get("label")
    else:
        kind, _, params = spec.partition(":")
        kind = kind.strip().lower()
        label = None

    n = g.n
    if kind == "deviation":
        rows = [deviation_from_average(_single(params, kind), n)]
    elif kind == "pairwise":
        nodes = _ints(params)
        if len(nodes) != 2:
            raise ConfigError(f"pairwise needs two nodes, got '{params}'")
        rows = [pairwise(nodes[0], nodes[1], n)]
    elif kind == "neighbor":
        rows = [neighbor_average_deviation(g, _single(params, kind))]
    elif kind == "average":
        rows = [average_state(n)]
    elif kind == "custom":
        try:
            values = [float(v) for v in params.split(",")]
        except ValueError as e:
            raise ConfigError(f"custom needs numeric entries, got '{params}'") from e
        if len(values) != n:
            raise ConfigError(f"custom vector has {len(values)} entries, graph has {n}")
        rows = [custom(values, label or "custom")]
    elif kind == "centering":
        rows = list(centering_set(n))
    elif kind == "all-pairs":
        rows = list(all_pairs_set(n))
    elif kind == "edges":
        rows = [pairwise(i, j, n) for i, j, _ in g.edges]
    else:
        raise ConfigError(f"Unknown observable kind '{kind}'")

    if label and len(rows) == 1 and rows[0].label != label:
        rows = [Observable(rows[0].kind, rows[0].vector, label)]
    return rows


def observable_set(specs: Iterable[str | dict], g: WeightedGraph) -> ObservableSet:
    rows: List[Observable] = []
    for spec in specs:
        rows.extend(parse_observable(spec, g))
    log.debug(f"Built {len(rows)} observable rows")
    return ObservableSet(tuple(rows))
