"""Closed-form steady value-at-risk of deviation-from-average observables on
complete, wheel, complete bipartite, star, path and ring graphs.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy import optimize

from .config import bisection_max_iterations, half_pi
from .dde import steady_energy
from .errors import ConfigError, InstabilityError
from .graph import TopologyFamily, TopologyKind, generate_topology, graph_spectrum
from .observables import deviation_from_average
from .risk import RiskParams, var_risk_steady
from .special import s_epsilon

log = logging.getLogger(__name__)

_SQRT2 = math.sqrt(2.0)
_CROSSING_SCAN = 400
_CROSSING_TOLERANCE = 1e-8


def family_stability_bound(kind: TopologyKind, weight: float = 1.0) -> float:
    """pi / (2 lambda_n) from the family's largest eigenvalue."""
    family = kind.family
    n = kind.n
    if family == TopologyFamily.PATH:
        bound = math.pi / (4.0 * (1.0 + math.cos(math.pi / n)))
    elif family == TopologyFamily.RING:
        lambda_max = 4.0 if n % 2 == 0 else 2.0 + 2.0 * math.cos(math.pi / n)
        bound = math.pi / (2.0 * lambda_max)
    else:
        # complete, wheel, bipartite and star all top out at lambda_n = n
        bound = math.pi / (2.0 * n)
    return bound / weight


def _energy(lam: float, tau: float) -> float:
    return steady_energy(lam, tau)


def table_variance(kind: TopologyKind, tau: float, node: int, weight: float = 1.0) -> float:
    """Steady variance of x_node minus the network average for b = 1.

    Raises:
        ConfigError: node outside the graph
        InstabilityError: tau at or beyond the family's stability bound
    """
    n = kind.n
    if not 1 <= node <= n:
        raise ConfigError(f"Node {node} is outside 1..{n}")
    bound = family_stability_bound(kind, weight)
    if tau < 0:
        raise ConfigError(f"Delay must be non-negative, got {tau}")
    if not tau < bound:
        raise InstabilityError(tau, bound)

    def E(lam):
        return _energy(weight * lam, tau)

    family = kind.family
    if family == TopologyFamily.COMPLETE:
        return (1.0 - 1.0 / n) * E(n)
    if family == TopologyFamily.WHEEL:
        rim = kind.size[0]
        if node == 1:
            return rim / (rim + 1.0) * E(rim + 1)
        rim_modes = sum(
            E(3.0 - 2.0 * math.cos(2.0 * math.pi * (k - 1) / rim)) for k in range(2, rim + 1)
        )
        return rim_modes / rim + E(rim + 1) / (rim * (rim + 1.0))
    if family in (TopologyFamily.BIPARTITE, TopologyFamily.STAR):
        n1, n2 = kind.bipartite_sizes()
        if node <= n1:
            return (1.0 - 1.0 / n1) * E(n2) + n2 / (n1 * n) * E(n)
        return (1.0 - 1.0 / n2) * E(n1) + n1 / (n2 * n) * E(n)
    if family == TopologyFamily.PATH:
        total = 0.0
        for k in range(2, n + 1):
            lam = 2.0 * (1.0 - math.cos(math.pi * (k - 1) / n))
            total += math.cos(math.pi * (k - 1) * (2 * node - 1) / (2 * n)) ** 2 * E(lam)
        return 2.0 * total / n
    # ring
    return sum(E(2.0 - 2.0 * math.cos(2.0 * math.pi * (k - 1) / n)) for k in range(2, n + 1)) / n


def table_risk(kind: TopologyKind, p: RiskParams, node: int, weight: float = 1.0) -> float:
    """Steady value-at-risk sqrt(2) S_eps(0) b sigma_bar at one node."""
    p.require_probability()
    return _SQRT2 * s_epsilon(p.eps, 0.0) * p.b * math.sqrt(
        table_variance(kind, p.tau, node, weight)
    )


def group_label(kind: TopologyKind, node: int) -> str:
    family = kind.family
    n = kind.n
    if family == TopologyFamily.WHEEL:
        return "hub" if node == 1 else "rim"
    if family == TopologyFamily.STAR:
        return "center" if node == 1 else "leaf"
    if family == TopologyFamily.BIPARTITE:
        return "G1" if node <= kind.size[0] else "G2"
    if family == TopologyFamily.PATH:
        return f"p{min(node, n - node + 1)}"
    return "all"


@dataclass(frozen=True, eq=False)
class TopologyRiskProfile:
    kind: TopologyKind
    tau: float
    risks: np.ndarray
    groups: Tuple[str, ...]

    def group_nodes(self) -> Dict[str, List[int]]:
        result: Dict[str, List[int]] = {}
        for node, label in enumerate(self.groups, start=1):
            result.setdefault(label, []).append(node)
        return result

    def rows(self) -> List[dict]:
        return [
            {
                "kind": self.kind.family.value,
                "n": self.kind.n,
                "node": node,
                "tau": self.tau,
                "risk": float(risk),
                "group": label,
            }
            for node, (risk, label) in enumerate(zip(self.risks, self.groups), start=1)
        ]


def topology_profile(kind: TopologyKind, p: RiskParams, weight: float = 1.0) -> TopologyRiskProfile:
    nodes = range(1, kind.n + 1)
    return TopologyRiskProfile(
        kind=kind,
        tau=p.tau,
        risks=np.array([table_risk(kind, p, i, weight) for i in nodes]),
        groups=tuple(group_label(kind, i) for i in nodes),
    )


def cross_validate(kind: TopologyKind, p: RiskParams, weight: float = 1.0) -> float:
    """Largest per-node gap between the closed form and the generic spectral
    pipeline on the generated graph."""
    g = generate_topology(kind, weight)
    s = graph_spectrum(g)
    deviation = 0.0
    for node in range(1, kind.n + 1):
        generic = var_risk_steady(s, deviation_from_average(node, kind.n), p).value
        deviation = max(deviation, abs(generic - table_risk(kind, p, node, weight)))
    log.debug(f"{kind} at tau={p.tau}: max deviation {deviation:.3e}")
    return deviation


def _sign_changes(diff: Callable[[float], float], hi: float) -> List[Tuple[float, float]]:
    grid = np.linspace(0.0, hi, _CROSSING_SCAN)
    values = np.array([diff(t) for t in grid])
    return [
        (grid[i], grid[i + 1])
        for i in range(len(grid) - 1)
        if np.sign(values[i]) != np.sign(values[i + 1]) and values[i] != 0
    ]


def crossing_between(diff: Callable[[float], float], hi: float) -> Optional[float]:
    """Unique sign change of diff on [0, hi], refined by bisection, or None."""
    brackets = _sign_changes(diff, hi)
    if not brackets:
        return None
    if len(brackets) > 1:
        log.warning(f"Risk difference changes sign {len(brackets)} times; reporting the first")
    lo, up = brackets[0]
    return optimize.bisect(diff, lo, up, xtol=_CROSSING_TOLERANCE, maxiter=bisection_max_iterations)


def _group_representatives(kind: TopologyKind) -> Tuple[int, int]:
    """(well connected node, outer node) pairs compared by the crossing analysis."""
    family = kind.family
    if family in (TopologyFamily.WHEEL, TopologyFamily.STAR):
        return 1, 2
    if family == TopologyFamily.BIPARTITE:
        return 1, kind.n
    if family == TopologyFamily.PATH:
        if kind.n < 3:
            raise ConfigError(f"{kind} has a single node group")
        return (kind.n + 1) // 2, 1
    raise ConfigError(f"{kind} has no node groups to compare")


def crossing_delay(first: TopologyKind, second: Optional[TopologyKind] = None) -> Optional[float]:
    """Delay at which two risks swap order.

    With one kind, compares its two node groups (hub/rim, G1/G2, center/leaf,
    middle/end of a path). With two complete graphs, compares a node of each
    over their common stability interval. The crossing does not depend on eps
    or b, which only scale both risks.
    """
    if second is None:
        a, b = _group_representatives(first)
        hi = family_stability_bound(first) * (1.0 - 1e-9)
        return crossing_between(
            lambda t: table_variance(first, t, a) - table_variance(first, t, b), hi
        )
    if first.family != TopologyFamily.COMPLETE or second.family != TopologyFamily.COMPLETE:
        raise ConfigError("Pairwise crossings are defined for two complete graphs")
    hi = min(family_stability_bound(first), family_stability_bound(second)) * (1.0 - 1e-9)
    return crossing_between(
        lambda t: table_variance(first, t, 1) - table_variance(second, t, 1), hi
    )


@dataclass
class OrderingReport:
    kind: TopologyKind
    crossing: Optional[float]
    small_delay: Dict[str, float] = field(default_factory=dict)
    near_critical: Dict[str, float] = field(default_factory=dict)
    checks: Dict[str, bool] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def _risks_at(kind: TopologyKind, p: RiskParams, tau: float, nodes: Dict[str, int]) -> Dict[str, float]:
    params = p.with_tau(tau)
    return {label: table_risk(kind, params, node) for label, node in nodes.items()}


def ordering_checks(kind: TopologyKind, p: RiskParams) -> OrderingReport:
    """Measures which node group is riskier at small delay and near the
    stability bound, and the delay where they swap."""
    bound = family_stability_bound(kind)
    small, critical = 1e-3 * bound, (1.0 - 1e-6) * bound
    family = kind.family

    if family == TopologyFamily.RING:
        n = kind.n
        risks = [table_risk(kind, p, i) for i in range(1, n + 1)]
        other = TopologyKind(TopologyFamily.RING, (n + 1,))
        even, odd = (kind, other) if n % 2 == 0 else (other, kind)
        tau = (1.0 - 1e-6) * family_stability_bound(even)
        report = OrderingReport(
            kind=kind,
            crossing=None,
            near_critical={
                str(even): table_risk(even, p.with_tau(tau), 1),
                str(odd): table_risk(odd, p.with_tau(tau), 1),
            },
        )
        report.checks["node_uniform"] = max(risks) - min(risks) <= 1e-12 * max(risks)
        report.checks["odd_safer_near_even_critical"] = (
            report.near_critical[str(odd)] < report.near_critical[str(even)]
        )
        return report

    if family == TopologyFamily.COMPLETE:
        larger = TopologyKind(TopologyFamily.COMPLETE, (kind.n + 1,))
        crossing = crossing_delay(kind, larger)
        small = 1e-3 * family_stability_bound(larger)
        report = OrderingReport(
            kind=kind,
            crossing=crossing,
            small_delay={
                str(kind): table_risk(kind, p.with_tau(small), 1),
                str(larger): table_risk(larger, p.with_tau(small), 1),
            },
        )
        report.checks["larger_safer_at_small_delay"] = (
            report.small_delay[str(larger)] < report.small_delay[str(kind)]
        )
        report.checks["unique_crossing"] = crossing is not None
        return report

    inner, outer = _group_representatives(kind)
    nodes = {group_label(kind, inner): inner, group_label(kind, outer): outer}
    crossing = crossing_delay(kind)
    report = OrderingReport(
        kind=kind,
        crossing=crossing,
        small_delay=_risks_at(kind, p, small, nodes),
        near_critical=_risks_at(kind, p, critical, nodes),
    )
    inner_label, outer_label = list(nodes)
    report.checks["inner_riskier_near_critical"] = (
        report.near_critical[inner_label] > report.near_critical[outer_label]
    )
    report.checks["unique_crossing"] = crossing is not None and len(
        _sign_changes(
            lambda t: table_variance(kind, t, inner) - table_variance(kind, t, outer),
            bound * (1.0 - 1e-9),
        )
    ) == 1
    if family == TopologyFamily.PATH:
        n = kind.n
        risks = [table_risk(kind, p, i) for i in range(1, n + 1)]
        report.checks["mirror_symmetric"] = all(
            abs(risks[i] - risks[n - 1 - i]) <= 1e-12 * max(risks) for i in range(n)
        )
    log.info(f"{kind}: crossing tau*={crossing}, checks {report.checks}")
    return report
