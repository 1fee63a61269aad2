import math

import pytest
from src.errors import ConfigError, InstabilityError
from src.graph import TopologyKind, generate_topology, graph_spectrum, stability_margin
from src.risk import RiskParams
from src.topology import (
    cross_validate,
    crossing_delay,
    family_stability_bound,
    group_label,
    ordering_checks,
    table_risk,
    table_variance,
    topology_profile,
)

KINDS = ["complete:4", "complete:7", "wheel:3", "wheel:6", "star:6", "bipartite:2,8", "bipartite:3,3", "path:5", "path:6", "ring:6", "ring:7"]


@pytest.mark.parametrize("spec", KINDS)
def test_stability_bound_matches_generated_graph(spec):
    kind = TopologyKind.parse(spec)
    expected = stability_margin(graph_spectrum(generate_topology(kind)))
    assert family_stability_bound(kind) == pytest.approx(expected, rel=1e-10)
    assert family_stability_bound(kind, weight=2.0) == pytest.approx(expected / 2, rel=1e-10)


@pytest.mark.parametrize("spec", KINDS)
@pytest.mark.parametrize("fraction", [0.0, 0.3, 0.9])
def test_closed_forms_match_spectral_pipeline(spec, fraction):
    kind = TopologyKind.parse(spec)
    p = RiskParams(eps=0.05, b=1.3, tau=fraction * family_stability_bound(kind))
    assert cross_validate(kind, p) < 1e-10


def test_weighted_closed_form():
    kind = TopologyKind.parse("wheel:5")
    p = RiskParams(eps=0.1, tau=0.5 * family_stability_bound(kind, 0.5))
    assert cross_validate(kind, p, weight=0.5) < 1e-10


def test_complete_graph_value():
    p = RiskParams(eps=0.05, tau=0.1)
    assert table_risk(TopologyKind.parse("complete:4"), p, 3) == pytest.approx(0.737064, abs=1e-5)
    assert table_variance(TopologyKind.parse("complete:4"), 0.0, 1) == pytest.approx(0.75 / 8)


def test_table_rejects_bad_input():
    kind = TopologyKind.parse("ring:6")
    with pytest.raises(InstabilityError):
        table_variance(kind, math.pi / 8, 1)
    with pytest.raises(ConfigError):
        table_variance(kind, 0.1, 7)
    with pytest.raises(ConfigError):
        table_variance(kind, -0.1, 1)


@pytest.mark.parametrize(
    "spec,node,label",
    [
        ("wheel:5", 1, "hub"),
        ("wheel:5", 4, "rim"),
        ("star:4", 1, "center"),
        ("star:4", 3, "leaf"),
        ("bipartite:2,3", 2, "G1"),
        ("bipartite:2,3", 3, "G2"),
        ("path:6", 5, "p2"),
        ("ring:5", 2, "all"),
        ("complete:3", 1, "all"),
    ],
)
def test_group_labels(spec, node, label):
    assert group_label(TopologyKind.parse(spec), node) == label


def test_profile_rows():
    kind = TopologyKind.parse("bipartite:2,8")
    profile = topology_profile(kind, RiskParams(eps=0.05, tau=0.05))
    rows = profile.rows()
    assert len(rows) == 10
    assert rows[0]["kind"] == "bipartite" and rows[0]["group"] == "G1"
    assert profile.group_nodes() == {"G1": [1, 2], "G2": list(range(3, 11))}
    # nodes within a group share their risk
    assert len({round(r["risk"], 12) for r in rows}) == 2


@pytest.mark.parametrize("spec", ["wheel:6", "star:6", "bipartite:2,8", "path:7"])
def test_group_ordering_swaps_once(spec):
    kind = TopologyKind.parse(spec)
    report = ordering_checks(kind, RiskParams(eps=0.05))
    assert report.passed, report.checks
    assert 0 < report.crossing < family_stability_bound(kind)
    inner, outer = list(report.small_delay)
    # the better connected group is safer at small delay and riskier near the bound
    assert report.small_delay[inner] < report.small_delay[outer]
    assert report.near_critical[inner] > report.near_critical[outer]


def test_crossing_is_a_root():
    kind = TopologyKind.parse("star:6")
    tau = crossing_delay(kind)
    assert table_variance(kind, tau, 1) == pytest.approx(table_variance(kind, tau, 2), rel=1e-6)


def test_complete_graph_ordering():
    report = ordering_checks(TopologyKind.parse("complete:4"), RiskParams(eps=0.05))
    assert report.passed, report.checks
    assert 0 < report.crossing < family_stability_bound(TopologyKind.parse("complete:5"))


@pytest.mark.parametrize("spec", ["ring:6", "ring:7"])
def test_ring_ordering(spec):
    report = ordering_checks(TopologyKind.parse(spec), RiskParams(eps=0.05, tau=0.2))
    assert report.passed, report.checks
    assert report.crossing is None


def test_path_mirror_check():
    report = ordering_checks(TopologyKind.parse("path:7"), RiskParams(eps=0.05, tau=0.1))
    assert report.checks["mirror_symmetric"]
    with pytest.raises(ConfigError):
        crossing_delay(TopologyKind.parse("path:2"))
    with pytest.raises(ConfigError):
        crossing_delay(TopologyKind.parse("ring:5"))
