import math

import networkx as nx
import numpy as np
import pytest
from pathlib import Path
from src.errors import ConfigError, InstabilityError, NumericalError
from src.graph import (
    TopologyFamily,
    TopologyKind,
    WeightedGraph,
    analytic_spectrum,
    check_stable,
    effective_resistance_matrix,
    generate_topology,
    graph_spectrum,
    laplacian,
    pairwise_effective_resistance,
    random_connected_graph,
    read_graph,
    spectrum,
    stability_margin,
    total_effective_resistance,
)

EXAMPLE_EDGES = [(1, 2, 2.0), (1, 3, 3.2), (2, 5, 0.1), (2, 3, 5.0), (3, 4, 0.2), (4, 5, 0.3)]


@pytest.fixture
def example_data_dir():
    return Path(__file__).resolve().parent / "test_data"


@pytest.fixture
def example_graph():
    return WeightedGraph.from_edges(5, EXAMPLE_EDGES)


def test_laplacian_rows_sum_to_zero(example_graph):
    L = laplacian(example_graph)
    assert np.allclose(L.sum(axis=1), 0.0)
    assert L[0, 0] == pytest.approx(5.2)
    assert L[1, 2] == pytest.approx(-5.0)
    assert np.allclose(L, L.T)


def test_example_stability_margin(example_graph):
    tau_max = stability_margin(graph_spectrum(example_graph))
    assert tau_max == pytest.approx(0.1211, abs=5e-4)


def test_spectrum_is_orthonormal_with_constant_first_mode(example_graph):
    s = graph_spectrum(example_graph)
    L = laplacian(example_graph)
    assert s.eigenvalues[0] == 0.0
    assert np.all(np.diff(s.eigenvalues) >= 0)
    assert np.allclose(s.basis.T @ s.basis, np.eye(5), atol=1e-10)
    assert np.allclose(s.basis[:, 0], 1 / math.sqrt(5))
    assert np.allclose(L @ s.basis, s.basis * s.eigenvalues, atol=1e-10)


def test_spectrum_rejects_non_laplacians():
    with pytest.raises(ConfigError):
        spectrum(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(NumericalError):
        spectrum(np.eye(3))


@pytest.mark.parametrize(
    "n,edges,message",
    [
        (1, [], "at least 2"),
        (3, [(1, 2, 1.0)], "not connected"),
        (2, [(1, 1, 1.0), (1, 2, 1.0)], "Self-loop"),
        (2, [(1, 2, 1.0), (2, 1, 2.0)], "Duplicate"),
        (2, [(1, 2, -1.0)], "non-positive"),
        (2, [(1, 3, 1.0)], "outside"),
    ],
)
def test_invalid_graphs(n, edges, message):
    with pytest.raises(ConfigError, match=message):
        WeightedGraph.from_edges(n, edges)


def test_zero_weight_edges_are_dropped():
    g = WeightedGraph.from_edges(3, [(1, 2, 1.0), (2, 3, 1.0), (1, 3, 0.0)])
    assert len(g.edges) == 2


def test_weighted_degrees_and_neighbors(example_graph):
    assert example_graph.weighted_degrees() == pytest.approx([5.2, 7.1, 8.4, 0.5, 0.4])
    assert example_graph.neighbors(2) == [1, 3, 5]


def test_complete_graph_resistance():
    s = graph_spectrum(generate_topology(TopologyKind.parse("complete:4")))
    assert total_effective_resistance(s) == pytest.approx(3.0)
    assert pairwise_effective_resistance(s, 1, 2) == pytest.approx(0.5)


def test_path_resistance_is_additive():
    g = generate_topology(TopologyKind.parse("path:5"), weight=2.0)
    s = graph_spectrum(g)
    assert pairwise_effective_resistance(s, 1, 5) == pytest.approx(4 * 0.5)
    R = effective_resistance_matrix(s)
    assert R[0, 4] == pytest.approx(2.0)
    assert np.allclose(np.diag(R), 0.0, atol=1e-12)
    # total resistance is the sum over unordered pairs
    assert total_effective_resistance(s) == pytest.approx(R[np.triu_indices(5, 1)].sum())


def test_resistance_matches_networkx(example_graph):
    s = graph_spectrum(example_graph)
    expected = nx.resistance_distance(example_graph.to_networkx(), 2, 4, weight="weight", invert_weight=False)
    assert pairwise_effective_resistance(s, 2, 4) == pytest.approx(expected, rel=1e-8)
    with pytest.raises(ConfigError):
        pairwise_effective_resistance(s, 3, 3)


@pytest.mark.parametrize(
    "spec",
    ["complete:5", "star:6", "wheel:5", "bipartite:2,4", "path:6", "ring:7", "ring:6"],
)
def test_analytic_spectrum_matches_eigensolver(spec):
    kind = TopologyKind.parse(spec)
    g = generate_topology(kind)
    numeric = graph_spectrum(g)
    analytic = analytic_spectrum(kind)
    assert analytic.eigenvalues == pytest.approx(numeric.eigenvalues, abs=1e-10)
    L = laplacian(g)
    assert np.allclose(analytic.basis.T @ analytic.basis, np.eye(kind.n), atol=1e-10)
    assert np.allclose(L @ analytic.basis, analytic.basis * analytic.eigenvalues, atol=1e-10)


def test_topology_kind_parsing():
    kind = TopologyKind.parse("wheel:6")
    assert kind.family == TopologyFamily.WHEEL
    assert kind.n == 7
    assert str(kind) == "wheel:6"
    assert TopologyKind.parse("bipartite:2,8").n == 10
    assert TopologyKind.parse("star:5").bipartite_sizes() == (1, 4)


@pytest.mark.parametrize("spec", ["blob:3", "ring:2", "bipartite:8,2", "bipartite:3", "complete:x"])
def test_topology_kind_rejects(spec):
    with pytest.raises(ConfigError):
        TopologyKind.parse(spec)


def test_check_stable(example_graph):
    s = graph_spectrum(example_graph)
    tau_max = stability_margin(s)
    check_stable(s, 0.0)
    check_stable(s, 0.99 * tau_max)
    with pytest.raises(InstabilityError) as error:
        check_stable(s, tau_max)
    assert error.value.tau_max == pytest.approx(tau_max)
    with pytest.raises(ConfigError):
        check_stable(s, -0.1)


def test_random_graph_hits_delay_target():
    g = random_connected_graph(20, 0.2, 0.1, 0.5, tau_target=0.3, seed=7)
    assert stability_margin(graph_spectrum(g)) == pytest.approx(0.3 / 0.95)
    again = random_connected_graph(20, 0.2, 0.1, 0.5, tau_target=0.3, seed=7)
    assert again.edges == g.edges


@pytest.mark.parametrize("args", [(5, 0.0, 0.1, 1.0), (5, 0.5, 0.0, 1.0), (5, 0.5, 2.0, 1.0)])
def test_random_graph_rejects(args):
    with pytest.raises(ConfigError):
        random_connected_graph(*args)


@pytest.mark.parametrize("name", ["example1.txt", "example1.json"])
def test_read_graph(example_data_dir, example_graph, name):
    g = read_graph(example_data_dir / name)
    assert g.n == 5
    assert np.allclose(laplacian(g), laplacian(example_graph))


def test_read_graph_errors(example_data_dir):
    with pytest.raises(ConfigError):
        read_graph(example_data_dir / "malformed.txt")
    with pytest.raises(FileNotFoundError):
        read_graph(example_data_dir / "missing.txt")
