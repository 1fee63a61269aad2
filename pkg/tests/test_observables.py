import numpy as np
import pytest
from src.errors import ConfigError
from src.graph import TopologyKind, WeightedGraph, generate_topology, graph_spectrum
from src.observables import (
    ObservableKind,
    all_pairs_set,
    average_state,
    centering_set,
    complete_incidence,
    custom,
    deviation_from_average,
    kernel_check,
    neighbor_average_deviation,
    observable_set,
    pairwise,
    structural_matrices,
)

EXAMPLE_EDGES = [(1, 2, 2.0), (1, 3, 3.2), (2, 5, 0.1), (2, 3, 5.0), (3, 4, 0.2), (4, 5, 0.3)]


@pytest.fixture
def example_graph():
    return WeightedGraph.from_edges(5, EXAMPLE_EDGES)


def test_deviation_from_average():
    c = deviation_from_average(2, 4)
    assert c.vector == pytest.approx([-0.25, 0.75, -0.25, -0.25])
    assert c.in_kernel
    assert c.norm == pytest.approx(np.sqrt(0.75))
    assert c.label == "m2"


def test_pairwise_and_neighbor(example_graph):
    c = pairwise(2, 5, 5)
    assert c.vector == pytest.approx([0, 1, 0, 0, -1])
    assert c.norm == pytest.approx(np.sqrt(2))
    nbr = neighbor_average_deviation(example_graph, 2)
    assert nbr.kind == ObservableKind.NEIGHBOR
    assert nbr.vector == pytest.approx([-1 / 3, 1, -1 / 3, 0, -1 / 3])
    assert nbr.in_kernel


def test_average_is_outside_kernel():
    c = average_state(4)
    assert not c.in_kernel
    assert not kernel_check(np.vstack([c.vector, pairwise(1, 2, 4).vector]))


@pytest.mark.parametrize(
    "build",
    [
        lambda: deviation_from_average(0, 3),
        lambda: deviation_from_average(4, 3),
        lambda: pairwise(2, 2, 3),
        lambda: custom([0.0, 0.0]),
    ],
)
def test_invalid_observables(build):
    with pytest.raises(ConfigError):
        build()


def test_observable_vector_is_frozen_copy():
    source = np.array([1.0, -1.0])
    c = custom(source)
    source[0] = 5.0
    assert c.vector[0] == 1.0
    with pytest.raises(ValueError):
        c.vector[0] = 2.0


def test_spectral_coefficients_reconstruct(example_graph):
    s = graph_spectrum(example_graph)
    c = deviation_from_average(3, 5)
    coefficients = c.coefficients(s)
    assert coefficients[0] == pytest.approx(0.0, abs=1e-12)
    assert s.basis @ coefficients == pytest.approx(c.vector)
    assert c.coefficients(s) is coefficients


def test_coefficients_check_dimension():
    s = graph_spectrum(generate_topology(TopologyKind.parse("ring:4")))
    with pytest.raises(ConfigError):
        deviation_from_average(1, 5).coefficients(s)


def test_structural_sets():
    M, E, B = structural_matrices(4)
    assert centering_set(4).matrix == pytest.approx(M)
    assert all_pairs_set(4).matrix == pytest.approx(B)
    assert B.T @ B == pytest.approx(4 * M)
    assert E[0, 0] == 0 and E[1, 1] == 1
    assert complete_incidence(5).shape == (10, 5)
    assert centering_set(4).in_kernel


def test_observable_set_specs(example_graph):
    C = observable_set(
        ["average", "deviation:1", "deviation:5", "pairwise:2,3", "pairwise:2,5"], example_graph
    )
    assert len(C) == 5
    assert C.labels == ["avg", "m1", "m5", "x2-x3", "x2-x5"]
    assert not C.in_kernel
    assert len(observable_set(["centering", "all-pairs"], example_graph)) == 5 + 10
    assert len(observable_set(["edges"], example_graph)) == 6


def test_observable_set_dict_spec(example_graph):
    C = observable_set(
        [{"kind": "pairwise", "nodes": [1, 4], "label": "ends"}, "custom:1,0,0,0,-1"],
        example_graph,
    )
    assert C.labels == ["ends", "custom"]
    assert C.in_kernel


@pytest.mark.parametrize(
    "spec", ["bogus", "pairwise:1", "deviation:1,2", "custom:1,2", "deviation:x"]
)
def test_observable_set_rejects(example_graph, spec):
    with pytest.raises(ConfigError):
        observable_set([spec], example_graph)
