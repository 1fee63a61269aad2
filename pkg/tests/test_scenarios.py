import math
from pathlib import Path

import numpy as np
import pytest
from src.errors import ConfigError
from src.graph import TopologyFamily, graph_spectrum, stability_margin
from src.scenarios import (
    build_graph,
    example_path,
    load_run_config,
    parse_tau_grid,
    run_config_from_mapping,
)

test_data = Path(__file__).resolve().parent / "test_data"


def test_tau_grid_includes_upper_end():
    grid = parse_tau_grid("0.005:0.35:0.005")
    assert len(grid) == 70
    assert grid[0] == pytest.approx(0.005)
    assert grid[-1] == pytest.approx(0.35)


def test_tau_grid_stops_before_overshooting():
    grid = parse_tau_grid("0.1:0.35:0.1")
    assert grid == pytest.approx([0.1, 0.2, 0.3])


def test_tau_grid_from_list():
    assert parse_tau_grid([0.1, 0.2]) == pytest.approx([0.1, 0.2])


@pytest.mark.parametrize("spec", ["0.1:0.2", "a:b:c", "0.2:0.1:0.01", "0.1:0.2:0", [0.2, 0.1], []])
def test_tau_grid_rejects(spec):
    with pytest.raises(ConfigError):
        parse_tau_grid(spec)


def test_build_graph_from_files():
    text = build_graph(str(test_data / "example1.txt"))
    blob = build_graph(test_data / "example1.json")
    assert text.n == blob.n == 5
    assert text.edges == blob.edges


def test_build_graph_missing_file():
    with pytest.raises(ConfigError, match="not found"):
        build_graph(test_data / "missing.txt")


def test_build_graph_inline_and_topology():
    inline = build_graph({"n": 3, "edges": [[1, 2, 1.0], [2, 3, 2.0]]})
    assert inline.edges == ((1, 2, 1.0), (2, 3, 2.0))
    ring = build_graph({"topology": "ring:6"}, weight=0.5)
    assert ring.n == 6
    assert ring.weighted_degrees() == pytest.approx(np.full(6, 1.0))


def test_build_graph_random_hits_target():
    g = build_graph({"random": {"n": 12, "edge_prob": 0.4, "tau_target": 0.2, "seed": 7}})
    tau_max = stability_margin(graph_spectrum(g))
    assert tau_max == pytest.approx(0.2 / 0.95)


@pytest.mark.parametrize("spec", [{"random": {"edge_prob": 0.3}}, {"n": 3}, 42])
def test_build_graph_rejects(spec):
    with pytest.raises(ConfigError):
        build_graph(spec)


def test_load_run_config_file():
    cfg = load_run_config(test_data / "run.yaml")
    assert cfg.command == "analyze"
    assert cfg.graph.n == 3
    assert cfg.params.tau == 0.2
    assert cfg.observable_set.labels == ["m1", "x1-x3"]


def test_unknown_keys_are_rejected():
    with pytest.raises(ConfigError, match="colour"):
        load_run_config(test_data / "bad_keys.yaml")


def test_overrides_win_over_file():
    cfg = load_run_config(test_data / "run.yaml", overrides={"tau": 0.3, "eps": None})
    assert cfg.params.tau == 0.3
    assert cfg.params.eps == 0.1


def test_example_one():
    cfg = load_run_config(example=1)
    assert cfg.graph.n == 5
    assert len(cfg.observable_set) == 5
    assert cfg.history == [1, 2, 3, 4, 5]
    assert cfg.params.eps == pytest.approx(math.sqrt(0.2))
    assert cfg.times == (0.5, 1.0, 2.0, 5.0, 10.0, 20.0)


@pytest.mark.parametrize("number", [2, 3])
def test_random_examples_sweep_inside_stability(number):
    cfg = load_run_config(example=number)
    assert cfg.command == "sweep"
    assert cfg.graph.n == 30
    tau_max = stability_margin(graph_spectrum(cfg.graph))
    assert 0 < cfg.tau_grid[0] and cfg.tau_grid[-1] < tau_max


def test_unknown_example():
    with pytest.raises(ConfigError):
        example_path(9)


def test_topology_config():
    cfg = run_config_from_mapping({"command": "table", "topology": "bipartite:2,8", "tau": 0.1})
    assert cfg.topology.family == TopologyFamily.BIPARTITE
    assert cfg.graph.n == 10


@pytest.mark.parametrize(
    "mapping",
    [
        {"command": "explode", "topology": "complete:4"},
        {"command": "analyze"},
        {"command": "table"},
        {"topology": "complete:4", "measure": "median"},
        {"topology": "complete:4", "eps": -1},
        {"topology": "complete:4", "tau": "soon"},
        {"topology": "path:3", "history": [1.0, 2.0]},
        # complete:4 is stable below pi / 8
        {"command": "sweep", "topology": "complete:4", "tau_grid": "0.1:0.4:0.1"},
    ],
)
def test_invalid_configurations(mapping):
    with pytest.raises(ConfigError):
        run_config_from_mapping(mapping)


def test_history_function_defaults_to_zero():
    cfg = run_config_from_mapping({"topology": "path:3", "tau": 0.1})
    h = cfg.history_function()
    assert h.tau == 0.1
    assert h(-0.05) == pytest.approx(np.zeros(3))
