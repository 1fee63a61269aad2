import math

import numpy as np
import pytest
from src.graph import TopologyKind, WeightedGraph, generate_topology, graph_spectrum, total_effective_resistance
from src.joint import exp_joint_sum, steady_covariance
from src.limits import (
    complete_family_curve,
    limit_report,
    quad_hard_limit,
    random_kernel_observable,
    resistance_floor,
    sigma_star,
    tradeoff_scatter,
    var_hard_limit,
    var_tradeoff_floor,
    vector_hard_limits,
)
from src.observables import ObservableSet, centering_set, deviation_from_average, pairwise
from src.risk import RiskParams, steady_sigma, var_risk_steady
from src.special import z_plus

EXAMPLE_EDGES = [(1, 2, 2.0), (1, 3, 3.2), (2, 5, 0.1), (2, 3, 5.0), (3, 4, 0.2), (4, 5, 0.3)]


@pytest.fixture
def example_spectrum():
    return graph_spectrum(WeightedGraph.from_edges(5, EXAMPLE_EDGES))


def test_complete_graph_attains_sigma_star():
    n, tau = 5, 0.3
    weight = z_plus() / (n * tau)
    s = graph_spectrum(generate_topology(TopologyKind.parse(f"complete:{n}"), weight))
    p = RiskParams(eps=0.05, b=0.8, tau=tau)
    c = deviation_from_average(2, n)
    assert steady_sigma(s, c, p) == pytest.approx(sigma_star(c, p), rel=1e-10)
    assert var_risk_steady(s, c, p).value == pytest.approx(var_hard_limit(c, p), rel=1e-10)


def test_hard_limit_scales_with_root_delay():
    c = pairwise(1, 2, 4)
    first = var_hard_limit(c, RiskParams(eps=0.1, tau=0.1))
    second = var_hard_limit(c, RiskParams(eps=0.1, tau=0.4))
    assert second == pytest.approx(2 * first)
    assert sigma_star(c, RiskParams(eps=0.1, tau=0.0)) == 0.0


def test_resistance_floor_met_by_critical_complete_graph():
    n, tau = 6, 0.2
    for margin in (0.5, 0.9, 0.999):
        weight = margin * math.pi / (2 * n * tau)
        s = graph_spectrum(generate_topology(TopologyKind.parse(f"complete:{n}"), weight))
        assert total_effective_resistance(s) > resistance_floor(n, tau)
    assert resistance_floor(n, tau) == pytest.approx(2 * n * (n - 1) * tau / math.pi)


@pytest.mark.parametrize("tau", [0.0, 0.02, 0.06, 0.1, 0.12])
def test_every_bound_holds_on_example(example_spectrum, tau):
    p = RiskParams(eps=0.05, b=0.3, tau=tau, beta=2.0)
    for c in centering_set(5):
        report = limit_report(example_spectrum, c, p)
        assert report.passes, report.flags
        assert report.var_tradeoff >= report.var_tradeoff_floor


def test_limit_report_row():
    s = graph_spectrum(generate_topology(TopologyKind.parse("ring:6")))
    report = limit_report(s, pairwise(1, 4, 6), RiskParams(eps=0.1, tau=0.3))
    row = report.as_row()
    assert "flags" not in row
    assert row["passes"] is True
    assert math.isnan(row["exp_risk"])
    assert set(report.flags) == {"resistance", "sigma", "var_hard", "quad_hard", "var_tradeoff", "quad_tradeoff"}


def test_vector_limits_reduce_to_scalar():
    c = deviation_from_average(1, 4)
    p = RiskParams(eps=0.5, b=1.0, tau=0.2)
    limits = vector_hard_limits(ObservableSet((c,)), p)
    assert limits.quad[0] == pytest.approx(quad_hard_limit(c, p))
    assert limits.var[0] == pytest.approx(var_hard_limit(c, p))


def test_exponential_sum_floor(example_spectrum):
    C = ObservableSet((deviation_from_average(1, 5), pairwise(2, 5, 5)))
    p = RiskParams(eps=0.2, b=0.3, tau=0.08)
    floor = vector_hard_limits(C, p).exp_sum
    estimate = exp_joint_sum(steady_covariance(example_spectrum, C, p), p.eps, 1.0, samples=50_000, seed=4)
    assert estimate.value >= floor - 4 * estimate.std_error


def test_random_kernel_observable():
    c = random_kernel_observable(7, np.random.default_rng(0))
    assert c.norm == pytest.approx(1.0)
    assert c.in_kernel


def test_complete_family_curve_touches_hard_limit():
    n, tau = 8, 0.4
    curve = complete_family_curve(n, tau, points=400)
    unit = random_kernel_observable(n, np.random.default_rng(1))
    star = sigma_star(unit, RiskParams(eps=0.05, tau=tau))
    assert curve["risk"].min() >= star * (1 - 1e-12)
    assert curve["risk"].min() <= star * 1.001
    assert set(curve["curve"]) == {"complete"}


def test_tradeoff_scatter_has_no_violations():
    scatter = tradeoff_scatter(n=6, count=40, tau=0.3, eps=0.05, seed=1)
    assert len(scatter.points) == 40
    assert scatter.violations == 0
    assert set(scatter.curves["curve"]) == {"hard_limit", "resistance_floor", "tradeoff", "complete"}
    floor = math.sqrt(resistance_floor(6, 0.3))
    assert (scatter.points["sqrt_resistance"] > floor).all()
    again = tradeoff_scatter(n=6, count=40, tau=0.3, eps=0.05, seed=1)
    assert again.points["risk"].tolist() == scatter.points["risk"].tolist()


def test_tradeoff_floor_grows_with_size():
    c = deviation_from_average(1, 4)
    p = RiskParams(eps=0.1, tau=0.2)
    assert var_tradeoff_floor(c, p, 8) > var_tradeoff_floor(c, p, 4)
