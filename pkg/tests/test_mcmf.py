import random

import pytest

from leodl.mcmf import FlowNetwork, max_flow, min_cost_max_flow
from oracles import edmonds_karp, exhaustive_min_cost, random_graph


def _net(n, edges):
    net = FlowNetwork(n)
    for u, v, c, w in edges:
        net.add_edge(u, v, c, w)
    return net


def test_parallel_paths():
    # two disjoint s-t routes: capacity 3 at cost 2, capacity 2 at cost 4
    r = min_cost_max_flow(_net(4, [(0, 1, 3, 1), (1, 3, 3, 1), (0, 2, 2, 2), (2, 3, 2, 2)]), 0, 3)
    assert (r.max_flow_value, r.total_cost) == (5, 14)
    assert r.edge_flows == [3, 3, 2, 2]


def test_zero_capacity_only():
    r = min_cost_max_flow(_net(3, [(0, 1, 0, 1), (1, 2, 0, 3)]), 0, 2)
    assert (r.max_flow_value, r.total_cost) == (0, 0)


def test_empty_network():
    assert min_cost_max_flow(FlowNetwork(2), 0, 1).max_flow_value == 0


def test_prefers_cheap_route_then_fills_expensive():
    edges = [(0, 1, 5, 10), (0, 1, 5, 1), (1, 2, 7, 0)]
    r = min_cost_max_flow(_net(3, edges), 0, 2)
    assert (r.max_flow_value, r.total_cost) == (7, 5 * 1 + 2 * 10)


def test_negative_costs_without_cycle():
    r = min_cost_max_flow(_net(3, [(0, 1, 2, -3), (1, 2, 2, 1), (0, 2, 1, 0)]), 0, 2)
    assert (r.max_flow_value, r.total_cost) == (3, -4)


def test_negative_cycle_rejected():
    with pytest.raises(ValueError):
        min_cost_max_flow(_net(3, [(0, 1, 1, 0), (1, 2, 1, -2), (2, 1, 1, 1)]), 0, 2)


def test_add_edge_validation():
    net = FlowNetwork(2)
    with pytest.raises(ValueError):
        net.add_edge(0, 1, -1)
    with pytest.raises(ValueError):
        net.add_edge(0, 2, 1)


@pytest.mark.parametrize("seed", range(40))
def test_random_graphs_against_brute_force(seed):
    rng = random.Random(1000 + seed)
    n, edges = random_graph(rng)
    net = _net(n, edges)
    value = edmonds_karp(n, edges, 0, n - 1)
    r = min_cost_max_flow(net, 0, n - 1)
    assert r.max_flow_value == value == max_flow(net, 0, n - 1).max_flow_value
    assert r.total_cost == exhaustive_min_cost(n, edges, 0, n - 1, value)
    for (u, v, c, _), f in zip(edges, r.edge_flows):
        assert 0 <= f <= c
