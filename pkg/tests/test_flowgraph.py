import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from leodl.constellation import BandwidthProfile, manual_contact_table
from leodl.flowgraph import (
    EDGE_COST,
    SINK,
    SOURCE,
    GenerationSchedule,
    GraphBuildError,
    PlanConsistencyError,
    TransmissionPlan,
    build_time_expanded_graph,
    check_flow,
    extract_plan,
    plan_violations,
    solve,
)
from leodl.mcmf import FlowResult, max_flow


def tiny():
    ct = manual_contact_table(1, 1, 2, BandwidthProfile(10, 10, 10), gsl={0: {0: 0}})
    gen = GenerationSchedule(np.array([[5]]))
    return ct, gen


def test_tiny_network():
    ct, gen = tiny()
    g = build_time_expanded_graph(ct, gen, [0], 2)
    # source, sink and one satellite plus one station per layer 0..2
    assert g.node_count == 8
    assert max_flow(g.network(), SOURCE, SINK).max_flow_value == 5
    plan = extract_plan(g, solve(g))
    assert plan.d_gsl[0] == {(0, 0): 5} and plan.d_isl == [{}, {}]
    assert plan.delivered == 5


def test_edge_tags_and_layering():
    ct, gen = tiny()
    g = build_time_expanded_graph(ct, gen, [3], 2)
    for u, v, c, w, tag in zip(g.tails, g.heads, g.caps, g.costs, g.tags):
        assert c >= 0 and w == EDGE_COST
        if tag == "generation":
            assert u == SOURCE
        elif tag == "uplink":
            assert v == SINK
        else:
            ku, eu, tu = g.describe(u)
            kv, ev, tv = g.describe(v)
            assert tv == tu + 1
            if tag == "storage":
                assert (ku, eu) == (kv, ev)
    # initial queue merged with slot-0 generation
    assert [c for c, tag in zip(g.caps, g.tags) if tag == "generation"] == [8]


def test_empty_graph_gives_empty_plan():
    ct, _ = tiny()
    g = build_time_expanded_graph(ct, GenerationSchedule.empty(1), [0], 2)
    r = solve(g)
    assert r.max_flow_value == 0
    plan = extract_plan(g, r)
    assert list(plan) == []


def test_chain_routing(chain_contacts):
    g = build_time_expanded_graph(chain_contacts, GenerationSchedule.empty(3), [4, 0, 0], 3)
    r = solve(g)
    plan = extract_plan(g, r)
    assert plan.d_isl[0] == {(0, 1): 4}
    assert plan.d_isl[1] == {(1, 2): 4}
    assert plan.d_gsl[2] == {(2, 0): 4}
    # five edges per unit: generation, two ISLs, GSL, uplink
    assert r.total_cost == 4 * 5


def test_one_gsl_edge_per_station_slot():
    ct = manual_contact_table(2, 1, 1, BandwidthProfile(10, 10, 10), gsl={0: {0: 1}})
    g = build_time_expanded_graph(ct, GenerationSchedule(np.array([[3, 3]])), [0, 0], 1)
    assert g.tags.count("gsl") == 1


def test_window_checks():
    ct, gen = tiny()
    with pytest.raises(GraphBuildError):
        build_time_expanded_graph(ct, gen, [0], 3)
    with pytest.raises(GraphBuildError):
        build_time_expanded_graph(ct, gen, [0], 0)
    with pytest.raises(GraphBuildError):
        build_time_expanded_graph(ct, gen, [0, 0], 1)


def test_check_flow_rejects_infeasible():
    ct, gen = tiny()
    g = build_time_expanded_graph(ct, gen, [0], 2)
    bad = FlowResult(5, 0, [1] * len(g.tails))
    with pytest.raises(PlanConsistencyError):
        extract_plan(g, bad)
    with pytest.raises(PlanConsistencyError):
        check_flow(g, FlowResult(0, 0, []))


def test_dump_format():
    ct, gen = tiny()
    g = build_time_expanded_graph(ct, gen, [0], 2)
    lines = g.dump().splitlines()
    assert lines[0].startswith("# nodes=8")
    assert "source S0@0 5 1 generation" in lines
    assert all(len(line.split()) == 5 for line in lines[1:])


def _random_case(seed: int):
    rng = random.Random(seed)
    n, m, h = rng.randint(2, 6), rng.randint(1, 2), rng.randint(2, 12)
    bw = BandwidthProfile(rng.randint(1, 8), rng.randint(0, 8), rng.randint(1, 20))
    gsl = {}
    for t in range(h):
        sats = rng.sample(range(n), m)
        gsl[t] = {j: sats[j] for j in range(m) if rng.random() < 0.6}
    isl = {tuple(sorted(rng.sample(range(n), 2))) for _ in range(rng.randint(0, 2 * n))}
    ct = manual_contact_table(n, m, h, bw, gsl=gsl, isl=sorted(isl))
    vol = np.array([[rng.randint(0, 6) for _ in range(n)] for _ in range(rng.randint(1, h))])
    q0 = [rng.randint(0, 5) for _ in range(n)]
    return ct, GenerationSchedule(vol), q0, h


@pytest.mark.parametrize("seed", range(25))
def test_random_plans_respect_constraints(seed):
    ct, gen, q0, h = _random_case(seed)
    g = build_time_expanded_graph(ct, gen, q0, h)
    r = solve(g)
    plan = extract_plan(g, r)
    assert plan_violations(plan, ct, q0, gen) == []
    assert (plan.predicted_queues(q0, gen) >= 0).all()
    # every unit crosses its generation edge, one edge per layer and the uplink
    assert r.total_cost >= 2 * r.max_flow_value


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_flow_monotone_in_horizon(seed):
    ct, gen, q0, h = _random_case(seed)
    flows = [max_flow(build_time_expanded_graph(ct, gen, q0, k).network(), SOURCE, SINK).max_flow_value for k in range(1, h + 1)]
    assert flows == sorted(flows)


def test_plan_json_round_trip(chain_contacts):
    g = build_time_expanded_graph(chain_contacts, GenerationSchedule.empty(3), [4, 1, 0], 5)
    plan = extract_plan(g, solve(g))
    again = TransmissionPlan.from_json(plan.to_json())
    assert again == plan
    assert again.to_json() == plan.to_json()


def test_predicted_queues_recurrence(chain_contacts):
    gen = GenerationSchedule(np.array([[0, 0, 0], [2, 0, 0]]))
    g = build_time_expanded_graph(chain_contacts, gen, [4, 0, 0], 5)
    plan = extract_plan(g, solve(g))
    q = plan.predicted_queues([4, 0, 0], gen)
    assert q[0].tolist() == [4, 0, 0]
    assert q[-1].tolist() == [0, 0, 0]
    for t in range(plan.horizon):
        assert (q[t + 1] == q[t] - plan.outflow(t) + plan.inflow(t) + gen.at(t + 1)).all()
