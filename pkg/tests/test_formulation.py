import random
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from idago.errors import UnknownVariable, UnresolvableEndpoint, UnsupportedPlacement
from idago.formulation import (Blocks, F, FormulationOptions, LCum, Mu, assignment_from_flows, build, cost_of,
                               expected_row_counts, realize, resolve, variable_index, variable_key)
from idago.lpsolve import SolveBudget, solve_lp, solve_milp
from idago.scenarios import builtin, from_document
from idago.servicegraph import FunctionKind

from instances import random_config
from oracles import brute_force_optimum, candidate_nodes, evaluate, full_paths
from toys import two_node_doc

NATIVE = SolveBudget(backend="native")


def _colocated():
    doc = two_node_doc()
    doc["service"] = {
        "functions": [{"id": "S", "kind": "source", "location": "sA"}, {"id": "D", "kind": "destination", "location": "dA"}],
        "commodities": [{"id": "S>D", "producer": "S", "consumer": "D", "object": "x",
                         "rates": {"comm": 3, "prod": 3, "cons": 3}}],
    }
    return from_document(doc)


def test_colocated_service_costs_nothing():
    cfg = _colocated()
    p = build(cfg.graph, cfg.service)
    sol = solve_milp(p, NATIVE)
    assert sol.ok and sol.objective == pytest.approx(0.0, abs=1e-12)
    used = [e for e in range(len(cfg.graph.links)) if sol[F(0, e)] > 0.5]
    assert {cfg.graph.links[e].kind.value for e in used} == {"Source", "Destination"}


def test_two_node_toy_picks_the_cheap_host():
    cfg = from_document(two_node_doc())
    g, s = cfg.graph, cfg.service
    assert brute_force_optimum(g, s) == pytest.approx(2.0)
    p = build(g, s)
    sol = solve_milp(p, NATIVE)
    assert sol.objective == pytest.approx(2.0, abs=1e-9)
    lp = solve_lp(p.relaxation(), NATIVE)
    assert lp.objective == pytest.approx(2.0, abs=1e-9)
    a_out = g.gadget_links(g.node_id("A/c"))[1]
    assert sol[F(cfg.service.commodity_index("P>D"), a_out)] == pytest.approx(1.0)
    # make A expensive: B plus two link crossings wins
    cfg2 = from_document(two_node_doc(out_cost_a=9.0))
    assert solve_milp(build(cfg2.graph, cfg2.service), NATIVE).objective == pytest.approx(7.0, abs=1e-9)


def test_variable_index_round_trip():
    cfg = builtin("scenario1_a")
    p = build(cfg.graph, cfg.service)
    for col, key in enumerate(p.variables):
        assert variable_index(p, variable_key(p, col)) == col
    with pytest.raises(UnknownVariable):
        variable_index(p, Blocks(0))
    with pytest.raises(UnknownVariable):
        variable_index(p, LCum(0))
    lat = build(cfg.graph, cfg.service, FormulationOptions(latency_enabled=True))
    assert variable_index(lat, LCum(0)) >= 0


def test_single_flow_variable_on_a_minimal_problem():
    cfg = _colocated()
    p = build(cfg.graph, cfg.service)
    assert variable_key(p, variable_index(p, F(0, 0))) == F(0, 0)


def test_block_ceiling_and_cost():
    cfg = random_config(3, blocks=True, block_size=50.0, tight=10.0)
    ctx = resolve(cfg.graph, cfg.service, cfg.opts)
    e = next(lk.id for lk in cfg.graph.links if lk.blocks is not None)
    c_b = cfg.graph.links[e].blocks.block_capacity
    assert c_b == 50.0
    flows = np.zeros((len(ctx.s.commodities), len(cfg.graph.links)))
    k = int(np.argmax(ctx.rate[:, e]))
    flows[k, e] = 120.0 / ctx.rate[k, e]
    r = realize(ctx, flows)
    assert r["mu"][e] == pytest.approx(120.0)
    assert r["y"][e] == 3
    expected = 3 * cfg.graph.links[e].blocks.block_cost
    assert cost_of(ctx, r["mu"], r["y"]) == pytest.approx(expected)


def test_placement_errors():
    doc = two_node_doc()
    doc["service"]["functions"][1]["allowed_hosts"] = ["A"]
    with pytest.raises(UnresolvableEndpoint):
        cfg = from_document(doc)
        build(cfg.graph, cfg.service)
    doc = two_node_doc()
    doc["network"]["nodes"][1]["compute"][0]["kind"] = "gpu"
    doc["service"]["functions"][1]["allowed_hosts"] = ["A/c", "B/c"]
    with pytest.raises(UnsupportedPlacement):
        cfg = from_document(doc)
        build(cfg.graph, cfg.service)


def _random_routing(g, s, rnd):
    procs = [f.id for f in s.functions if f.kind is FunctionKind.PROCESSING]
    where = {f.id: g.node_id(f.location) for f in s.functions if f.kind is not FunctionKind.PROCESSING}
    for fid in procs:
        where[fid] = rnd.choice(candidate_nodes(g, s, fid))
    return {k.id: rnd.choice(full_paths(g, where[k.producer], where[k.consumer])) for k in s.commodities}


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 5000), st.booleans(), st.booleans(), st.booleans())
def test_rows_agree_with_direct_evaluation(seed, latency, blocks, aware):
    cfg = random_config(seed, max_nodes=5, latency=latency, blocks=blocks, tight=0.6)
    opts = replace(cfg.opts, info_aware=aware)
    p = build(cfg.graph, cfg.service, opts)
    assert p.row_counts() == expected_row_counts(cfg.graph, cfg.service, opts)
    ctx = p.context
    rnd = random.Random(seed)
    for _ in range(5):
        routes = _random_routing(cfg.graph, cfg.service, rnd)
        flows = np.zeros((len(ctx.s.commodities), len(cfg.graph.links)))
        for i, k in enumerate(cfg.service.commodities):
            flows[i, list(routes[k.id])] = 1.0
        x = assignment_from_flows(p, flows)
        cost, ok = evaluate(cfg.graph, cfg.service, routes, info_aware=aware, latency=latency, blocks=blocks)
        assert p.objective_value(x) == pytest.approx(cost, abs=1e-9)
        assert (p.max_violation(x) <= 1e-9) == ok


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 5000))
def test_relaxation_and_information_dominance(seed):
    cfg = random_config(seed, max_nodes=5, tight=0.5)
    aware = build(cfg.graph, cfg.service, replace(cfg.opts, info_aware=True))
    unaware = build(cfg.graph, cfg.service, replace(cfg.opts, info_aware=False))
    m_aware = solve_milp(aware, NATIVE)
    m_unaware = solve_milp(unaware, NATIVE)
    lp = solve_lp(aware.relaxation(), NATIVE)
    if m_aware.ok:
        assert lp.objective <= m_aware.objective + 1e-7
    if m_aware.ok and m_unaware.ok:
        assert m_aware.objective <= m_unaware.objective + 1e-7
    if m_unaware.ok:
        assert m_aware.ok


def test_row_counts_on_builtins():
    for name in ("scenario1_a", "scenario1_b", "scenario2"):
        cfg = builtin(name)
        p = build(cfg.graph, cfg.service, cfg.opts)
        assert p.row_counts() == expected_row_counts(cfg.graph, cfg.service, cfg.opts)
        assert sum(isinstance(v, Mu) for v in p.variables) == len(cfg.graph.links)
