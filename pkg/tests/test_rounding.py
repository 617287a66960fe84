import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from idago.decompose import Decomposition, Embedding
from idago.errors import LpInfeasible, MissingTreeEmbedding
from idago.lpsolve import SolveBudget
from idago.rounding import (RoundingParams, Selection, best_product_element, compose, idago, integral_violations,
                            sample, stream)
from idago.scenarios import from_document

from instances import random_config
from oracles import evaluate
from toys import chain_doc, shared_object_doc, split_doc

NATIVE = SolveBudget(backend="native")


def _dec(probs):
    return Decomposition(0, [(Embedding(0, {"f": i}, {}), p) for i, p in enumerate(probs)])


def _freq(probs, n=20_000, seed=11):
    d = _dec(probs)
    hits = np.zeros(len(probs))
    for t in range(n):
        hits[sample(d, stream(seed, t, 0))] += 1
    return hits / n


def test_single_entry_always_drawn():
    d = _dec([1.0])
    assert {sample(d, stream(3, t, 0)) for t in range(200)} == {0}


@pytest.mark.parametrize("probs", [(0.5, 0.5), (0.9, 0.1)])
def test_draw_frequencies(probs):
    assert _freq(probs) == pytest.approx(probs, abs=0.02)


def test_streams_are_counter_based():
    a = stream(7, 3, 1).random(4)
    assert np.array_equal(a, stream(7, 3, 1).random(4))
    assert not np.array_equal(a, stream(7, 3, 2).random(4))
    assert not np.array_equal(a, stream(7, 4, 1).random(4))
    assert not np.array_equal(a, stream(8, 3, 1).random(4))


def test_param_validation():
    with pytest.raises(ValueError):
        RoundingParams(max_tries=0)
    with pytest.raises(ValueError):
        RoundingParams(accept_crf=0.9)
    with pytest.raises(ValueError):
        RoundingParams(selection="random")
    assert RoundingParams(selection="lowest").selection is Selection.LOWEST_COST


def test_shared_object_crosses_once():
    cfg = from_document(shared_object_doc())
    res = idago(cfg.graph, cfg.service, RoundingParams(), cfg.opts, NATIVE)
    g = cfg.graph
    ab = next(lk.id for lk in g.links if g.nodes[lk.tail].label == "A" and g.nodes[lk.head].label == "B")
    assert res.forest.M == 2
    assert res.best.mu[ab] == pytest.approx(15.0)
    # info-unaware counts both copies
    from dataclasses import replace
    unaware = idago(g, cfg.service, RoundingParams(), replace(cfg.opts, info_aware=False), NATIVE)
    assert unaware.best.mu[ab] == pytest.approx(30.0)


def test_latency_adds_along_the_chain():
    cfg = from_document(chain_doc((0.010, 0.015)))
    res = idago(cfg.graph, cfg.service, RoundingParams(), cfg.opts, NATIVE)
    assert res.best.latency("F>D") == pytest.approx(0.025)
    assert res.best.max_latency_relax == pytest.approx(0.025)


def test_selection_modes_on_a_split():
    cfg = from_document(split_doc())
    g, s = cfg.graph, cfg.service
    out = {}
    for sel in Selection:
        out[sel] = idago(g, s, RoundingParams(selection=sel), cfg.opts, NATIVE)
    first = out[Selection.FIRST_ACCEPTED]
    assert first.exhaustive and first.sizes == (2,)
    # each route carries rate 2 over capacity 1, so nothing passes strict thresholds
    assert first.tries_used == 2 and not first.accepted
    assert all(c.crf == pytest.approx(2.0) for c in first.candidates)
    every = out[Selection.BEST_COST].candidates
    assert len(every) == 2
    assert out[Selection.BEST_COST].best_candidate.cost == min(c.cost for c in every)
    assert out[Selection.LOWEST_COST].best_candidate.cost == min(c.cost for c in every)
    assert best_product_element(first, g, Selection.LOWEST_COST).cost == min(c.cost for c in every)
    loose = idago(g, s, RoundingParams(accept_crf=2.0), cfg.opts, NATIVE)
    assert loose.tries_used == 1 and loose.accepted


def test_compose_rejects_missing_trees():
    cfg = from_document(split_doc())
    res = idago(cfg.graph, cfg.service, RoundingParams(), cfg.opts, NATIVE)
    with pytest.raises(MissingTreeEmbedding):
        compose([], res.forest, cfg.graph, cfg.opts)
    broken = Embedding(0, res.best.chosen[0].function_map, {})
    with pytest.raises(MissingTreeEmbedding):
        compose([broken], res.forest, cfg.graph, cfg.opts)


def _solved(seed):
    cfg = random_config(seed, tight=0.35, latency=seed % 2 == 0)
    try:
        return cfg, idago(cfg.graph, cfg.service, RoundingParams(seed=seed, max_tries=20, exhaustive_limit=1),
                          cfg.opts, NATIVE)
    except LpInfeasible:
        return cfg, None


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2000))
def test_candidates_are_exact_and_repeatable(seed):
    cfg, res = _solved(seed)
    if res is None:
        return
    again = idago(cfg.graph, cfg.service, RoundingParams(seed=seed, max_tries=20, exhaustive_limit=1), cfg.opts,
                  NATIVE)
    assert again.candidates == res.candidates
    assert res.exhaustive == (math.prod(res.sizes) <= 1)
    fe = res.best
    assert integral_violations(fe.context, fe.flows) == []
    s = res.forest.service
    routes = {k.id: tuple(np.nonzero(fe.flows[fe.context.k(k.id)])[0]) for k in s.commodities}
    # the oracle wants each route in link order
    for kid, links in routes.items():
        emb = next(e for e in fe.chosen if kid in e.commodity_map)
        assert sorted(emb.commodity_map[kid]) == list(links)
        routes[kid] = emb.commodity_map[kid]
    cost, _ = evaluate(cfg.graph, s, routes, info_aware=cfg.opts.info_aware, latency=cfg.opts.latency_enabled)
    assert fe.cost == pytest.approx(cost, abs=1e-9)
    for c in res.candidates:
        assert all(0 <= i < d.N for i, d in zip(c.indices, res.decs))
    assert res.best_candidate.cost == min(c.cost for c in res.candidates if c.accepted == res.accepted)


def test_exhaustive_matches_product_best():
    for seed in range(40):
        cfg, res = _solved(seed)
        if res is None or math.prod(res.sizes) == 1:
            continue
        full = idago(cfg.graph, cfg.service, RoundingParams(selection="best"), cfg.opts, NATIVE)
        assert full.exhaustive
        assert full.best_candidate.cost == best_product_element(full, cfg.graph, Selection.BEST_COST).cost
        return
    pytest.fail("no fractional instance found")
