import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from idago.errors import InvalidDag, UnknownCommodity
from idago.scenarios import builtin
from idago.servicegraph import (CommoditySpec, FunctionKind, FunctionSpec, Rates, ServiceGraph, input_commodities,
                                make_info_unaware, require_valid, scale_commodities, validate_dag)

SRC, DST, PROC = FunctionKind.SOURCE, FunctionKind.DESTINATION, FunctionKind.PROCESSING


def _chain() -> ServiceGraph:
    fs = [FunctionSpec("s", SRC, "src"), FunctionSpec("f", PROC), FunctionSpec("d", DST, "dst")]
    ks = [CommoditySpec("s>f", "s", "f", "a", Rates(1, 1, 1)), CommoditySpec("f>d", "f", "d", "b", Rates(2, 2, 2))]
    return ServiceGraph(fs, ks)


def test_scenario1_service_is_valid():
    s = builtin("scenario1_a").service
    assert validate_dag(s) == []
    assert len(s.commodities) == 8
    assert s.commodity("Synthesis>Pers1").rates.comm == 15


def test_cycle_witness():
    fs = [FunctionSpec("f1", PROC), FunctionSpec("f2", PROC)]
    ks = [CommoditySpec("a", "f1", "f2", "x"), CommoditySpec("b", "f2", "f1", "y")]
    assert "cycle: f1,f2" in validate_dag(ServiceGraph(fs, ks))
    with pytest.raises(InvalidDag):
        ServiceGraph(fs, ks).topological_order()


def test_unmapped_object():
    s = _chain()
    s = ServiceGraph(s.functions, s.commodities, ["a", "b", "o3"])
    assert validate_dag(s) == ["object o3 unmapped"]
    with pytest.raises(InvalidDag):
        require_valid(s)


def test_missing_locations_and_dangling_refs():
    fs = [FunctionSpec("s", SRC), FunctionSpec("d", DST)]
    ks = [CommoditySpec("k", "s", "d", "o"), CommoditySpec("z", "s", "nowhere", "o")]
    out = validate_dag(ServiceGraph(fs, ks))
    assert "source function s missing fixed location" in out
    assert "destination function d missing fixed location" in out
    assert "commodity z references unknown function nowhere" in out


def test_latency_bound_needs_destination_consumer():
    s = _chain()
    ks = [CommoditySpec("s>f", "s", "f", "a", latency_bound=0.1), s.commodities[1]]
    assert any("latency bound" in v for v in validate_dag(s.with_commodities(ks)))


def test_input_commodities():
    s = builtin("scenario1_a").service
    assert input_commodities(s, "Synthesis>Pers1") == ["CS>Synthesis", "Tracking>Synthesis"]
    assert input_commodities(s, "gNB1>Tracking") == []
    assert input_commodities(_chain(), "f>d") == ["s>f"]
    with pytest.raises(UnknownCommodity):
        input_commodities(_chain(), "missing")


def test_info_unaware_keeps_everything_but_objects():
    s = builtin("scenario1_a").service
    assert len(s.objects) == 7
    u = make_info_unaware(s)
    assert len(u.objects) == len(u.commodities) == len(s.commodities)
    for a, b in zip(s.commodities, u.commodities):
        assert (a.id, a.rates, a.latency_bound, a.producer, a.consumer) == (b.id, b.rates, b.latency_bound,
                                                                           b.producer, b.consumer)
    assert validate_dag(u) == []
    assert make_info_unaware(ServiceGraph([], [])).commodities == ()


def test_rate_by_link_kind():
    from idago.cloudnet import LinkKind
    r = Rates(comm=3, prod=5, cons=7)
    assert r.for_kind(LinkKind.COMMUNICATION) == 3
    assert r.for_kind(LinkKind.COMPUTATION_OUT) == 5
    assert r.for_kind(LinkKind.COMPUTATION_IN) == 7
    assert r.for_kind(LinkKind.SOURCE) == r.for_kind(LinkKind.DESTINATION) == 0


def test_scale_commodities():
    s = scale_commodities(_chain(), 3.0, ["f>d"])
    assert s.commodity("f>d").rates == Rates(6, 6, 6)
    assert s.commodity("s>f").rates == Rates(1, 1, 1)
    with pytest.raises(UnknownCommodity):
        scale_commodities(_chain(), 2.0, ["nope"])


@st.composite
def layered_services(draw):
    n_src = draw(st.integers(1, 3))
    n_proc = draw(st.integers(1, 5))
    fs = [FunctionSpec(f"s{i}", SRC, f"ls{i}") for i in range(n_src)]
    fs += [FunctionSpec(f"p{i}", PROC) for i in range(n_proc)]
    fs.append(FunctionSpec("d", DST, "ld"))
    ks = []
    for i in range(n_proc):
        earlier = [f"s{j}" for j in range(n_src)] + [f"p{j}" for j in range(i)]
        for src in draw(st.lists(st.sampled_from(earlier), min_size=1, max_size=2, unique=True)):
            ks.append(CommoditySpec(f"{src}>p{i}", src, f"p{i}", f"o{len(ks)}"))
    producers = {k.producer for k in ks}
    for i in range(n_proc):
        if f"p{i}" not in producers:
            ks.append(CommoditySpec(f"p{i}>d", f"p{i}", "d", f"o{len(ks)}"))
    for j in range(n_src):
        if f"s{j}" not in producers:
            ks.append(CommoditySpec(f"s{j}>d", f"s{j}", "d", f"o{len(ks)}"))
    return ServiceGraph(fs, ks)


@settings(max_examples=80, deadline=None)
@given(layered_services())
def test_derived_sets(s):
    assert validate_dag(s) == []
    order = s.topological_order()
    pos = {f: i for i, f in enumerate(order)}
    for k in s.commodities:
        assert pos[k.producer] < pos[k.consumer]
        assert (s.input_commodities(k.id) == []) == s.is_source_commodity(k.id)
    assert len(s.source_commodities) + len(s.processing_commodities) == len(s.commodities)
