import itertools
import json
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uprdd.instance import (
    active_commodities,
    capacity_ratio,
    from_json,
    make_instance,
    shortest_hops,
    shortest_transit,
    to_json,
    validate,
)


def test_validate_single_arc_ok():
    inst = make_instance([1, 1], [(0, 1, 2, 1)], [(0, 1)], horizon=3)
    assert validate(inst) == []


def test_validate_horizon_below_shortest_path():
    inst = make_instance([1, 1], [(0, 1, 2, 1)], [(0, 1)], horizon=1)
    kinds = [v.kind for v in validate(inst)]
    assert kinds == ["horizon"]


def test_validate_unreachable_destination():
    inst = make_instance([1, 1, 1], [(0, 1, 1, 1)], [(0, 2)], horizon=3)
    kinds = [v.kind for v in validate(inst)]
    assert kinds == ["unreachable"]


def test_validate_flags_bad_arcs():
    inst = make_instance([1, 1], [(0, 0, 1, 1), (0, 1, 1, 0)], [(0, 1)], horizon=3)
    kinds = sorted(v.kind for v in validate(inst))
    assert kinds == ["arc", "throughput"]


def test_active_commodities_origin_of_all():
    inst = make_instance([1, 1, 1], [(0, 1, 1, 1), (1, 2, 1, 1)], [(0, 2), (0, 1)], 4)
    assert active_commodities(inst, 0) == frozenset()


def test_active_commodities_excludes_endpoints_only():
    inst = make_instance(
        [1, 1, 1, 1],
        [(0, 1, 1, 1), (1, 2, 1, 1), (2, 3, 1, 1)],
        [(0, 1), (0, 3), (2, 3)],
        horizon=6,
    )
    assert active_commodities(inst, 1) == frozenset({1, 2})
    # a node that is nobody's endpoint sees every packet
    inst2 = make_instance(
        [1, 1, 1], [(0, 1, 1, 1), (1, 2, 1, 1)], [(0, 2), (0, 2)], horizon=4
    )
    assert active_commodities(inst2, 1) == frozenset({0, 1})


def test_active_commodities_bad_node():
    inst = make_instance([1, 1], [(0, 1, 1, 1)], [(0, 1)], horizon=2)
    with pytest.raises(ValueError):
        active_commodities(inst, 7)


def test_shortest_transit_identity_and_single_arc():
    inst = make_instance([1, 1], [(0, 1, 4, 1)], [(0, 1)], horizon=5)
    assert shortest_transit(inst, 0, 0) == 0
    assert shortest_transit(inst, 0, 1) == 4
    assert shortest_transit(inst, 1, 0) is None


def _all_path_transits(inst, s, t, seen=None):
    # independent oracle: exhaustive simple-path enumeration
    seen = seen or {s}
    if s == t:
        yield 0
        return
    for i in inst.out_arcs[s]:
        a = inst.arcs[i]
        if a.head in seen:
            continue
        for rest in _all_path_transits(inst, a.head, t, seen | {a.head}):
            yield a.transit + rest


def test_shortest_transit_parallel_routes(parallel_routes4):
    expected = min(_all_path_transits(parallel_routes4, 0, 3))
    assert expected == 5
    assert shortest_transit(parallel_routes4, 0, 3) == expected
    assert shortest_hops(parallel_routes4, 0, 3) == 1


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_shortest_transit_triangle_inequality(data):
    n = data.draw(st.integers(3, 5))
    arcs = data.draw(
        st.lists(
            st.tuples(
                st.integers(0, n - 1),
                st.integers(0, n - 1),
                st.integers(0, 4),
            ).filter(lambda a: a[0] != a[1]),
            min_size=1,
            max_size=10,
        )
    )
    inst = make_instance([0] * n, [(s, t, tr, 1) for s, t, tr in arcs], [], horizon=1)
    for s, m, t in itertools.product(range(n), repeat=3):
        d_st = shortest_transit(inst, s, t)
        d_sm = shortest_transit(inst, s, m)
        d_mt = shortest_transit(inst, m, t)
        if d_sm is not None and d_mt is not None:
            assert d_st is not None and d_st <= d_sm + d_mt


def test_capacity_ratio_values():
    inst = make_instance([0, 0], [(0, 1, 1, 1), (1, 0, 1, 1)], [(0, 1)], horizon=2)
    assert capacity_ratio(inst) == 1
    inst = make_instance(
        [0, 0],
        [(0, 1, 1, 1), (0, 1, 1, 2), (1, 0, 1, 3)],
        [(0, 1)] * 4,
        horizon=4,
    )
    assert capacity_ratio(inst) == Fraction(3 * 4, 6) == 2


def test_capacity_ratio_needs_arcs():
    inst = make_instance([0], [], [], horizon=1)
    with pytest.raises(ValueError):
        capacity_ratio(inst)


def test_json_round_trip_and_determinism(chain3):
    text = to_json(chain3)
    again = from_json(text)
    assert again == chain3
    assert to_json(again) == text
    doc = json.loads(text)
    assert set(doc) == {"nodes", "arcs", "commodities", "horizon", "meta"}
    assert doc["nodes"][1] == {"id": 1, "storage": 1}


def test_multi_arcs_permitted():
    inst = make_instance(
        [1, 1], [(0, 1, 1, 1), (0, 1, 2, 3)], [(0, 1)], horizon=3
    )
    assert validate(inst) == []
    assert shortest_transit(inst, 0, 1) == 1
