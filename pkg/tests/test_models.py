import pytest

from uprdd.expand import build_arcs, full_expand, initial_partial
from uprdd.gen import gen_tiny
from uprdd.instance import make_instance, shortest_transit
from uprdd.models import (
    ModelBuildError,
    build_fixed_paths,
    build_full,
    build_partial,
    canonical_form,
    extract_flows,
)
from uprdd.solvers import MilpBackend
from uprdd.verify import brute_force_optimum

BE = MilpBackend()


def optimum(model):
    res = BE.solve(model)
    if res.status == "infeasible":
        return None
    assert res.status == "optimal"
    return round(res.objective)


def test_full_forced_path():
    inst = make_instance(
        [1, 1, 1], [(0, 1, 1, 1), (1, 2, 1, 1)], [(0, 2)], horizon=2
    )
    assert optimum(build_full(inst)) == 2


def test_full_shared_bottleneck(chain3):
    # independent oracle: exhaustive joint enumeration
    assert brute_force_optimum(chain3) == 3
    assert optimum(build_full(chain3)) == 3


def test_full_bufferless_infeasible_then_feasible(bufferless3):
    sp = shortest_transit(bufferless3, 0, 2)
    assert optimum(build_full(bufferless3, horizon=sp)) is None
    assert optimum(build_full(bufferless3, horizon=sp + 1)) == sp + 1
    assert brute_force_optimum(bufferless3) == sp + 1


def test_partial_on_full_expansion_matches_full(chain3):
    full = build_full(chain3)
    part = build_partial(full_expand(chain3), chain3)
    assert canonical_form(full) == canonical_form(part)


def _bottleneck_transit(inst, s, t):
    # minimize (over s->t paths) the maximum arc transit on the path
    import heapq

    best = {s: 0}
    heap = [(0, s)]
    while heap:
        d, v = heapq.heappop(heap)
        if v == t:
            return d
        if d > best.get(v, 1 << 30):
            continue
        for i in inst.out_arcs[v]:
            a = inst.arcs[i]
            nd = max(d, a.transit)
            if nd < best.get(a.head, 1 << 30):
                best[a.head] = nd
                heapq.heappush(heap, (nd, a.head))
    return None


def test_initial_partial_respects_true_transits():
    # every supported arc contributes its honest arrival time, so the
    # coarsest relaxation is never below any packet's minimax arc transit
    for seed in range(8):
        inst = gen_tiny(seed)
        val = optimum(build_partial(initial_partial(inst), inst))
        floor = max(
            _bottleneck_transit(inst, c.origin, c.dest) for c in inst.commodities
        )
        assert val is not None and val >= floor


def test_partial_is_relaxation_of_full():
    for seed in range(8):
        inst = gen_tiny(seed)
        full_val = optimum(build_full(inst))
        part_val = optimum(build_partial(initial_partial(inst), inst))
        assert part_val <= full_val


def test_monotone_in_nested_time_sets():
    import numpy as np

    rng = np.random.default_rng(0)
    for seed in range(5):
        inst = gen_tiny(seed)
        small, large = [], []
        for v in range(inst.n_nodes):
            keep = {0, inst.horizon}
            extra = {
                t for t in range(1, inst.horizon) if rng.random() < 0.3
            }
            small.append(tuple(sorted(keep | extra)))
            more = {t for t in range(1, inst.horizon) if rng.random() < 0.4}
            large.append(tuple(sorted(keep | extra | more)))
        v_small = optimum(build_partial(build_arcs(small, inst), inst))
        v_large = optimum(build_partial(build_arcs(large, inst), inst))
        v_full = optimum(build_full(inst))
        assert v_small <= v_large <= v_full


def test_solution_values_are_binary_within_tolerance(chain3):
    model = build_full(chain3)
    res = BE.solve(model)
    for idx, var in enumerate(model.variables):
        if var.kind == "binary":
            val = res.values[idx]
            assert abs(val - round(val)) <= 1e-6


def test_exactly_one_final_arc_per_packet(chain3):
    model = build_full(chain3)
    res = BE.solve(model)
    flows = extract_flows(model, res.values, tol=0.5)
    for c in chain3.commodities:
        finals = [
            key
            for (k, key) in flows
            if k == c.id and key[0] == "m" and chain3.arcs[key[1]].head == c.dest
        ]
        assert len(finals) == 1


def test_fixed_paths_at_optimum_is_feasible(chain3):
    opt = brute_force_optimum(chain3)
    paths = [[0, 1], [0, 1]]
    model = build_fixed_paths(chain3, paths, opt)
    assert optimum(model) == opt


def test_fixed_paths_below_completion_is_infeasible(chain3):
    model = build_fixed_paths(chain3, [[0, 1], [0, 1]], 2)
    assert optimum(model) is None


def test_fixed_paths_requires_usable_path(chain3):
    with pytest.raises(ModelBuildError):
        build_fixed_paths(chain3, [[0], [0, 1]], 4)


def test_fixed_paths_pooled_superset():
    inst = make_instance(
        [2, 2, 2, 2],
        [(0, 1, 1, 1), (1, 3, 1, 1), (0, 2, 1, 1), (2, 3, 1, 1)],
        [(0, 3), (0, 3)],
        horizon=4,
    )
    single = build_fixed_paths(inst, [[0, 1], [0, 1]], 4)
    pooled = build_fixed_paths(inst, [[0, 1, 2, 3], [0, 1, 2, 3]], 4)
    single_keys = set(single.index)
    pooled_keys = set(pooled.index)
    assert single_keys <= pooled_keys
    assert optimum(pooled) <= optimum(single)


def test_build_full_empty_commodities():
    inst = make_instance([1, 1], [(0, 1, 1, 1)], [], horizon=3)
    model = build_full(inst)
    assert [v.name for v in model.variables] == ["makespan"]
    assert optimum(model) == 0


def test_build_partial_rejects_broken_network(chain3):
    net = full_expand(chain3)
    broken = net.__class__(
        net.times, net.movement_arcs[:-1], net.holdover_arcs, net.horizon
    )
    with pytest.raises(ModelBuildError):
        build_partial(broken, chain3)


def test_canonical_equivalence_many_seeds():
    for seed in range(6):
        inst = gen_tiny(seed)
        assert canonical_form(build_full(inst)) == canonical_form(
            build_partial(full_expand(inst), inst)
        )
