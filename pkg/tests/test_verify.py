import pytest

from uprdd.gen import gen_tiny, tiny_shared_arc, TinyLimits
from uprdd.instance import make_instance
from uprdd.models import build_full
from uprdd.schedule import MalformedScheduleError, MoveStep, Schedule, Trajectory
from uprdd.solvers import MilpBackend
from uprdd.verify import (
    OracleLimitError,
    OracleLimits,
    brute_force_optimum,
    brute_force_solution,
    check_schedule,
)


def sched(inst, steps_per_k, makespan):
    trajs = tuple(
        Trajectory(k, tuple(MoveStep(*s) for s in steps))
        for k, steps in enumerate(steps_per_k)
    )
    return Schedule(trajs, makespan, inst.horizon)


def test_check_accepts_staggered_bottleneck(chain3):
    s = sched(
        chain3,
        [[(0, 0, 1), (1, 1, 2)], [(0, 0, 1), (1, 2, 3)]],
        makespan=3,
    )
    result = check_schedule(chain3, s)
    assert result.ok and result.makespan == 3


def test_check_flags_simultaneous_departures(chain3):
    s = sched(
        chain3,
        [[(0, 0, 1), (1, 1, 2)], [(0, 0, 1), (1, 1, 2)]],
        makespan=2,
    )
    result = check_schedule(chain3, s)
    kinds = {v.kind for v in result.violations}
    assert kinds == {"throughput"}


def test_check_flags_parking_at_bufferless_node(bufferless3):
    s = sched(
        bufferless3,
        [[(0, 0, 1), (1, 1, 2)], [(0, 1, 2), (1, 3, 4)]],
        makespan=4,
    )
    result = check_schedule(bufferless3, s)
    kinds = {v.kind for v in result.violations}
    assert kinds == {"storage"}
    v = next(iter(result.violations))
    assert v.where[0] == 1 and v.measured == 1 and v.allowed == 0


def test_check_flags_wrong_endpoint(chain3):
    s = sched(chain3, [[(0, 0, 1)], [(0, 0, 1), (1, 1, 2)]], makespan=2)
    kinds = {v.kind for v in check_schedule(chain3, s).violations}
    assert "endpoint" in kinds


def test_check_flags_disconnected_trajectory():
    inst = make_instance(
        [1, 1, 1, 1],
        [(0, 1, 1, 1), (2, 3, 1, 1), (1, 2, 1, 1)],
        [(0, 3)],
        horizon=5,
    )
    s = sched(inst, [[(0, 0, 1), (1, 2, 3)]], makespan=3)  # skips node 1 -> 2
    kinds = {v.kind for v in check_schedule(inst, s).violations}
    assert "flow" in kinds and "endpoint" not in kinds


def test_check_flags_timing_errors(chain3):
    # arrival inconsistent with transit
    s = sched(chain3, [[(0, 0, 2), (1, 2, 3)], [(0, 1, 2), (1, 2, 3)]], makespan=3)
    kinds = {v.kind for v in check_schedule(chain3, s).violations}
    assert kinds == {"timing", "throughput"} or kinds == {"timing"}
    # beyond horizon
    s = sched(chain3, [[(0, 3, 4), (1, 4, 5)], [(0, 0, 1), (1, 1, 2)]], makespan=5)
    kinds = {v.kind for v in check_schedule(chain3, s).violations}
    assert "timing" in kinds


def test_check_flags_makespan_mismatch(chain3):
    s = sched(
        chain3,
        [[(0, 0, 1), (1, 1, 2)], [(0, 0, 1), (1, 2, 3)]],
        makespan=2,  # real latest arrival is 3
    )
    result = check_schedule(chain3, s)
    assert not result.ok
    assert {v.kind for v in result.violations} == {"timing"}


def test_check_malformed_arc_index(chain3):
    s = sched(chain3, [[(9, 0, 1)], []], makespan=1)
    with pytest.raises(MalformedScheduleError):
        check_schedule(chain3, s)


def test_waiting_at_origin_and_dest_is_free(chain3):
    # second packet waits at the shared origin; neither packet parks at 1
    s = sched(
        chain3,
        [[(0, 0, 1), (1, 1, 2)], [(0, 1, 2), (1, 2, 3)]],
        makespan=3,
    )
    assert check_schedule(chain3, s).ok


def test_brute_force_uncongested_path():
    inst = make_instance(
        [1, 1, 1], [(0, 1, 2, 1), (1, 2, 2, 1)], [(0, 2)], horizon=6
    )
    assert brute_force_optimum(inst) == 4


def test_brute_force_two_packets_one_arc():
    # both packets start at the bottleneck's tail; origin waiting is free
    inst = make_instance([1, 1], [(0, 1, 1, 1)], [(0, 1), (0, 1)], horizon=4)
    assert brute_force_optimum(inst) == 2


def test_brute_force_shared_arc_fixture_documented():
    assert brute_force_optimum(tiny_shared_arc()) == 3


def test_brute_force_infeasible_returns_none(bufferless3):
    tight = make_instance(
        list(bufferless3.storage),
        [(a.tail, a.head, a.transit, a.throughput) for a in bufferless3.arcs],
        [(c.origin, c.dest) for c in bufferless3.commodities],
        horizon=2,
    )
    assert brute_force_optimum(tight) is None


def test_brute_force_witness_passes_checker():
    for seed in range(6):
        inst = gen_tiny(seed, TinyLimits(5, 3, 8))
        value, witness = brute_force_solution(inst)
        result = check_schedule(inst, witness)
        assert result.ok and result.makespan == value


@pytest.mark.parametrize("seed", range(10))
def test_oracle_agrees_with_full_model(seed):
    inst = gen_tiny(seed, TinyLimits(5, 3, 8))
    res = MilpBackend().solve(build_full(inst))
    assert res.status == "optimal"
    assert brute_force_optimum(inst) == round(res.objective)


def test_oracle_limits_enforced():
    big = make_instance([1] * 9, [(i, i + 1, 1, 1) for i in range(8)], [(0, 8)], 9)
    with pytest.raises(OracleLimitError):
        brute_force_optimum(big)
    small = gen_tiny(0, TinyLimits(5, 3, 8))
    with pytest.raises(OracleLimitError):
        brute_force_optimum(small, OracleLimits(max_expansions=3))
