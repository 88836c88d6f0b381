"""Moderate-size end-to-end runs: generator -> solver -> checker."""

import pytest

from uprdd.ddd import DddOptions, solve_ddd, solve_two_phase
from uprdd.gen import (
    GeographicParams,
    GeometricParams,
    gen_geographic,
    gen_geometric,
)
from uprdd.instance import validate
from uprdd.mps import export_model, read_mps
from uprdd.models import build_partial
from uprdd.expand import initial_partial
from uprdd.solvers import MilpBackend
from uprdd.verify import check_schedule


def test_geographic_end_to_end():
    params = GeographicParams(
        n=12, m=20, k=6, arc_cap=(1, 2), storage_cap=(0, 1), min_hops=2
    )
    inst = gen_geographic(params, seed=4)
    assert validate(inst) == []
    result = solve_ddd(inst, 0.0, DddOptions(time_limit_s=120))
    assert result.status == "optimal"
    chk = check_schedule(inst, result.schedule)
    assert chk.ok and chk.makespan == result.makespan
    assert result.upper_bound == result.lower_bound == result.makespan
    # the refinement never materialized most of the expansion
    kept = sum(len(ts) for ts in result.final_times)
    assert kept < 0.25 * inst.n_nodes * (inst.horizon + 1)


def test_geometric_end_to_end_two_phase():
    params = GeometricParams(
        grid=15, n=12, k=5, local_radius=4, long_range=(1,),
        arc_cap=(1, 2), storage_cap=(0, 1), min_hops=2,
    )
    inst = gen_geometric(params, seed=3)
    assert validate(inst) == []
    single = solve_ddd(inst, 0.0, DddOptions(time_limit_s=120))
    double = solve_two_phase(inst, 0.0, DddOptions(time_limit_s=120))
    assert single.status == double.status == "optimal"
    assert single.makespan == double.makespan
    assert check_schedule(inst, double.schedule).ok


def test_partial_model_mps_export_solves_identically():
    params = GeographicParams(
        n=10, m=16, k=4, arc_cap=(1, 2), storage_cap=(0, 1), min_hops=2
    )
    inst = gen_geographic(params, seed=8)
    model = build_partial(initial_partial(inst), inst)
    be = MilpBackend()
    want = be.solve(model).objective
    for fmt in ("mps", "mps-free"):
        got = be.solve(read_mps(export_model(model, fmt))).objective
        assert abs(got - want) <= 1e-9
