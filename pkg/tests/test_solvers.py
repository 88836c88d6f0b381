import pytest

from uprdd.gen import gen_tiny, TinyLimits
from uprdd.models import build_full
from uprdd.solvers import (
    BranchBoundBackend,
    MilpBackend,
    get_backend,
)


@pytest.mark.parametrize("seed", range(10))
def test_backends_agree(seed):
    inst = gen_tiny(seed, TinyLimits(5, 3, 8))
    model = build_full(inst)
    a = MilpBackend().solve(model)
    b = BranchBoundBackend().solve(model)
    assert a.status == b.status == "optimal"
    assert abs(a.objective - b.objective) <= 1e-6
    assert abs(a.objective - a.bound) <= 1e-6
    assert abs(b.objective - b.bound) <= 1e-6


def test_backends_agree_on_infeasible(bufferless3):
    model = build_full(bufferless3, horizon=2)
    assert MilpBackend().solve(model).status == "infeasible"
    assert BranchBoundBackend().solve(model).status == "infeasible"


def test_relaxation_lower_bounds_integer_optimum(chain3):
    model = build_full(chain3)
    ip = MilpBackend().solve(model)
    for backend in (MilpBackend(), BranchBoundBackend()):
        lp = backend.solve(model, relax_integrality=True)
        assert lp.status == "optimal"
        assert lp.objective <= ip.objective + 1e-9


def test_rel_gap_certificate(chain3):
    model = build_full(chain3)
    res = MilpBackend().solve(model, rel_gap=0.5)
    assert res.status in ("optimal", "feasible")
    assert res.bound is not None
    assert (res.objective - res.bound) <= 0.5 * max(1.0, abs(res.objective)) + 1e-6


def test_bnb_time_limit_returns_quickly():
    inst = gen_tiny(11)
    model = build_full(inst)
    res = BranchBoundBackend().solve(model, time_limit_s=0.0)
    assert res.status in ("time_limit", "optimal", "infeasible")


def test_determinism(chain3):
    model = build_full(chain3)
    for backend in (MilpBackend(), BranchBoundBackend()):
        r1 = backend.solve(model)
        r2 = backend.solve(model)
        assert r1.objective == r2.objective
        assert list(r1.values) == list(r2.values)


def test_get_backend_env(monkeypatch):
    monkeypatch.setenv("SOLVER_BACKEND", "bnb")
    assert isinstance(get_backend(), BranchBoundBackend)
    monkeypatch.delenv("SOLVER_BACKEND")
    assert isinstance(get_backend(), MilpBackend)
    assert isinstance(get_backend("bnb"), BranchBoundBackend)
    with pytest.raises(ValueError):
        get_backend("nope")
