"""Exact packet routing under hard throughput and storage limits.

The library solves makespan-minimal routing of unit packets through a
capacitated directed network, either on the complete time expansion or by
iteratively refining a partial expansion that provably lower-bounds the
optimum, plus generators, verifiers, and a benchmark harness.
"""

from .instance import (
    Arc,
    Commodity,
    Instance,
    active_commodities,
    capacity_ratio,
    load_instance,
    make_instance,
    save_instance,
    shortest_hops,
    shortest_transit,
    validate,
)
from .schedule import Schedule, Trajectory, MoveStep, load_schedule, save_schedule
from .expand import (
    PartialNetwork,
    build_arcs,
    full_expand,
    gap,
    initial_partial,
    next_time,
    project_schedule,
    storage_bound_cir_ob,
    storage_bound_relaxed,
    storage_bound_tight,
    storage_slack,
)
from .models import (
    MipModel,
    build_fixed_paths,
    build_full,
    build_partial,
    canonical_form,
)
from .solvers import BranchBoundBackend, MilpBackend, SolveResult, get_backend
from .verify import brute_force_optimum, brute_force_solution, check_schedule
from .ddd import DddOptions, DddResult, RunRecord, solve_ddd, solve_two_phase
from .gen import (
    GeographicParams,
    GeometricParams,
    TinyLimits,
    gen_bound_fixture,
    gen_geographic,
    gen_geometric,
    gen_tiny,
    tiny_shared_arc,
)

__version__ = "0.1.0"
