"""Iterative refinement driver.

Each round solves the relaxation induced by the current partial expansion
(a valid lower bound), tries to turn its per-packet base paths into a real
schedule by solving the fixed-path restriction on a full expansion with a
horizon just above the relaxation value (a valid upper bound), and stops
when the two meet within the requested factor.  Otherwise every supported
timed arc that is shorter than its true transit, or loaded beyond the
*original* throughput or storage, triggers new time points:

* short arc from (v,t): add (head, t + transit);
* overloaded movement arc from (v,t): add (v, t+1);
* overloaded holdover at (v,t): add (v, t+1) and, for every exact-transit
  predecessor copy (w, t - transit) whose gap exceeds 1, its successor
  (w, t - transit + 1).

Every round grows the kept-time set by at least one node, and no added
node lies beyond the optimum plus one time unit (beyond the optimum when
all transits are positive), which bounds the number of rounds.

The two-phase variant first runs the same loop on linear relaxations
(fixed-path arc sets pooled over a path decomposition of the fractional
support, horizon taken from the latest true arrival in the support), then
restarts the integer loop from the discovered time points.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import Iterable, Mapping

from .expand import (
    ArcKey,
    PartialNetwork,
    build_arcs,
    next_time,
)
from .instance import Instance, active_commodities
from .models import MipModel, build_fixed_paths, build_partial, extract_flows
from .schedule import MoveStep, Schedule, Trajectory
from .solvers import SolverBackend, get_backend

__all__ = [
    "AugmentOutcome",
    "DddDriverError",
    "DddOptions",
    "DddResult",
    "RunRecord",
    "augment",
    "classify_violations",
    "compute_ub",
    "solve_ddd",
    "solve_two_phase",
]

FLOW_TOL = 1e-6


class DddDriverError(RuntimeError):
    """Internal contract broken (e.g. augmenting a convertible solution)."""


@dataclass(frozen=True)
class DddOptions:
    backend: object | None = None  # backend name, instance, or None for default
    rel_gap: float = 0.0  # gap for the inner solves; bounds stay valid if > 0
    time_limit_s: float | None = None
    ub_every: int = 1
    horizon: int | None = None
    bound_rule: str = "tight"
    max_iterations: int | None = None


@dataclass
class RunRecord:
    iteration: int
    phase: str  # "single" | "1" | "2"
    relaxation_value: float
    lower_bound: float
    upper_bound: float
    gap: float
    timed_nodes: int
    timed_arcs: int
    short_viol: int
    thr_viol: int
    sto_viol: int
    nodes_short: int
    nodes_thr: int
    nodes_sto: int
    wall_s: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class DddResult:
    status: str  # "optimal" | "feasible" | "time_limit" | "infeasible"
    schedule: Schedule | None
    upper_bound: float
    lower_bound: float
    records: list[RunRecord]
    final_times: tuple[tuple[int, ...], ...]
    horizon: int

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def makespan(self) -> int | None:
        return None if self.schedule is None else self.schedule.makespan


@dataclass
class AugmentOutcome:
    new_times: tuple[tuple[int, ...], ...] | None
    short_arcs: int
    throughput_arcs: int
    storage_arcs: int
    requested: dict[str, set[tuple[int, int]]]
    added: set[tuple[int, int]]
    added_by_cause: dict[str, int]

    @property
    def requested_total(self) -> int:
        return sum(len(s) for s in self.requested.values())


def _resolve_backend(opt) -> SolverBackend:
    if opt is None or isinstance(opt, str):
        return get_backend(opt)
    return opt


def _gap_value(ub: float, lb: float) -> float:
    if ub <= lb:
        return 0.0
    return (ub - lb) / ub


def _scan_support(
    net: PartialNetwork,
    inst: Instance,
    flows: Mapping[tuple[int, ArcKey], float],
    tol: float = FLOW_TOL,
):
    """Violated support arcs and the time points each refinement rule wants."""
    mov_total: dict[ArcKey, float] = {}
    hold_active: dict[ArcKey, float] = {}
    active_cache: dict[int, frozenset[int]] = {}
    for (k, key), val in flows.items():
        if val <= tol:
            continue
        if key[0] == "m":
            mov_total[key] = mov_total.get(key, 0.0) + val
        else:
            v = key[1]
            if v not in active_cache:
                active_cache[v] = active_commodities(inst, v)
            if k in active_cache[v]:
                hold_active[key] = hold_active.get(key, 0.0) + val

    requested: dict[str, set[tuple[int, int]]] = {
        "short": set(),
        "throughput": set(),
        "storage": set(),
    }
    short_ct = thr_ct = sto_ct = 0
    for key in sorted(mov_total):
        _, a_idx, t = key
        a = inst.arcs[a_idx]
        head_t = net.arc_by_key[key].head[1]
        if head_t < t + a.transit:
            short_ct += 1
            requested["short"].add((a.head, t + a.transit))
        if mov_total[key] > a.throughput + tol:
            thr_ct += 1
            requested["throughput"].add((a.tail, t + 1))
    for key in sorted(hold_active):
        _, v, t = key
        if hold_active[key] > inst.storage[v] + tol:
            sto_ct += 1
            for i in inst.in_arcs[v]:
                w = inst.arcs[i].tail
                tp = t - inst.arcs[i].transit
                if tp >= 0 and tp < net.horizon and next_time(net, w, tp) - tp > 1:
                    requested["storage"].add((w, tp + 1))
            requested["storage"].add((v, t + 1))
    return short_ct, thr_ct, sto_ct, requested


def _apply_requests(net: PartialNetwork, requested) -> AugmentOutcome:
    existing = net.time_sets
    added: set[tuple[int, int]] = set()
    added_by_cause = {"short": 0, "throughput": 0, "storage": 0}
    for cause in ("short", "throughput", "storage"):
        for v, t in sorted(requested[cause]):
            if t in existing[v] or (v, t) in added:
                continue
            added.add((v, t))
            added_by_cause[cause] += 1
    if not added:
        return AugmentOutcome(None, 0, 0, 0, requested, added, added_by_cause)
    new_times = []
    for v in range(len(net.times)):
        extra = [t for (w, t) in added if w == v]
        new_times.append(tuple(sorted(set(net.times[v]) | set(extra))))
    return AugmentOutcome(tuple(new_times), 0, 0, 0, requested, added, added_by_cause)


def classify_violations(
    net: PartialNetwork,
    inst: Instance,
    flows: Mapping[tuple[int, ArcKey], float],
    tol: float = FLOW_TOL,
) -> AugmentOutcome:
    """Report violated support arcs and would-be additions, without mutating."""
    short_ct, thr_ct, sto_ct, requested = _scan_support(net, inst, flows, tol)
    out = _apply_requests(net, requested)
    out.short_arcs, out.throughput_arcs, out.storage_arcs = short_ct, thr_ct, sto_ct
    return out


def augment(
    net: PartialNetwork,
    inst: Instance,
    flows: Mapping[tuple[int, ArcKey], float],
    tol: float = FLOW_TOL,
) -> AugmentOutcome:
    """Grow the kept-time set to repair every violated support arc.

    Raises :class:`DddDriverError` when nothing is violated or nothing new
    would be added: callers must not refine a convertible solution.
    """
    out = classify_violations(net, inst, flows, tol)
    if out.new_times is None:
        raise DddDriverError("augmentation called on a convertible solution")
    return out


# ---------------------------------------------------------------------------
# support-path extraction

def _partial_endpoints(net: PartialNetwork, inst: Instance, key: ArcKey):
    if key[0] == "m":
        ta = net.arc_by_key[key]
        return ta.tail, ta.head
    _, v, t = key
    return (v, t), (v, next_time(net, v, t))


def _full_endpoints(inst: Instance, key: ArcKey):
    if key[0] == "m":
        a = inst.arcs[key[1]]
        return (a.tail, key[2]), (a.head, key[2] + a.transit)
    _, v, t = key
    return (v, t), (v, t + 1)


def _bfs_path(
    arcs: Iterable[tuple[ArcKey, tuple, tuple]],
    source: tuple[int, int],
    sink: tuple[int, int],
) -> list[ArcKey] | None:
    adj: dict[tuple, list[tuple[tuple, ArcKey]]] = {}
    for key, tail, head in arcs:
        adj.setdefault(tail, []).append((head, key))
    for lst in adj.values():
        lst.sort(key=lambda item: (item[0], str(item[1])))
    parent: dict[tuple, tuple[tuple, ArcKey]] = {}
    seen = {source}
    frontier = [source]
    while frontier:
        nxt = []
        for node in frontier:
            for head, key in adj.get(node, ()):
                if head in seen:
                    continue
                seen.add(head)
                parent[head] = (node, key)
                if head == sink:
                    path = []
                    cur = sink
                    while cur != source:
                        prev, pkey = parent[cur]
                        path.append(pkey)
                        cur = prev
                    path.reverse()
                    return path
                nxt.append(head)
        frontier = nxt
    return None


def _commodity_keys(flows, k: int, tol: float):
    return [key for (kk, key), val in flows.items() if kk == k and val > tol]


def _extract_base_paths(
    net: PartialNetwork,
    inst: Instance,
    flows,
    tol: float = FLOW_TOL,
) -> list[list[int]]:
    """One supported base-arc path per packet (integral support)."""
    out = []
    for c in inst.commodities:
        keys = _commodity_keys(flows, c.id, tol)
        arcs = [(key, *_partial_endpoints(net, inst, key)) for key in keys]
        path = _bfs_path(arcs, (c.origin, 0), (c.dest, net.horizon))
        if path is None:
            raise DddDriverError(f"support of packet {c.id} has no trajectory")
        out.append([key[1] for key in path if key[0] == "m"])
    return out


def _decompose_base_arcs(
    net: PartialNetwork,
    inst: Instance,
    flows,
    tol: float = FLOW_TOL,
) -> list[set[int]]:
    """Base arcs on any path of a fractional-support decomposition, per packet."""
    out = []
    for c in inst.commodities:
        residual = {
            key: val for (kk, key), val in flows.items() if kk == c.id and val > tol
        }
        pooled: set[int] = set()
        while True:
            arcs = [
                (key, *_partial_endpoints(net, inst, key))
                for key, val in residual.items()
                if val > tol
            ]
            path = _bfs_path(arcs, (c.origin, 0), (c.dest, net.horizon))
            if path is None:
                break
            amount = min(residual[key] for key in path)
            for key in path:
                residual[key] -= amount
                if key[0] == "m":
                    pooled.add(key[1])
        if not pooled:
            raise DddDriverError(f"support of packet {c.id} has no trajectory")
        out.append(pooled)
    return out


def _schedule_from_fixed(
    inst: Instance, model: MipModel, values, horizon: int, full_horizon: int
) -> Schedule:
    flows = extract_flows(model, values, tol=0.5)
    trajectories = []
    for c in inst.commodities:
        keys = _commodity_keys(flows, c.id, 0.5)
        arcs = [(key, *_full_endpoints(inst, key)) for key in keys]
        path = _bfs_path(arcs, (c.origin, 0), (c.dest, horizon))
        if path is None:
            raise DddDriverError(f"fixed-path solution of packet {c.id} broken")
        steps = tuple(
            MoveStep(key[1], key[2], key[2] + inst.arcs[key[1]].transit)
            for key in path
            if key[0] == "m"
        )
        trajectories.append(Trajectory(c.id, steps))
    makespan = max((tr.steps[-1].arrive for tr in trajectories), default=0)
    return Schedule(tuple(trajectories), makespan, full_horizon)


def compute_ub(
    inst: Instance,
    net: PartialNetwork,
    flows,
    t_hat: float,
    alpha: float,
    current_ub: float,
    *,
    backend: SolverBackend | None = None,
    rel_gap: float = 0.0,
    time_limit_s: float | None = None,
    relax: bool = False,
) -> tuple[float, Schedule | bool | None]:
    """Try to convert a relaxation solution into a real upper bound.

    Builds the fixed-path restriction with horizon ceil((1+alpha) * t_hat)
    (clamped to the instance horizon) over the supported base paths and
    solves it.  Returns the possibly improved bound plus the improving
    schedule (or ``True`` in the relaxed phase); on infeasibility or a
    timed-out solve the bound is returned unchanged.
    """
    backend = _resolve_backend(backend)
    horizon_cap = int(math.ceil(round((1 + alpha) * t_hat, 9)))
    horizon_cap = min(horizon_cap, inst.horizon)
    if relax:
        arc_sets = [sorted(s) for s in _decompose_base_arcs(net, inst, flows)]
    else:
        arc_sets = _extract_base_paths(net, inst, flows)
    model = build_fixed_paths(inst, arc_sets, horizon_cap)
    res = backend.solve(
        model,
        time_limit_s=time_limit_s,
        rel_gap=rel_gap,
        relax_integrality=relax,
    )
    if res.status == "optimal":
        value = float(res.objective)
        if not relax:
            value = float(round(value))
        if value <= current_ub:
            if relax:
                return value, True
            sched = _schedule_from_fixed(
                inst, model, res.values, horizon_cap, inst.horizon
            )
            return value, sched
        return current_ub, None
    return current_ub, None


# ---------------------------------------------------------------------------
# the main loop

def _ddd_loop(
    inst: Instance,
    alpha: float,
    opts: DddOptions,
    *,
    relax: bool,
    phase: str,
    initial_times=None,
    lb_start: float = 0.0,
    records: list[RunRecord] | None = None,
    iteration_offset: int = 0,
):
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    T = inst.horizon if opts.horizon is None else int(opts.horizon)
    if opts.horizon is not None and opts.horizon != inst.horizon:
        inst = replace(inst, horizon=T)
    backend = _resolve_backend(opts.backend)
    start = time.perf_counter()
    deadline = None if opts.time_limit_s is None else start + opts.time_limit_s

    def remaining() -> float | None:
        if deadline is None:
            return None
        return deadline - time.perf_counter()

    times = (
        tuple(tuple(ts) for ts in initial_times)
        if initial_times is not None
        else tuple((0, T) for _ in range(inst.n_nodes))
    )
    records = records if records is not None else []
    ub = float(T)
    lb = float(lb_start)
    incumbent: Schedule | None = None
    have_ub = False
    max_iter = opts.max_iterations or (inst.n_nodes * (T + 2) + 10)
    local_it = 0

    def finish(status: str):
        return status, incumbent, ub, lb, times, records

    while True:
        local_it += 1
        if local_it > max_iter:
            raise DddDriverError(f"no convergence within {max_iter} iterations")
        iter_start = time.perf_counter()
        budget = remaining()
        if budget is not None and budget <= 0:
            return finish("time_limit")

        net = build_arcs(times, inst, opts.bound_rule)
        model = build_partial(net, inst)
        res = backend.solve(
            model,
            time_limit_s=budget,
            rel_gap=opts.rel_gap,
            relax_integrality=relax,
        )
        if res.status == "infeasible":
            return finish("infeasible")
        if not res.has_solution:
            return finish("time_limit")
        exact = res.status == "optimal" and opts.rel_gap == 0
        t_hat = float(res.objective)
        # only the solver's proven bound may move the lower bound
        bound = float(res.bound) if res.bound is not None else lb
        if not relax:
            t_hat = float(round(t_hat))
            bound = math.ceil(round(bound, 6))
        lb = max(lb, float(bound))
        flows = extract_flows(model, res.values, tol=FLOW_TOL)

        short_ct, thr_ct, sto_ct, requested = _scan_support(net, inst, flows)
        convertible_support = (short_ct + thr_ct + sto_ct) == 0

        if convertible_support and not exact and not relax:
            # a sloppy inner gap can stall refinement; redo this round exactly
            res = backend.solve(model, time_limit_s=remaining(), rel_gap=0.0)
            if res.status == "infeasible":
                return finish("infeasible")
            if not res.has_solution:
                return finish("time_limit")
            t_hat = float(round(res.objective))
            lb = max(lb, t_hat)
            flows = extract_flows(model, res.values, tol=FLOW_TOL)
            short_ct, thr_ct, sto_ct, requested = _scan_support(net, inst, flows)
            convertible_support = (short_ct + thr_ct + sto_ct) == 0

        run_ub = ((local_it - 1) % max(1, opts.ub_every) == 0) or convertible_support
        if run_ub:
            if relax:
                final_arrival = max(
                    (
                        key[2] + inst.arcs[key[1]].transit
                        for (k, key), val in flows.items()
                        if key[0] == "m" and val > FLOW_TOL
                    ),
                    default=t_hat,
                )
                horizon_seed = float(final_arrival)
            else:
                horizon_seed = t_hat
            new_ub, payload = compute_ub(
                inst,
                net,
                flows,
                horizon_seed,
                alpha,
                ub,
                backend=backend,
                rel_gap=opts.rel_gap,
                time_limit_s=remaining(),
                relax=relax,
            )
            if payload is not None:
                ub = new_ub
                have_ub = True
                if not relax:
                    incumbent = payload

        gap = _gap_value(ub, lb)
        record = RunRecord(
            iteration=iteration_offset + local_it,
            phase=phase,
            relaxation_value=t_hat,
            lower_bound=lb,
            upper_bound=ub,
            gap=gap,
            timed_nodes=net.n_timed_nodes,
            timed_arcs=net.n_timed_arcs,
            short_viol=short_ct,
            thr_viol=thr_ct,
            sto_viol=sto_ct,
            nodes_short=0,
            nodes_thr=0,
            nodes_sto=0,
            wall_s=time.perf_counter() - iter_start,
        )

        converged = gap <= alpha + 1e-9 and (incumbent is not None or (relax and have_ub))
        if converged:
            records.append(record)
            status = "optimal" if ub <= lb + 1e-9 else "feasible"
            return finish(status)

        if convertible_support:
            # no violated support arc and still a gap: only possible when the
            # upper-bound solve was cut off by the budget
            records.append(record)
            return finish("time_limit")

        outcome = _apply_requests(net, requested)
        if outcome.new_times is None:
            raise DddDriverError("refinement produced no new time points")
        record.nodes_short = outcome.added_by_cause["short"]
        record.nodes_thr = outcome.added_by_cause["throughput"]
        record.nodes_sto = outcome.added_by_cause["storage"]
        record.wall_s = time.perf_counter() - iter_start
        records.append(record)
        times = outcome.new_times


def solve_ddd(
    inst: Instance, alpha: float = 0.0, opts: DddOptions = DddOptions()
) -> DddResult:
    """Solve to a makespan within a (1 + alpha) factor of optimal.

    With ``alpha = 0`` the returned schedule is exactly optimal.  On a time
    limit the best records and any incumbent are returned with status
    ``time_limit``; an instance whose relaxation is already infeasible
    within the horizon reports ``infeasible``.
    """
    status, incumbent, ub, lb, times, records = _ddd_loop(
        inst, alpha, opts, relax=False, phase="single"
    )
    T = inst.horizon if opts.horizon is None else int(opts.horizon)
    return DddResult(status, incumbent, ub, lb, records, times, T)


def solve_two_phase(
    inst: Instance, alpha: float = 0.0, opts: DddOptions = DddOptions()
) -> DddResult:
    """Linear-relaxation warm start, then the integer loop from its network."""
    status, _, _, lb1, times1, records = _ddd_loop(
        inst, alpha, opts, relax=True, phase="1"
    )
    T = inst.horizon if opts.horizon is None else int(opts.horizon)
    if status in ("infeasible", "time_limit"):
        return DddResult(status, None, float(T), lb1, records, times1, T)
    lb_start = float(math.ceil(round(lb1, 6)))
    status, incumbent, ub, lb, times, records = _ddd_loop(
        inst,
        alpha,
        opts,
        relax=False,
        phase="2",
        initial_times=times1,
        lb_start=lb_start,
        records=records,
        iteration_offset=len(records),
    )
    return DddResult(status, incumbent, ub, lb, records, times, T)
