"""Independent feasibility checking and a brute-force makespan oracle.

Nothing here shares constraint code with the model builders: the checker
replays a schedule step by step against the raw instance data, and the
oracle enumerates per-packet trajectories directly.  Both exist to
cross-examine the optimization stack.
"""

from __future__ import annotations

from dataclasses import dataclass
from .instance import Instance, transit_distances
from .schedule import MalformedScheduleError, MoveStep, Schedule, Trajectory

__all__ = [
    "CheckResult",
    "OracleLimitError",
    "OracleLimits",
    "Violation",
    "brute_force_optimum",
    "brute_force_solution",
    "check_schedule",
]


@dataclass(frozen=True)
class Violation:
    """One broken requirement, self-describing for machine comparison.

    kind: "flow" (trajectory not connected), "throughput" (too many
    simultaneous departures), "storage" (too many active packets parked),
    "timing" (inconsistent or late times), "endpoint" (wrong origin or
    destination).
    """

    kind: str
    commodity: int | None
    where: tuple
    measured: int | None = None
    allowed: int | None = None


@dataclass(frozen=True)
class CheckResult:
    ok: bool
    makespan: int | None
    violations: tuple[Violation, ...]


def check_schedule(inst: Instance, sched: Schedule) -> CheckResult:
    """Replay a full-network schedule against the original capacities.

    Per integer time step: simultaneous departures on an arc may not
    exceed its throughput, and the packets parked at a node (excluding
    those whose origin or destination is that node) may not exceed its
    storage.  Also checks trajectory contiguity, endpoints, time
    consistency, the horizon, and the reported makespan.
    """
    bad: list[Violation] = []
    departures: dict[tuple[int, int], int] = {}
    parked: dict[tuple[int, int], int] = {}
    seen: set[int] = set()
    arrivals: list[int] = []

    for tr in sched.trajectories:
        k = tr.commodity
        if k in seen or not 0 <= k < len(inst.commodities):
            raise MalformedScheduleError(f"bad or repeated commodity id {k}")
        seen.add(k)
        com = inst.commodities[k]
        for step in tr.steps:
            if not 0 <= step.arc < len(inst.arcs):
                raise MalformedScheduleError(f"commodity {k}: arc {step.arc} unknown")
        if not tr.steps:
            bad.append(Violation("endpoint", k, (com.origin,)))
            continue
        first, last = tr.steps[0], tr.steps[-1]
        if inst.arcs[first.arc].tail != com.origin:
            bad.append(
                Violation("endpoint", k, (inst.arcs[first.arc].tail, com.origin))
            )
        if inst.arcs[last.arc].head != com.dest:
            bad.append(Violation("endpoint", k, (inst.arcs[last.arc].head, com.dest)))
        if first.depart < 0:
            bad.append(Violation("timing", k, (first.arc, first.depart)))
        prev_head = None
        prev_arrive = 0
        for step in tr.steps:
            a = inst.arcs[step.arc]
            if prev_head is not None and a.tail != prev_head:
                bad.append(Violation("flow", k, (prev_head, a.tail, step.depart)))
            if step.arrive != step.depart + a.transit:
                bad.append(
                    Violation(
                        "timing",
                        k,
                        (step.arc, step.depart),
                        measured=step.arrive,
                        allowed=step.depart + a.transit,
                    )
                )
            if step.depart < prev_arrive:
                bad.append(Violation("timing", k, (step.arc, step.depart)))
            else:
                # waiting interval [prev_arrive, depart) parks the packet
                v = a.tail
                if v != com.origin and v != com.dest:
                    for t in range(prev_arrive, step.depart):
                        parked[(v, t)] = parked.get((v, t), 0) + 1
            departures[(step.arc, step.depart)] = (
                departures.get((step.arc, step.depart), 0) + 1
            )
            prev_head = a.head
            prev_arrive = step.arrive
        if last.arrive > sched.horizon:
            bad.append(
                Violation(
                    "timing",
                    k,
                    (last.arc, last.depart),
                    measured=last.arrive,
                    allowed=sched.horizon,
                )
            )
        arrivals.append(last.arrive)

    for (arc, t), count in sorted(departures.items()):
        cap = inst.arcs[arc].throughput
        if count > cap:
            bad.append(Violation("throughput", None, (arc, t), count, cap))
    for (v, t), count in sorted(parked.items()):
        if count > inst.storage[v]:
            bad.append(Violation("storage", None, (v, t), count, inst.storage[v]))

    makespan = max(arrivals, default=0)
    if not bad and makespan != sched.makespan:
        bad.append(
            Violation("timing", None, ("makespan",), sched.makespan, makespan)
        )
    if bad:
        return CheckResult(False, None, tuple(bad))
    return CheckResult(True, makespan, ())


@dataclass(frozen=True)
class OracleLimits:
    max_nodes: int = 6
    max_commodities: int = 8
    max_horizon: int = 10
    max_expansions: int = 2_000_000


class OracleLimitError(RuntimeError):
    """The instance or the search exceeded the oracle's hard caps."""


def _enumerate_trajectories(
    inst: Instance, com, cand: int, dist_to_dest: list[int | None], budget: list[int]
):
    """All trajectories of one packet arriving by ``cand``, earliest first.

    A trajectory stops at the first arrival at the destination; cutting a
    wandering continuation can only free capacity for the other packets,
    so nothing optimal is lost.  Trajectories never revisit a timed node.
    Yields (steps, parked_cells, arrival).
    """
    out = []

    def walk(v: int, t: int, steps: list[MoveStep], visited: set[tuple[int, int]]):
        budget[0] -= 1
        if budget[0] <= 0:
            raise OracleLimitError("trajectory enumeration budget exhausted")
        if v == com.dest:
            parked = []
            prev_arrive = 0
            for step in steps:
                tail = inst.arcs[step.arc].tail
                if tail != com.origin and tail != com.dest:
                    parked.extend((tail, u) for u in range(prev_arrive, step.depart))
                prev_arrive = step.arrive
            out.append((tuple(steps), tuple(parked), t))
            return
        for i in inst.out_arcs[v]:
            a = inst.arcs[i]
            t2 = t + a.transit
            d = dist_to_dest[a.head]
            if d is None or t2 + d > cand or (a.head, t2) in visited:
                continue
            steps.append(MoveStep(i, t, t2))
            visited.add((a.head, t2))
            walk(a.head, t2, steps, visited)
            visited.remove((a.head, t2))
            steps.pop()
        d_here = dist_to_dest[v]
        if d_here is not None and t + 1 + d_here <= cand and (v, t + 1) not in visited:
            visited.add((v, t + 1))
            walk(v, t + 1, steps, visited)
            visited.remove((v, t + 1))

    walk(com.origin, 0, [], {(com.origin, 0)})
    out.sort(
        key=lambda item: (
            item[2],
            len(item[0]),
            tuple((s.arc, s.depart) for s in item[0]),
        )
    )
    return out


def _joint_search(inst: Instance, options: list[list], budget: list[int]):
    """Assign one trajectory per packet without breaking any capacity."""
    order = sorted(range(len(options)), key=lambda j: len(options[j]))
    arc_use: dict[tuple[int, int], int] = {}
    park_use: dict[tuple[int, int], int] = {}
    chosen: dict[int, tuple] = {}

    def fits(steps, parked) -> bool:
        for step in steps:
            if (
                arc_use.get((step.arc, step.depart), 0) + 1
                > inst.arcs[step.arc].throughput
            ):
                return False
        for cell in parked:
            if park_use.get(cell, 0) + 1 > inst.storage[cell[0]]:
                return False
        return True

    def apply(steps, parked, delta: int) -> None:
        for step in steps:
            arc_use[(step.arc, step.depart)] = (
                arc_use.get((step.arc, step.depart), 0) + delta
            )
        for cell in parked:
            park_use[cell] = park_use.get(cell, 0) + delta

    def place(pos: int) -> bool:
        budget[0] -= 1
        if budget[0] <= 0:
            raise OracleLimitError("joint search budget exhausted")
        if pos == len(order):
            return True
        j = order[pos]
        for steps, parked, _arr in options[j]:
            if fits(steps, parked):
                apply(steps, parked, +1)
                chosen[j] = steps
                if place(pos + 1):
                    return True
                apply(steps, parked, -1)
                del chosen[j]
        return False

    if place(0):
        return chosen
    return None


def brute_force_solution(
    inst: Instance, limits: OracleLimits = OracleLimits()
) -> tuple[int, Schedule] | None:
    """Exact minimum makespan plus one witness schedule, or None when the
    instance is infeasible within its horizon.

    Iterative deepening on the candidate makespan, starting at the largest
    per-packet shortest transit; for each candidate, depth-first search
    over per-packet trajectory assignments checked against throughput and
    storage incrementally.
    """
    if inst.n_nodes > limits.max_nodes:
        raise OracleLimitError(f"{inst.n_nodes} nodes exceed oracle limit")
    if len(inst.commodities) > limits.max_commodities:
        raise OracleLimitError(f"{len(inst.commodities)} packets exceed oracle limit")
    if inst.horizon > limits.max_horizon:
        raise OracleLimitError(f"horizon {inst.horizon} exceeds oracle limit")

    dist_to = [transit_distances(inst, c.dest, reverse=True) for c in inst.commodities]
    lb = 0
    for c, dist in zip(inst.commodities, dist_to):
        d = dist[c.origin]
        if d is None:
            return None
        lb = max(lb, d)
    budget = [limits.max_expansions]
    for cand in range(lb, inst.horizon + 1):
        options = [
            _enumerate_trajectories(inst, c, cand, dist_to[c.id], budget)
            for c in inst.commodities
        ]
        if any(not opts for opts in options):
            continue
        chosen = _joint_search(inst, options, budget)
        if chosen is not None:
            trajectories = tuple(
                Trajectory(c.id, chosen[c.id]) for c in inst.commodities
            )
            makespan = max(
                (tr.steps[-1].arrive for tr in trajectories), default=0
            )
            sched = Schedule(trajectories, makespan, inst.horizon)
            return cand, sched
    return None


def brute_force_optimum(
    inst: Instance, limits: OracleLimits = OracleLimits()
) -> int | None:
    found = brute_force_solution(inst, limits)
    return None if found is None else found[0]
