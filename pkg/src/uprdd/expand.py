"""Full and partial time expansions with relaxed capacities.

A partial expansion keeps, for every base node, a sorted subset of the
integer times 0..T that always contains 0 and T.  Movement arcs depart
from every kept copy whose true arrival would stay within the horizon and
land on the *latest* kept copy of the head node that does not overestimate
the true transit; holdover arcs join consecutive kept copies of a node.
Construction therefore guarantees:

* no movement arc is longer than its true transit (it may be shorter);
* every kept copy with room before the horizon has one timed copy of each
  outgoing base arc;
* a movement arc never skips a kept head copy it could have reached.

Because several full-expansion departure times collapse onto one kept
copy, capacities must be inflated for the coarse network to remain a
relaxation.  A movement arc departing (v,t) gets throughput
``u * gap(v,t)`` where ``gap`` is the distance to the next kept copy of
``v``.  A holdover leaving (v,t) gets

    storage[v] + slack      if (v, t+1) is kept,
    2*storage[v] + slack    otherwise,

where ``slack`` charges, for every (arc a = w->v, predecessor copy) that
can feed (v,t) -- the exact-transit predecessor (w, t - transit_a) and the
actual in-neighbours in the current arc set -- the amount
``throughput_a * (gap(w, t') - 1)``.  A looser historical variant,
``gap(v,t) * storage[v] + slack``, is kept for comparison experiments, as
is the star-network bound used by earlier work on single-depot delivery
networks.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

from .instance import Instance
from .schedule import Schedule

__all__ = [
    "TimedArc",
    "PartialNetwork",
    "ProjectedFlow",
    "build_arcs",
    "compare_star_bounds",
    "dump_network",
    "full_expand",
    "gap",
    "initial_partial",
    "next_time",
    "project_schedule",
    "storage_bound_cir_ob",
    "storage_bound_relaxed",
    "storage_bound_tight",
    "storage_slack",
    "validate_properties",
]

# Arc keys name a timed arc independently of the network that holds it:
#   ("m", base_arc_index, depart_time)   movement
#   ("h", node, depart_time)             holdover
ArcKey = tuple


@dataclass(frozen=True)
class TimedArc:
    tail: tuple[int, int]
    head: tuple[int, int]
    kind: str  # "move" | "hold"
    base: int | None
    capacity: int

    @property
    def key(self) -> ArcKey:
        if self.kind == "move":
            return ("m", self.base, self.tail[1])
        return ("h", self.tail[0], self.tail[1])


@dataclass(frozen=True)
class PartialNetwork:
    """Immutable partial (or full) time expansion."""

    times: tuple[tuple[int, ...], ...]
    movement_arcs: tuple[TimedArc, ...]
    holdover_arcs: tuple[TimedArc, ...]
    horizon: int

    @cached_property
    def time_sets(self) -> tuple[frozenset[int], ...]:
        return tuple(frozenset(ts) for ts in self.times)

    @cached_property
    def in_moves(self) -> dict[tuple[int, int], tuple[TimedArc, ...]]:
        idx: dict[tuple[int, int], list[TimedArc]] = {}
        for ta in self.movement_arcs:
            idx.setdefault(ta.head, []).append(ta)
        return {k: tuple(v) for k, v in idx.items()}

    @cached_property
    def arc_by_key(self) -> dict[ArcKey, TimedArc]:
        out = {}
        for ta in self.movement_arcs:
            out[ta.key] = ta
        for ta in self.holdover_arcs:
            out[ta.key] = ta
        return out

    def has_node(self, v: int, t: int) -> bool:
        return t in self.time_sets[v]

    @property
    def n_timed_nodes(self) -> int:
        return sum(len(ts) for ts in self.times)

    @property
    def n_timed_arcs(self) -> int:
        return len(self.movement_arcs) + len(self.holdover_arcs)


def next_time(net: PartialNetwork, v: int, t: int) -> int:
    """Smallest kept time of ``v`` strictly after ``t``.

    Defined for any ``t < horizon``, whether or not (v, t) itself is kept;
    the copy at the horizon guarantees existence.
    """
    if t >= net.horizon:
        raise ValueError(f"no kept copy of node {v} after time {t}")
    ts = net.times[v]
    return ts[bisect_right(ts, t)]


def gap(net: PartialNetwork, v: int, t: int) -> int:
    """Time units from ``t`` to the next kept copy of ``v``."""
    return next_time(net, v, t) - t


def _gap_or_unit(net: PartialNetwork, v: int, t: int) -> int:
    # Copies at or beyond the horizon cannot feed anything later; treat
    # their gap as 1 so they contribute no relaxation.
    return 1 if t >= net.horizon else gap(net, v, t)


def _floor_time(net: PartialNetwork, v: int, t: int) -> int:
    """Latest kept time of ``v`` that is <= t (the copy at 0 always exists)."""
    ts = net.times[v]
    i = bisect_right(ts, t) - 1
    if i < 0:
        raise ValueError(f"no kept copy of node {v} at or before time {t}")
    return ts[i]


def _require_kept(net: PartialNetwork, v: int, t: int) -> None:
    if not net.has_node(v, t):
        raise ValueError(f"timed node ({v}, {t}) is not in the network")
    if t >= net.horizon:
        raise ValueError(f"timed node ({v}, {t}) has no outgoing holdover")


def storage_slack(net: PartialNetwork, inst: Instance, v: int, t: int) -> int:
    """Extra storage the holdover leaving (v, t) must absorb.

    Sums ``throughput_a * (gap - 1)`` over the de-duplicated union of
    exact-transit predecessors (w, t - transit_a) and the current movement
    in-neighbours of (v, t), keyed per feeding arc so parallel arcs with
    distinct transits each count once.
    """
    _require_kept(net, v, t)
    feeders: set[tuple[int, int]] = set()
    for i in inst.in_arcs[v]:
        tp = t - inst.arcs[i].transit
        if tp >= 0:
            feeders.add((i, tp))
    for ta in net.in_moves.get((v, t), ()):
        feeders.add((ta.base, ta.tail[1]))
    total = 0
    for i, tp in feeders:
        a = inst.arcs[i]
        total += a.throughput * (_gap_or_unit(net, a.tail, tp) - 1)
    return total


def storage_bound_tight(net: PartialNetwork, inst: Instance, v: int, t: int) -> int:
    """Relaxed holdover capacity at (v, t): one extra storage worth only
    when the very next time step of ``v`` is missing."""
    _require_kept(net, v, t)
    u = storage_slack(net, inst, v, t)
    if net.has_node(v, t + 1):
        return inst.storage[v] + u
    return 2 * inst.storage[v] + u


def storage_bound_relaxed(net: PartialNetwork, inst: Instance, v: int, t: int) -> int:
    """Looser bound scaling storage by the full gap; comparison only."""
    _require_kept(net, v, t)
    return gap(net, v, t) * inst.storage[v] + storage_slack(net, inst, v, t)


def storage_bound_cir_ob(
    net: PartialNetwork, inst: Instance, v: int, t: int, eps: int = 1
) -> float:
    """Holdover bound of the out-and-back (star) delivery relaxation.

    Only defined when the base graph is a star and the client node ``v``
    has unit storage and a single feeding arc.  Returns ``math.inf`` in the
    regime where that relaxation drops the storage constraint entirely.
    ``eps`` is the discretization step.
    """
    _require_kept(net, v, t)
    if inst.storage[v] != 1:
        raise ValueError("client node must have unit storage")
    feeds = inst.in_arcs[v]
    if len(feeds) != 1:
        raise ValueError("client node must have exactly one feeding arc")
    hub = inst.arcs[feeds[0]].tail
    for a in inst.arcs:
        if hub not in (a.tail, a.head):
            raise ValueError("base graph is not a star")
    transit = inst.arcs[feeds[0]].transit
    v_next = net.has_node(v, t + eps)
    # A predecessor copy before time 0 cannot feed flow at all, so the
    # hub-side condition is vacuously met there.
    w_next = (t - transit < 0) or net.has_node(hub, t - transit + eps)
    if v_next and w_next:
        return 1
    if not v_next:
        return 2 + storage_slack(net, inst, v, t)
    return math.inf


def compare_star_bounds(
    net: PartialNetwork, inst: Instance, eps: int = 1
) -> list[tuple[int, int, int, float]]:
    """(node, time, tight, star-relaxation) at every client holdover.

    Client nodes are the unit-storage, single-feed nodes of a star
    instance.  Used to check the tight bound never exceeds the star one.
    """
    rows = []
    for v in range(inst.n_nodes):
        if inst.storage[v] != 1 or len(inst.in_arcs[v]) != 1:
            continue
        for t in net.times[v]:
            if t >= net.horizon:
                continue
            rows.append(
                (
                    v,
                    t,
                    storage_bound_tight(net, inst, v, t),
                    storage_bound_cir_ob(net, inst, v, t, eps),
                )
            )
    return rows


def build_arcs(
    times: Sequence[Iterable[int]],
    inst: Instance,
    bound_rule: str = "tight",
) -> PartialNetwork:
    """Materialize the movement and holdover arcs for a kept-time set.

    ``times`` must keep 0 and the horizon for every node.  ``bound_rule``
    selects the holdover capacity formula ("tight" or "relaxed").
    """
    if bound_rule not in ("tight", "relaxed"):
        raise ValueError(f"unknown bound rule {bound_rule!r}")
    T = inst.horizon
    norm: list[tuple[int, ...]] = []
    for v in range(inst.n_nodes):
        ts = tuple(sorted(set(int(t) for t in times[v])))
        if not ts or ts[0] != 0 or ts[-1] != T:
            raise ValueError(f"node {v}: kept times must include 0 and {T}")
        if ts[0] < 0:
            raise ValueError(f"node {v}: negative time in kept set")
        norm.append(ts)
    kept = tuple(norm)

    movement: list[TimedArc] = []
    for v in range(inst.n_nodes):
        for t in kept[v]:
            for i in inst.out_arcs[v]:
                a = inst.arcs[i]
                if t + a.transit > T:
                    continue
                head_ts = kept[a.head]
                t_head = head_ts[bisect_right(head_ts, t + a.transit) - 1]
                m = 1 if t >= T else kept[v][bisect_right(kept[v], t)] - t
                movement.append(
                    TimedArc((v, t), (a.head, t_head), "move", i, a.throughput * m)
                )

    shell = PartialNetwork(kept, tuple(movement), (), T)
    bound = storage_bound_tight if bound_rule == "tight" else storage_bound_relaxed
    holdover: list[TimedArc] = []
    for v in range(inst.n_nodes):
        ts = kept[v]
        for t, t2 in zip(ts, ts[1:]):
            holdover.append(
                TimedArc((v, t), (v, t2), "hold", None, bound(shell, inst, v, t))
            )
    return PartialNetwork(kept, tuple(movement), tuple(holdover), T)


def full_expand(inst: Instance) -> PartialNetwork:
    """Every integer time kept; all arcs exact with original capacities."""
    times = [range(inst.horizon + 1)] * inst.n_nodes
    return build_arcs(times, inst)


def initial_partial(inst: Instance) -> PartialNetwork:
    """The coarsest admissible expansion: copies at 0 and the horizon only."""
    times = [(0, inst.horizon)] * inst.n_nodes
    return build_arcs(times, inst)


def validate_properties(net: PartialNetwork, inst: Instance) -> list[str]:
    """Check the structural expansion properties; empty list means valid."""
    problems: list[str] = []
    T = net.horizon
    if T != inst.horizon:
        problems.append(f"network horizon {T} != instance horizon {inst.horizon}")
    for v in range(inst.n_nodes):
        ts = net.times[v]
        if not ts or ts[0] != 0 or ts[-1] != T:
            problems.append(f"node {v}: kept times miss 0 or {T}")
    seen_out: set[tuple[int, int, int]] = set()
    for ta in net.movement_arcs:
        (v, t), (w, t2) = ta.tail, ta.head
        a = inst.arcs[ta.base]
        if (a.tail, a.head) != (v, w):
            problems.append(f"arc {ta} does not match base arc {ta.base}")
            continue
        if not net.has_node(v, t) or not net.has_node(w, t2):
            problems.append(f"arc {ta} has an endpoint outside the network")
        if t2 > t + a.transit:
            problems.append(f"arc {ta} overestimates transit {a.transit}")
        ts_w = net.times[w]
        i = bisect_right(ts_w, t + a.transit) - 1
        if i >= 0 and ts_w[i] > t2:
            problems.append(f"arc {ta} skips kept copy ({w}, {ts_w[i]})")
        seen_out.add((ta.base, v, t))
    for v in range(inst.n_nodes):
        for t in net.times[v]:
            for i in inst.out_arcs[v]:
                if t + inst.arcs[i].transit <= T and (i, v, t) not in seen_out:
                    problems.append(f"missing timed copy of arc {i} at ({v}, {t})")
    held = {(ta.tail, ta.head) for ta in net.holdover_arcs}
    for v in range(inst.n_nodes):
        ts = net.times[v]
        for t, t2 in zip(ts, ts[1:]):
            if ((v, t), (v, t2)) not in held:
                problems.append(f"missing holdover ({v}, {t}) -> ({v}, {t2})")
    if len(held) != len(net.holdover_arcs):
        problems.append("duplicate holdover arcs")
    return problems


@dataclass
class ProjectedFlow:
    """Image of a full-network schedule in a partial network.

    ``flows`` holds a unit indicator per (commodity, arc key): the maximum
    over all full-network arcs that collapse onto the key.  ``arrivals``
    are true-transit arrival times of each packet's last movement arc in
    the image; the makespan is their maximum.
    """

    flows: dict[tuple[int, ArcKey], int]
    arrivals: dict[int, int]
    makespan: int


def project_schedule(
    net: PartialNetwork, inst: Instance, sched: Schedule
) -> ProjectedFlow:
    """Snap a full-network schedule onto the kept copies of ``net``.

    Each movement step departing at time t is moved to the latest kept
    copy of its tail at or before t; it lands where the network's timed
    copy of that arc lands.  Holdovers are re-derived from the snapped
    positions.  The projection never lengthens a trajectory.
    """
    flows: dict[tuple[int, ArcKey], int] = {}
    arrivals: dict[int, int] = {}

    def chain_hold(k: int, v: int, t_from: int, t_to: int) -> None:
        t = t_from
        while t < t_to:
            flows[(k, ("h", v, t))] = 1
            t = next_time(net, v, t)

    for tr in sched.trajectories:
        k = tr.commodity
        com = inst.commodities[k]
        pos_node, pos_time = com.origin, 0
        last_true_arrival = 0
        for step in tr.steps:
            a = inst.arcs[step.arc]
            dep_hat = _floor_time(net, a.tail, step.depart)
            chain_hold(k, pos_node, pos_time, dep_hat)
            key = ("m", step.arc, dep_hat)
            ta = net.arc_by_key.get(key)
            if ta is None:
                raise ValueError(
                    f"network has no timed copy of arc {step.arc} at "
                    f"({a.tail}, {dep_hat})"
                )
            flows[(k, key)] = 1
            pos_node, pos_time = ta.head
            last_true_arrival = dep_hat + a.transit
        chain_hold(k, pos_node, pos_time, net.horizon)
        arrivals[k] = last_true_arrival
    makespan = max(arrivals.values(), default=0)
    return ProjectedFlow(flows, arrivals, makespan)


def dump_network(net: PartialNetwork, inst: Instance) -> str:
    """Stable text rendering for golden-file tests and debugging."""
    lines = [f"horizon {net.horizon}"]
    for v in range(inst.n_nodes):
        lines.append(f"node {v} storage={inst.storage[v]} times={list(net.times[v])}")
    for ta in sorted(net.movement_arcs, key=lambda x: (x.base, x.tail[1])):
        a = inst.arcs[ta.base]
        lines.append(
            f"move a{ta.base} ({a.tail},{ta.tail[1]})->({a.head},{ta.head[1]}) "
            f"transit={a.transit} cap={ta.capacity}"
        )
    for ta in sorted(net.holdover_arcs, key=lambda x: (x.tail[0], x.tail[1])):
        lines.append(
            f"hold ({ta.tail[0]},{ta.tail[1]})->({ta.head[0]},{ta.head[1]}) "
            f"cap={ta.capacity}"
        )
    return "\n".join(lines) + "\n"
