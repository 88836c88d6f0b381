"""Base network, packets, and instance-level derived quantities.

An instance is a directed base graph with an integer transit time and an
integer per-departure throughput on every arc, an integer storage level on
every node, a set of unit packets (commodities) with origins and
destinations, and an integer horizon that upper-bounds the minimum
makespan.  Instances are immutable after construction and safe to share
across workers.

The on-disk format is a single JSON document with fields
``nodes:[{id,storage}]``, ``arcs:[{tail,head,transit,throughput}]``,
``commodities:[{id,origin,dest}]``, ``horizon`` and ``meta``; all
structural fields are integers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from heapq import heappop, heappush
from typing import Iterable, Mapping, Sequence

__all__ = [
    "Arc",
    "Commodity",
    "Instance",
    "InstanceViolation",
    "active_commodities",
    "capacity_ratio",
    "from_json",
    "load_instance",
    "make_instance",
    "save_instance",
    "shortest_hops",
    "shortest_transit",
    "to_json",
    "transit_distances",
    "hop_distances",
    "validate",
]


@dataclass(frozen=True)
class Arc:
    """Directed arc with integer transit time and per-departure throughput."""

    tail: int
    head: int
    transit: int
    throughput: int


@dataclass(frozen=True)
class Commodity:
    """A unit packet that must travel from ``origin`` to ``dest``."""

    id: int
    origin: int
    dest: int


@dataclass(frozen=True)
class InstanceViolation:
    """One structural defect found by :func:`validate`."""

    kind: str
    detail: str


@dataclass(frozen=True)
class Instance:
    """Immutable routing instance.

    ``storage[v]`` is the number of active packets node ``v`` can hold at
    any one time; zero is legal and means the node is bufferless.  A packet
    is *active* at ``v`` when ``v`` is neither its origin nor its
    destination; only active packets consume storage.
    """

    storage: tuple[int, ...]
    arcs: tuple[Arc, ...]
    commodities: tuple[Commodity, ...]
    horizon: int
    meta: Mapping[str, object] = field(default_factory=dict, compare=False)

    @property
    def n_nodes(self) -> int:
        return len(self.storage)

    @cached_property
    def out_arcs(self) -> tuple[tuple[int, ...], ...]:
        """Arc indexes leaving each node."""
        out: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for i, a in enumerate(self.arcs):
            out[a.tail].append(i)
        return tuple(tuple(x) for x in out)

    @cached_property
    def in_arcs(self) -> tuple[tuple[int, ...], ...]:
        """Arc indexes entering each node."""
        inc: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for i, a in enumerate(self.arcs):
            inc[a.head].append(i)
        return tuple(tuple(x) for x in inc)


def make_instance(
    storage: Sequence[int],
    arcs: Iterable[tuple[int, int, int, int]],
    commodities: Iterable[tuple[int, int]],
    horizon: int,
    meta: Mapping[str, object] | None = None,
) -> Instance:
    """Convenience constructor from plain tuples.

    ``arcs`` entries are ``(tail, head, transit, throughput)``;
    ``commodities`` entries are ``(origin, dest)`` and get dense ids.
    """
    return Instance(
        storage=tuple(int(b) for b in storage),
        arcs=tuple(Arc(*map(int, a)) for a in arcs),
        commodities=tuple(
            Commodity(i, int(o), int(d)) for i, (o, d) in enumerate(commodities)
        ),
        horizon=int(horizon),
        meta=dict(meta) if meta else {},
    )


def active_commodities(inst: Instance, v: int) -> frozenset[int]:
    """Packets that consume storage at ``v``: origin and dest both differ.

    The set is a property of the base graph only; it does not depend on
    time.
    """
    if not 0 <= v < inst.n_nodes:
        raise ValueError(f"node {v} out of range")
    return frozenset(c.id for c in inst.commodities if c.origin != v and c.dest != v)


def transit_distances(inst: Instance, s: int, reverse: bool = False) -> list[int | None]:
    """Min total transit from ``s`` to every node (Dijkstra; transits >= 0).

    With ``reverse=True`` arcs are traversed backwards, giving distances
    *to* ``s``.
    """
    if not 0 <= s < inst.n_nodes:
        raise ValueError(f"node {s} out of range")
    dist: list[int | None] = [None] * inst.n_nodes
    heap: list[tuple[int, int]] = [(0, s)]
    while heap:
        d, v = heappop(heap)
        if dist[v] is not None:
            continue
        dist[v] = d
        arcs = inst.in_arcs[v] if reverse else inst.out_arcs[v]
        for i in arcs:
            a = inst.arcs[i]
            w = a.tail if reverse else a.head
            if dist[w] is None:
                heappush(heap, (d + a.transit, w))
    return dist


def hop_distances(inst: Instance, s: int) -> list[int | None]:
    """Min number of arcs from ``s`` to every node (BFS)."""
    if not 0 <= s < inst.n_nodes:
        raise ValueError(f"node {s} out of range")
    dist: list[int | None] = [None] * inst.n_nodes
    dist[s] = 0
    frontier = [s]
    while frontier:
        nxt = []
        for v in frontier:
            for i in inst.out_arcs[v]:
                w = inst.arcs[i].head
                if dist[w] is None:
                    dist[w] = dist[v] + 1
                    nxt.append(w)
        frontier = nxt
    return dist


def shortest_transit(inst: Instance, s: int, t: int) -> int | None:
    """Minimum total transit time of a directed s->t path, or None."""
    return transit_distances(inst, s)[t]


def shortest_hops(inst: Instance, s: int, t: int) -> int | None:
    """Minimum arc count of a directed s->t path, or None."""
    return hop_distances(inst, s)[t]


def capacity_ratio(inst: Instance) -> Fraction:
    """Congestion indicator |A| * k / sum of arc throughputs (exact)."""
    if not inst.arcs:
        raise ValueError("capacity ratio needs at least one arc")
    total = sum(a.throughput for a in inst.arcs)
    return Fraction(len(inst.arcs) * len(inst.commodities), total)


def validate(inst: Instance) -> list[InstanceViolation]:
    """Collect all structural violations; an empty list means the instance
    is well formed and not trivially infeasible.

    The horizon check against shortest transits is a necessary condition
    only; whether the instance is feasible within the horizon is decided by
    the solvers.
    """
    out: list[InstanceViolation] = []
    n = inst.n_nodes
    if n == 0:
        out.append(InstanceViolation("node", "instance has no nodes"))
        return out
    for v, b in enumerate(inst.storage):
        if b < 0:
            out.append(InstanceViolation("storage", f"node {v} has storage {b} < 0"))
    for i, a in enumerate(inst.arcs):
        if not (0 <= a.tail < n and 0 <= a.head < n):
            out.append(InstanceViolation("arc", f"arc {i} endpoint out of range"))
            continue
        if a.tail == a.head:
            out.append(InstanceViolation("arc", f"arc {i} is a self-loop"))
        if a.transit < 0:
            out.append(InstanceViolation("arc", f"arc {i} transit {a.transit} < 0"))
        if a.throughput < 1:
            out.append(
                InstanceViolation("throughput", f"arc {i} throughput {a.throughput} < 1")
            )
    if inst.horizon < 1:
        out.append(InstanceViolation("horizon", f"horizon {inst.horizon} < 1"))
    seen_ids: set[int] = set()
    dist_cache: dict[int, list[int | None]] = {}
    for c in inst.commodities:
        if c.id in seen_ids:
            out.append(InstanceViolation("commodity", f"duplicate commodity id {c.id}"))
        seen_ids.add(c.id)
        if not (0 <= c.origin < n and 0 <= c.dest < n):
            out.append(
                InstanceViolation("commodity", f"commodity {c.id} endpoint out of range")
            )
            continue
        if c.origin == c.dest:
            out.append(
                InstanceViolation("commodity", f"commodity {c.id} has origin == dest")
            )
            continue
        if c.origin not in dist_cache:
            dist_cache[c.origin] = transit_distances(inst, c.origin)
        d = dist_cache[c.origin][c.dest]
        if d is None:
            out.append(
                InstanceViolation(
                    "unreachable", f"commodity {c.id}: destination unreachable"
                )
            )
        elif d > inst.horizon:
            out.append(
                InstanceViolation(
                    "horizon",
                    f"commodity {c.id}: horizon {inst.horizon} below shortest "
                    f"transit {d}",
                )
            )
    return out


def to_json(inst: Instance) -> str:
    """Deterministic JSON text; identical instances serialize byte-identically."""
    doc = {
        "nodes": [{"id": v, "storage": b} for v, b in enumerate(inst.storage)],
        "arcs": [
            {"tail": a.tail, "head": a.head, "transit": a.transit, "throughput": a.throughput}
            for a in inst.arcs
        ],
        "commodities": [
            {"id": c.id, "origin": c.origin, "dest": c.dest} for c in inst.commodities
        ],
        "horizon": inst.horizon,
        "meta": dict(inst.meta),
    }
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def from_json(text: str) -> Instance:
    doc = json.loads(text)
    try:
        storage = tuple(int(rec["storage"]) for rec in doc["nodes"])
        arcs = tuple(
            Arc(int(r["tail"]), int(r["head"]), int(r["transit"]), int(r["throughput"]))
            for r in doc["arcs"]
        )
        commodities = tuple(
            Commodity(int(r["id"]), int(r["origin"]), int(r["dest"]))
            for r in doc["commodities"]
        )
        horizon = int(doc["horizon"])
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed instance document: {exc}") from exc
    return Instance(storage, arcs, commodities, horizon, doc.get("meta", {}))


def save_instance(inst: Instance, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(to_json(inst))


def load_instance(path: str) -> Instance:
    with open(path, "r", encoding="utf-8") as fh:
        return from_json(fh.read())
