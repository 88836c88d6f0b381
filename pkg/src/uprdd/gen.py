"""Reproducible instance generators.

Four families:

* geographic -- base nodes are the top US population centers (bundled
  table); arcs are uniformly random ordered city pairs with transit equal
  to great-circle miles divided by 100, rounded up.
* geometric -- nodes sampled from an l x l lattice; every ordered pair
  within L1 distance ``local_radius`` gets an arc, and each node draws a
  few long-range arcs with probability proportional to an inverse power of
  L1 distance; transit equals L1 distance.
* tiny -- oracle-scale instances, feasible by construction.
* the storage-bound comparison fixture (see :func:`gen_bound_fixture`).

Randomness discipline: every generator derives independent substreams from
the user seed with ``numpy`` ``SeedSequence(seed, spawn_key=(STREAM,))``
over PCG64, one stream per stage (arcs, long-range arcs, throughputs,
storages, demand pairs), so changing one stage's parameters never perturbs
another stage's draws.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from typing import Sequence

import numpy as np

from .expand import PartialNetwork, build_arcs, storage_bound_relaxed, storage_bound_tight
from .instance import (
    Arc,
    Commodity,
    Instance,
    capacity_ratio,
    hop_distances,
    transit_distances,
)

__all__ = [
    "GenerationError",
    "GeographicParams",
    "GeometricParams",
    "TinyLimits",
    "BoundFixture",
    "gen_geographic",
    "gen_geometric",
    "gen_tiny",
    "gen_bound_fixture",
    "haversine_miles",
    "long_range_weights",
    "load_city_table",
    "tiny_shared_arc",
]

# substream indexes (stable; documented above)
STREAM_ARCS = 0
STREAM_LONG_RANGE = 1
STREAM_THROUGHPUT = 2
STREAM_STORAGE = 3
STREAM_DEMAND = 4

EARTH_RADIUS_MILES = 3958.8


class GenerationError(RuntimeError):
    pass


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream,))))


def load_city_table() -> list[dict]:
    text = resources.files("uprdd.data").joinpath("us_cities_top20.json").read_text()
    return json.loads(text)["cities"]


def haversine_miles(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_MILES * math.asin(math.sqrt(a))


@dataclass(frozen=True)
class GeographicParams:
    n: int = 20
    m: int = 30
    k: int = 200
    arc_cap: tuple[int, int] = (1, 2)
    storage_cap: tuple[int, int] = (0, 2)
    min_hops: int = 3  # demand pairs: shortest route must use at least this many arcs
    length_factor: float = 0.90  # ... and at most this fraction of the longest shortest route
    max_graph_attempts: int = 50

    def check(self) -> None:
        table_size = len(load_city_table())
        if not 2 <= self.n <= table_size:
            raise GenerationError(f"n must be in [2, {table_size}]")
        if not 1 <= self.m <= self.n * (self.n - 1):
            raise GenerationError("m out of range for ordered pairs")
        if self.k < 1:
            raise GenerationError("k must be positive")
        for lo, hi, least in ((*self.arc_cap, 1), (*self.storage_cap, 0)):
            if lo < least or hi < lo:
                raise GenerationError("capacity bounds must satisfy least <= lo <= hi")
        if self.min_hops < 1 or not 0 < self.length_factor <= 1:
            raise GenerationError("bad demand filter parameters")


@dataclass(frozen=True)
class GeometricParams:
    grid: int = 25
    n: int = 20
    k: int = 200
    local_radius: int = 3
    long_range: tuple[int, ...] = (1,)
    decay: float = 0.5
    arc_cap: tuple[int, int] = (1, 2)
    storage_cap: tuple[int, int] = (0, 2)
    min_hops: int = 3
    length_factor: float = 0.90
    max_graph_attempts: int = 50

    def check(self) -> None:
        if self.n > self.grid * self.grid:
            raise GenerationError("more nodes than lattice cells")
        if self.n < 2 or self.k < 1:
            raise GenerationError("need at least two nodes and one packet")
        if self.local_radius < 1 or self.decay < 0:
            raise GenerationError("bad geometry parameters")
        if not self.long_range or any(q < 0 for q in self.long_range):
            raise GenerationError("bad long-range arc counts")
        for lo, hi, least in ((*self.arc_cap, 1), (*self.storage_cap, 0)):
            if lo < least or hi < lo:
                raise GenerationError("capacity bounds must satisfy least <= lo <= hi")


@dataclass(frozen=True)
class TinyLimits:
    max_nodes: int = 6
    max_commodities: int = 8
    max_horizon: int = 10


def _capacities(seed: int, n_arcs: int, n_nodes: int, arc_cap, storage_cap):
    rng_u = _rng(seed, STREAM_THROUGHPUT)
    rng_b = _rng(seed, STREAM_STORAGE)
    throughputs = rng_u.integers(arc_cap[0], arc_cap[1] + 1, size=n_arcs)
    storages = rng_b.integers(storage_cap[0], storage_cap[1] + 1, size=n_nodes)
    return [int(u) for u in throughputs], [int(b) for b in storages]


def _demand_pairs(inst_arcs, n, k, min_hops, length_factor, seed):
    """Demand endpoints honoring the hop and relative-length filters.

    Eligibility is computed exactly over all ordered reachable pairs:
    the hop distance must be at least ``min_hops`` and the shortest
    transit at most ``length_factor`` times the largest finite shortest
    transit of any ordered pair.  Pairs are then drawn uniformly with
    replacement.
    """
    probe = Instance(tuple([0] * n), tuple(inst_arcs), (), 1)
    tdist = [transit_distances(probe, s) for s in range(n)]
    hdist = [hop_distances(probe, s) for s in range(n)]
    max_sp = 0
    for s in range(n):
        for t in range(n):
            if s != t and tdist[s][t] is not None:
                max_sp = max(max_sp, tdist[s][t])
    eligible = [
        (s, t)
        for s in range(n)
        for t in range(n)
        if s != t
        and tdist[s][t] is not None
        and hdist[s][t] is not None
        and hdist[s][t] >= min_hops
        and tdist[s][t] <= length_factor * max_sp
    ]
    if not eligible:
        return None, max_sp
    rng = _rng(seed, STREAM_DEMAND)
    picks = rng.integers(0, len(eligible), size=k)
    pairs = [eligible[int(i)] for i in picks]
    horizon = sum(tdist[s][t] for s, t in pairs)
    return (pairs, horizon), max_sp


def gen_geographic(params: GeographicParams, seed: int) -> Instance:
    """City-based instance; deterministic in (params, seed)."""
    params.check()
    cities = load_city_table()[: params.n]
    pair_list = [
        (s, t) for s in range(params.n) for t in range(params.n) if s != t
    ]
    for attempt in range(params.max_graph_attempts):
        rng = _rng(seed + attempt * 1_000_003, STREAM_ARCS)
        chosen = rng.choice(len(pair_list), size=params.m, replace=False)
        arcs = []
        for idx in sorted(int(i) for i in chosen):
            s, t = pair_list[idx]
            miles = haversine_miles(
                cities[s]["lat"], cities[s]["lon"], cities[t]["lat"], cities[t]["lon"]
            )
            arcs.append((s, t, max(1, math.ceil(miles / 100.0))))
        throughputs, storages = _capacities(
            seed + attempt * 1_000_003, params.m, params.n, params.arc_cap, params.storage_cap
        )
        full_arcs = [
            Arc(s, t, tr, u) for (s, t, tr), u in zip(arcs, throughputs)
        ]
        demand, max_sp = _demand_pairs(
            full_arcs, params.n, params.k, params.min_hops, params.length_factor,
            seed + attempt * 1_000_003,
        )
        if demand is None:
            continue
        pairs, horizon = demand
        commodities = tuple(Commodity(i, s, t) for i, (s, t) in enumerate(pairs))
        inst = Instance(tuple(storages), tuple(full_arcs), commodities, horizon)
        meta = {
            "generator": "geographic",
            "seed": seed,
            "params": {
                "n": params.n,
                "m": params.m,
                "k": params.k,
                "arc_cap": list(params.arc_cap),
                "storage_cap": list(params.storage_cap),
                "min_hops": params.min_hops,
                "length_factor": params.length_factor,
                "graph_attempt": attempt,
            },
            "length_metric": "transit",
            "max_shortest_transit": max_sp,
            "capacity_ratio": list(capacity_ratio(inst).as_integer_ratio()),
            "cities": [cities[i]["name"] for i in range(params.n)],
        }
        return Instance(inst.storage, inst.arcs, inst.commodities, inst.horizon, meta)
    raise GenerationError(
        f"no qualifying demand pairs after {params.max_graph_attempts} graph attempts"
    )


def long_range_weights(points: Sequence[tuple[int, int]], v: int, decay: float) -> np.ndarray:
    """Sampling weights of long-range arc endpoints for node ``v``.

    Proportional to L1 distance to the power ``-decay``; uniform over the
    other nodes when ``decay`` is 0.  Returned normalized, with weight 0
    at ``v`` itself.
    """
    w = np.zeros(len(points))
    px, py = points[v]
    for j, (qx, qy) in enumerate(points):
        if j == v:
            continue
        d = abs(px - qx) + abs(py - qy)
        w[j] = float(d) ** (-decay)
    return w / w.sum()


def gen_geometric(params: GeometricParams, seed: int) -> Instance:
    """Lattice small-world instance; deterministic in (params, seed)."""
    params.check()
    n_cells = params.grid * params.grid
    for attempt in range(params.max_graph_attempts):
        stage_seed = seed + attempt * 1_000_003
        rng_nodes = _rng(stage_seed, STREAM_ARCS)
        cells = rng_nodes.choice(n_cells, size=params.n, replace=False)
        points = [(int(c) // params.grid, int(c) % params.grid) for c in cells]

        arcs: list[tuple[int, int, int]] = []
        for s in range(params.n):
            for t in range(params.n):
                if s == t:
                    continue
                d = abs(points[s][0] - points[t][0]) + abs(points[s][1] - points[t][1])
                if d <= params.local_radius:
                    arcs.append((s, t, d))
        rng_lr = _rng(stage_seed, STREAM_LONG_RANGE)
        for v in range(params.n):
            q = (
                params.long_range[0]
                if len(params.long_range) == 1
                else int(rng_lr.choice(list(params.long_range)))
            )
            if q == 0:
                continue
            weights = long_range_weights(points, v, params.decay)
            picks = rng_lr.choice(params.n, size=min(q, params.n - 1), replace=False, p=weights)
            for w in sorted(int(x) for x in picks):
                d = abs(points[v][0] - points[w][0]) + abs(points[v][1] - points[w][1])
                arcs.append((v, w, d))

        throughputs, storages = _capacities(
            stage_seed, len(arcs), params.n, params.arc_cap, params.storage_cap
        )
        full_arcs = [Arc(s, t, tr, u) for (s, t, tr), u in zip(arcs, throughputs)]
        demand, max_sp = _demand_pairs(
            full_arcs, params.n, params.k, params.min_hops, params.length_factor, stage_seed
        )
        if demand is None:
            continue
        pairs, horizon = demand
        commodities = tuple(Commodity(i, s, t) for i, (s, t) in enumerate(pairs))
        inst = Instance(tuple(storages), tuple(full_arcs), commodities, horizon)
        meta = {
            "generator": "geometric",
            "seed": seed,
            "params": {
                "grid": params.grid,
                "n": params.n,
                "k": params.k,
                "local_radius": params.local_radius,
                "long_range": list(params.long_range),
                "decay": params.decay,
                "arc_cap": list(params.arc_cap),
                "storage_cap": list(params.storage_cap),
                "min_hops": params.min_hops,
                "length_factor": params.length_factor,
                "graph_attempt": attempt,
            },
            "length_metric": "transit",
            "max_shortest_transit": max_sp,
            "capacity_ratio": list(capacity_ratio(inst).as_integer_ratio()),
            "points": [list(p) for p in points],
        }
        return Instance(inst.storage, inst.arcs, inst.commodities, inst.horizon, meta)
    raise GenerationError(
        f"no qualifying demand pairs after {params.max_graph_attempts} graph attempts"
    )


def gen_tiny(seed: int, limits: TinyLimits = TinyLimits()) -> Instance:
    """Oracle-scale instance, feasible by construction.

    The skeleton is a directed cycle through a random node order with unit
    transits and positive throughputs, so every pair is connected; the
    horizon is the sum of the demands' shortest transits, which a
    one-packet-at-a-time routing always meets.
    """
    rng = _rng(seed, STREAM_ARCS)
    n = int(rng.integers(3, limits.max_nodes + 1))
    order = [int(x) for x in rng.permutation(n)]
    arcs: list[tuple[int, int, int, int]] = []
    for i in range(n):
        arcs.append((order[i], order[(i + 1) % n], 1, int(rng.integers(1, 3))))
    present = {(a[0], a[1]) for a in arcs}
    n_extra = int(rng.integers(0, n + 1))
    candidates = [
        (s, t) for s in range(n) for t in range(n) if s != t and (s, t) not in present
    ]
    if candidates and n_extra:
        picks = rng.choice(len(candidates), size=min(n_extra, len(candidates)), replace=False)
        for idx in sorted(int(i) for i in picks):
            s, t = candidates[idx]
            arcs.append((s, t, int(rng.integers(1, 4)), int(rng.integers(1, 4))))
    rng_b = _rng(seed, STREAM_STORAGE)
    storages = [int(rng_b.integers(0, 3)) for _ in range(n)]

    probe = Instance(
        tuple(storages), tuple(Arc(*a) for a in arcs), (), limits.max_horizon
    )
    rng_d = _rng(seed, STREAM_DEMAND)
    target_k = int(rng_d.integers(2, limits.max_commodities + 1))
    pairs: list[tuple[int, int]] = []
    total = 0
    for _ in range(200):
        if len(pairs) == target_k:
            break
        s = int(rng_d.integers(0, n))
        t = int(rng_d.integers(0, n))
        if s == t:
            continue
        sp = transit_distances(probe, s)[t]
        if sp is None or total + sp > limits.max_horizon:
            continue
        pairs.append((s, t))
        total += sp
    if not pairs:
        raise GenerationError("could not place any demand within the horizon limit")
    commodities = tuple(Commodity(i, s, t) for i, (s, t) in enumerate(pairs))
    meta = {
        "generator": "tiny",
        "seed": seed,
        "params": {
            "max_nodes": limits.max_nodes,
            "max_commodities": limits.max_commodities,
            "max_horizon": limits.max_horizon,
        },
    }
    return Instance(tuple(storages), tuple(Arc(*a) for a in arcs), commodities, total, meta)


def tiny_shared_arc() -> Instance:
    """The worked three-node example: two packets, one bottleneck arc.

    Packets 0 and 1 both travel 0 -> 1 -> 2 over unit-transit arcs; the
    first arc admits both at once, the second only one departure per time
    step, and node 1 can park one packet.  One packet crosses at times
    (0,1), the other waits at node 1 and crosses at (1,2) -- or delays at
    the origin -- so the minimum makespan is 3.
    """
    return Instance(
        storage=(2, 1, 2),
        arcs=(Arc(0, 1, 1, 2), Arc(1, 2, 1, 1)),
        commodities=(Commodity(0, 0, 2), Commodity(1, 0, 2)),
        horizon=4,
        meta={"generator": "tiny_shared_arc", "seed": None, "params": {}},
    )


@dataclass(frozen=True)
class BoundFixture:
    """Comparison fixture for the two holdover-capacity formulas.

    A four-node chain source -> relay -> buffer -> sink where the
    relay-to-buffer connection is a pair of parallel arcs with different
    transits.  The buffer node keeps copies only at times 0, 1, 2 and the
    horizon, while the source and relay keep every copy, so the holdover
    leaving (buffer, 2) spans a gap of 3.  With 50 packets wanting to pass
    and storage 20 at the buffer, the tight capacity 2*20 blocks parking
    them all, while the gap-scaled one (3*20) does not.

    Values forced by the construction: storage 20 and the 40-at-(buffer,2)
    capacity; free choices recorded in ``meta`` of the instance: the exact
    transits (1 and 2), throughput 50 on every arc, horizon 5, storage 20
    at the relay, and large storage at the endpoints.
    """

    instance: Instance
    network: PartialNetwork
    source: int
    relay: int
    buffer: int
    sink: int
    tight_at_buffer_2: int
    relaxed_at_buffer_2: int


def gen_bound_fixture() -> BoundFixture:
    s, v, w, t = 0, 1, 2, 3
    horizon = 5
    inst = Instance(
        storage=(100, 20, 20, 100),
        arcs=(
            Arc(s, v, 1, 50),
            Arc(v, w, 1, 50),
            Arc(v, w, 2, 50),
            Arc(w, t, 1, 50),
        ),
        commodities=tuple(Commodity(i, s, t) for i in range(50)),
        horizon=horizon,
        meta={
            "generator": "bound_fixture",
            "seed": None,
            "params": {},
            "free_choices": {
                "transits": [1, 1, 2, 1],
                "throughput": 50,
                "horizon": horizon,
                "relay_storage": 20,
                "endpoint_storage": 100,
            },
        },
    )
    times = [
        tuple(range(horizon + 1)),  # source: every copy
        tuple(range(horizon + 1)),  # relay: every copy
        (0, 1, 2, horizon),  # buffer: sparse by design
        (0, horizon),  # sink
    ]
    net = build_arcs(times, inst)
    return BoundFixture(
        instance=inst,
        network=net,
        source=s,
        relay=v,
        buffer=w,
        sink=t,
        tight_at_buffer_2=storage_bound_tight(net, inst, w, 2),
        relaxed_at_buffer_2=storage_bound_relaxed(net, inst, w, 2),
    )
