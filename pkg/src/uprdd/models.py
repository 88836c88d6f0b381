"""Solver-agnostic mixed-integer models for the routing formulations.

Three builders share one model container:

* :func:`build_full` -- binaries over every timed arc of the full
  expansion, timing rows that pin the makespan variable to the latest
  arrival, flow conservation from (origin, 0) to (dest, horizon), original
  throughput and storage capacities, plus one per-packet row summing
  arrival times over the arcs entering its destination (a strengthening
  needed for relaxation-based variants to behave monotonically).
* :func:`build_partial` -- the same structure on a partial expansion, with
  the inflated capacities carried by the network and timing rows that use
  the *true* transit of each movement arc (not the possibly shortened head
  time), so the objective never undercounts real arrival times.
* :func:`build_fixed_paths` -- the restriction where every packet must stay
  on a prescribed set of base arcs, built on a full expansion with a
  (usually shorter) horizon and original capacities.

The makespan is a single continuous variable bounded in [0, horizon]; its
integrality is implied by integral data and deliberately left unmarked.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .expand import ArcKey, PartialNetwork, validate_properties
from .instance import Instance, active_commodities

__all__ = [
    "MipModel",
    "ModelBuildError",
    "Row",
    "Variable",
    "build_fixed_paths",
    "build_full",
    "build_partial",
    "canonical_form",
    "extract_flows",
]

MAKESPAN_KEY = ("makespan",)


class ModelBuildError(ValueError):
    pass


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str  # "binary" | "continuous"
    lb: float
    ub: float


@dataclass(frozen=True)
class Row:
    name: str
    coeffs: tuple[tuple[int, float], ...]  # (variable index, coefficient)
    sense: str  # "L" | "G" | "E"
    rhs: float


@dataclass
class MipModel:
    variables: list[Variable] = field(default_factory=list)
    rows: list[Row] = field(default_factory=list)
    objective: int = 0  # index of the single minimized variable
    key_of: list = field(default_factory=list)
    index: dict = field(default_factory=dict)

    def add_variable(self, key, name: str, kind: str, lb: float, ub: float) -> int:
        idx = len(self.variables)
        self.variables.append(Variable(name, kind, lb, ub))
        self.key_of.append(key)
        self.index[key] = idx
        return idx

    def add_row(self, name: str, coeffs, sense: str, rhs: float) -> None:
        kept = tuple((i, float(c)) for i, c in coeffs if c != 0)
        self.rows.append(Row(name, kept, sense, float(rhs)))

    @property
    def n_binaries(self) -> int:
        return sum(1 for v in self.variables if v.kind == "binary")


def _var_name(k: int, key: ArcKey) -> str:
    if key[0] == "m":
        return f"x_k{k}_a{key[1]}_t{key[2]}"
    return f"x_k{k}_n{key[1]}_t{key[2]}"


def _new_model(horizon: int) -> MipModel:
    model = MipModel()
    model.objective = model.add_variable(
        MAKESPAN_KEY, "makespan", "continuous", 0.0, float(horizon)
    )
    return model


def _add_packet_vars(model: MipModel, k: int, keys: Iterable[ArcKey]) -> None:
    for key in keys:
        model.add_variable((k, key), _var_name(k, key), "binary", 0.0, 1.0)


def _timing_rows(model: MipModel, k: int, moves, arrival) -> None:
    # arrival(key) multiplies the binary; the makespan variable bounds it.
    tvar = model.objective
    final_terms: list[tuple[int, float]] = []
    dest = moves.dest
    for key, head_node in moves.items:
        x = model.index[(k, key)]
        t_arr = arrival(key)
        model.add_row(
            f"tm_k{k}_{key[1]}_{key[2]}", [(x, t_arr), (tvar, -1.0)], "L", 0.0
        )
        if head_node == dest:
            final_terms.append((x, float(t_arr)))
    final_terms.append((tvar, -1.0))
    model.add_row(f"fin_k{k}", final_terms, "L", 0.0)


@dataclass
class _Moves:
    items: list  # (key, head_node)
    dest: int


def build_full(inst: Instance, horizon: int | None = None) -> MipModel:
    """Time-indexed model over the complete expansion at the horizon."""
    T = inst.horizon if horizon is None else int(horizon)
    if T < 1:
        raise ModelBuildError(f"horizon {T} < 1")
    model = _new_model(T)

    move_keys: list[tuple[ArcKey, int, int, int]] = []  # key, head, t_arr, arc idx
    for i, a in enumerate(inst.arcs):
        for t in range(T - a.transit + 1):
            move_keys.append((("m", i, t), a.head, t + a.transit, i))
    hold_keys = [("h", v, t) for v in range(inst.n_nodes) for t in range(T)]

    for c in inst.commodities:
        _add_packet_vars(model, c.id, [mk[0] for mk in move_keys])
        _add_packet_vars(model, c.id, hold_keys)

    # timing + final-arrival rows
    for c in inst.commodities:
        moves = _Moves([(mk[0], mk[1]) for mk in move_keys], c.dest)
        _timing_rows(model, c.id, moves, arrival=lambda key: key[2] + inst.arcs[key[1]].transit)

    # flow conservation at every timed node
    outs: dict[tuple[int, int], list[ArcKey]] = {}
    ins: dict[tuple[int, int], list[ArcKey]] = {}
    for key, head, _t_arr, i in move_keys:
        outs.setdefault((inst.arcs[i].tail, key[2]), []).append(key)
        ins.setdefault((head, _t_arr), []).append(key)
    for key in hold_keys:
        _, v, t = key
        outs.setdefault((v, t), []).append(key)
        ins.setdefault((v, t + 1), []).append(key)
    for c in inst.commodities:
        for v in range(inst.n_nodes):
            for t in range(T + 1):
                rhs = 0
                if (v, t) == (c.origin, 0):
                    rhs = 1
                elif (v, t) == (c.dest, T):
                    rhs = -1
                coeffs = [(model.index[(c.id, key)], 1.0) for key in outs.get((v, t), ())]
                coeffs += [(model.index[(c.id, key)], -1.0) for key in ins.get((v, t), ())]
                model.add_row(f"fc_k{c.id}_{v}_{t}", coeffs, "E", rhs)

    # throughput per timed movement arc, storage per holdover
    if inst.commodities:
        for key, _head, _t_arr, i in move_keys:
            coeffs = [(model.index[(c.id, key)], 1.0) for c in inst.commodities]
            model.add_row(f"cap_a{i}_t{key[2]}", coeffs, "L", inst.arcs[i].throughput)
        for key in hold_keys:
            _, v, t = key
            act = active_commodities(inst, v)
            coeffs = [(model.index[(k, key)], 1.0) for k in sorted(act)]
            if coeffs:
                model.add_row(f"sto_n{v}_t{t}", coeffs, "L", inst.storage[v])
    return model


def build_partial(net: PartialNetwork, inst: Instance) -> MipModel:
    """Relaxation model over a partial expansion.

    Timing uses the true transit of each movement arc's base arc, so a
    shortened arc still contributes its honest arrival time to the
    makespan.  Capacities come from the network (already inflated).
    """
    problems = validate_properties(net, inst)
    if problems:
        raise ModelBuildError("; ".join(problems[:5]))
    T = net.horizon
    model = _new_model(T)

    move = list(net.movement_arcs)
    hold = list(net.holdover_arcs)
    for c in inst.commodities:
        _add_packet_vars(model, c.id, [ta.key for ta in move])
        _add_packet_vars(model, c.id, [ta.key for ta in hold])

    for c in inst.commodities:
        moves = _Moves([(ta.key, ta.head[0]) for ta in move], c.dest)
        _timing_rows(
            model,
            c.id,
            moves,
            arrival=lambda key: key[2] + inst.arcs[key[1]].transit,
        )

    outs: dict[tuple[int, int], list[ArcKey]] = {}
    ins: dict[tuple[int, int], list[ArcKey]] = {}
    for ta in move + hold:
        outs.setdefault(ta.tail, []).append(ta.key)
        ins.setdefault(ta.head, []).append(ta.key)
    for c in inst.commodities:
        for v in range(inst.n_nodes):
            for t in net.times[v]:
                rhs = 0
                if (v, t) == (c.origin, 0):
                    rhs = 1
                elif (v, t) == (c.dest, T):
                    rhs = -1
                coeffs = [(model.index[(c.id, key)], 1.0) for key in outs.get((v, t), ())]
                coeffs += [(model.index[(c.id, key)], -1.0) for key in ins.get((v, t), ())]
                model.add_row(f"fc_k{c.id}_{v}_{t}", coeffs, "E", rhs)

    if inst.commodities:
        for ta in move:
            key = ta.key
            coeffs = [(model.index[(c.id, key)], 1.0) for c in inst.commodities]
            model.add_row(f"cap_a{key[1]}_t{key[2]}", coeffs, "L", ta.capacity)
        for ta in hold:
            key = ta.key
            v = key[1]
            act = active_commodities(inst, v)
            coeffs = [(model.index[(k, key)], 1.0) for k in sorted(act)]
            if coeffs:
                model.add_row(f"sto_n{v}_t{key[2]}", coeffs, "L", ta.capacity)
    return model


def build_fixed_paths(
    inst: Instance,
    arc_sets: Sequence[Iterable[int]],
    horizon: int,
) -> MipModel:
    """Restriction with every packet pinned to its own base-arc set.

    ``arc_sets[j]`` lists the allowed base arcs of ``inst.commodities[j]``
    and must contain a directed origin->dest path.  Variables exist only
    over timed copies of allowed arcs and holdovers at their endpoints;
    capacities are the original ones.
    """
    T = int(horizon)
    if T < 0:
        raise ModelBuildError(f"horizon {T} < 0")
    if len(arc_sets) != len(inst.commodities):
        raise ModelBuildError("one arc set per commodity required")

    allowed: list[tuple[int, ...]] = []
    nodes_of: list[tuple[int, ...]] = []
    for c, arcs in zip(inst.commodities, arc_sets):
        aset = tuple(sorted(set(int(i) for i in arcs)))
        touched = {c.origin, c.dest}
        adj: dict[int, list[int]] = {}
        for i in aset:
            a = inst.arcs[i]
            touched.update((a.tail, a.head))
            adj.setdefault(a.tail, []).append(a.head)
        seen = {c.origin}
        frontier = [c.origin]
        while frontier:
            v = frontier.pop()
            for w in adj.get(v, ()):
                if w not in seen:
                    seen.add(w)
                    frontier.append(w)
        if c.dest not in seen:
            raise ModelBuildError(
                f"commodity {c.id}: arc set has no origin->dest path"
            )
        allowed.append(aset)
        nodes_of.append(tuple(sorted(touched)))

    model = _new_model(T)

    per_k_moves: list[list[tuple[ArcKey, int, int]]] = []
    per_k_holds: list[list[ArcKey]] = []
    for c, aset, vset in zip(inst.commodities, allowed, nodes_of):
        moves = []
        for i in aset:
            a = inst.arcs[i]
            for t in range(T - a.transit + 1):
                moves.append((("m", i, t), a.head, t + a.transit))
        holds = [("h", v, t) for v in vset for t in range(T)]
        _add_packet_vars(model, c.id, [m[0] for m in moves])
        _add_packet_vars(model, c.id, holds)
        per_k_moves.append(moves)
        per_k_holds.append(holds)

    for c, moves in zip(inst.commodities, per_k_moves):
        mv = _Moves([(key, head) for key, head, _ in moves], c.dest)
        _timing_rows(model, c.id, mv, arrival=lambda key: key[2] + inst.arcs[key[1]].transit)

    for c, moves, holds, vset in zip(
        inst.commodities, per_k_moves, per_k_holds, nodes_of
    ):
        outs: dict[tuple[int, int], list[ArcKey]] = {}
        ins: dict[tuple[int, int], list[ArcKey]] = {}
        for key, head, t_arr in moves:
            outs.setdefault((inst.arcs[key[1]].tail, key[2]), []).append(key)
            ins.setdefault((head, t_arr), []).append(key)
        for key in holds:
            _, v, t = key
            outs.setdefault((v, t), []).append(key)
            ins.setdefault((v, t + 1), []).append(key)
        for v in vset:
            for t in range(T + 1):
                rhs = 0
                if (v, t) == (c.origin, 0):
                    rhs = 1
                elif (v, t) == (c.dest, T):
                    rhs = -1
                coeffs = [(model.index[(c.id, key)], 1.0) for key in outs.get((v, t), ())]
                coeffs += [(model.index[(c.id, key)], -1.0) for key in ins.get((v, t), ())]
                model.add_row(f"fc_k{c.id}_{v}_{t}", coeffs, "E", rhs)

    shared_moves: dict[ArcKey, list[int]] = {}
    shared_holds: dict[ArcKey, list[int]] = {}
    for c, moves, holds in zip(inst.commodities, per_k_moves, per_k_holds):
        for key, _h, _t in moves:
            shared_moves.setdefault(key, []).append(c.id)
        for key in holds:
            shared_holds.setdefault(key, []).append(c.id)
    for key, ks in sorted(shared_moves.items()):
        coeffs = [(model.index[(k, key)], 1.0) for k in ks]
        model.add_row(
            f"cap_a{key[1]}_t{key[2]}", coeffs, "L", inst.arcs[key[1]].throughput
        )
    for key, ks in sorted(shared_holds.items()):
        v = key[1]
        act = active_commodities(inst, v)
        coeffs = [(model.index[(k, key)], 1.0) for k in ks if k in act]
        if coeffs:
            model.add_row(f"sto_n{v}_t{key[2]}", coeffs, "L", inst.storage[v])
    return model


def canonical_form(model: MipModel):
    """Order-independent rendering: variable set, row multiset, objective.

    Two models are interchangeable for any solver exactly when their
    canonical forms match.
    """
    names = [v.name for v in model.variables]
    vars_sorted = tuple(
        sorted((v.name, v.kind, float(v.lb), float(v.ub)) for v in model.variables)
    )
    rows_sorted = tuple(
        sorted(
            (
                r.sense,
                float(r.rhs),
                tuple(sorted((names[i], float(c)) for i, c in r.coeffs)),
            )
            for r in model.rows
        )
    )
    return vars_sorted, rows_sorted, names[model.objective]


def extract_flows(
    model: MipModel, values: Sequence[float], tol: float = 1e-6
) -> dict[tuple[int, ArcKey], float]:
    """Per-(commodity, arc key) values above ``tol`` from a solution vector."""
    out: dict[tuple[int, ArcKey], float] = {}
    for idx, key in enumerate(model.key_of):
        if key == MAKESPAN_KEY:
            continue
        val = float(values[idx])
        if val > tol:
            out[key] = val
    return out
