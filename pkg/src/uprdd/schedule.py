"""Per-packet trajectories in a fully time-expanded network.

A schedule assigns each packet an ordered list of movement steps; waits
are implicit between a step's arrival and the next departure.  A packet
exists at its origin from time 0 (waiting there is free) and rests at its
destination after the last arrival (also free).  The makespan is the
latest destination arrival over all packets.

The solution file format is a JSON document listing, per commodity, the
visited nodes with arrival and departure times.  Each non-final visit also
carries the outgoing arc index so that parallel arcs with equal transit
stay distinguishable; readers fall back to matching (tail, head, transit)
when the field is absent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .instance import Instance

__all__ = [
    "MoveStep",
    "Trajectory",
    "Schedule",
    "MalformedScheduleError",
    "schedule_to_json",
    "schedule_from_json",
    "save_schedule",
    "load_schedule",
]


class MalformedScheduleError(ValueError):
    """Raised when a schedule document cannot be interpreted at all."""


@dataclass(frozen=True)
class MoveStep:
    arc: int
    depart: int
    arrive: int


@dataclass(frozen=True)
class Trajectory:
    commodity: int
    steps: tuple[MoveStep, ...]


@dataclass(frozen=True)
class Schedule:
    trajectories: tuple[Trajectory, ...]
    makespan: int
    horizon: int


def computed_makespan(sched: Schedule) -> int:
    """Latest movement arrival across all trajectories."""
    best = 0
    for tr in sched.trajectories:
        if tr.steps:
            best = max(best, tr.steps[-1].arrive)
    return best


def schedule_to_json(inst: Instance, sched: Schedule) -> str:
    rows = []
    for tr in sorted(sched.trajectories, key=lambda t: t.commodity):
        visits = []
        prev_arrival = 0
        for step in tr.steps:
            a = inst.arcs[step.arc]
            visits.append(
                {
                    "node": a.tail,
                    "arrival": prev_arrival,
                    "departure": step.depart,
                    "arc": step.arc,
                }
            )
            prev_arrival = step.arrive
        last_node = inst.arcs[tr.steps[-1].arc].head if tr.steps else None
        visits.append(
            {"node": last_node, "arrival": prev_arrival, "departure": prev_arrival}
        )
        rows.append({"id": tr.commodity, "visits": visits})
    doc = {"makespan": sched.makespan, "horizon": sched.horizon, "commodities": rows}
    return json.dumps(doc, indent=2) + "\n"


def _match_arc(inst: Instance, tail: int, head: int, transit: int) -> int:
    for i in inst.out_arcs[tail]:
        a = inst.arcs[i]
        if a.head == head and a.transit == transit:
            return i
    raise MalformedScheduleError(
        f"no arc {tail}->{head} with transit {transit} in the instance"
    )


def schedule_from_json(text: str, inst: Instance) -> Schedule:
    try:
        doc = json.loads(text)
        trajectories = []
        for rec in doc["commodities"]:
            visits = rec["visits"]
            steps = []
            for pos, nxt in zip(visits, visits[1:]):
                tail, head = int(pos["node"]), int(nxt["node"])
                depart, arrive = int(pos["departure"]), int(nxt["arrival"])
                if "arc" in pos:
                    arc = int(pos["arc"])
                    if not 0 <= arc < len(inst.arcs):
                        raise MalformedScheduleError(f"arc index {arc} out of range")
                else:
                    arc = _match_arc(inst, tail, head, arrive - depart)
                steps.append(MoveStep(arc, depart, arrive))
            trajectories.append(Trajectory(int(rec["id"]), tuple(steps)))
        return Schedule(
            tuple(trajectories), int(doc["makespan"]), int(doc["horizon"])
        )
    except MalformedScheduleError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedScheduleError(f"malformed solution document: {exc}") from exc


def save_schedule(inst: Instance, sched: Schedule, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(schedule_to_json(inst, sched))


def load_schedule(path: str, inst: Instance) -> Schedule:
    with open(path, "r", encoding="utf-8") as fh:
        return schedule_from_json(fh.read(), inst)
