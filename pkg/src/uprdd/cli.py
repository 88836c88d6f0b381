"""Command-line surface: gen, solve, verify, bench, report.

Exit codes: 0 success (for `verify`: schedule feasible), 1 failure or
violations found, 2 usage errors.  The solver backend defaults to the
``SOLVER_BACKEND`` environment variable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import bench as bench_mod
from . import gen as gen_mod
from .ddd import DddOptions, solve_ddd, solve_two_phase
from .instance import load_instance, save_instance, validate
from .models import build_full
from .schedule import (
    MalformedScheduleError,
    load_schedule,
    save_schedule,
)
from .solvers import get_backend
from .verify import check_schedule

USAGE_ERROR = 2


def _cmd_gen(args) -> int:
    if args.family == "geographic":
        params = gen_mod.GeographicParams(
            n=args.n, m=args.m, k=args.k,
            arc_cap=tuple(args.arc_cap), storage_cap=tuple(args.storage_cap),
            min_hops=args.min_hops, length_factor=args.length_factor,
        )
        inst = gen_mod.gen_geographic(params, args.seed)
    elif args.family == "geometric":
        params = gen_mod.GeometricParams(
            grid=args.grid, n=args.n, k=args.k,
            local_radius=args.local_radius,
            long_range=tuple(args.long_range),
            decay=args.decay,
            arc_cap=tuple(args.arc_cap), storage_cap=tuple(args.storage_cap),
            min_hops=args.min_hops, length_factor=args.length_factor,
        )
        inst = gen_mod.gen_geometric(params, args.seed)
    elif args.family == "tiny":
        inst = gen_mod.gen_tiny(args.seed)
    else:  # the storage-bound comparison fixture
        inst = gen_mod.gen_bound_fixture().instance
    save_instance(inst, args.out)
    print(
        f"wrote {args.out}: {inst.n_nodes} nodes, {len(inst.arcs)} arcs, "
        f"{len(inst.commodities)} packets, horizon {inst.horizon}"
    )
    return 0


def _cmd_solve(args) -> int:
    conf: dict[str, str] = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            conf = bench_mod.parse_config(fh.read())
    method = args.method or conf.get("method", "ddd")
    alpha = args.alpha if args.alpha is not None else float(conf.get("alpha", 0.0))
    gap = args.gap if args.gap is not None else float(conf.get("rel_gap", 0.0))
    time_limit = (
        args.time_limit
        if args.time_limit is not None
        else (float(conf["time_limit_s"]) if "time_limit_s" in conf else None)
    )
    backend_name = args.backend or conf.get("backend")
    ub = args.ub if args.ub is not None else (
        int(conf["ub"]) if "ub" in conf else None
    )
    if method not in ("full-ip", "ddd", "two-phase"):
        print(f"error: unknown method {method!r}", file=sys.stderr)
        return USAGE_ERROR

    inst = load_instance(args.instance)
    problems = validate(inst)
    if problems:
        for p in problems:
            print(f"invalid instance: {p.kind}: {p.detail}", file=sys.stderr)
        return 1
    horizon = ub if ub is not None else inst.horizon

    if method == "full-ip":
        backend = get_backend(backend_name)
        model = build_full(inst, horizon)
        res = backend.solve(model, time_limit_s=time_limit, rel_gap=gap)
        if res.status == "infeasible":
            print("infeasible within the horizon")
            return 1
        if not res.has_solution:
            print("time limit reached without a solution")
            return 1
        from .ddd import _schedule_from_fixed  # same support-walk extraction

        sched = _schedule_from_fixed(inst, model, res.values, horizon, inst.horizon)
        status, bound, records = res.status, float(round(res.objective)), []
    else:
        opts = DddOptions(
            backend=backend_name,
            rel_gap=gap,
            time_limit_s=time_limit,
            horizon=horizon,
        )
        solver = solve_two_phase if method == "two-phase" else solve_ddd
        result = solver(inst, alpha, opts)
        if result.status == "infeasible":
            print("infeasible within the horizon")
            return 1
        if result.schedule is None:
            print(f"stopped with status {result.status} and no incumbent")
            return 1
        sched, status, bound, records = (
            result.schedule,
            result.status,
            result.upper_bound,
            result.records,
        )

    save_schedule(inst, sched, args.out)
    if args.log:
        with open(args.log, "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec.as_dict()) + "\n")
    print(
        f"status {status}: makespan {sched.makespan} (bound {bound}), "
        f"{len(records)} iterations, solution in {args.out}"
    )
    return 0


def _cmd_verify(args) -> int:
    inst = load_instance(args.instance)
    try:
        sched = load_schedule(args.solution, inst)
    except MalformedScheduleError as exc:
        print(f"malformed solution: {exc}", file=sys.stderr)
        return 1
    result = check_schedule(inst, sched)
    if result.ok:
        print(f"ok: makespan {result.makespan}")
        return 0
    for v in result.violations:
        print(
            f"violation {v.kind} at {v.where}"
            + (f" (commodity {v.commodity})" if v.commodity is not None else "")
            + (
                f": measured {v.measured}, allowed {v.allowed}"
                if v.measured is not None
                else ""
            )
        )
    return 1


def _cmd_bench(args) -> int:
    conf: dict[str, str] = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            conf = bench_mod.parse_config(fh.read())
    for key in ("methods", "factors", "time_limit_s", "alpha", "rel_gap", "backend"):
        val = getattr(args, key, None)
        if val is not None:
            conf[key] = str(val)
    if args.instances:
        conf["instances"] = ",".join(args.instances)
    out_dir = args.out_dir or conf.get("out_dir", "bench_out")
    instances = bench_mod.instances_from_config(conf)
    cfg = bench_mod.bench_config_from_dict(conf)
    rows, log = bench_mod.run_bench(instances, cfg, out_dir=out_dir)
    done = sum(1 for r in rows if r.status in bench_mod.DONE)
    print(f"{len(rows)} rows ({done} completed) in {out_dir}/rows.csv")
    return 0


def _cmd_report(args) -> int:
    with open(args.rows, "r", encoding="utf-8") as fh:
        rows = bench_mod.rows_from_csv(fh.read())
    iter_records = None
    if args.iters:
        iter_records = []
        with open(args.iters, "r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    iter_records.append(json.loads(line))
    docs = bench_mod.report(rows, iter_records)
    os.makedirs(args.out_dir, exist_ok=True)
    for name, text in docs.items():
        path = os.path.join(args.out_dir, name)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="uprdd",
        description="Exact packet routing under hard throughput and storage limits.",
    )
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate an instance file")
    p.add_argument("--family", required=True,
                   choices=["geographic", "geometric", "tiny", "bound-fixture"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--m", type=int, default=30)
    p.add_argument("--k", type=int, default=200)
    p.add_argument("--arc-cap", type=int, nargs=2, default=[1, 2], metavar=("LO", "HI"))
    p.add_argument("--storage-cap", type=int, nargs=2, default=[0, 2], metavar=("LO", "HI"))
    p.add_argument("--min-hops", type=int, default=3)
    p.add_argument("--length-factor", type=float, default=0.9)
    p.add_argument("--grid", type=int, default=25)
    p.add_argument("--local-radius", type=int, default=3)
    p.add_argument("--long-range", type=int, nargs="+", default=[1])
    p.add_argument("--decay", type=float, default=0.5)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("solve", help="solve an instance file")
    p.add_argument("instance")
    p.add_argument("--config", default=None, help="key = value defaults file")
    p.add_argument("--method", default=None, choices=["full-ip", "ddd", "two-phase"])
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--time-limit", type=float, default=None)
    p.add_argument("--gap", type=float, default=None)
    p.add_argument("--ub", type=int, default=None,
                   help="override the horizon upper bound")
    p.add_argument("--backend", default=None)
    p.add_argument("--out", default="solution.json")
    p.add_argument("--log", default=None, help="iteration log (JSON lines)")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("verify", help="check a solution file against an instance")
    p.add_argument("instance")
    p.add_argument("solution")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("bench", help="run a method x horizon-factor matrix")
    p.add_argument("--config", default=None)
    p.add_argument("--instances", nargs="*", default=None)
    p.add_argument("--methods", default=None)
    p.add_argument("--factors", default=None)
    p.add_argument("--time-limit-s", dest="time_limit_s", type=float, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--rel-gap", dest="rel_gap", type=float, default=None)
    p.add_argument("--backend", default=None)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("report", help="aggregate bench rows into CSV tables")
    p.add_argument("rows")
    p.add_argument("--iters", default=None)
    p.add_argument("--out-dir", default="report_out")
    p.set_defaults(func=_cmd_report)
    return top


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE_ERROR if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
