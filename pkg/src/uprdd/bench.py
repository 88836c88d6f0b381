"""Benchmark harness: method x horizon-factor matrices and report tables.

Protocol per instance: first an exact refinement solve at the instance's
own (generous) horizon to learn the true optimum T*, then every requested
method at horizons ceil(factor * T*) under the row time limit.  One result
row per (instance, method, factor); refinement telemetry goes to a
JSON-lines stream, one record per iteration.

Report outputs are plain CSV series: per-family mean wall time and mean
per-instance runtime ratio against the full model (mean of ratios, not
ratio of means), cumulative solved-within-time curves, and per-iteration
violation-cause proportions.  Rendering is left to external plotters.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .ddd import DddOptions, solve_ddd, solve_two_phase
from .instance import Instance, load_instance
from .models import build_full
from .solvers import get_backend

__all__ = [
    "BenchConfig",
    "ResultRow",
    "CSV_HEADER",
    "run_bench",
    "report",
    "rows_from_csv",
    "rows_to_csv",
    "parse_config",
    "instances_from_config",
    "bench_config_from_dict",
]

CSV_HEADER = (
    "instance,method,ub_factor,status,wall_s,makespan,iters,ns_ratio,"
    "short_viol,thr_viol,sto_viol,nodes_short,nodes_thr,nodes_sto"
)

METHODS = ("full_ip", "ddd", "two_phase")


@dataclass(frozen=True)
class BenchConfig:
    methods: tuple[str, ...] = ("full_ip", "ddd")
    ub_factors: tuple[float, ...] = (1.0, 1.5, 2.0)
    time_limit_s: float = 300.0
    rel_gap: float = 0.0
    alpha: float = 0.01
    backend: str | None = None
    workers: int = 1
    # accepted for solver-config compatibility; the bundled backends are
    # single-threaded, so this is advisory only
    threads: int = 1

    def check(self) -> None:
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}; known: {METHODS}")
        if any(f < 1.0 for f in self.ub_factors):
            raise ValueError("horizon factors must be >= 1")


@dataclass
class ResultRow:
    instance: str
    method: str
    ub_factor: float
    status: str
    wall_s: float
    makespan: int | None
    iters: int
    ns_ratio: float
    short_viol: int
    thr_viol: int
    sto_viol: int
    nodes_short: int
    nodes_thr: int
    nodes_sto: int

    def to_csv(self) -> str:
        mk = "" if self.makespan is None else str(self.makespan)
        return (
            f"{self.instance},{self.method},{self.ub_factor},{self.status},"
            f"{self.wall_s:.3f},{mk},{self.iters},{self.ns_ratio:.6f},"
            f"{self.short_viol},{self.thr_viol},{self.sto_viol},"
            f"{self.nodes_short},{self.nodes_thr},{self.nodes_sto}"
        )


def rows_to_csv(rows: list[ResultRow]) -> str:
    return "\n".join([CSV_HEADER] + [r.to_csv() for r in rows]) + "\n"


def rows_from_csv(text: str) -> list[ResultRow]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError("unexpected results header")
    rows = []
    for ln in lines[1:]:
        f = ln.split(",")
        rows.append(
            ResultRow(
                f[0], f[1], float(f[2]), f[3], float(f[4]),
                None if f[5] == "" else int(f[5]),
                int(f[6]), float(f[7]), int(f[8]), int(f[9]), int(f[10]),
                int(f[11]), int(f[12]), int(f[13]),
            )
        )
    return rows


def _ddd_row(
    name: str,
    inst: Instance,
    method: str,
    factor: float,
    horizon: int,
    cfg: BenchConfig,
) -> tuple[ResultRow, list[dict]]:
    opts = DddOptions(
        backend=cfg.backend,
        rel_gap=cfg.rel_gap,
        time_limit_s=cfg.time_limit_s,
        horizon=horizon,
    )
    solver = solve_two_phase if method == "two_phase" else solve_ddd
    start = time.perf_counter()
    result = solver(inst, cfg.alpha, opts)
    wall = time.perf_counter() - start
    n_kept = sum(len(ts) for ts in result.final_times)
    ns_ratio = n_kept / (inst.n_nodes * (horizon + 1))
    row = ResultRow(
        instance=name,
        method=method,
        ub_factor=factor,
        status=result.status,
        wall_s=wall,
        makespan=result.makespan,
        iters=result.iterations,
        ns_ratio=ns_ratio,
        short_viol=sum(r.short_viol for r in result.records),
        thr_viol=sum(r.thr_viol for r in result.records),
        sto_viol=sum(r.sto_viol for r in result.records),
        nodes_short=sum(r.nodes_short for r in result.records),
        nodes_thr=sum(r.nodes_thr for r in result.records),
        nodes_sto=sum(r.nodes_sto for r in result.records),
    )
    log = [
        {"instance": name, "method": method, "ub_factor": factor, **rec.as_dict()}
        for rec in result.records
    ]
    return row, log


def _full_ip_row(
    name: str, inst: Instance, factor: float, horizon: int, cfg: BenchConfig
) -> ResultRow:
    backend = get_backend(cfg.backend)
    model = build_full(inst, horizon)
    res = backend.solve(model, time_limit_s=cfg.time_limit_s, rel_gap=cfg.rel_gap)
    makespan = None if res.objective is None else int(round(res.objective))
    return ResultRow(
        instance=name,
        method="full_ip",
        ub_factor=factor,
        status=res.status,
        wall_s=res.wall_s,
        makespan=makespan,
        iters=1,
        ns_ratio=1.0,
        short_viol=0,
        thr_viol=0,
        sto_viol=0,
        nodes_short=0,
        nodes_thr=0,
        nodes_sto=0,
    )


def _bench_one(task) -> tuple[list[ResultRow], list[dict]]:
    name, inst, cfg = task
    rows: list[ResultRow] = []
    log: list[dict] = []

    # exact solve at the instance's own horizon to learn T*
    opts = DddOptions(
        backend=cfg.backend, rel_gap=0.0, time_limit_s=cfg.time_limit_s
    )
    probe = solve_ddd(inst, 0.0, opts)
    if probe.status != "optimal" or probe.makespan is None:
        for method in cfg.methods:
            for factor in cfg.ub_factors:
                rows.append(
                    ResultRow(
                        name, method, factor, "tstar_timeout", cfg.time_limit_s,
                        None, 0, 0.0, 0, 0, 0, 0, 0, 0,
                    )
                )
        return rows, log
    t_star = probe.makespan
    log.append(
        {"instance": name, "method": "tstar_probe", "ub_factor": 0.0,
         "t_star": t_star, "iterations": probe.iterations}
    )

    for method in cfg.methods:
        for factor in cfg.ub_factors:
            horizon = max(1, int(math.ceil(round(factor * t_star, 9))))
            if method == "full_ip":
                rows.append(_full_ip_row(name, inst, factor, horizon, cfg))
            else:
                row, rec = _ddd_row(name, inst, method, factor, horizon, cfg)
                rows.append(row)
                log.extend(rec)
    return rows, log


def run_bench(
    instances: list[tuple[str, Instance]],
    cfg: BenchConfig = BenchConfig(),
    out_dir: str | None = None,
) -> tuple[list[ResultRow], list[dict]]:
    """Run the matrix; optionally persist rows.csv and runlog.jsonl.

    Rows come back sorted by (instance, method, factor) regardless of the
    worker pool, and the run is deterministic for ``workers=1``.
    """
    cfg.check()
    tasks = [(name, inst, cfg) for name, inst in instances]
    results: list[tuple[list[ResultRow], list[dict]]] = []
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_bench_one, tasks))
    else:
        results = [_bench_one(t) for t in tasks]

    rows: list[ResultRow] = []
    log: list[dict] = []
    for r, l in results:
        rows.extend(r)
        log.extend(l)
    rows.sort(key=lambda r: (r.instance, r.method, r.ub_factor))

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "rows.csv"), "w", encoding="utf-8") as fh:
            fh.write(rows_to_csv(rows))
        with open(os.path.join(out_dir, "runlog.jsonl"), "w", encoding="utf-8") as fh:
            for rec in log:
                fh.write(json.dumps(rec) + "\n")
    return rows, log


# ---------------------------------------------------------------------------
# reporting

DONE = ("optimal", "feasible")


def _family(instance_id: str) -> str:
    return instance_id.split("-")[0] if "-" in instance_id else "all"


def report(rows: list[ResultRow], iter_records: list[dict] | None = None) -> dict[str, str]:
    """Aggregate rows (and optional iteration records) into CSV documents."""
    out: dict[str, str] = {}

    # summary: mean wall and mean per-instance ratio against full_ip
    base_wall: dict[tuple[str, float], float] = {}
    for r in rows:
        if r.method == "full_ip" and r.status in DONE:
            base_wall[(r.instance, r.ub_factor)] = r.wall_s
    groups: dict[tuple[str, str, float], list[ResultRow]] = {}
    for r in rows:
        groups.setdefault((_family(r.instance), r.method, r.ub_factor), []).append(r)
    lines = ["family,method,ub_factor,n_done,mean_wall_s,mean_ratio_vs_full_ip"]
    for (fam, method, factor), grp in sorted(groups.items()):
        done = [r for r in grp if r.status in DONE]
        mean_wall = sum(r.wall_s for r in done) / len(done) if done else float("nan")
        ratios = [
            base_wall[(r.instance, r.ub_factor)] / r.wall_s
            for r in done
            if (r.instance, r.ub_factor) in base_wall and r.wall_s > 0
        ]
        mean_ratio = sum(ratios) / len(ratios) if ratios else float("nan")
        lines.append(
            f"{fam},{method},{factor},{len(done)},{mean_wall:.3f},{mean_ratio:.4f}"
        )
    out["summary.csv"] = "\n".join(lines) + "\n"

    # cumulative solved-within-time curves
    lines = ["method,ub_factor,wall_s,solved"]
    curves: dict[tuple[str, float], list[float]] = {}
    for r in rows:
        if r.status in DONE:
            curves.setdefault((r.method, r.ub_factor), []).append(r.wall_s)
    for (method, factor), walls in sorted(curves.items()):
        for i, w in enumerate(sorted(walls), start=1):
            lines.append(f"{method},{factor},{w:.3f},{i}")
    out["cumulative.csv"] = "\n".join(lines) + "\n"

    # violation-cause proportions by iteration
    lines = [
        "method,iteration,n,short_share,thr_share,sto_share,"
        "nodes_short_share,nodes_thr_share,nodes_sto_share"
    ]
    if iter_records:
        per_iter: dict[tuple[str, int], list[dict]] = {}
        for rec in iter_records:
            if "iteration" not in rec:
                continue
            per_iter.setdefault((rec["method"], rec["iteration"]), []).append(rec)

        def share(recs, key, total_keys):
            shares = []
            for rec in recs:
                total = sum(rec[t] for t in total_keys)
                if total > 0:
                    shares.append(rec[key] / total)
            return sum(shares) / len(shares) if shares else 0.0

        for (method, it), recs in sorted(per_iter.items()):
            viol_keys = ("short_viol", "thr_viol", "sto_viol")
            node_keys = ("nodes_short", "nodes_thr", "nodes_sto")
            lines.append(
                f"{method},{it},{len(recs)},"
                f"{share(recs, 'short_viol', viol_keys):.4f},"
                f"{share(recs, 'thr_viol', viol_keys):.4f},"
                f"{share(recs, 'sto_viol', viol_keys):.4f},"
                f"{share(recs, 'nodes_short', node_keys):.4f},"
                f"{share(recs, 'nodes_thr', node_keys):.4f},"
                f"{share(recs, 'nodes_sto', node_keys):.4f}"
            )
    out["violations.csv"] = "\n".join(lines) + "\n"
    return out


# ---------------------------------------------------------------------------
# config files: one `key = value` per line, '#' comments, lists by comma

def parse_config(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"bad config line: {raw!r}")
        key, val = line.split("=", 1)
        out[key.strip()] = val.strip()
    return out


def _ints(val: str) -> list[int]:
    return [int(x) for x in val.split(",") if x.strip()]


def _floats(val: str) -> list[float]:
    return [float(x) for x in val.split(",") if x.strip()]


def bench_config_from_dict(conf: dict[str, str]) -> BenchConfig:
    kwargs: dict = {}
    if "methods" in conf:
        kwargs["methods"] = tuple(m.strip() for m in conf["methods"].split(","))
    if "factors" in conf:
        kwargs["ub_factors"] = tuple(_floats(conf["factors"]))
    if "time_limit_s" in conf:
        kwargs["time_limit_s"] = float(conf["time_limit_s"])
    if "rel_gap" in conf:
        kwargs["rel_gap"] = float(conf["rel_gap"])
    if "alpha" in conf:
        kwargs["alpha"] = float(conf["alpha"])
    if "backend" in conf:
        kwargs["backend"] = conf["backend"]
    if "workers" in conf:
        kwargs["workers"] = int(conf["workers"])
    if "threads" in conf:
        kwargs["threads"] = int(conf["threads"])
    return BenchConfig(**kwargs)


def instances_from_config(conf: dict[str, str]) -> list[tuple[str, Instance]]:
    """Instance list from config: explicit files, or a generator matrix."""
    from . import gen as _gen

    if "instances" in conf:
        out = []
        for path in conf["instances"].split(","):
            path = path.strip()
            out.append((os.path.splitext(os.path.basename(path))[0], load_instance(path)))
        return out

    family = conf.get("family")
    if family is None:
        raise ValueError("config needs either `instances` or `family`")
    seeds = _ints(conf.get("seeds", "0"))
    out = []
    if family == "tiny":
        for seed in seeds:
            out.append((f"tiny-s{seed}", _gen.gen_tiny(seed)))
        return out
    arc_cap = tuple(_ints(conf.get("arc_cap", "1,2")))
    storage_cap = tuple(_ints(conf.get("storage_cap", "0,2")))
    common = dict(
        n=int(conf.get("n", "20")),
        arc_cap=arc_cap,
        storage_cap=storage_cap,
        min_hops=int(conf.get("min_hops", "3")),
        length_factor=float(conf.get("length_factor", "0.9")),
    )
    if family == "geographic":
        for m in _ints(conf.get("m", "30")):
            for k in _ints(conf.get("k", "20")):
                for seed in seeds:
                    params = _gen.GeographicParams(m=m, k=k, **common)
                    out.append(
                        (f"geographic-m{m}-k{k}-s{seed}", _gen.gen_geographic(params, seed))
                    )
        return out
    if family == "geometric":
        for p in _ints(conf.get("p", "3")):
            for k in _ints(conf.get("k", "20")):
                for seed in seeds:
                    params = _gen.GeometricParams(
                        grid=int(conf.get("grid", "25")),
                        local_radius=p,
                        long_range=tuple(_ints(conf.get("q", "1"))),
                        decay=float(conf.get("r", "0.5")),
                        k=k,
                        **common,
                    )
                    out.append(
                        (f"geometric-p{p}-k{k}-s{seed}", _gen.gen_geometric(params, seed))
                    )
        return out
    raise ValueError(f"unknown family {family!r}")
