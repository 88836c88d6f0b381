import json
import os

import pytest

from uprdd.bench import (
    BenchConfig,
    CSV_HEADER,
    DONE,
    ResultRow,
    bench_config_from_dict,
    instances_from_config,
    parse_config,
    report,
    rows_from_csv,
    rows_to_csv,
    run_bench,
)
from uprdd.cli import main
from uprdd.gen import gen_tiny, TinyLimits
from uprdd.instance import load_instance
from uprdd.verify import brute_force_optimum


@pytest.fixture(scope="module")
def tiny_rows():
    instances = [
        (f"tiny-s{s}", gen_tiny(s, TinyLimits(5, 3, 8))) for s in (1, 2, 3)
    ]
    cfg = BenchConfig(
        methods=("full_ip", "ddd"), ub_factors=(1.0, 1.5, 2.0),
        time_limit_s=60.0, alpha=0.0,
    )
    rows, log = run_bench(instances, cfg)
    return instances, rows, log


def test_bench_row_count_and_schema(tiny_rows):
    instances, rows, _ = tiny_rows
    assert len(rows) == len(instances) * 2 * 3
    text = rows_to_csv(rows)
    assert text.splitlines()[0] == CSV_HEADER
    parsed = rows_from_csv(text)
    assert [r.instance for r in parsed] == [r.instance for r in rows]
    assert [r.makespan for r in parsed] == [r.makespan for r in rows]


def test_bench_methods_agree_and_iterations_bounded(tiny_rows):
    instances, rows, _ = tiny_rows
    by_inst = dict(instances)
    per = {}
    for r in rows:
        assert r.status in DONE
        per.setdefault((r.instance, r.ub_factor), {})[r.method] = r.makespan
    for (name, _factor), vals in per.items():
        assert len(set(vals.values())) == 1
        t_star = brute_force_optimum(by_inst[name])
        assert vals["ddd"] == t_star
    for r in rows:
        if r.method == "ddd":
            t_star = brute_force_optimum(by_inst[r.instance])
            assert r.iters <= by_inst[r.instance].n_nodes * t_star


def test_bench_ns_ratio_shrinks_with_factor(tiny_rows):
    _, rows, _ = tiny_rows
    for name in {r.instance for r in rows}:
        ratios = {
            r.ub_factor: r.ns_ratio
            for r in rows
            if r.instance == name and r.method == "ddd"
        }
        assert ratios[1.0] >= ratios[1.5] >= ratios[2.0]


def test_report_mean_of_ratios_not_ratio_of_means():
    rows = [
        ResultRow("x-a", "full_ip", 1.0, "optimal", 10.0, 5, 1, 1.0, 0, 0, 0, 0, 0, 0),
        ResultRow("x-a", "ddd", 1.0, "optimal", 1.0, 5, 2, 0.5, 0, 0, 0, 0, 0, 0),
        ResultRow("x-b", "full_ip", 1.0, "optimal", 2.0, 7, 1, 1.0, 0, 0, 0, 0, 0, 0),
        ResultRow("x-b", "ddd", 1.0, "optimal", 4.0, 7, 2, 0.5, 0, 0, 0, 0, 0, 0),
    ]
    docs = report(rows)
    line = next(
        ln for ln in docs["summary.csv"].splitlines() if ln.startswith("x,ddd")
    )
    mean_ratio = float(line.split(",")[-1])
    # mean of (10/1, 2/4) = 5.25; ratio of means would be 12/5 = 2.4
    assert abs(mean_ratio - 5.25) < 1e-9


def test_report_equal_times_give_unit_ratio():
    rows = []
    for name in ("y-a", "y-b"):
        for method in ("full_ip", "ddd"):
            rows.append(
                ResultRow(name, method, 1.0, "optimal", 3.0, 4, 1, 1.0, 0, 0, 0, 0, 0, 0)
            )
    docs = report(rows)
    for ln in docs["summary.csv"].splitlines()[1:]:
        assert ln.endswith(",1.0000")


def test_report_cumulative_counts(tiny_rows):
    _, rows, log = tiny_rows
    docs = report(rows, log)
    lines = docs["cumulative.csv"].splitlines()
    assert lines[0] == "method,ub_factor,wall_s,solved"
    picked = [ln for ln in lines if ln.startswith("ddd,1.0,")]
    assert [int(ln.split(",")[-1]) for ln in picked] == list(
        range(1, len(picked) + 1)
    )


def test_report_violation_series(tiny_rows):
    _, rows, log = tiny_rows
    docs = report(rows, log)
    lines = docs["violations.csv"].splitlines()
    assert lines[0].startswith("method,iteration,n,")
    assert any(ln.startswith("ddd,1,") for ln in lines[1:])


def test_parse_config_and_overrides(tmp_path):
    text = "family = tiny\nseeds = 1,2\nmethods = ddd\nfactors = 1.0\n# note\n"
    conf = parse_config(text)
    assert conf["seeds"] == "1,2"
    cfg = bench_config_from_dict(conf)
    assert cfg.methods == ("ddd",)
    instances = instances_from_config(conf)
    assert [name for name, _ in instances] == ["tiny-s1", "tiny-s2"]
    with pytest.raises(ValueError):
        parse_config("no equals sign here")


def test_bench_config_validation():
    with pytest.raises(ValueError):
        BenchConfig(methods=("nope",)).check()
    with pytest.raises(ValueError):
        BenchConfig(ub_factors=(0.5,)).check()


# ---------------------------------------------------------------------------
# command-line surface

def test_cli_gen_solve_verify_round_trip(tmp_path):
    inst_path = tmp_path / "inst.json"
    sol_path = tmp_path / "sol.json"
    log_path = tmp_path / "log.jsonl"
    assert main(["gen", "--family", "tiny", "--seed", "4", "--out", str(inst_path)]) == 0
    assert main(
        [
            "solve", str(inst_path), "--method", "ddd", "--alpha", "0",
            "--out", str(sol_path), "--log", str(log_path),
        ]
    ) == 0
    assert main(["verify", str(inst_path), str(sol_path)]) == 0
    recs = [json.loads(ln) for ln in log_path.read_text().splitlines()]
    assert recs and {"iteration", "lower_bound", "upper_bound"} <= set(recs[0])
    inst = load_instance(str(inst_path))
    assert brute_force_optimum(inst) is not None


def test_cli_solve_full_ip_and_two_phase(tmp_path):
    inst_path = tmp_path / "inst.json"
    main(["gen", "--family", "tiny", "--seed", "9", "--out", str(inst_path)])
    for method in ("full-ip", "two-phase"):
        sol = tmp_path / f"{method}.json"
        assert main(["solve", str(inst_path), "--method", method, "--out", str(sol)]) == 0
        assert main(["verify", str(inst_path), str(sol)]) == 0


def test_cli_verify_rejects_tampered_solution(tmp_path):
    inst_path = tmp_path / "inst.json"
    sol_path = tmp_path / "sol.json"
    main(["gen", "--family", "tiny", "--seed", "4", "--out", str(inst_path)])
    main(["solve", str(inst_path), "--out", str(sol_path)])
    doc = json.loads(sol_path.read_text())
    doc["makespan"] += 1
    sol_path.write_text(json.dumps(doc))
    assert main(["verify", str(inst_path), str(sol_path)]) == 1


def test_cli_usage_error_exit_code():
    assert main(["solve"]) == 2
    assert main(["gen", "--family", "bogus", "--out", "x.json"]) == 2


def test_cli_bench_and_report(tmp_path):
    conf = tmp_path / "bench.conf"
    conf.write_text(
        "family = tiny\nseeds = 1,2\nmethods = ddd,full_ip\n"
        "factors = 1.0,2.0\ntime_limit_s = 60\nalpha = 0\n"
    )
    out_dir = tmp_path / "out"
    assert main(["bench", "--config", str(conf), "--out-dir", str(out_dir)]) == 0
    rows_file = out_dir / "rows.csv"
    assert rows_file.exists()
    rows = rows_from_csv(rows_file.read_text())
    assert len(rows) == 2 * 2 * 2
    rep_dir = tmp_path / "rep"
    assert main(
        [
            "report", str(rows_file),
            "--iters", str(out_dir / "runlog.jsonl"),
            "--out-dir", str(rep_dir),
        ]
    ) == 0
    assert (rep_dir / "summary.csv").exists()
    assert (rep_dir / "cumulative.csv").exists()
    assert (rep_dir / "violations.csv").exists()


def test_cli_bound_fixture_family(tmp_path):
    path = tmp_path / "fixture.json"
    assert main(["gen", "--family", "bound-fixture", "--out", str(path)]) == 0
    inst = load_instance(str(path))
    assert len(inst.commodities) == 50


def test_bench_deterministic_modulo_wall_time():
    instances = [("t5", gen_tiny(5, TinyLimits(5, 3, 8)))]
    cfg = BenchConfig(methods=("ddd", "full_ip"), ub_factors=(1.0, 2.0), alpha=0.0)
    rows_a, _ = run_bench(instances, cfg)
    rows_b, _ = run_bench(instances, cfg)

    def strip(r):
        return (
            r.instance, r.method, r.ub_factor, r.status, r.makespan, r.iters,
            r.ns_ratio, r.short_viol, r.thr_viol, r.sto_viol,
            r.nodes_short, r.nodes_thr, r.nodes_sto,
        )

    assert [strip(r) for r in rows_a] == [strip(r) for r in rows_b]


def test_bench_worker_pool_matches_sequential():
    instances = [(f"t{s}", gen_tiny(s, TinyLimits(5, 3, 8))) for s in (1, 2, 3)]
    seq = BenchConfig(methods=("ddd",), ub_factors=(1.0,), alpha=0.0, workers=1)
    par = BenchConfig(methods=("ddd",), ub_factors=(1.0,), alpha=0.0, workers=2)
    rows_seq, _ = run_bench(instances, seq)
    rows_par, _ = run_bench(instances, par)
    assert [(r.instance, r.makespan) for r in rows_seq] == [
        (r.instance, r.makespan) for r in rows_par
    ]


def test_cli_solve_with_horizon_override(tmp_path):
    inst_path = tmp_path / "i.json"
    main(["gen", "--family", "tiny", "--seed", "6", "--out", str(inst_path)])
    inst = load_instance(str(inst_path))
    t_star = brute_force_optimum(inst)
    sol = tmp_path / "s.json"
    assert main(
        ["solve", str(inst_path), "--ub", str(t_star), "--out", str(sol)]
    ) == 0
    assert main(["verify", str(inst_path), str(sol)]) == 0
