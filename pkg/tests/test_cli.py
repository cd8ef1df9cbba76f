"""CLI tests: subcommand contracts, exit codes, stage composability, and
byte-identical determinism of artifact files."""

import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from offload_planner.cli import main

from conftest import CORPUS

ARTIFACTS = ["loops.json", "pattern.json", "g3.acc.mc", "search.json",
             "plan.json", "report.json"]


@pytest.fixture
def workdir(tmp_path):
    for path in CORPUS.iterdir():
        if path.is_file():
            shutil.copy(path, tmp_path / path.name)
    return tmp_path


def run_cli(*argv) -> int:
    return main([str(a) for a in argv])


def read_artifacts(outdir: Path) -> dict:
    return {name: (outdir / name).read_bytes() for name in ARTIFACTS}


def test_plan_subcommand_paper_example(tmp_path):
    code = run_cli("plan", "--measure", "10,5", "--price-cpu", "1000",
                   "--price-dev", "4000", "--budget", "10000", "-o", tmp_path)
    assert code == 0
    data = json.loads((tmp_path / "plan.json").read_text())
    assert data["allocation"]["cpu_units"] == 2
    assert data["allocation"]["dev_units"] == 1
    assert data["allocation"]["monthly_cost"] == 6000.0
    assert data["allocation"]["ratio_kept"] is True
    assert data["ratio"] == {"cpu": 2, "dev": 1}
    assert data["inputs"] == {"t_cpu": 10.0, "t_dev": 5.0, "budget": 10000.0,
                              "prices": {"cpu_unit_price": 1000.0,
                                         "dev_unit_price": 4000.0}}


def test_plan_infeasible_budget_exits_2(tmp_path, capsys):
    code = run_cli("plan", "--measure", "10,5", "--price-cpu", "1000",
                   "--price-dev", "4000", "--budget", "4500", "-o", tmp_path)
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_analyze_writes_loop_table(workdir):
    out = workdir / "out"
    code = run_cli("analyze", workdir / "g3.mc",
                   "--costs", workdir / "g3_costs.json", "-o", out)
    assert code == 0
    rows = json.loads((out / "loops.json").read_text())
    assert [r["eligible"] for r in rows] == [True, True, True]


def test_analyze_rejects_stray_cost_ids(workdir, capsys):
    bad = workdir / "bad_costs.json"
    bad.write_text('{"999": {"work": 1}}')
    code = run_cli("analyze", workdir / "g3.mc", "--costs", bad, "-o",
                   workdir / "out")
    assert code == 2
    assert "unknown loop ids" in capsys.readouterr().err


def test_run_all_produces_all_artifacts_and_exit_0(workdir, capsys):
    code = run_cli("run-all", "--config", workdir / "g3_config.json")
    assert code == 0
    out = workdir / "out"
    for name in ARTIFACTS:
        assert (out / name).exists(), name
    assert (out / "report.txt").exists()
    search = json.loads((out / "search.json").read_text())
    assert search["best"]["bits"] == [1, 1, 0]
    report = json.loads((out / "report.json").read_text())
    assert report["recommendation"] == "ready"
    assert "recommendation: ready" in capsys.readouterr().out


def test_run_all_infeasible_budget_exits_2(workdir, capsys):
    config = json.loads((workdir / "g3_config.json").read_text())
    config["budget"] = 1000
    path = workdir / "tight.json"
    path.write_text(json.dumps(config))
    assert run_cli("run-all", "--config", path) == 2
    assert "Infeasible" in capsys.readouterr().err


def test_run_all_attention_exits_1(workdir):
    tests = json.loads((workdir / "g3_tests.json").read_text())
    tests.append({"name": "failing", "kind": "regression", "command": "false"})
    (workdir / "g3_tests.json").write_text(json.dumps(tests))
    assert run_cli("run-all", "--config", workdir / "g3_config.json") == 1


def test_stage_composability_matches_run_all(workdir):
    all_out = workdir / "out_all"
    config = json.loads((workdir / "g3_config.json").read_text())
    config["output_dir"] = "out_all"
    (workdir / "config_all.json").write_text(json.dumps(config))
    assert run_cli("run-all", "--config", workdir / "config_all.json") == 0
    combined = read_artifacts(all_out)

    staged = workdir / "out_staged"
    assert run_cli("analyze", workdir / "g3.mc",
                   "--costs", workdir / "g3_costs.json", "-o", staged) == 0
    ga = config["ga"]
    ga_spec = ",".join(f"{k}={v}" for k, v in ga.items())
    assert run_cli("search", workdir / "g3.mc",
                   "--costs", workdir / "g3_costs.json",
                   "--ga", ga_spec, "-o", staged) == 0
    best = json.loads((staged / "search.json").read_text())["best"]
    t_cpu = best["measurement"]["t_cpu_part"]
    t_dev = best["measurement"]["t_dev_part"]
    assert run_cli("plan", "--measure", f"{t_cpu!r},{t_dev!r}",
                   "--price-cpu", 1000, "--price-dev", 4000,
                   "--budget", 13000, "-o", staged) == 0
    assert run_cli("verify", "--plan", staged / "plan.json",
                   "--tests", workdir / "g3_tests.json",
                   "--registry", workdir / "g3_registry.json",
                   "--components", "libmath,runtime,monitoring",
                   "-o", staged) == 0
    staged_artifacts = {name: (staged / name).read_bytes()
                        for name in ARTIFACTS if name != "g3.acc.mc"}
    staged_artifacts["g3.acc.mc"] = (staged / "g3.acc.mc").read_bytes()
    assert staged_artifacts == combined


def test_run_all_is_deterministic_byte_for_byte(workdir):
    config = json.loads((workdir / "g3_config.json").read_text())
    for out_name, workers in (("out_a", 1), ("out_b", 1), ("out_c", 4)):
        config["output_dir"] = out_name
        config["workers"] = workers
        path = workdir / f"cfg_{out_name}.json"
        path.write_text(json.dumps(config))
        assert run_cli("run-all", "--config", path) == 0
    a = read_artifacts(workdir / "out_a")
    b = read_artifacts(workdir / "out_b")
    c = read_artifacts(workdir / "out_c")
    assert a == b == c
    txt = [(workdir / name / "report.txt").read_bytes()
           for name in ("out_a", "out_b", "out_c")]
    assert txt[0] == txt[1] == txt[2]


def test_seed_env_override(workdir, monkeypatch):
    out1 = workdir / "s1"
    monkeypatch.setenv("OFFLOAD_SEED", "123")
    assert run_cli("search", workdir / "g3.mc", "--costs",
                   workdir / "g3_costs.json", "-o", out1) == 0
    seed = json.loads((out1 / "search.json").read_text())["config"]["seed"]
    assert seed == 123


def test_search_requires_costs_for_sim(workdir, capsys):
    assert run_cli("search", workdir / "g3.mc") == 2
    assert "--costs" in capsys.readouterr().err


def test_search_external_backend(workdir):
    out = workdir / "ext"
    cmd = f'{sys.executable} -c "print(0.5, 0.25, 0.25, 1)"'
    code = run_cli("search", workdir / "g3.mc", "--backend", "external",
                   "--cmd", cmd + " {src} {pattern}",
                   "--ga", "generations=2,population_size=4,seed=1",
                   "-o", out)
    assert code == 0
    search = json.loads((out / "search.json").read_text())
    assert search["best"]["measurement"]["t_total"] == 0.5


def test_console_script_installed():
    proc = subprocess.run(["offload-planner", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    for sub in ("analyze", "search", "plan", "verify", "run-all"):
        assert sub in proc.stdout


def test_missing_config_file_exits_2(tmp_path, capsys):
    assert run_cli("run-all", "--config", tmp_path / "nope.json") == 2
    capsys.readouterr()
