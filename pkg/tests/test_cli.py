"""Command-line front end: subcommands, exit codes, file round-trips."""

import dataclasses
import json
import subprocess
import sys

import pytest

from conftest import TINY_CFG, all_cloud_solution

from edgeplace import harness
from edgeplace.cli import main
from edgeplace.harness import (ExperimentPlan, derive_seed, emit_plot_data,
                               read_csv, run_experiment, write_aggregate_csv)
from edgeplace.latency import latency_table
from edgeplace.model import evaluate_objective
from edgeplace.scenario import generate, load_scenario

FAST_CFG = dataclasses.replace(TINY_CFG, num_users=4)


def cfg_file(tmp_path, cfg=FAST_CFG):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(dataclasses.asdict(cfg)))
    return str(path)


# --------------------------------------------------------------------------
# generate


def test_generate_writes_loadable_scenario(tmp_path, capsys):
    out = tmp_path / "scn.json"
    code = main(["generate", "--config", cfg_file(tmp_path), "--seed", "5",
                 "--out", str(out)])
    assert code == 0
    s = load_scenario(out)
    expected = generate(FAST_CFG, 5)
    assert s.num_users == expected.num_users == 4
    assert s.num_scns == expected.num_scns == 3
    assert [n.storage for n in s.nodes] == [n.storage for n in expected.nodes]
    assert "4 users" in capsys.readouterr().out


def test_generate_flags_override_config_file(tmp_path):
    out = tmp_path / "scn.json"
    assert main(["generate", "--config", cfg_file(tmp_path), "--users", "3",
                 "--seed", "5", "--out", str(out)]) == 0
    assert load_scenario(out).num_users == 3


def test_generate_is_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for out in (a, b):
        assert main(["generate", "--config", cfg_file(tmp_path), "--seed", "7",
                     "--out", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()


# --------------------------------------------------------------------------
# solve


def test_solve_from_scenario_file(tmp_path, capsys):
    scn = tmp_path / "myscenario.json"
    main(["generate", "--config", cfg_file(tmp_path), "--seed", "5",
          "--out", str(scn)])
    out = tmp_path / "row.csv"
    code = main(["solve", "--scenario", str(scn), "--algo", "ldg",
                 "--out", str(out)])
    assert code == 0
    (row,) = read_csv(out)
    assert row.algorithm == "ldg"
    assert row.scenario_id == "myscenario"
    assert row.seed == -1 and row.feasible
    s = load_scenario(scn)
    lt = latency_table(s)
    from edgeplace.baselines import ldg
    assert row.global_latency_s == pytest.approx(
        evaluate_objective(s, lt, ldg(s, lt)))
    assert "ldg: latency=" in capsys.readouterr().out


def test_solve_generates_when_no_scenario_given(tmp_path):
    out = tmp_path / "row.csv"
    assert main(["solve", "--config", cfg_file(tmp_path), "--seed", "9",
                 "--algo", "mdg", "--out", str(out)]) == 0
    (row,) = read_csv(out)
    assert row.scenario_id == "generated-seed9"
    assert row.seed == 9


def test_solve_admm_artifacts(tmp_path):
    trace = tmp_path / "trace.csv"
    sol_json = tmp_path / "solution.json"
    lp = tmp_path / "instance.lp"
    out = tmp_path / "row.csv"
    code = main(["solve", "--config", cfg_file(tmp_path), "--seed", "3",
                 "--algo", "admm", "--admm-max-iters", "40",
                 "--trace-out", str(trace), "--dump-solution", str(sol_json),
                 "--dump-lp", str(lp), "--out", str(out)])
    assert code == 0
    (row,) = read_csv(out)
    assert row.admm_iterations == 40

    lines = trace.read_text().splitlines()
    assert lines[0] == ("iteration,box_gap,sphere_gap,eq_residual,"
                        "ineq_violation,objective,pcg_iterations")
    assert len(lines) == 1 + 40
    assert lines[1].startswith("1,")

    doc = json.loads(sol_json.read_text())
    assert set(doc) >= {"x", "y", "z", "w", "objective", "meta"}
    assert len(doc["w"]) == 4  # one assignment row per user
    assert lp.read_text().startswith("Minimize")


def test_solve_admm_flag_changes_params(tmp_path):
    rows = []
    for iters in ("30", "60"):
        out = tmp_path / f"row{iters}.csv"
        assert main(["solve", "--config", cfg_file(tmp_path), "--seed", "3",
                     "--algo", "admm", "--admm-max-iters", iters,
                     "--out", str(out)]) == 0
        rows.append(read_csv(out)[0])
    assert rows[0].admm_iterations == 30
    assert rows[1].admm_iterations == 60


# --------------------------------------------------------------------------
# sweep + aggregate round trip


def sweep_args(tmp_path, out):
    return ["sweep", "--config", cfg_file(tmp_path), "--sweep", "workload",
            "--values", "3,5", "--reps", "2", "--algos", "ldg,mdg",
            "--seed", "99", "--no-timing", "--out", str(out)]


def equivalent_plan():
    return ExperimentPlan(sweep="workload", values=(3, 5), reps=2,
                          base=FAST_CFG, algorithms=("ldg", "mdg"),
                          base_seed=99, timing=False)


def test_sweep_matches_library_run(tmp_path, capsys):
    out = tmp_path / "results.csv"
    assert main(sweep_args(tmp_path, out)) == 0
    assert read_csv(out) == run_experiment(equivalent_plan())
    assert "wrote 8 result rows" in capsys.readouterr().out


def test_sweep_plan_file_gives_identical_bytes(tmp_path):
    flag_out = tmp_path / "flags.csv"
    assert main(sweep_args(tmp_path, flag_out)) == 0

    plan_doc = {"sweep": "workload", "values": [3, 5], "reps": 2,
                "base": dataclasses.asdict(FAST_CFG),
                "algorithms": ["ldg", "mdg"], "base_seed": 99,
                "timing": False}
    plan_path = tmp_path / "plan.json"
    plan_path.write_text(json.dumps(plan_doc))
    plan_out = tmp_path / "plan.csv"
    assert main(["sweep", "--plan", str(plan_path), "--out", str(plan_out)]) == 0
    assert plan_out.read_bytes() == flag_out.read_bytes()


def test_aggregate_round_trip(tmp_path, capsys):
    results = tmp_path / "results.csv"
    main(sweep_args(tmp_path, results))
    agg = tmp_path / "agg.csv"
    assert main(["aggregate", "--in", str(results), "--out", str(agg)]) == 0
    assert "aggregate rows" in capsys.readouterr().out

    expected = tmp_path / "expected.csv"
    write_aggregate_csv(emit_plot_data(read_csv(results)), expected)
    assert agg.read_bytes() == expected.read_bytes()


def test_sweep_seed_column_uses_derived_seeds(tmp_path):
    out = tmp_path / "results.csv"
    main(sweep_args(tmp_path, out))
    seeds = {r.seed for r in read_csv(out)}
    assert seeds == {derive_seed(99, 0), derive_seed(99, 1)}


# --------------------------------------------------------------------------
# exit codes


def test_exit_1_on_infeasible_solver_output(tmp_path, monkeypatch, capsys):
    def broken(s, lt, algorithm, admm_params=None):
        sol = all_cloud_solution(s, lt)
        sol.w[0] = 0
        return sol, 0

    monkeypatch.setattr(harness, "solve_one", broken)
    code = main(["solve", "--config", cfg_file(tmp_path), "--seed", "3",
                 "--algo", "ldg"])
    assert code == 1
    err = capsys.readouterr().err
    assert err.startswith("error:") and "infeasible" in err


@pytest.mark.parametrize("argv_builder", [
    lambda tmp: ["solve", "--scenario", str(tmp / "missing.json"),
                 "--algo", "ldg"],                      # unreadable input
    lambda tmp: ["sweep", "--out", str(tmp / "o.csv")],  # neither plan nor axis
    lambda tmp: ["sweep", "--sweep", "workload", "--values", "5,3",
                 "--out", str(tmp / "o.csv")],          # non-increasing values
    lambda tmp: ["aggregate", "--in", str(tmp / "bad.csv"),
                 "--out", str(tmp / "o.csv")],          # foreign CSV header
    lambda tmp: ["generate", "--config", str(tmp / "broken.json"),
                 "--out", str(tmp / "o.json")],         # malformed JSON
])
def test_exit_2_on_invalid_input(tmp_path, capsys, argv_builder):
    (tmp_path / "bad.csv").write_text("a,b\n1,2\n")
    (tmp_path / "broken.json").write_text("{not json")
    assert main(argv_builder(tmp_path)) == 2
    assert capsys.readouterr().err.startswith("error:")


def test_argparse_rejects_unknown_algorithm(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["solve", "--algo", "simplex"])
    assert exc.value.code == 2


# --------------------------------------------------------------------------
# installed entry points


def test_module_invocation_smoke(tmp_path):
    out = tmp_path / "scn.json"
    proc = subprocess.run(
        [sys.executable, "-m", "edgeplace.cli", "generate",
         "--config", cfg_file(tmp_path), "--seed", "1", "--out", str(out)],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert out.exists()


def test_console_script_reports_usage_on_no_args():
    proc = subprocess.run(["edgeplace"], capture_output=True, text=True)
    assert proc.returncode == 2
    assert "usage:" in proc.stderr
