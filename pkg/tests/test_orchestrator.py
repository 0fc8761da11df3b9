import io
import json
import math
import os
import statistics

import pytest

import app
from experiments.orchestrator import EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION, ExperimentOrchestrator
from experiments.outputs import canonical_json, write_csv
from tests.conftest import SCENARIO_DIR, scenario_path


@pytest.fixture
def orchestrator(tmp_path):
    return ExperimentOrchestrator(out_dir=str(tmp_path / "out"), workers=1, stderr=io.StringIO())


@pytest.fixture(autouse=True)
def quiet_logging(monkeypatch):
    monkeypatch.setattr(app, "configure_logging", lambda level=None: None)


def scenario_file(tmp_path, name, **changes):
    with open(scenario_path(name), encoding="utf-8") as f:
        payload = json.load(f)
    payload.update(changes)
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


def test_tm_on_ghz2(orchestrator):
    outcome = orchestrator.run("tm", scenario_path("ghz_2"))
    assert outcome.exit_code == EXIT_OK
    result = outcome.report["result"]
    assert result["branchiness"] == 1
    assert result["verdict"] == "good split"
    assert [row["branchiness"] for row in result["epsilon_sweep"]] == [1, 1, 1, 1, 1]
    names = sorted(os.path.basename(p) for p in outcome.artifacts)
    assert names == ["ghz_2.tm.candidates.csv", "ghz_2.tm.epsilon_sweep.csv", "ghz_2.tm.json",
                     "ghz_2.tm.metadata.json"]
    with open(outcome.artifacts[0], encoding="utf-8") as f:
        assert json.load(f) == json.loads(canonical_json(outcome.report))


def test_report_states_pauli_window_coverage(tmp_path, orchestrator):
    path = scenario_file(tmp_path, "ghz_2", splitter={"family": {"kind": "pauli", "max_weight": 1},
                                                      "tm": {"epsilon": 0.1}})
    outcome = orchestrator.run("tm", path)
    assert outcome.success
    family = outcome.report["candidate_family"]
    assert family["coverage"] == "Pauli strings on contiguous windows of 1..1 sites"
    assert family["candidates"] == ["X0", "Y0", "Z0", "X1", "Y1", "Z1"]


def test_weingarten_crossover(orchestrator):
    outcome = orchestrator.run("weingarten", scenario_path("ghz_2"))
    assert outcome.success
    result = outcome.report["result"]
    assert result["minimization"]["best"]["branch_count"] == 2
    crossovers = result["b_sweep"]["crossovers"]
    assert len(crossovers) == 1
    assert crossovers[0]["b_star"] == pytest.approx(2 / math.log(2), abs=1e-10)
    assert result["b_sweep"]["nested"]


def test_compare_on_product_state(orchestrator):
    outcome = orchestrator.run("compare", scenario_path("product"))
    assert outcome.success
    result = outcome.report["result"]
    assert result["tm"]["verdict"] == "no good split"
    assert (result["tm_branch_count"], result["weingarten_branch_count"]) == (1, 1)
    assert result["relation"] == "identical"
    assert result["agreement"]


def test_complexity_of_ghz(orchestrator):
    outcome = orchestrator.run("complexity", scenario_path("ghz_3"))
    vacuum = outcome.report["result"]["vacuum_complexity"]
    assert (vacuum["value"], vacuum["status"], vacuum["certified"]) == (3, "exact", True)


def test_growth_runs(tmp_path, orchestrator):
    path = scenario_file(tmp_path, "growth", growth={"evolution": "random_circuit", "horizon": 3,
                                                     "seeds": [0, 1, 2]})
    outcome = orchestrator.run("complexity", path)
    growth = outcome.report["result"]["growth"]
    assert len(growth["runs"]) == 3
    assert 0 <= growth["monotone_runs"] <= 3
    assert growth["median_final_lower_bound"] <= 3


@pytest.mark.slow
def test_growth_scenario_complexity_keeps_rising(orchestrator):
    outcome = orchestrator.run("complexity", scenario_path("growth"))
    assert outcome.success
    growth = outcome.report["result"]["growth"]
    runs = growth["runs"]
    assert len(runs) == 20
    assert growth["monotone_runs"] == len(runs)
    for run in runs:
        bounds = [point["lower_bound"] for point in run["points"]]
        assert bounds == sorted(bounds)
        assert run["points"][6]["exact"]["status"] == "exact"
    after_six = [run["points"][6]["lower_bound"] for run in runs]
    assert statistics.median(after_six) >= 3
    assert sum(1 for value in after_six if value >= 4) > len(runs) / 2


SCENARIO_SUBCOMMANDS = {
    "apparatus": pytest.param("apparatus", "evolve", marks=pytest.mark.slow),
    "ghz_2": pytest.param("ghz_2", "tm"),
    "ghz_3": pytest.param("ghz_3", "tm"),
    "ghz_4": pytest.param("ghz_4", "sample"),
    "ghz_5": pytest.param("ghz_5", "tm", marks=pytest.mark.slow),
    "ghz_6": pytest.param("ghz_6", "tm", marks=pytest.mark.slow),
    "growth": pytest.param("growth", "complexity", marks=pytest.mark.slow),
    "product": pytest.param("product", "compare"),
    "random_circuit": pytest.param("random_circuit", "weingarten", marks=pytest.mark.slow),
    "recoherence": pytest.param("recoherence", "evolve"),
}


def test_every_bundled_scenario_is_checked_for_determinism():
    bundled = sorted(name[:-len(".json")] for name in os.listdir(SCENARIO_DIR) if name.endswith(".json"))
    assert bundled == sorted(SCENARIO_SUBCOMMANDS)


@pytest.mark.parametrize("name, subcommand", list(SCENARIO_SUBCOMMANDS.values()))
def test_reports_do_not_depend_on_workers(tmp_path, name, subcommand):
    texts = []
    for run, workers in enumerate((1, 3, 3)):
        out = tmp_path / f"run{run}"
        runner = ExperimentOrchestrator(out_dir=str(out), workers=workers, stderr=io.StringIO())
        outcome = runner.run(subcommand, scenario_path(name))
        assert outcome.success
        texts.append((out / f"{name}.{subcommand}.json").read_bytes())
    assert texts[0] == texts[1] == texts[2]


def test_sample_on_ghz4(orchestrator):
    outcome = orchestrator.run("sample", scenario_path("ghz_4"), {"seed": 5})
    assert outcome.success
    result = outcome.report["result"]
    assert result["interference_cost"] is None
    rows = {row["observable"]: row for row in result["collapse"]["observables"]}
    assert len(rows) == 13
    string = result["collapse"]["observables"][-1]
    assert string["pauli_weight"] == 4
    assert string["off_diagonal_residual"] == pytest.approx(1.0, abs=1e-12)
    assert all(abs(o["off_diagonal_residual"]) < 1e-12 for o in result["collapse"]["observables"][:-1])


def test_bad_epsilon_exits_with_validation_error(tmp_path, orchestrator):
    path = scenario_file(tmp_path, "ghz_2", splitter={"tm": {"epsilon": 1.5}})
    outcome = orchestrator.run("tm", path)
    assert outcome.exit_code == EXIT_VALIDATION
    assert outcome.diagnostics[0]["field"] == "splitter.tm.epsilon"
    assert "splitter.tm.epsilon" in orchestrator.stderr.getvalue()
    assert not os.path.exists(orchestrator.out_dir)


def test_evolve_needs_dynamics(orchestrator):
    outcome = orchestrator.run("evolve", scenario_path("ghz_2"))
    assert outcome.exit_code == EXIT_VALIDATION
    assert outcome.diagnostics[0]["field"] == "dynamics"


def test_unknown_subcommand(orchestrator):
    assert orchestrator.run("plot", scenario_path("ghz_2")).exit_code == EXIT_VALIDATION


def test_runtime_failure_exits_with_two(tmp_path, orchestrator):
    path = scenario_file(tmp_path, "ghz_2", state={"corpus": "nonesuch"})
    outcome = orchestrator.run("tm", path)
    assert outcome.exit_code == EXIT_RUNTIME
    assert "LatticeError" in orchestrator.stderr.getvalue()


def test_recoherence_scenario(orchestrator):
    outcome = orchestrator.run("evolve", scenario_path("recoherence"))
    assert outcome.success
    recoherence = outcome.report["result"]["recoherence"]
    assert recoherence["branch_counts"] == [1, 2, 1]
    assert not recoherence["verification"]["is_tree"]


@pytest.mark.slow
def test_apparatus_scenario(orchestrator):
    outcome = orchestrator.run("evolve", scenario_path("apparatus"))
    assert outcome.success
    result = outcome.report["result"]
    assert result["branch_counts"][:5] == [1, 1, 2, 2, 1]
    assert result["stable_window"] == [0.0, 0.4, 1.1, 1.4]
    assert result["verification"]["is_tree"]


def test_csv_cells(tmp_path):
    path = write_csv(str(tmp_path / "rows.csv"), [{"b": 0.1, "labels": ["a", "b"]}, {"b": 2.0, "extra": None}])
    lines = (tmp_path / "rows.csv").read_text(encoding="utf-8").splitlines()
    assert path.endswith("rows.csv")
    assert lines == ["b,extra,labels", "0.1,,a b", "2.0,,"]


def test_cli_validate(capsys):
    path = scenario_path("ghz_2")
    assert app.main(["validate", "--scenario", path]) == EXIT_OK
    assert capsys.readouterr().out.strip() == f"{path}: ok"


def test_cli_validate_reports_errors(tmp_path, capsys):
    path = scenario_file(tmp_path, "ghz_2", splitter={"tm": {"epsilon": 1.5}})
    assert app.main(["validate", "--scenario", path]) == EXIT_VALIDATION
    assert "error: splitter.tm.epsilon" in capsys.readouterr().out


def test_cli_run(tmp_path, capsys):
    out = tmp_path / "cli"
    code = app.main(["tm", "--scenario", scenario_path("ghz_2"), "--seed", "3", "--budget", "4",
                     "--out", str(out)])
    assert code == EXIT_OK
    printed = capsys.readouterr().out.split()
    assert str(out / "ghz_2.tm.json") in printed
    report = json.loads((out / "ghz_2.tm.json").read_text(encoding="utf-8"))
    assert report["config"]["seed"] == 3
    assert report["config"]["oracle"]["budget"] == 4


def test_cli_rejects_bad_seed():
    with pytest.raises(SystemExit):
        app.main(["tm", "--scenario", scenario_path("ghz_2"), "--seed", "-1"])
