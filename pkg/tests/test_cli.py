import json
import pathlib
import subprocess
import sys

import pytest

from panelfactors.cli import main

DATA = pathlib.Path(__file__).parent / "data"
FIXTURE_CONFIG = str(DATA / "fixture_config.json")


def run_cli(args, capsys=None):
    code = main(args)
    if capsys is not None:
        return code, capsys.readouterr()
    return code


def strip_timing(document: dict) -> dict:
    document = dict(document)
    document.pop("timing", None)
    return document


def write_minimal_csv(tmp_path):
    path = tmp_path / "mini.csv"
    lines = ["country,period,y,x"]
    values = {
        "AA": [(1.0, 0.5), (1.4, 0.8), (0.9, 0.2), (1.8, 1.1), (1.2, 0.4),
               (0.7, -0.3), (1.5, 0.9), (1.1, 0.3), (0.8, -0.1), (1.6, 1.0)],
        "BB": [(2.0, 1.0), (1.1, 0.1), (1.9, 0.9), (1.3, 0.5), (0.6, -0.6),
               (1.7, 1.2), (1.0, 0.2), (1.4, 0.6), (2.1, 1.3), (0.9, -0.2)],
    }
    for country, pairs in values.items():
        for t, (y, x) in enumerate(pairs):
            lines.append(f"{country},{2004 * 1 // 1 + 2004}q{t % 4 + 1},,")
    # build proper consecutive quarters instead
    lines = ["country,period,y,x"]
    for country, pairs in values.items():
        for t, (y, x) in enumerate(pairs):
            year, quarter = 2004 + t // 4, t % 4 + 1
            lines.append(f"{country},{year}q{quarter},{y},{x}")
    path.write_text("\n".join(lines) + "\n")
    return path


def minimal_config(tmp_path, **model_overrides):
    csv_path = write_minimal_csv(tmp_path)
    model = {"dependent": "y", "lag_dep": 0, "regressors": ["x"],
             "estimator": "MG"}
    model.update(model_overrides)
    config = {
        "input": {"path": csv_path.name,
                  "schema": {"variables": ["y", "x"]}},
        "model": model,
        "output": {"dir": str(tmp_path / "out")},
    }
    config_path = tmp_path / "run.json"
    config_path.write_text(json.dumps(config))
    return config_path


class TestEstimate:
    def test_smoke_run_writes_artifacts(self, tmp_path, capsys):
        config = minimal_config(tmp_path)
        code, captured = run_cli(["estimate", "--config", str(config)], capsys)
        assert code == 0
        out = tmp_path / "out"
        for name in ("table.txt", "fit.json", "residuals.csv", "resolved_config.json"):
            assert (out / name).exists()
        document = json.loads((out / "fit.json").read_text())
        assert document["fit"]["estimator"] == "MG"
        assert "resolved_config" in document
        assert "x" in captured.out  # human table on stdout

    def test_missing_variable_exits_2_and_names_it(self, tmp_path, capsys):
        config = minimal_config(tmp_path, regressors=["nope"])
        code, captured = run_cli(["estimate", "--config", str(config)], capsys)
        assert code == 2
        assert "nope" in captured.err

    def test_unknown_config_key_rejected(self, tmp_path, capsys):
        config_path = tmp_path / "bad.json"
        config_path.write_text(json.dumps({"modle": {}}))
        code, captured = run_cli(["estimate", "--config", str(config_path)], capsys)
        assert code == 2
        assert "modle" in captured.err

    def test_missing_config_file_exits_4(self, tmp_path, capsys):
        code, _ = run_cli(["estimate", "--config", str(tmp_path / "none.json")],
                          capsys)
        assert code == 4

    def test_byte_identical_reruns(self, tmp_path, capsys):
        config = minimal_config(tmp_path)
        tables = []
        for _ in range(2):
            assert run_cli(["estimate", "--config", str(config)], capsys)[0] == 0
            tables.append((tmp_path / "out" / "table.txt").read_bytes())
        assert tables[0] == tables[1]

    def test_json_stdout_is_parseable(self, tmp_path, capsys):
        config = minimal_config(tmp_path)
        code, captured = run_cli(
            ["estimate", "--config", str(config), "--json"], capsys)
        assert code == 0
        json.loads(captured.out)


class TestPipeline:
    def test_fixture_run_and_pcs_override(self, tmp_path, capsys):
        code, _ = run_cli(
            ["pipeline", "--config", FIXTURE_CONFIG, "--pcs", "3",
             "--output", str(tmp_path / "out")], capsys)
        assert code == 0
        document = json.loads((tmp_path / "out" / "pipeline.json").read_text())
        assert document["n_components"] == 3
        assert document["resolved_config"]["pipeline"]["pcs"] == 3
        assert document["provenance"]["options"]["pcs"] == 3
        pcs = (tmp_path / "out" / "pcs.csv").read_text().splitlines()
        assert pcs[0] == "period,pc1,pc2,pc3"
        assert len(pcs) == 1 + document["step3"]["sample"]["periods"]

    def test_strict_cd_halts_with_exit_3(self, tmp_path, capsys):
        code, captured = run_cli(
            ["pipeline", "--config", FIXTURE_CONFIG, "--strict-cd",
             "--output", str(tmp_path / "out")], capsys)
        assert code == 3
        assert "dependence" in captured.err

    def test_golden_benchmark_table(self, tmp_path, capsys):
        code, _ = run_cli(
            ["pipeline", "--config", FIXTURE_CONFIG, "--benchmarks",
             "--output", str(tmp_path / "out")], capsys)
        assert code == 0
        regenerated = (tmp_path / "out" / "table.txt").read_bytes()
        golden = (DATA / "golden_table.txt").read_bytes()
        assert regenerated == golden


class TestSimulate:
    def simulate_config(self, tmp_path):
        config = {
            "simulation": {"n_units": 10, "n_periods": 40, "m_ucf": 1,
                           "seed": 7, "gamma": {"mean": 0.0, "sd": 1.0}},
            "suite": {"estimators": ["CCE-MG", "TWFE"], "record_cd": ["TWFE"]},
            "reps": 5,
            "output": {"dir": str(tmp_path / "out")},
        }
        path = tmp_path / "sim.json"
        path.write_text(json.dumps(config))
        return path

    def test_determinism_across_runs(self, tmp_path, capsys):
        config = self.simulate_config(tmp_path)
        documents = []
        for _ in range(2):
            code, _ = run_cli(["simulate", "--config", str(config),
                               "--reps", "10", "--seed", "7"], capsys)
            assert code == 0
            raw = json.loads((tmp_path / "out" / "mc.json").read_text())
            documents.append(strip_timing(raw))
        assert documents[0] == documents[1]

    def test_threads_do_not_change_output(self, tmp_path, capsys):
        config = self.simulate_config(tmp_path)
        documents = []
        for threads in ("1", "8"):
            code, _ = run_cli(["simulate", "--config", str(config),
                               "--threads", threads], capsys)
            assert code == 0
            raw = json.loads((tmp_path / "out" / "mc.json").read_text())
            document = strip_timing(raw)
            document["resolved_config"].pop("threads", None)
            documents.append(document)
        assert documents[0] == documents[1]

    def test_invalid_rho_exits_2(self, tmp_path, capsys):
        config = {"simulation": {"rho_mean": 1.7, "n_units": 5,
                                 "n_periods": 30},
                  "reps": 2, "output": {"dir": str(tmp_path / "out")}}
        path = tmp_path / "sim.json"
        path.write_text(json.dumps(config))
        code, captured = run_cli(["simulate", "--config", str(path)], capsys)
        assert code == 2
        assert "stationary" in captured.err

    def test_preset_matches_handwritten_config(self, tmp_path, capsys):
        from dataclasses import asdict

        from panelfactors.simulate import paper_contrast

        dgp, suite = paper_contrast()
        handwritten = {
            "simulation": asdict(dgp),
            "suite": asdict(suite),
            "reps": 3,
            "output": {"dir": str(tmp_path / "hand")},
        }
        path = tmp_path / "hand.json"
        path.write_text(json.dumps(handwritten))
        assert run_cli(["simulate", "--config", str(path)], capsys)[0] == 0
        by_hand = strip_timing(json.loads(
            (tmp_path / "hand" / "mc.json").read_text()))["report"]

        assert run_cli(["simulate", "--preset", "paper-contrast", "--reps", "3",
                        "--output", str(tmp_path / "preset")], capsys)[0] == 0
        by_preset = strip_timing(json.loads(
            (tmp_path / "preset" / "mc.json").read_text()))["report"]
        assert by_hand == by_preset


class TestSingleTests:
    def test_numfac_json_report(self, capsys):
        code, captured = run_cli(
            ["numfac", "--config", FIXTURE_CONFIG, "--variable", "y", "--json"],
            capsys)
        assert code == 0
        document = json.loads(captured.out)
        assert {"k_er", "k_gr", "er", "gr"} <= set(document)

    def test_cd_human_report(self, capsys):
        code, captured = run_cli(
            ["cd", "--config", FIXTURE_CONFIG, "--variable", "y"], capsys)
        assert code == 0
        assert "CD test" in captured.out and "p =" in captured.out

    def test_variable_required(self, tmp_path, capsys):
        config = minimal_config(tmp_path)
        code, captured = run_cli(["numfac", "--config", str(config)], capsys)
        assert code == 2
        assert "variable" in captured.err


def test_console_entry_point():
    result = subprocess.run(
        [sys.executable, "-m", "panelfactors.cli", "estimate", "--config",
         FIXTURE_CONFIG, "--output", "/tmp/pf_entry_test"],
        capture_output=True, text=True)
    assert result.returncode == 0
