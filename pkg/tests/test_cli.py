"""Command-line interface: configs, subcommands, output files."""

import csv
import json
from pathlib import Path

import pytest

from drivesim.cli import (ConfigError, build_run, config_digest,
                          load_run_config, main, resolve_scenario_path)


@pytest.fixture()
def quick_config(tmp_path):
    """A fast all-replay run on the bundled merge map."""
    path = tmp_path / "quick.json"
    path.write_text(json.dumps({
        "scenario": "merge",
        "simulation": {"max_steps": 40},
        "substitute": ["green", "orange"],
        "agents": {"green": {"planner": "replay"}, "orange": {"planner": "replay"}},
    }))
    return path


class TestConfig:
    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_run_config(tmp_path / "nope.json")

    def test_bundled_name_resolves(self):
        doc = load_run_config("merge_replay")
        assert doc["scenario"] == "merge"

    def test_invalid_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{nope")
        with pytest.raises(ConfigError, match="invalid JSON"):
            load_run_config(p)

    def test_missing_scenario_key(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("{}")
        with pytest.raises(ConfigError, match="scenario"):
            load_run_config(p)

    def test_unknown_agent_key_rejected(self, quick_config):
        doc = load_run_config(quick_config)
        doc["agents"]["green"]["typo"] = 1
        with pytest.raises(ConfigError, match="typo"):
            build_run(doc)

    def test_unknown_scenario(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"scenario": "atlantis", "substitute": []}))
        with pytest.raises(ConfigError, match="atlantis"):
            build_run(load_run_config(p))

    def test_digest_ignores_private_keys_and_order(self):
        a = {"scenario": "merge", "substitute": ["x"], "_base_dir": "/tmp/a"}
        b = {"substitute": ["x"], "scenario": "merge", "_base_dir": "/tmp/b"}
        assert config_digest(a) == config_digest(b)

    def test_resolve_scenario_path_prefers_files(self, tmp_path):
        (tmp_path / "merge").write_text("{}")
        assert resolve_scenario_path("merge", tmp_path) == tmp_path / "merge"


class TestSubcommands:
    def test_run_outputs(self, quick_config, tmp_path, capsys):
        out = tmp_path / "run"
        assert main(["run", str(quick_config), "--out", str(out)]) == 0
        for name in ("steps.jsonl", "timings.jsonl", "summary.json", "manifest.json"):
            assert (out / name).exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config_digest"]
        summary = json.loads((out / "summary.json").read_text())
        assert set(summary["statuses"]) == {"green", "orange"}
        first = json.loads((out / "steps.jsonl").read_text().splitlines()[0])
        assert first["step"] == 0
        assert "timings" not in first  # determinism-comparable by construction

    def test_run_twice_byte_identical(self, quick_config, tmp_path):
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        main(["run", str(quick_config), "--out", str(out1)])
        main(["run", str(quick_config), "--out", str(out2)])
        assert (out1 / "steps.jsonl").read_bytes() == (out2 / "steps.jsonl").read_bytes()
        assert (out1 / "summary.json").read_bytes() == (out2 / "summary.json").read_bytes()

    def test_evaluate(self, quick_config, tmp_path):
        out = tmp_path / "run"
        main(["run", str(quick_config), "--out", str(out)])
        assert main(["evaluate", str(out)]) == 0
        assert (out / "metrics.json").exists()
        with open(out / "metrics_summary.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert {r["agent"] for r in rows} == {"green", "orange"}
        assert {"min_dce", "min_ttc", "et", "pet", "collided", "status"} <= set(rows[0])

    def test_plotdata(self, quick_config, tmp_path):
        out = tmp_path / "run"
        main(["run", str(quick_config), "--out", str(out)])
        assert main(["plotdata", str(out)]) == 0
        with open(out / "plot" / "green.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert list(rows[0]) == ["t", "x", "y", "v", "theta"]
        assert float(rows[1]["t"]) == pytest.approx(0.1)

    def test_benchmark_csv(self, tmp_path, capsys):
        code = main(["benchmark", "highway_benchmark", "--agents", "2",
                     "--workers", "1", "--reps", "1", "--steps", "3"])
        assert code == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0].startswith("n_agents,workers,mean_step_time")
        assert len(lines) == 2

    def test_error_exit_code(self, tmp_path):
        assert main(["run", str(tmp_path / "missing.json"), "--out",
                     str(tmp_path / "o")]) == 1
