import json

import pytest

from harness.cli import main


def _write_config(tmp_path, **overrides):
    data = {
        "name": "cli",
        "mdp": {"num_states": 3, "num_actions": 2, "horizon": 2},
        "delays": {"kind": "fixed", "params": {"d": 1}},
        "num_episodes": 8,
        "seeds": [0, 1],
    }
    data.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


def _status(capsys):
    return json.loads(capsys.readouterr().out.strip().splitlines()[-1])


class TestRunCommand:
    def test_writes_records(self, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["run", "--config", str(_write_config(tmp_path)), "--out", str(out)]) == 0
        status = _status(capsys)
        assert status["status"] == "ok"
        assert [run["seed"] for run in status["runs"]] == [0, 1]
        assert len(list(out.glob("*.json"))) == 2
        assert len(list(out.glob("*.csv"))) == 2
        assert (out / "regret.svg").exists()

    def test_single_seed(self, tmp_path, capsys):
        assert main(["run", "--config", str(_write_config(tmp_path)), "--seed", "5", "--out", str(tmp_path)]) == 0
        assert [run["seed"] for run in _status(capsys)["runs"]] == [5]

    def test_invalid_config_exits_2(self, tmp_path, capsys):
        path = _write_config(tmp_path, learner={"kind": "oreps", "feedback_mode": "bandit"})
        assert main(["run", "--config", str(path), "--out", str(tmp_path)]) == 2
        status = _status(capsys)
        assert status["status"] == "error"
        assert status["error"] == "ConfigError"

    def test_missing_config_exits_2(self, tmp_path, capsys):
        assert main(["run", "--config", str(tmp_path / "absent.json")]) == 2
        assert _status(capsys)["error"] == "ConfigError"


class TestSweepCommand:
    def test_writes_aggregate(self, tmp_path, capsys):
        path = tmp_path / "sweep.json"
        path.write_text(
            json.dumps(
                {
                    "base": json.loads(_write_config(tmp_path).read_text(encoding="utf-8")),
                    "learners": [{"kind": "oppo"}, {"kind": "hindsight"}],
                }
            ),
            encoding="utf-8",
        )
        assert main(["sweep", "--config", str(path), "--out", str(tmp_path / "sweep"), "--workers", "1"]) == 0
        status = _status(capsys)
        assert status["cells"] == 4 and status["errors"] == 0
        assert (tmp_path / "sweep" / "sweep.csv").exists()


class TestReportCommand:
    def test_renders_html(self, tmp_path, capsys):
        out = tmp_path / "runs"
        main(["run", "--config", str(_write_config(tmp_path)), "--out", str(out)])
        capsys.readouterr()
        assert main(["report", "--in", str(out), "--format", "html", "--out", str(tmp_path / "html")]) == 0
        assert (tmp_path / "html" / "report.html").exists()

    def test_empty_directory(self, tmp_path, capsys):
        assert main(["report", "--in", str(tmp_path)]) == 2
        assert _status(capsys)["status"] == "error"

    def test_unknown_format_rejected_by_parser(self, tmp_path):
        with pytest.raises(SystemExit):
            main(["report", "--in", str(tmp_path), "--format", "pdf"])
