import json

import pytest

from rmode_sim.cli import EXIT_IO, EXIT_OK, EXIT_TOLERANCE, EXIT_VALIDATION, build_parser, main
from rmode_sim.utils import io


@pytest.fixture
def scenario_file(small_scenario_data, write_scenario):
    return write_scenario(small_scenario_data())


@pytest.fixture
def finished_run(scenario_file, tmp_path):
    out = tmp_path / "out"
    assert main(["run", str(scenario_file), "--out-dir", str(out)]) == EXIT_OK
    return out / "small_data"


class TestValidate:
    def test_valid(self, scenario_file, capsys):
        assert main(["validate", str(scenario_file)]) == EXIT_OK
        assert "valid" in capsys.readouterr().out

    def test_shipped_default(self, default_scenario_path):
        assert main(["validate", str(default_scenario_path)]) == EXIT_OK

    def test_invalid(self, small_scenario_data, write_scenario):
        path = write_scenario(small_scenario_data(transmitter={"carrier_freq_hz": 400_000.0}))
        assert main(["validate", str(path)]) == EXIT_VALIDATION

    def test_missing_file(self, tmp_path):
        assert main(["validate", str(tmp_path / "nope.json")]) == EXIT_IO

    def test_validation_outranks_io(self, small_scenario_data, write_scenario, tmp_path):
        bad = write_scenario(small_scenario_data(duration_s=0.0))
        assert main(["validate", str(tmp_path / "nope.json"), str(bad)]) == EXIT_VALIDATION


class TestRun:
    def test_run_writes_run_directory(self, finished_run):
        assert (finished_run / "received.f32").is_file()
        assert io.read_json(finished_run / "report.json")["passed"] is True

    def test_seed_override(self, scenario_file, tmp_path):
        out = tmp_path / "out"
        assert main(["run", str(scenario_file), "--out-dir", str(out), "--seed-override", "5"]) == EXIT_OK
        meta = io.read_json(out / "small_data" / "metadata.json")
        assert meta["seeds"] == {"bits": 5, "noise": 6}

    def test_duplicate_run_directories(self, small_scenario_data, write_scenario, tmp_path):
        a = write_scenario(small_scenario_data(), "a.json")
        b = write_scenario(small_scenario_data(), "b.json")
        assert main(["run", str(a), str(b), "--out-dir", str(tmp_path / "out")]) == EXIT_VALIDATION

    def test_outputs_directory_is_relative_to_scenario(self, small_scenario_data, write_scenario, tmp_path):
        path = write_scenario(small_scenario_data(outputs={"directory": "results", "format": "wav"}))
        assert main(["run", str(path)]) == EXIT_OK
        assert (tmp_path / "results" / "small_data" / "received.wav").is_file()

    def test_invalid_scenario_is_not_run(self, small_scenario_data, write_scenario, tmp_path):
        path = write_scenario(small_scenario_data(bits_seed=-1))
        assert main(["run", str(path), "--out-dir", str(tmp_path / "out")]) == EXIT_VALIDATION
        assert not (tmp_path / "out").exists()


class TestReport:
    def test_report(self, finished_run, capsys):
        assert main(["report", str(finished_run)]) == EXIT_OK
        assert "cw1" in capsys.readouterr().out

    def test_markdown(self, finished_run):
        assert main(["report", str(finished_run), "--markdown"]) == EXIT_OK
        assert (finished_run / "report.md").read_text(encoding="utf-8").startswith("# R-Mode run")

    def test_missing(self, tmp_path):
        assert main(["report", str(tmp_path)]) == EXIT_IO

    def test_failed_report(self, finished_run):
        path = finished_run / "report.json"
        data = json.loads(path.read_text(encoding="utf-8"))
        data["passed"] = False
        data["failures"] = ["cw1: eta/beta outside tolerance"]
        path.write_text(json.dumps(data), encoding="utf-8")
        assert main(["report", str(finished_run)]) == EXIT_TOLERANCE


def test_parser_requires_a_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])
