from pathlib import Path

from rmode_sim.config.settings import settings
from rmode_sim.utils.paths import data_dir, get_received_file, run_id_for


def test_run_id_is_file_system_safe():
    assert run_id_for("geomundo") == "geomundo"
    assert run_id_for(" Geomundo night/day ") == "Geomundo_night_day"
    assert run_id_for("../..") == "scenario"


def test_data_dir(tmp_path, monkeypatch):
    assert data_dir("small", tmp_path) == tmp_path / "small_data"
    monkeypatch.setattr(settings, "output_root", tmp_path / "root")
    assert data_dir("a b") == tmp_path / "root" / "a_b_data"
    assert get_received_file(Path("run"), ".wav") == Path("run") / "received.wav"
