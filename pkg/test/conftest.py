import json
import sys
from pathlib import Path

import pytest
from hypothesis import settings as hyp_settings

# Add parent directory to path so we can import the package
sys.path.insert(0, str(Path(__file__).parent.parent))

from rmode_sim.config.settings import settings  # noqa: E402

hyp_settings.register_profile("rmode", deadline=None, derandomize=True, max_examples=60)
hyp_settings.load_profile("rmode")

FS = 2_048_000.0
F_C = 287_000.0


@pytest.fixture
def default_scenario_path() -> Path:
    return settings.default_scenario


def _small_scenario(**overrides) -> dict:
    data = {
        "name": "small",
        "transmitter": {"carrier_freq_hz": F_C, "data_rate_bps": 100.0},
        "skywave": {"ionosphere_height_m": 90_000.0, "ground_distance_m": 210_000.0, "attenuation_alpha": 0.3},
        "noise": {"snr_db": None, "seed": 7},
        "bits_seed": 3,
        "sample_rate_hz": FS,
        "duration_s": 0.05,
        "plot_window": {"start_s": 0.02, "end_s": 0.03},
    }
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(data.get(key), dict):
            data[key] = {**data[key], **value}
        else:
            data[key] = value
    return data


@pytest.fixture
def small_scenario_data():
    """Factory for a 50 ms scenario dict; keyword overrides merge into sections."""
    return _small_scenario


@pytest.fixture
def write_scenario(tmp_path):
    def _write(data: dict, name: str = "scenario.json") -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return path

    return _write
