from pathlib import Path
from typing import Literal

from dotenv import load_dotenv
from pydantic_settings import (
    BaseSettings,
    PydanticBaseSettingsSource,
    SettingsConfigDict,
    YamlConfigSettingsSource,
)

_defaults = Path(__file__).with_name("defaults.yaml")
_scenarios = Path(__file__).with_name("scenarios")
load_dotenv()


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="RMODE_", yaml_file=_defaults, extra="ignore")

    # Core settings
    output_root: Path = Path("output")
    default_scenario: Path = _scenarios / "geomundo.json"
    alpha_table: Path = Path(__file__).with_name("alpha_table.csv")
    log_level: str = "INFO"
    sample_format: Literal["raw", "wav", "both"] = "raw"

    # Analysis settings
    spectrum_segment_len: int = 1 << 18

    # Verification tolerances for the run report
    eta_rel_tolerance: float = 1e-3
    beta_abs_tolerance_rad: float = 1e-3
    null_eta_threshold: float = 0.05  # below this eta the absolute tolerance applies
    envelope_rel_tolerance: float = 1e-3
    snr_tolerance_db: float = 0.5

    # Service settings
    server_host: str = "127.0.0.1"
    server_port: int = 8000
    max_parallel_runs: int = 4

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> tuple[PydanticBaseSettingsSource, ...]:
        # YAML defaults first in line to lose: env-vars (and .env) win
        return (
            init_settings,
            env_settings,
            dotenv_settings,
            YamlConfigSettingsSource(settings_cls),
        )


settings = Settings()  # singleton

__all__ = ["Settings", "settings"]
