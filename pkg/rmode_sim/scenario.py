"""Scenario files: the JSON document that drives one end-to-end run.

Models reject unknown keys but do not enforce domain invariants on
construction; :func:`validate_scenario` reports every broken invariant as a
:class:`Violation` so a user sees all problems of a file at once.
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, ValidationError

from rmode_sim import prng
from rmode_sim.analysis import MIN_ANALYTIC_LEN, MIN_TONE_PERIODS, hilbert_passband_hz
from rmode_sim.channel import (
    FD_TAPS,
    AlphaTable,
    NoiseParams,
    SkywaveParams,
    great_circle_distance,
    skywave_delay,
)
from rmode_sim.core import sample_count
from rmode_sim.errors import (
    ConfigurationError,
    DomainError,
    OutputError,
    ScenarioValidationError,
    Violation,
)
from rmode_sim.tx import TransmitterConfig

SampleFormat = Literal["raw", "wav", "both"]

# MSK sidebands this many bit rates either side of the carrier must sit in the Hilbert passband
ENVELOPE_GUARD_BITS = 50


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GeoPoint(_Strict):
    lat_deg: float
    lon_deg: float

    def violations(self, prefix: str) -> list[Violation]:
        out = []
        if not (math.isfinite(self.lat_deg) and -90.0 <= self.lat_deg <= 90.0):
            out.append(Violation(f"{prefix}.lat_deg", self.lat_deg, "must lie in [-90, 90]"))
        if not (math.isfinite(self.lon_deg) and -180.0 <= self.lon_deg <= 180.0):
            out.append(Violation(f"{prefix}.lon_deg", self.lon_deg, "must lie in [-180, 180]"))
        return out


class SkywaveSpec(_Strict):
    """Skywave section of a scenario.

    The ground distance is given directly or derived from the transmitter and
    receiver coordinates. Alpha is given directly or looked up in an alpha
    table for the path length and ``period``.
    """

    ionosphere_height_m: float = 90_000.0
    ground_distance_m: float | None = None
    transmitter_position: GeoPoint | None = None
    receiver_position: GeoPoint | None = None
    attenuation_alpha: float | None = None
    alpha_table: str | None = None
    period: Literal["day", "night"] = "day"

    def _distance_violations(self, prefix: str) -> list[Violation]:
        has_positions = self.transmitter_position is not None or self.receiver_position is not None
        if has_positions and self.ground_distance_m is not None:
            return [Violation(f"{prefix}.ground_distance_m", self.ground_distance_m,
                              "give either ground_distance_m or station coordinates, not both")]
        if has_positions:
            out = []
            for name in ("transmitter_position", "receiver_position"):
                point = getattr(self, name)
                if point is None:
                    out.append(Violation(f"{prefix}.{name}", None, "both station coordinates are required"))
                else:
                    out.extend(point.violations(f"{prefix}.{name}"))
            return out
        if self.ground_distance_m is None:
            return [Violation(f"{prefix}.ground_distance_m", None, "required unless station coordinates are given")]
        return []

    def ground_distance(self) -> float:
        if self.ground_distance_m is not None:
            return self.ground_distance_m
        if self.transmitter_position is None or self.receiver_position is None:
            raise ConfigurationError("skywave path length is undefined")
        tx, rx = self.transmitter_position, self.receiver_position
        return great_circle_distance(tx.lat_deg, tx.lon_deg, rx.lat_deg, rx.lon_deg)

    def resolve(self, base_dir: Path | None = None) -> SkywaveParams:
        """Concrete geometry and attenuation for the channel."""
        distance = self.ground_distance()
        if self.attenuation_alpha is not None:
            alpha = self.attenuation_alpha
        elif self.alpha_table is not None:
            table_path = Path(self.alpha_table)
            if not table_path.is_absolute() and base_dir is not None:
                table_path = base_dir / table_path
            try:
                table = AlphaTable.load(table_path)
            except OSError as exc:
                raise OutputError(table_path, exc) from exc
            alpha = table.lookup(distance, self.period)
        else:
            raise ConfigurationError("skywave attenuation is undefined: set attenuation_alpha or alpha_table")
        return SkywaveParams(
            ionosphere_height_m=self.ionosphere_height_m,
            ground_distance_m=distance,
            attenuation_alpha=alpha,
        )

    def violations(self, prefix: str = "skywave", base_dir: Path | None = None) -> list[Violation]:
        out = self._distance_violations(prefix)
        if self.attenuation_alpha is not None and self.alpha_table is not None:
            out.append(Violation(f"{prefix}.alpha_table", self.alpha_table,
                                 "give either attenuation_alpha or alpha_table, not both"))
        elif self.attenuation_alpha is None and self.alpha_table is None:
            out.append(Violation(f"{prefix}.attenuation_alpha", None, "required unless alpha_table is given"))
        if out:
            return out
        try:
            resolved = self.resolve(base_dir)
        except (ConfigurationError, DomainError, OutputError) as exc:
            return [Violation(f"{prefix}.alpha_table", self.alpha_table, str(exc))]
        return resolved.violations(prefix)


class PlotWindow(_Strict):
    start_s: float = 0.5
    end_s: float = 0.52


class OutputsConfig(_Strict):
    directory: str | None = None
    format: SampleFormat | None = None
    write_csv: bool = True


def _default_skywave() -> SkywaveSpec:
    return SkywaveSpec(ground_distance_m=210_000.0, attenuation_alpha=0.3)


class ScenarioConfig(_Strict):
    name: str = "scenario"
    description: str = ""
    transmitter: TransmitterConfig = Field(default_factory=TransmitterConfig)
    skywave: SkywaveSpec = Field(default_factory=_default_skywave)
    noise: NoiseParams = Field(default_factory=NoiseParams)
    bits_seed: int = 1
    sample_rate_hz: float = 2_048_000.0
    duration_s: float = 1.0
    outputs: OutputsConfig = Field(default_factory=OutputsConfig)
    plot_window: PlotWindow = Field(default_factory=PlotWindow)

    _source_dir: Path | None = PrivateAttr(default=None)

    @property
    def source_dir(self) -> Path | None:
        return self._source_dir

    @property
    def sample_count(self) -> int:
        return sample_count(self.duration_s, self.sample_rate_hz)

    @property
    def bit_count(self) -> int:
        return math.ceil(self.sample_count * self.transmitter.data_rate_bps / self.sample_rate_hz)

    def resolved_skywave(self) -> SkywaveParams:
        return self.skywave.resolve(self._source_dir)

    def with_seed_override(self, seed: int) -> "ScenarioConfig":
        """Bits take ``seed``, noise takes ``seed + 1``."""
        updated = self.model_copy(update={
            "bits_seed": prng.normalize_seed(seed),
            "noise": self.noise.model_copy(update={"seed": prng.normalize_seed(seed + 1)}),
        })
        updated._source_dir = self._source_dir
        return updated


def validate_scenario(cfg: ScenarioConfig) -> list[Violation]:
    """Every broken invariant of ``cfg``; empty when the scenario is runnable."""
    out: list[Violation] = []
    out.extend(cfg.transmitter.violations("transmitter"))

    fs = cfg.sample_rate_hz
    if not any(v.field == "transmitter.carrier_freq_hz" or v.field == "transmitter.data_rate_bps" for v in out):
        out.extend(cfg.transmitter.sample_rate_violations(fs, "sample_rate_hz"))
        highest_cw = cfg.transmitter.cw_freq_hz(2)
        if not out and not fs > 2.0 * highest_cw:
            out.append(Violation("sample_rate_hz", fs, f"must exceed twice the upper CW tone ({highest_cw:.0f} Hz)"))
        if not out:
            out.extend(_analysis_band_violations(cfg))
    elif not (math.isfinite(fs) and fs > 0):
        out.append(Violation("sample_rate_hz", fs, "must be positive and finite"))

    duration = cfg.duration_s
    if not (math.isfinite(duration) and duration > 0):
        out.append(Violation("duration_s", duration, "must be > 0"))
    else:
        if math.isfinite(fs) and fs > 0 and cfg.sample_count < MIN_ANALYTIC_LEN:
            out.append(Violation("duration_s", duration,
                                 f"must cover at least {MIN_ANALYTIC_LEN} samples at the configured sample rate"))
        window = cfg.plot_window
        if not (0.0 <= window.start_s < window.end_s <= duration):
            out.append(Violation("plot_window", [window.start_s, window.end_s],
                                 f"must satisfy 0 <= start_s < end_s <= duration_s ({duration})"))

    if not (0 <= cfg.bits_seed <= prng.MASK64):
        out.append(Violation("bits_seed", cfg.bits_seed, "must be a 64-bit unsigned integer"))
    out.extend(cfg.skywave.violations("skywave", cfg.source_dir))
    out.extend(cfg.noise.violations("noise"))
    if not out:
        out.extend(_delay_coverage_violations(cfg))
    return out


def _analysis_band_violations(cfg: ScenarioConfig) -> list[Violation]:
    fs = cfg.sample_rate_hz
    lo, hi = hilbert_passband_hz(fs)
    margin = ENVELOPE_GUARD_BITS * cfg.transmitter.data_rate_bps
    f_lo, f_hi = cfg.transmitter.carrier_freq_hz - margin, cfg.transmitter.carrier_freq_hz + margin
    if lo <= f_lo and f_hi <= hi:
        return []
    return [Violation("sample_rate_hz", fs,
                      f"must place the MSK band {f_lo:.0f}-{f_hi:.0f} Hz inside the envelope analysis band "
                      f"[{lo:.0f}, {hi:.0f}] Hz")]


def _delay_coverage_violations(cfg: ScenarioConfig) -> list[Violation]:
    # the delayed copy loses up to ceil(t_d fs) + FD_TAPS samples to its edge flags;
    # what is left must still hold the tone fit window of the lower CW tone
    fs = cfg.sample_rate_hz
    t_d = skywave_delay(cfg.resolved_skywave())
    lowest_cw = min(cfg.transmitter.cw_freq_hz(1), cfg.transmitter.cw_freq_hz(2))
    needed = math.ceil(t_d * fs) + FD_TAPS + math.ceil(MIN_TONE_PERIODS * fs / lowest_cw)
    if cfg.sample_count < needed:
        return [Violation("duration_s", cfg.duration_s,
                          f"must cover the {t_d * 1e6:.2f} us skywave delay, the delay kernel and a CW tone fit "
                          f"({needed} samples at the configured sample rate)")]
    return []


def _pydantic_violations(exc: ValidationError) -> list[Violation]:
    return [
        Violation(".".join(str(part) for part in err["loc"]) or "<root>", err.get("input"), err["msg"])
        for err in exc.errors()
    ]


def parse_scenario(data: Any, source_dir: Path | None = None, source: str | Path | None = None) -> ScenarioConfig:
    """Scenario model from already-decoded JSON."""
    try:
        cfg = ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        raise ScenarioValidationError(_pydantic_violations(exc), source) from exc
    cfg._source_dir = source_dir
    return cfg


def load_scenario(path: str | Path) -> ScenarioConfig:
    """Read a scenario file. ``Infinity`` is accepted for ``noise.snr_db``."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OutputError(path, exc) from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioValidationError([Violation("<file>", str(path), f"invalid JSON: {exc}")], path) from exc
    return parse_scenario(data, path.parent, path)


def require_valid(cfg: ScenarioConfig, source: str | Path | None = None) -> ScenarioConfig:
    problems = validate_scenario(cfg)
    if problems:
        raise ScenarioValidationError(problems, source)
    return cfg


__all__ = [
    "GeoPoint",
    "SkywaveSpec",
    "PlotWindow",
    "OutputsConfig",
    "ScenarioConfig",
    "validate_scenario",
    "parse_scenario",
    "load_scenario",
    "require_valid",
]
