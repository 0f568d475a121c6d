"""End-to-end scenario runner.

Stages run strictly in order (bits, MSK, CW, skywave, noise, write, verify)
over a shared :class:`RunContext`. Every artifact lands in one run directory
and nothing in it depends on wall-clock time or absolute paths, so a scenario
and its seeds determine every output byte.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Annotated, Callable, Literal

from pydantic import BaseModel, BeforeValidator, ConfigDict

from rmode_sim import __version__
from rmode_sim.analysis import (
    analytic_envelope,
    envelope_statistics,
    estimate_snr,
    estimate_tone,
    power_spectrum,
)
from rmode_sim.channel import (
    SkywaveParams,
    add_awgn,
    apply_skywave,
    eta_beta_closed_form,
    eta_beta_literal,
    skywave_delay,
    superpose_delayed,
)
from rmode_sim.config.settings import settings as _settings
from rmode_sim.core import SignalBuffer, mean_square
from rmode_sim.errors import OutputError
from rmode_sim.scenario import ScenarioConfig, require_valid
from rmode_sim.tx import (
    BitStream,
    compose_transmit,
    generate_bits,
    generate_cw,
    map_bits_to_iq,
    msk_modulate,
)
from rmode_sim.utils import io
from rmode_sim.utils.paths import (
    RAW_SUFFIX,
    WAV_SUFFIX,
    data_dir,
    get_groundwave_file,
    get_metadata_file,
    get_received_file,
    get_report_file,
    get_traces_file,
    run_id_for,
)

log = logging.getLogger(__name__)

SampleFormat = Literal["raw", "wav", "both"]
ProgressCallback = Callable[[int, int, str, str], None]

# composite-minus-MSK margin a CW line must clear in the Welch spectrum
CW_LINE_MARGIN_DB = 10.0
_CW_NEIGHBOUR_BINS = 2


# ---------- Report models ---------- #


# report.json stores non-finite values as null; read back as +inf
ReportFloat = Annotated[float, BeforeValidator(lambda v: math.inf if v is None else v)]


class _ReportModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ToneCheck(_ReportModel):
    name: str
    freq_hz: float
    omega_td_rad: float
    eta_closed_form: float
    beta_closed_form_rad: float
    eta_literal: float
    beta_literal_rad: float
    eta_measured: float
    beta_measured_rad: float
    eta_error: float
    beta_error_rad: float
    near_null: bool
    passed: bool
    # measured values come from this tone passed alone through the channel, not from received.f32
    measured_on: Literal["cw_only"] = "cw_only"


class EnvelopeReport(_ReportModel):
    msk: dict[str, ReportFloat] | None
    composite: dict[str, ReportFloat]
    msk_constant: bool | None


class SpectrumLine(_ReportModel):
    name: str
    freq_hz: float
    peak_bin_hz: float
    power_db: float
    msk_neighbour_db: float
    margin_db: float
    local_max: bool
    passed: bool


class SpectrumReport(_ReportModel):
    segment_len: int
    bin_width_hz: float
    lines: list[SpectrumLine]


class SnrReport(_ReportModel):
    enabled: bool
    configured_db: ReportFloat
    measured_db: ReportFloat
    passed: bool


class PayloadReport(_ReportModel):
    seed: int
    bits: int
    ones: int
    i_symbols: int
    q_symbols: int


class RunReport(_ReportModel):
    """Verification report written to ``report.json``."""

    run_id: str
    scenario: str
    version: str
    sample_rate_hz: float
    duration_s: float
    samples: int
    t_d_s: float
    t_d_us: float
    ionosphere_height_m: float
    ground_distance_m: float
    attenuation_alpha: float
    tones: list[ToneCheck]
    envelope: EnvelopeReport
    spectrum: SpectrumReport | None
    snr: SnrReport
    payload: PayloadReport
    power_split: dict[str, dict[str, float]]
    passed: bool
    failures: list[str]


# ---------- Run context ---------- #


@dataclass
class RunContext:
    cfg: ScenarioConfig
    run_dir: Path
    sample_format: SampleFormat
    run_id: str
    skywave: SkywaveParams | None = None
    t_d: float = 0.0
    bits: BitStream | None = None
    msk: SignalBuffer | None = None
    cw: tuple[SignalBuffer, SignalBuffer] | None = None
    ground: SignalBuffer | None = None
    skywave_signal: SignalBuffer | None = None
    noiseless: SignalBuffer | None = None
    received: SignalBuffer | None = None
    artifacts: list[str] = field(default_factory=list)
    report: RunReport | None = None

    def record(self, path: Path) -> None:
        self.artifacts.append(path.name)
        log.info("✓ saved %s", path)


# ---------- Stages ---------- #


def _stage_bits(ctx: RunContext) -> None:
    ctx.bits = map_bits_to_iq(generate_bits(ctx.cfg.bits_seed, ctx.cfg.bit_count))


def _stage_msk(ctx: RunContext) -> None:
    cfg = ctx.cfg
    ctx.msk = msk_modulate(ctx.bits, cfg.transmitter, cfg.sample_rate_hz, cfg.duration_s)


def _stage_cw(ctx: RunContext) -> None:
    cfg = ctx.cfg
    ctx.cw = (
        generate_cw(cfg.transmitter, 1, cfg.sample_rate_hz, cfg.duration_s),
        generate_cw(cfg.transmitter, 2, cfg.sample_rate_hz, cfg.duration_s),
    )
    ctx.ground = compose_transmit(ctx.msk, *ctx.cw)


def _stage_skywave(ctx: RunContext) -> None:
    ctx.skywave = ctx.cfg.resolved_skywave()
    ctx.t_d = skywave_delay(ctx.skywave)
    ctx.noiseless, ctx.skywave_signal = apply_skywave(ctx.ground, ctx.skywave)
    log.info("t_d = %.3f us, alpha = %.3f", ctx.t_d * 1e6, ctx.skywave.attenuation_alpha)


def _stage_noise(ctx: RunContext) -> None:
    ctx.received = add_awgn(ctx.noiseless, ctx.cfg.noise, reference=ctx.ground)


def _plot_slice(ctx: RunContext) -> slice:
    fs = ctx.cfg.sample_rate_hz
    n = len(ctx.ground)
    start = min(n, int(round(ctx.cfg.plot_window.start_s * fs)))
    stop = min(n, int(round(ctx.cfg.plot_window.end_s * fs)))
    return slice(start, max(start, stop))


def _metadata(ctx: RunContext) -> dict:
    received = ctx.received
    return {
        "tool": "rmode-sim",
        "version": __version__,
        "run_id": ctx.run_id,
        "scenario": ctx.cfg.model_dump(mode="json"),
        "sample_rate_hz": received.sample_rate,
        "start_time_s": received.start_time,
        "samples": len(received),
        "sample_dtype": "float32-le",
        "sample_format": ctx.sample_format,
        "seeds": {"bits": ctx.cfg.bits_seed, "noise": ctx.cfg.noise.seed},
        "skywave": {**ctx.skywave.model_dump(), "t_d_s": ctx.t_d},
        "fractional_delay": dict(ctx.skywave_signal.metadata.get("fractional_delay", {})),
        "awgn": dict(received.metadata.get("awgn", {})),
        "unreliable": {"head": received.unreliable_head, "tail": received.unreliable_tail},
        "files": sorted(ctx.artifacts),
    }


def _stage_write(ctx: RunContext) -> None:
    run_dir = ctx.run_dir
    fs = ctx.cfg.sample_rate_hz
    if ctx.sample_format in ("raw", "both"):
        ctx.record(io.write_raw(get_received_file(run_dir, RAW_SUFFIX), ctx.received.samples))
        ctx.record(io.write_raw(get_groundwave_file(run_dir, RAW_SUFFIX), ctx.ground.samples))
    if ctx.sample_format in ("wav", "both"):
        ctx.record(io.write_wav(get_received_file(run_dir, WAV_SUFFIX), ctx.received.samples, fs))
        ctx.record(io.write_wav(get_groundwave_file(run_dir, WAV_SUFFIX), ctx.ground.samples, fs))
    if ctx.cfg.outputs.write_csv:
        window = _plot_slice(ctx)
        ctx.record(io.write_traces_csv(get_traces_file(run_dir), {
            "time_s": ctx.ground.times()[window],
            "groundwave": ctx.ground.samples[window],
            "skywave": ctx.skywave_signal.samples[window],
            "received": ctx.noiseless.samples[window],
        }))
    metadata_path = get_metadata_file(run_dir)
    ctx.artifacts.append(metadata_path.name)
    ctx.artifacts.append(get_report_file(run_dir).name)
    io.write_json(metadata_path, _metadata(ctx))
    log.info("✓ saved %s", metadata_path)


def _wrap_phase(x: float) -> float:
    wrapped = math.remainder(x, 2.0 * math.pi)
    return math.pi if wrapped <= -math.pi else wrapped


def _tone_checks(ctx: RunContext) -> list[ToneCheck]:
    """Measured against closed-form eta/beta on each CW tone passed alone through the channel."""
    alpha = ctx.skywave.attenuation_alpha
    checks = []
    for which, tone in enumerate(ctx.cw, start=1):
        freq = ctx.cfg.transmitter.cw_freq_hz(which)
        omega = 2.0 * math.pi * freq
        eta_cf, beta_cf = eta_beta_closed_form(alpha, omega, ctx.t_d)
        eta_lit, beta_lit = eta_beta_literal(alpha, omega, ctx.t_d)
        received, _ = superpose_delayed(tone, ctx.t_d, alpha)
        window = received.valid
        ground_fit = estimate_tone(tone, freq, window)
        received_fit = estimate_tone(received, freq, window)
        if ground_fit.amplitude > 0:
            eta_meas = received_fit.amplitude / ground_fit.amplitude
            beta_meas = _wrap_phase(received_fit.phase_rad - ground_fit.phase_rad)
        else:
            eta_meas, beta_meas = eta_cf, beta_cf
        near_null = eta_cf < _settings.null_eta_threshold
        eta_err = abs(eta_meas - eta_cf) if near_null else abs(eta_meas - eta_cf) / eta_cf
        beta_err = abs(_wrap_phase(beta_meas - beta_cf))
        passed = eta_err <= _settings.eta_rel_tolerance and (near_null or beta_err <= _settings.beta_abs_tolerance_rad)
        checks.append(ToneCheck(
            name=f"cw{which}",
            freq_hz=freq,
            omega_td_rad=math.fmod(omega * ctx.t_d, 2.0 * math.pi),
            eta_closed_form=eta_cf,
            beta_closed_form_rad=beta_cf,
            eta_literal=eta_lit,
            beta_literal_rad=beta_lit,
            eta_measured=eta_meas,
            beta_measured_rad=beta_meas,
            eta_error=eta_err,
            beta_error_rad=beta_err,
            near_null=near_null,
            passed=passed,
        ))
    return checks


def _envelope_report(ctx: RunContext) -> EnvelopeReport:
    amp_msk = ctx.cfg.transmitter.amp_msk
    composite = envelope_statistics(analytic_envelope(ctx.ground)).as_dict()
    if amp_msk <= 0:
        return EnvelopeReport(msk=None, composite=composite, msk_constant=None)
    msk_stats = envelope_statistics(analytic_envelope(ctx.msk), nominal=amp_msk)
    return EnvelopeReport(
        msk=msk_stats.as_dict(),
        composite=composite,
        msk_constant=msk_stats.max_rel_deviation <= _settings.envelope_rel_tolerance,
    )


def _spectrum_report(ctx: RunContext) -> SpectrumReport | None:
    n = len(ctx.ground)
    segment = 1 << (min(n, _settings.spectrum_segment_len).bit_length() - 1)
    if segment < 2:
        return None
    composite = power_spectrum(ctx.ground, segment)
    msk_only = power_spectrum(ctx.msk, segment)
    lines = []
    for which in (1, 2):
        freq = ctx.cfg.transmitter.cw_freq_hz(which)
        i = composite.bin_index(freq)
        lo, hi = max(0, i - _CW_NEIGHBOUR_BINS), min(len(msk_only), i + _CW_NEIGHBOUR_BINS + 1)
        neighbour_db = float(msk_only.power_db[lo:hi].max())
        power_db = float(composite.power_db[i])
        margin = power_db - neighbour_db
        local_max = composite.is_local_max(freq)
        lines.append(SpectrumLine(
            name=f"cw{which}",
            freq_hz=freq,
            peak_bin_hz=float(composite.freq_hz[i]),
            power_db=power_db,
            msk_neighbour_db=neighbour_db,
            margin_db=margin,
            local_max=local_max,
            passed=local_max and margin >= CW_LINE_MARGIN_DB,
        ))
    return SpectrumReport(segment_len=segment, bin_width_hz=composite.bin_width_hz, lines=lines)


def _snr_report(ctx: RunContext) -> SnrReport:
    noise = ctx.cfg.noise
    if not noise.enabled:
        return SnrReport(enabled=False, configured_db=math.inf, measured_db=math.inf, passed=True)
    # noise alone, referenced to the groundwave composite it was calibrated against
    noise_only = ctx.received.samples - ctx.noiseless.samples
    measured = estimate_snr(ctx.ground, ctx.ground.replace(ctx.ground.samples + noise_only))
    return SnrReport(
        enabled=True,
        configured_db=noise.snr_db,
        measured_db=measured,
        passed=abs(measured - noise.snr_db) <= _settings.snr_tolerance_db,
    )


def _stage_verify(ctx: RunContext) -> None:
    tones = _tone_checks(ctx)
    envelope = _envelope_report(ctx)
    spectrum = _spectrum_report(ctx)
    snr = _snr_report(ctx)
    bits = ctx.bits

    failures = [f"{t.name}: eta/beta outside tolerance" for t in tones if not t.passed]
    if envelope.msk_constant is False:
        failures.append("msk envelope not constant")
    if spectrum is not None:
        failures.extend(f"{line.name}: spectral line check failed" for line in spectrum.lines if not line.passed)
    if not snr.passed:
        failures.append("measured SNR outside tolerance")

    ctx.report = RunReport(
        run_id=ctx.run_id,
        scenario=ctx.cfg.name,
        version=__version__,
        sample_rate_hz=ctx.cfg.sample_rate_hz,
        duration_s=ctx.cfg.duration_s,
        samples=len(ctx.received),
        t_d_s=ctx.t_d,
        t_d_us=ctx.t_d * 1e6,
        ionosphere_height_m=ctx.skywave.ionosphere_height_m,
        ground_distance_m=ctx.skywave.ground_distance_m,
        attenuation_alpha=ctx.skywave.attenuation_alpha,
        tones=tones,
        envelope=envelope,
        spectrum=spectrum,
        snr=snr,
        payload=PayloadReport(
            seed=bits.seed,
            bits=len(bits),
            ones=int(bits.bits.sum()),
            i_symbols=int(bits.i_bits.size),
            q_symbols=int(bits.q_bits.size),
        ),
        power_split={"configured": ctx.cfg.transmitter.power_split(), "measured": power_fractions(ctx)},
        passed=not failures,
        failures=failures,
    )
    path = io.write_json(get_report_file(ctx.run_dir), ctx.report.model_dump())
    log.info("✓ saved %s", path)


# Ordered pipeline: (key, progress message, stage)
STAGES: list[tuple[str, str, Callable[[RunContext], None]]] = [
    ("bits", "Generating payload bits", _stage_bits),
    ("msk", "Modulating MSK", _stage_msk),
    ("cw", "Adding CW ranging tones", _stage_cw),
    ("skywave", "Applying skywave", _stage_skywave),
    ("noise", "Adding AWGN", _stage_noise),
    ("write", "Writing sample files and traces", _stage_write),
    ("verify", "Building verification report", _stage_verify),
]


def run_scenario(
    cfg: ScenarioConfig,
    out_dir: str | Path | None = None,
    sample_format: SampleFormat | None = None,
    progress: ProgressCallback | None = None,
) -> RunReport:
    """Run every stage for ``cfg`` and return its verification report.

    ``out_dir`` is the run directory; by default ``<output_root>/<run_id>_data``.
    The sample format comes from the argument, then the scenario, then settings.
    """
    require_valid(cfg, cfg.name)
    run_id = run_id_for(cfg.name)
    run_dir = Path(out_dir) if out_dir is not None else data_dir(run_id)
    try:
        run_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(run_dir, exc) from exc
    fmt = sample_format or cfg.outputs.format or _settings.sample_format
    ctx = RunContext(cfg=cfg, run_dir=run_dir, sample_format=fmt, run_id=run_id)

    total = len(STAGES)
    for index, (key, message, stage) in enumerate(STAGES):
        if progress is not None:
            progress(index, total, key, message)
        log.debug("▶ %s", message)
        stage(ctx)
        log.info("✓ %s", message)
    if progress is not None:
        progress(total, total, "done", "Run completed")
    return ctx.report


def load_report(run_dir: str | Path) -> RunReport:
    data = io.read_json(get_report_file(Path(run_dir)))
    return RunReport.model_validate(data)


def power_fractions(ctx: RunContext) -> dict[str, float]:
    """Measured share of the composite power in each component."""
    total = mean_square(ctx.ground)
    parts = {"msk": ctx.msk, "cw1": ctx.cw[0], "cw2": ctx.cw[1]}
    return {name: (mean_square(buf) / total if total else 0.0) for name, buf in parts.items()}


__all__ = [
    "STAGES",
    "RunContext",
    "RunReport",
    "ToneCheck",
    "EnvelopeReport",
    "SpectrumReport",
    "SpectrumLine",
    "SnrReport",
    "PayloadReport",
    "run_scenario",
    "load_report",
    "power_fractions",
]
