"""Measurement oracles: tone fits, analytic envelope and phase, Welch spectra, SNR."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from numpy.typing import NDArray
from scipy import optimize
from scipy import signal as sp_signal

from rmode_sim.core import SignalBuffer, check_aligned, mean_square
from rmode_sim.errors import DomainError, EstimationError, SizeError

MIN_TONE_PERIODS = 8
MIN_ANALYTIC_LEN = 1024
EDGE_EXCLUSION = 256

HILBERT_TAPS = 2 * (EDGE_EXCLUSION - 1) + 1
HILBERT_KAISER_BETA = 14.0
# accurate band of the FIR transformer, as fractions of the sample rate
HILBERT_PASSBAND = (0.02, 0.48)
# largest share of signal energy allowed outside that band
OUT_OF_BAND_LIMIT = 1e-6

Window = slice | tuple[int, int] | None


@dataclass(frozen=True)
class ToneEstimate:
    freq_hz: float
    amplitude: float
    phase_rad: float
    residual_rms: float


def _resolve_window(x: SignalBuffer, window: Window) -> slice:
    if window is None:
        return x.valid
    if isinstance(window, tuple):
        window = slice(*window)
    start, stop, step = window.indices(len(x))
    if step != 1:
        raise DomainError("analysis windows must be contiguous")
    return slice(start, max(start, stop))


def _tone_basis(x: SignalBuffer, freq_hz: float, span: slice) -> NDArray[np.float64]:
    # cycles reduced modulo one so the basis keeps full precision at MHz rates
    fs = x.sample_rate
    idx = np.arange(span.start, span.stop, dtype=np.float64)
    cycles = np.mod(freq_hz * idx, fs) / fs + math.fmod(freq_hz * x.start_time, 1.0)
    angle = 2.0 * np.pi * np.mod(cycles, 1.0)
    return np.column_stack([np.sin(angle), np.cos(angle)])


def _check_tone_freq(x: SignalBuffer, freq_hz: float) -> None:
    if not (math.isfinite(freq_hz) and 0.0 < freq_hz < x.sample_rate / 2.0):
        raise DomainError(f"tone frequency {freq_hz!r} Hz outside (0, {x.sample_rate / 2.0:.0f}) Hz")


def estimate_tone(x: SignalBuffer, freq_hz: float, window: Window = None) -> ToneEstimate:
    """Least-squares fit of ``a sin(wt) + b cos(wt)`` at a known frequency.

    ``window`` is a sample slice (default: the buffer's valid region) and must
    cover at least eight periods. The returned phase is that of
    ``amplitude * sin(wt + phase)`` in (-pi, pi]; ``residual_rms`` is relative
    to the RMS of the windowed samples.
    """
    _check_tone_freq(x, freq_hz)
    span = _resolve_window(x, window)
    count = span.stop - span.start
    if count * freq_hz < MIN_TONE_PERIODS * x.sample_rate:
        raise EstimationError(
            f"window of {count} samples holds fewer than {MIN_TONE_PERIODS} periods of {freq_hz} Hz"
        )
    data = x.samples[span]
    basis = _tone_basis(x, freq_hz, span)
    (a, b), *_ = np.linalg.lstsq(basis, data, rcond=None)
    residual = data - basis @ np.array([a, b])
    scale = math.sqrt(mean_square(data))
    residual_rms = math.sqrt(mean_square(residual)) / scale if scale > 0 else 0.0
    phase = math.atan2(b, a)
    if phase <= -math.pi:
        phase = math.pi
    return ToneEstimate(float(freq_hz), math.hypot(a, b), phase, residual_rms)


def estimate_frequency(x: SignalBuffer, window: Window, f_lo: float, f_hi: float, xatol: float = 1e-3) -> ToneEstimate:
    """Frequency in ``[f_lo, f_hi]`` whose tone fit leaves the least residual."""
    if not f_lo < f_hi:
        raise DomainError(f"empty search band [{f_lo}, {f_hi}]")
    _check_tone_freq(x, f_lo)
    _check_tone_freq(x, f_hi)
    span = _resolve_window(x, window)
    data = x.samples[span]

    def residual_energy(freq: float) -> float:
        basis = _tone_basis(x, freq, span)
        coef, *_ = np.linalg.lstsq(basis, data, rcond=None)
        return float(np.sum((data - basis @ coef) ** 2))

    result = optimize.minimize_scalar(residual_energy, bounds=(f_lo, f_hi), method="bounded", options={"xatol": xatol})
    return estimate_tone(x, float(result.x), span)


def _hilbert_taps() -> NDArray[np.float64]:
    half = HILBERT_TAPS // 2
    m = np.arange(-half, half + 1)
    taps = np.zeros(HILBERT_TAPS, dtype=np.float64)
    odd = m % 2 != 0
    taps[odd] = 2.0 / (np.pi * m[odd])
    return taps * np.kaiser(HILBERT_TAPS, HILBERT_KAISER_BETA)


_HILBERT = _hilbert_taps()


def hilbert_passband_hz(sample_rate: float) -> tuple[float, float]:
    lo, hi = HILBERT_PASSBAND
    return lo * sample_rate, hi * sample_rate


def out_of_band_share(x: SignalBuffer) -> float:
    """Share of the Hann-windowed energy of ``x`` outside the Hilbert passband."""
    n = len(x)
    power = np.abs(np.fft.rfft(x.samples * sp_signal.windows.hann(n, sym=False))) ** 2
    total = float(power.sum())
    if total == 0.0:
        return 0.0
    lo, hi = hilbert_passband_hz(x.sample_rate)
    freqs = np.fft.rfftfreq(n, 1.0 / x.sample_rate)
    return float(power[(freqs < lo) | (freqs > hi)].sum()) / total


def analytic_signal(x: SignalBuffer) -> NDArray[np.complex128]:
    """``x + j H{x}`` with a Kaiser-windowed FIR Hilbert transformer.

    The transformer spans 511 taps, so its transient stays inside the
    256-sample edge exclusion at each end. It is accurate only between 2 % and
    48 % of the sample rate (41 kHz to 983 kHz at 2.048 MHz); input with more
    than :data:`OUT_OF_BAND_LIMIT` of its energy outside that band raises
    :class:`DomainError`.
    """
    if len(x) < MIN_ANALYTIC_LEN:
        raise SizeError(f"analytic signal needs >= {MIN_ANALYTIC_LEN} samples, got {len(x)}")
    share = out_of_band_share(x)
    if share > OUT_OF_BAND_LIMIT:
        lo, hi = hilbert_passband_hz(x.sample_rate)
        raise DomainError(
            f"{share:.3g} of the signal energy lies outside the Hilbert passband [{lo:.0f}, {hi:.0f}] Hz"
        )
    quadrature = sp_signal.oaconvolve(x.samples, _HILBERT, mode="same")
    return x.samples + 1j * quadrature


def _edge_flagged(x: SignalBuffer, samples: NDArray[np.float64], what: str) -> SignalBuffer:
    return x.replace(
        samples,
        unreliable_head=max(x.unreliable_head, EDGE_EXCLUSION),
        unreliable_tail=max(x.unreliable_tail, EDGE_EXCLUSION),
        metadata={**x.metadata, "analysis": what},
    )


def analytic_envelope(x: SignalBuffer) -> SignalBuffer:
    return _edge_flagged(x, np.abs(analytic_signal(x)), "envelope")


def instantaneous_phase(x: SignalBuffer) -> SignalBuffer:
    """Unwrapped phase of the analytic signal, radians."""
    return _edge_flagged(x, np.unwrap(np.angle(analytic_signal(x))), "phase")


@dataclass(frozen=True)
class EnvelopeStats:
    minimum: float
    maximum: float
    mean: float
    max_rel_deviation: float
    peak_to_trough: float

    def as_dict(self) -> dict[str, float]:
        return {
            "min": self.minimum,
            "max": self.maximum,
            "mean": self.mean,
            "max_rel_deviation": self.max_rel_deviation,
            "peak_to_trough": self.peak_to_trough,
        }


def envelope_statistics(envelope: SignalBuffer, nominal: float | None = None) -> EnvelopeStats:
    """Spread of an envelope over its valid region.

    Deviation is measured against ``nominal`` when given, else the mean;
    peak-to-trough is ``(max - min) / mean``.
    """
    data = envelope.samples[envelope.valid]
    if data.size == 0:
        raise SizeError("envelope has no valid samples")
    lo, hi, mean = float(data.min()), float(data.max()), float(data.mean())
    ref = mean if nominal is None else float(nominal)
    if ref <= 0:
        raise DomainError(f"reference level must be positive, got {ref!r}")
    deviation = float(np.max(np.abs(data - ref))) / ref
    spread = (hi - lo) / mean if mean > 0 else math.inf
    return EnvelopeStats(lo, hi, mean, deviation, spread)


@dataclass(frozen=True, eq=False)
class PowerSpectrum:
    """One-sided Welch power spectral density."""

    freq_hz: NDArray[np.float64]
    density: NDArray[np.float64]
    segment_len: int

    @property
    def bin_width_hz(self) -> float:
        return float(self.freq_hz[1] - self.freq_hz[0])

    @property
    def power_db(self) -> NDArray[np.float64]:
        floor = np.finfo(np.float64).tiny
        return 10.0 * np.log10(np.maximum(self.density, floor))

    def __iter__(self) -> Iterator[tuple[float, float]]:
        return iter(zip(self.freq_hz.tolist(), self.power_db.tolist()))

    def __len__(self) -> int:
        return int(self.freq_hz.size)

    def bin_index(self, freq_hz: float) -> int:
        return int(np.argmin(np.abs(self.freq_hz - freq_hz)))

    def peak_freq_hz(self, f_lo: float | None = None, f_hi: float | None = None) -> float:
        mask = np.ones(self.freq_hz.size, dtype=bool)
        if f_lo is not None:
            mask &= self.freq_hz >= f_lo
        if f_hi is not None:
            mask &= self.freq_hz <= f_hi
        if not mask.any():
            raise DomainError(f"no spectrum bins in [{f_lo}, {f_hi}] Hz")
        candidates = np.flatnonzero(mask)
        return float(self.freq_hz[candidates[np.argmax(self.density[candidates])]])

    def is_local_max(self, freq_hz: float) -> bool:
        i = self.bin_index(freq_hz)
        left = self.density[i - 1] if i > 0 else -np.inf
        right = self.density[i + 1] if i + 1 < self.density.size else -np.inf
        return bool(self.density[i] > left and self.density[i] > right)

    def total_power(self) -> float:
        """Integrated density, comparable to the buffer's mean square."""
        return float(np.sum(self.density) * self.bin_width_hz)


def power_spectrum(x: SignalBuffer, segment_len: int) -> PowerSpectrum:
    """Welch periodogram: Hann window, 50% overlap, no detrending."""
    n = len(x)
    if not (isinstance(segment_len, (int, np.integer)) and segment_len >= 2 and segment_len & (segment_len - 1) == 0):
        raise DomainError(f"segment_len must be a power of two >= 2, got {segment_len!r}")
    if segment_len > n:
        raise DomainError(f"segment_len {segment_len} exceeds buffer length {n}")
    freqs, density = sp_signal.welch(
        x.samples,
        fs=x.sample_rate,
        window="hann",
        nperseg=int(segment_len),
        noverlap=int(segment_len) // 2,
        detrend=False,
        return_onesided=True,
        scaling="density",
    )
    return PowerSpectrum(freqs, density, int(segment_len))


def estimate_snr(signal: SignalBuffer, noisy: SignalBuffer) -> float:
    """``10 log10(P_signal / P_(noisy - signal))``; ``inf`` when the inputs are identical."""
    check_aligned(signal, noisy)
    p_noise = mean_square(noisy.samples - signal.samples)
    if p_noise == 0.0:
        return math.inf
    p_signal = mean_square(signal)
    if p_signal == 0.0:
        return -math.inf
    return 10.0 * math.log10(p_signal / p_noise)


__all__ = [
    "MIN_TONE_PERIODS",
    "MIN_ANALYTIC_LEN",
    "EDGE_EXCLUSION",
    "ToneEstimate",
    "estimate_tone",
    "estimate_frequency",
    "HILBERT_PASSBAND",
    "OUT_OF_BAND_LIMIT",
    "hilbert_passband_hz",
    "out_of_band_share",
    "analytic_signal",
    "analytic_envelope",
    "instantaneous_phase",
    "EnvelopeStats",
    "envelope_statistics",
    "PowerSpectrum",
    "power_spectrum",
    "estimate_snr",
]
