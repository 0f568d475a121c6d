"""Propagation: single-hop skywave geometry, delayed and attenuated
superposition, closed-form tone distortion, and AWGN.

The skywave arrives ``t_d = (sqrt(4h^2 + d^2) - d) / c`` after the groundwave
(flat geometry, one reflection at height ``h``) scaled by ``alpha``:

    r(t) = s(t) + alpha * s(t - t_d)
"""
from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, field_validator
from scipy import signal as sp_signal
from scipy import special

from rmode_sim import prng
from rmode_sim.core import SignalBuffer, add_signals, check_aligned, mean_square, scale_signal
from rmode_sim.errors import (
    ConfigurationError,
    DegenerateSignalError,
    DomainError,
    SizeError,
    Violation,
)

log = logging.getLogger(__name__)

SPEED_OF_LIGHT_M_S = 299_792_458.0
EARTH_RADIUS_M = 6_371_000.0

FD_TAPS = 129
FD_KAISER_BETA = 8.6
FD_EDGE_SAMPLES = FD_TAPS // 2
# delays within this many samples of a whole number bypass interpolation
_WHOLE_SAMPLE_TOL = 1e-9

Period = Literal["day", "night"]


class SkywaveParams(BaseModel):
    """Geometry and attenuation of the single-hop skywave."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    ionosphere_height_m: float = 90_000.0
    ground_distance_m: float = 210_000.0
    attenuation_alpha: float = 0.3

    def violations(self, prefix: str = "skywave") -> list[Violation]:
        out: list[Violation] = []
        h, d, a = self.ionosphere_height_m, self.ground_distance_m, self.attenuation_alpha
        if not (math.isfinite(h) and h > 0):
            out.append(Violation(f"{prefix}.ionosphere_height_m", h, "must be > 0"))
        if not (math.isfinite(d) and d >= 0):
            out.append(Violation(f"{prefix}.ground_distance_m", d, "must be >= 0"))
        if not (math.isfinite(a) and 0.0 <= a <= 1.0):
            out.append(Violation(f"{prefix}.attenuation_alpha", a, "must lie in [0, 1]"))
        return out

    def require_valid(self) -> None:
        problems = self.violations()
        if problems:
            raise ConfigurationError(str(problems[0]))


class NoiseParams(BaseModel):
    """AWGN level relative to the noiseless groundwave composite.

    ``snr_db = +inf`` (``null`` in a scenario file) disables the noise stage.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    snr_db: float = math.inf
    seed: int = 0

    @field_validator("snr_db", mode="before")
    @classmethod
    def _null_disables(cls, value: object) -> object:
        return math.inf if value is None else value

    @property
    def enabled(self) -> bool:
        return math.isfinite(self.snr_db)

    def violations(self, prefix: str = "noise") -> list[Violation]:
        out: list[Violation] = []
        if math.isnan(self.snr_db) or self.snr_db == -math.inf:
            out.append(Violation(f"{prefix}.snr_db", self.snr_db, "must be finite (or +inf/null to disable)"))
        if not (0 <= self.seed <= prng.MASK64):
            out.append(Violation(f"{prefix}.seed", self.seed, "must be a 64-bit unsigned integer"))
        return out


def skywave_delay(p: SkywaveParams) -> float:
    """Groundwave-to-skywave travel time difference in seconds."""
    p.require_valid()
    two_h = 2.0 * p.ionosphere_height_m
    d = p.ground_distance_m
    # (sqrt(4h^2 + d^2) - d) rationalised so long baselines keep full precision
    excess_path = two_h * two_h / (math.hypot(two_h, d) + d)
    return excess_path / SPEED_OF_LIGHT_M_S


def ionosphere_height_for_delay(t_d: float, ground_distance_m: float) -> float:
    """Reflection height that yields ``t_d`` at the given distance."""
    if not (math.isfinite(t_d) and t_d > 0):
        raise DomainError(f"t_d must be positive, got {t_d!r}")
    if not (math.isfinite(ground_distance_m) and ground_distance_m >= 0):
        raise DomainError(f"ground distance must be >= 0, got {ground_distance_m!r}")
    excess = t_d * SPEED_OF_LIGHT_M_S
    return math.sqrt(excess * (excess + 2.0 * ground_distance_m)) / 2.0


def great_circle_distance(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Haversine distance in metres on a sphere of radius 6,371 km."""
    for name, value, bound in (("lat1", lat1, 90.0), ("lat2", lat2, 90.0), ("lon1", lon1, 180.0), ("lon2", lon2, 180.0)):
        if not (math.isfinite(value) and -bound <= value <= bound):
            raise DomainError(f"{name}={value!r} outside [-{bound:.0f}, {bound:.0f}] degrees")
    phi1, phi2 = math.radians(lat1), math.radians(lat2)
    dphi = phi2 - phi1
    dlmb = math.radians(lon2 - lon1)
    a = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlmb / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(a)))


def _kaiser_sinc_taps(frac: float) -> NDArray[np.float64]:
    # taps for m = -64..64, sinc and Kaiser window both centred on the fractional point
    m = np.arange(-FD_EDGE_SAMPLES, FD_EDGE_SAMPLES + 1, dtype=np.float64)
    u = m - frac
    half_width = FD_EDGE_SAMPLES + 1.0
    window = special.i0(FD_KAISER_BETA * np.sqrt(1.0 - (u / half_width) ** 2)) / special.i0(FD_KAISER_BETA)
    taps = np.sinc(u) * window
    return taps / taps.sum()


def fractional_delay(x: SignalBuffer, tau: float) -> SignalBuffer:
    """Delay ``x`` by ``tau`` seconds, keeping its start time.

    Whole-sample delays are a pure shift. Otherwise the fractional remainder
    goes through a 129-tap Kaiser (beta 8.6) windowed-sinc interpolator.
    Samples before the signal starts are zero.
    """
    if not (math.isfinite(tau) and tau >= 0):
        raise DomainError(f"delay must be finite and >= 0, got {tau!r}")
    n = len(x)
    if n < FD_TAPS:
        raise SizeError(f"buffer of {n} samples is shorter than the {FD_TAPS}-tap interpolation kernel")

    delay_samples = tau * x.sample_rate
    whole = round(delay_samples)
    out = np.zeros(n, dtype=np.float64)
    info = {
        "tau_s": tau,
        "delay_samples": delay_samples,
        "window": "kaiser",
        "kaiser_beta": FD_KAISER_BETA,
        "taps": FD_TAPS,
        "edge_samples": FD_EDGE_SAMPLES,
    }

    if abs(delay_samples - whole) <= _WHOLE_SAMPLE_TOL:
        shift = int(whole)
        if shift < n:
            out[shift:] = x.samples[: n - shift]
        head = min(n, x.unreliable_head + shift)
        tail = x.unreliable_tail
        info.update(integer_shift=shift, fraction=0.0, interpolated=False)
    else:
        shift = math.floor(delay_samples)
        frac = delay_samples - shift
        taps = _kaiser_sinc_taps(frac)
        filtered = sp_signal.oaconvolve(x.samples, taps, mode="full")
        offset = FD_EDGE_SAMPLES - shift
        first = max(0, -offset)
        if first < n:
            out[first:] = filtered[first + offset : n + offset]
        head = min(n, x.unreliable_head + shift + 1 + FD_EDGE_SAMPLES)
        tail = max(FD_EDGE_SAMPLES, x.unreliable_tail)
        info.update(integer_shift=shift, fraction=frac, interpolated=True)

    return SignalBuffer(
        out,
        x.sample_rate,
        x.start_time,
        unreliable_head=head,
        unreliable_tail=tail,
        metadata={**x.metadata, "fractional_delay": info},
    )


def superpose_delayed(ground: SignalBuffer, tau: float, alpha: float) -> tuple[SignalBuffer, SignalBuffer]:
    """(ground + alpha * ground delayed by tau, alpha * delayed)."""
    skywave = scale_signal(fractional_delay(ground, tau), alpha)
    return add_signals(ground, skywave), skywave


def apply_skywave(ground: SignalBuffer, p: SkywaveParams) -> tuple[SignalBuffer, SignalBuffer]:
    """r(t) = s(t) + alpha s(t - t_d); returns (received, skywave)."""
    t_d = skywave_delay(p)
    log.debug("skywave t_d=%.6e s alpha=%.3f", t_d, p.attenuation_alpha)
    return superpose_delayed(ground, t_d, p.attenuation_alpha)


def _check_alpha(alpha: float) -> None:
    if not (math.isfinite(alpha) and 0.0 <= alpha <= 1.0):
        raise DomainError(f"alpha must lie in [0, 1], got {alpha!r}")


def eta_beta_closed_form(alpha: float, omega_rad_s: float, t_d: float) -> tuple[float, float]:
    """Amplitude scale and phase shift of one tone after skywave superposition.

    Evaluated as the phasor eta * exp(j beta) = 1 + alpha * exp(-j omega t_d);
    beta > 0 is a phase advance of received relative to ground, in (-pi, pi].
    """
    _check_alpha(alpha)
    z = 1.0 + alpha * cmath.exp(-1j * omega_rad_s * t_d)
    beta = cmath.phase(z)
    if beta <= -math.pi:
        beta = math.pi
    return abs(z), beta


def eta_beta_literal(alpha: float, omega_rad_s: float, t_d: float) -> tuple[float, float]:
    """eta and beta exactly as printed in the skywave model: a -2 alpha cos term
    under the root and a single-argument arctangent."""
    _check_alpha(alpha)
    c = math.cos(omega_rad_s * t_d)
    s = math.sin(omega_rad_s * t_d)
    eta = math.sqrt(max(0.0, 1.0 + alpha * alpha - 2.0 * alpha * c))
    denom = 1.0 - alpha * c
    beta = math.atan(alpha * s / denom) if denom != 0 else math.copysign(math.pi / 2.0, alpha * s)
    return eta, beta


def add_awgn(x: SignalBuffer, n: NoiseParams, reference: SignalBuffer | None = None) -> SignalBuffer:
    """Add white Gaussian noise at ``n.snr_db``.

    Signal power is the mean square of ``reference`` when given, else of ``x``.
    """
    problems = n.violations()
    if problems:
        raise ConfigurationError(str(problems[0]))
    if len(x) == 0:
        raise SizeError("cannot add noise to an empty buffer")
    if not n.enabled:
        return x.replace(x.samples)
    if reference is not None:
        check_aligned(x, reference)
    power = mean_square(reference if reference is not None else x)
    if power == 0.0:
        raise DegenerateSignalError("signal power is zero; an SNR cannot be realised")
    sigma = math.sqrt(power / 10.0 ** (n.snr_db / 10.0))
    noise = sigma * prng.gaussians(n.seed, len(x))
    info = {"snr_db": n.snr_db, "seed": n.seed, "sigma": sigma, "signal_power": power}
    return x.replace(x.samples + noise, metadata={**x.metadata, "awgn": info})


@dataclass(frozen=True)
class AlphaRow:
    distance_km_min: float
    distance_km_max: float
    period: Period
    alpha: float


@dataclass(frozen=True)
class AlphaTable:
    """Attenuation factors keyed by distance bucket and day/night.

    File rows read ``distance_km_min, distance_km_max, day|night, alpha``;
    ``#`` starts a comment. Buckets are half-open, ``[min, max)``.
    """

    rows: tuple[AlphaRow, ...]
    source: str = ""

    @classmethod
    def parse(cls, text: str, source: str = "<text>") -> "AlphaTable":
        rows: list[AlphaRow] = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 4:
                raise ConfigurationError(f"{source}:{lineno}: expected 4 comma-separated fields, got {len(parts)}")
            try:
                lo, hi, alpha = float(parts[0]), float(parts[1]), float(parts[3])
            except ValueError as exc:
                raise ConfigurationError(f"{source}:{lineno}: {exc}") from exc
            period = parts[2].lower()
            if period not in ("day", "night"):
                raise ConfigurationError(f"{source}:{lineno}: period must be 'day' or 'night', got {parts[2]!r}")
            if not (0 <= lo < hi) or not (0.0 <= alpha <= 1.0):
                raise ConfigurationError(f"{source}:{lineno}: need 0 <= min < max and alpha in [0, 1]")
            rows.append(AlphaRow(lo, hi, period, alpha))  # type: ignore[arg-type]
        return cls(tuple(rows), source)

    @classmethod
    def load(cls, path: str | Path) -> "AlphaTable":
        path = Path(path)
        return cls.parse(path.read_text(encoding="utf-8"), str(path))

    def lookup(self, distance_m: float, period: Period) -> float:
        km = distance_m / 1000.0
        for row in self.rows:
            if row.period == period and row.distance_km_min <= km < row.distance_km_max:
                return row.alpha
        raise ConfigurationError(f"no alpha for {km:.1f} km ({period}) in {self.source or 'alpha table'}")


__all__ = [
    "SPEED_OF_LIGHT_M_S",
    "EARTH_RADIUS_M",
    "FD_TAPS",
    "FD_KAISER_BETA",
    "FD_EDGE_SAMPLES",
    "SkywaveParams",
    "NoiseParams",
    "skywave_delay",
    "ionosphere_height_for_delay",
    "great_circle_distance",
    "fractional_delay",
    "superpose_delayed",
    "apply_skywave",
    "eta_beta_closed_form",
    "eta_beta_literal",
    "add_awgn",
    "AlphaRow",
    "AlphaTable",
]
