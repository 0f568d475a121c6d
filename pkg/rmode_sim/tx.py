"""Transmit side: payload bits, continuous-phase MSK, the two CW ranging tones
and their composite.

The MSK waveform is produced by phase accumulation: the phase at every bit
boundary is carried forward exactly (in cycles, reduced modulo one) and the
phase inside a bit advances at the bit's keyed frequency, so continuity across
boundaries holds by construction. The I/Q closed form and the per-bit tone form
are kept as independent reference waveforms for verification.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict

from rmode_sim import prng
from rmode_sim.core import SignalBuffer, add_signals, sample_count
from rmode_sim.errors import ConfigurationError, DomainError, UnderrunError, Violation

MF_BAND_HZ = (285_000.0, 325_000.0)
STANDARD_DATA_RATES = (100.0, 200.0)
CW_OFFSET_HZ = 250.0
# 50% MSK, 25% per tone: b_cw = b_msk / sqrt(2)
DEFAULT_CW_AMPLITUDE = math.sqrt(0.5)


class TransmitterConfig(BaseModel):
    """Beacon transmitter parameters.

    ``allow_nonstandard`` lifts the MF band and data-rate rules for
    experiments outside the DGNSS allocation.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    carrier_freq_hz: float = 287_000.0
    data_rate_bps: float = 100.0
    amp_msk: float = 1.0
    amp_cw1: float = DEFAULT_CW_AMPLITUDE
    amp_cw2: float = DEFAULT_CW_AMPLITUDE
    phase_cw1_rad: float = 0.0
    phase_cw2_rad: float = 0.0
    initial_inphase_bit: int = 1
    nominal_tx_power_w: float = 150_000.0
    allow_nonstandard: bool = False

    @property
    def bit_period_s(self) -> float:
        return 1.0 / self.data_rate_bps

    @property
    def f0_hz(self) -> float:
        """Space frequency, f_c - 1/(4T)."""
        return self.carrier_freq_hz - self.data_rate_bps / 4.0

    @property
    def f1_hz(self) -> float:
        """Mark frequency, f_c + 1/(4T)."""
        return self.carrier_freq_hz + self.data_rate_bps / 4.0

    def cw_freq_hz(self, which: int) -> float:
        if which == 1:
            return self.carrier_freq_hz - CW_OFFSET_HZ
        if which == 2:
            return self.carrier_freq_hz + CW_OFFSET_HZ
        raise DomainError(f"CW tone index must be 1 or 2, got {which!r}")

    def cw_amplitude(self, which: int) -> float:
        self.cw_freq_hz(which)
        return self.amp_cw1 if which == 1 else self.amp_cw2

    def cw_phase(self, which: int) -> float:
        self.cw_freq_hz(which)
        return self.phase_cw1_rad if which == 1 else self.phase_cw2_rad

    @property
    def min_sample_rate_hz(self) -> float:
        return 2.0 * (self.carrier_freq_hz + 10.0 * self.data_rate_bps)

    def power_split(self) -> dict[str, float]:
        """Share of total transmitted power carried by each component."""
        powers = {
            "msk": self.amp_msk**2 / 2.0,
            "cw1": self.amp_cw1**2 / 2.0,
            "cw2": self.amp_cw2**2 / 2.0,
        }
        total = sum(powers.values())
        if total == 0:
            return {name: 0.0 for name in powers}
        return {name: p / total for name, p in powers.items()}

    def violations(self, prefix: str = "transmitter") -> list[Violation]:
        out: list[Violation] = []
        lo, hi = MF_BAND_HZ
        f_c = self.carrier_freq_hz
        if not (math.isfinite(f_c) and f_c > 0):
            out.append(Violation(f"{prefix}.carrier_freq_hz", f_c, "must be positive and finite"))
        elif not self.allow_nonstandard and not (lo <= f_c <= hi):
            out.append(Violation(
                f"{prefix}.carrier_freq_hz", f_c,
                f"must lie in the MF DGNSS band [{lo:.0f}, {hi:.0f}] Hz (set allow_nonstandard to override)",
            ))
        rate = self.data_rate_bps
        if not (math.isfinite(rate) and rate > 0):
            out.append(Violation(f"{prefix}.data_rate_bps", rate, "must be positive and finite"))
        elif not self.allow_nonstandard and rate not in STANDARD_DATA_RATES:
            out.append(Violation(
                f"{prefix}.data_rate_bps", rate,
                "must be 100 or 200 bps (set allow_nonstandard to override)",
            ))
        for name in ("amp_msk", "amp_cw1", "amp_cw2"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                out.append(Violation(f"{prefix}.{name}", value, "must be finite and >= 0"))
        for name in ("phase_cw1_rad", "phase_cw2_rad"):
            value = getattr(self, name)
            if not math.isfinite(value):
                out.append(Violation(f"{prefix}.{name}", value, "must be finite"))
        if self.initial_inphase_bit not in (-1, 1):
            out.append(Violation(f"{prefix}.initial_inphase_bit", self.initial_inphase_bit, "must be +1 or -1"))
        if not (math.isfinite(self.nominal_tx_power_w) and self.nominal_tx_power_w >= 0):
            out.append(Violation(f"{prefix}.nominal_tx_power_w", self.nominal_tx_power_w, "must be finite and >= 0"))
        return out

    def sample_rate_violations(self, sample_rate: float, field_name: str = "sample_rate_hz") -> list[Violation]:
        if not (math.isfinite(sample_rate) and sample_rate > self.min_sample_rate_hz):
            return [Violation(
                field_name, sample_rate,
                f"must exceed 2*(f_c + 10/T) = {self.min_sample_rate_hz:.0f} Hz",
            )]
        return []

    def require_sample_rate(self, sample_rate: float) -> None:
        problems = self.sample_rate_violations(sample_rate)
        if problems:
            raise ConfigurationError(str(problems[0]))


@dataclass(frozen=True, eq=False)
class BitStream:
    """Payload bits plus, once mapped, their in-phase / quadrature split."""

    bits: NDArray[np.uint8]
    seed: int
    i_bits: NDArray[np.int8] = field(default_factory=lambda: np.zeros(0, dtype=np.int8))
    q_bits: NDArray[np.int8] = field(default_factory=lambda: np.zeros(0, dtype=np.int8))

    def __post_init__(self) -> None:
        for name, dtype in (("bits", np.uint8), ("i_bits", np.int8), ("q_bits", np.int8)):
            arr = np.array(getattr(self, name), dtype=dtype, copy=True).reshape(-1)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return int(self.bits.size)

    @property
    def is_mapped(self) -> bool:
        return self.i_bits.size > 0


@dataclass(frozen=True, eq=False)
class MskSymbolStates:
    """Per-bit-interval symbols of the I/Q form: d_k = -I_k Q_k, Phi_k = (pi/2)(1 - I_k)."""

    d: NDArray[np.int8]
    i: NDArray[np.int8]
    q: NDArray[np.int8]

    @property
    def phase_rad(self) -> NDArray[np.float64]:
        return (np.pi / 2.0) * (1 - self.i.astype(np.float64))


def generate_bits(seed: int, n: int) -> BitStream:
    """``n`` payload bits from the MSB of successive splitmix64 outputs."""
    if n < 0:
        raise DomainError(f"bit count must be >= 0, got {n}")
    return BitStream(prng.random_bits(seed, n), prng.normalize_seed(seed))


def map_bits_to_iq(bits: BitStream) -> BitStream:
    """Even-indexed bits feed I, odd-indexed bits feed Q, bit b -> 1 - 2b.

    An odd-length payload pads Q with +1.
    """
    if len(bits) == 0:
        raise DomainError("cannot map an empty bit stream")
    symbols = 1 - 2 * bits.bits.astype(np.int8)
    i_bits = symbols[0::2]
    q_bits = symbols[1::2]
    if q_bits.size < i_bits.size:
        q_bits = np.concatenate([q_bits, np.ones(1, dtype=np.int8)])
    return BitStream(bits.bits, bits.seed, i_bits, q_bits)


def msk_symbol_states(bits: BitStream | NDArray[np.uint8], initial_inphase_bit: int = 1) -> MskSymbolStates:
    """I/Q symbols per bit interval implied by continuous-phase keying.

    Bit 1 keys f_1 (d_k = +1) and bit 0 keys f_0 (d_k = -1). Carrying phase
    continuity through every boundary gives
    Phi_k = Phi_0 + (pi/2) * (sum_{j<k} d_j - k d_k), always 0 or pi.
    """
    raw = bits.bits if isinstance(bits, BitStream) else np.asarray(bits, dtype=np.uint8)
    d = 2 * raw.astype(np.int64) - 1
    k = np.arange(d.size, dtype=np.int64)
    prior = np.concatenate([np.zeros(1, dtype=np.int64), np.cumsum(d)[:-1]]) if d.size else d
    half_turns = (prior - k * d) // 2 + (0 if initial_inphase_bit == 1 else 1)
    i_sym = np.where(half_turns % 2 == 0, 1, -1)
    q_sym = -d * i_sym
    return MskSymbolStates(d.astype(np.int8), i_sym.astype(np.int8), q_sym.astype(np.int8))


def _bit_schedule(bits: BitStream, cfg: TransmitterConfig, sample_rate: float, duration_s: float):
    cfg.require_sample_rate(sample_rate)
    n = sample_count(duration_s, sample_rate)
    idx = np.arange(n, dtype=np.float64)
    rate = cfg.data_rate_bps
    k = np.floor_divide(idx * rate, sample_rate).astype(np.int64)
    needed = int(k[-1]) + 1 if n else 0
    if needed > len(bits):
        raise UnderrunError(
            f"{duration_s} s at {rate} bps needs {needed} bits, only {len(bits)} provided"
        )
    keyed = np.where(bits.bits[:needed] == 1, cfg.f1_hz, cfg.f0_hz)
    return idx, k, keyed


def _boundary_cycles(keyed: NDArray[np.float64], rate: float, initial_inphase_bit: int) -> NDArray[np.float64]:
    # phase (in cycles) at the start of every bit, reduced modulo one
    phi0 = 0.0 if initial_inphase_bit == 1 else 0.5
    per_bit = np.mod(keyed / rate, 1.0)
    carried = np.concatenate([np.zeros(1), np.cumsum(per_bit)[:-1]]) if keyed.size else keyed
    return np.mod(phi0 + carried, 1.0)


def msk_modulate(bits: BitStream, cfg: TransmitterConfig, sample_rate: float, duration_s: float) -> SignalBuffer:
    """Real passband MSK waveform ``b_msk cos(theta[n])`` of ``duration_s`` seconds."""
    idx, k, keyed = _bit_schedule(bits, cfg, sample_rate, duration_s)
    rate = cfg.data_rate_bps
    start = _boundary_cycles(keyed, rate, cfg.initial_inphase_bit)
    since_boundary = (idx * rate - k * sample_rate) / (sample_rate * rate)
    cycles = np.mod(start[k] + keyed[k] * since_boundary, 1.0)
    samples = cfg.amp_msk * np.cos(2.0 * np.pi * cycles)
    return SignalBuffer(samples, sample_rate, 0.0)


def msk_reference_waveform(
    bits: BitStream,
    cfg: TransmitterConfig,
    sample_rate: float,
    duration_s: float,
    form: Literal["iq", "fsk"] = "iq",
) -> SignalBuffer:
    """Direct evaluation of a closed form of the MSK waveform.

    ``iq``:  b cos(2 pi f_c t + d_k pi t / (2T) + Phi_k)
    ``fsk``: b cos(2 pi f_k t + phi_k) with continuity phases phi_k
    """
    idx, k, keyed = _bit_schedule(bits, cfg, sample_rate, duration_s)
    rate = cfg.data_rate_bps
    if form == "iq":
        states = msk_symbol_states(bits.bits[: keyed.size], cfg.initial_inphase_bit)
        d = states.d.astype(np.float64)[k]
        i_sym = states.i.astype(np.float64)[k]
        cycles = (
            np.mod(cfg.carrier_freq_hz * idx, sample_rate) / sample_rate
            + d * (idx * rate) / (4.0 * sample_rate)
            + (1.0 - i_sym) / 4.0
        )
    elif form == "fsk":
        start = _boundary_cycles(keyed, rate, cfg.initial_inphase_bit)
        bit_index = np.arange(keyed.size, dtype=np.float64)
        continuity = np.mod(start - np.mod(keyed * bit_index / rate, 1.0), 1.0)
        cycles = np.mod(keyed[k] * idx, sample_rate) / sample_rate + continuity[k]
    else:
        raise DomainError(f"unknown MSK reference form {form!r}")
    samples = cfg.amp_msk * np.cos(2.0 * np.pi * np.mod(cycles, 1.0))
    return SignalBuffer(samples, sample_rate, 0.0)


def generate_cw(cfg: TransmitterConfig, which: int, sample_rate: float, duration_s: float) -> SignalBuffer:
    """CW ranging tone ``b_cw sin(2 pi (f_c -/+ 250) t + Phi_cw)``."""
    freq = cfg.cw_freq_hz(which)
    cfg.require_sample_rate(sample_rate)
    if not sample_rate > 2.0 * freq:
        raise ConfigurationError(f"sample_rate {sample_rate} Hz cannot represent a {freq} Hz tone")
    n = sample_count(duration_s, sample_rate)
    idx = np.arange(n, dtype=np.float64)
    cycles = np.mod(freq * idx, sample_rate) / sample_rate + cfg.cw_phase(which) / (2.0 * np.pi)
    samples = cfg.cw_amplitude(which) * np.sin(2.0 * np.pi * np.mod(cycles, 1.0))
    return SignalBuffer(samples, sample_rate, 0.0)


def compose_transmit(msk: SignalBuffer, cw1: SignalBuffer, cw2: SignalBuffer) -> SignalBuffer:
    """s(t) = s_msk(t) + s_cw1(t) + s_cw2(t)."""
    return add_signals(add_signals(msk, cw1), cw2)


__all__ = [
    "MF_BAND_HZ",
    "STANDARD_DATA_RATES",
    "CW_OFFSET_HZ",
    "DEFAULT_CW_AMPLITUDE",
    "TransmitterConfig",
    "BitStream",
    "MskSymbolStates",
    "generate_bits",
    "map_bits_to_iq",
    "msk_symbol_states",
    "msk_modulate",
    "msk_reference_waveform",
    "generate_cw",
    "compose_transmit",
]
