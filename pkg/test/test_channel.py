import math
from decimal import Decimal, getcontext

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rmode_sim.analysis import estimate_snr, estimate_tone
from rmode_sim.channel import (
    EARTH_RADIUS_M,
    FD_EDGE_SAMPLES,
    SPEED_OF_LIGHT_M_S,
    AlphaTable,
    NoiseParams,
    SkywaveParams,
    add_awgn,
    apply_skywave,
    eta_beta_closed_form,
    eta_beta_literal,
    fractional_delay,
    great_circle_distance,
    ionosphere_height_for_delay,
    skywave_delay,
    superpose_delayed,
)
from rmode_sim.core import SignalBuffer, scale_signal
from rmode_sim.errors import ConfigurationError, DegenerateSignalError, DomainError, SizeError

FS = 2_048_000.0
F_TONE = 287_000.0
OMEGA = 2 * math.pi * F_TONE


def tone(amplitude=1.0, freq=F_TONE, duration=0.1, phase=0.0, fs=FS):
    n = int(round(duration * fs))
    t = np.arange(n) / fs
    return SignalBuffer(amplitude * np.sin(2 * math.pi * freq * t + phase), fs)


def delay_for_angle(angle: float, distance_m: float = 210_000.0) -> float:
    """t_d of a real path geometry whose omega * t_d equals ``angle`` modulo 2 pi.

    The reflection height is solved for a target near 220 us, then the delay
    is recomputed from that height.
    """
    target = (angle + 2 * math.pi * 63) / OMEGA
    h = ionosphere_height_for_delay(target, distance_m)
    return skywave_delay(SkywaveParams(ionosphere_height_m=h, ground_distance_m=distance_m))


class TestSkywaveDelay:
    def test_geomundo_anchor(self):
        getcontext().prec = 50
        h, d, c = Decimal(90_000), Decimal(210_000), Decimal(299_792_458)
        oracle = ((4 * h * h + d * d).sqrt() - d) / c
        t_d = skywave_delay(SkywaveParams(ionosphere_height_m=90_000, ground_distance_m=210_000))
        assert abs(Decimal(t_d) - oracle) < Decimal("1e-12")
        assert t_d * 1e6 == pytest.approx(222.10, abs=0.01)

    def test_zero_distance(self):
        t_d = skywave_delay(SkywaveParams(ionosphere_height_m=90_000, ground_distance_m=0))
        assert t_d == pytest.approx(2 * 90_000 / SPEED_OF_LIGHT_M_S, rel=1e-15)
        assert t_d * 1e6 == pytest.approx(600.42, abs=0.01)

    def test_invalid_params(self):
        with pytest.raises(ConfigurationError):
            skywave_delay(SkywaveParams(ionosphere_height_m=0.0))
        with pytest.raises(ConfigurationError):
            skywave_delay(SkywaveParams(attenuation_alpha=1.5))

    @given(
        st.floats(1e3, 1e6),
        st.floats(0.0, 2e6),
        st.floats(10.0, 1e5),
    )
    def test_monotone(self, h, d, step):
        base = skywave_delay(SkywaveParams(ionosphere_height_m=h, ground_distance_m=d))
        farther = skywave_delay(SkywaveParams(ionosphere_height_m=h, ground_distance_m=d + step))
        higher = skywave_delay(SkywaveParams(ionosphere_height_m=h + step, ground_distance_m=d))
        assert base >= 0
        assert farther < base
        assert higher > base

    @given(st.floats(1e-6, 1e-3), st.floats(0.0, 1e6))
    def test_height_for_delay_inverts(self, t_d, d):
        h = ionosphere_height_for_delay(t_d, d)
        assert skywave_delay(SkywaveParams(ionosphere_height_m=h, ground_distance_m=d)) == pytest.approx(t_d, rel=1e-9)

    def test_height_for_delay_domain(self):
        with pytest.raises(DomainError):
            ionosphere_height_for_delay(0.0, 1.0)


class TestGreatCircle:
    def test_coincident(self):
        assert great_circle_distance(34.0, 127.3, 34.0, 127.3) == 0.0

    def test_antipodal_equator(self):
        assert great_circle_distance(0, 0, 0, 180) == pytest.approx(math.pi * EARTH_RADIUS_M, abs=1e-6)
        assert great_circle_distance(0, 0, 0, 180) == pytest.approx(20_015_087, abs=1)

    def test_one_degree(self):
        assert great_circle_distance(0, 0, 0, 1) == pytest.approx(2 * math.pi * EARTH_RADIUS_M / 360, rel=1e-9)

    @pytest.mark.parametrize("args", [(91, 0, 0, 0), (0, 181, 0, 0), (0, 0, -90.5, 0), (0, 0, 0, float("nan"))])
    def test_out_of_range(self, args):
        with pytest.raises(DomainError):
            great_circle_distance(*args)


class TestFractionalDelay:
    def test_zero_delay_identity(self):
        x = tone()
        y = fractional_delay(x, 0.0)
        assert np.max(np.abs(y.samples - x.samples)) <= 1e-12
        assert y.start_time == x.start_time

    def test_integer_delay_is_exact_shift(self):
        x = tone()
        k = 455
        y = fractional_delay(x, k / FS)
        assert y.metadata["fractional_delay"]["interpolated"] is False
        assert np.array_equal(y.samples[k:], x.samples[:-k])
        assert not np.any(y.samples[:k])
        assert y.valid.start >= k

    def test_tone_phase_oracle(self):
        tau = 222.10e-6
        x = tone()
        y = fractional_delay(x, tau)
        info = y.metadata["fractional_delay"]
        assert (info["taps"], info["kaiser_beta"], info["window"]) == (129, 8.6, "kaiser")
        assert y.unreliable_head >= math.ceil(tau * FS) + FD_EDGE_SAMPLES
        assert y.unreliable_tail >= FD_EDGE_SAMPLES
        g = estimate_tone(x, F_TONE, y.valid)
        r = estimate_tone(y, F_TONE, y.valid)
        shift = math.remainder(r.phase_rad - g.phase_rad, 2 * math.pi)
        expected = math.remainder(-OMEGA * tau, 2 * math.pi)
        assert abs(math.remainder(shift - expected, 2 * math.pi)) < 1e-3
        assert r.amplitude == pytest.approx(g.amplitude, rel=1e-3)

    def test_composability(self):
        x = tone(duration=0.05)
        tau1, tau2 = 37.3 / FS, 101.61 / FS
        two_step = fractional_delay(fractional_delay(x, tau1), tau2)
        one_step = fractional_delay(x, tau1 + tau2)
        valid = slice(max(two_step.valid.start, one_step.valid.start), min(two_step.valid.stop, one_step.valid.stop))
        # each windowed-sinc stage carries its own passband ripple
        assert np.max(np.abs(two_step.samples[valid] - one_step.samples[valid])) < 5e-4

    def test_composability_with_whole_sample_step(self):
        x = tone(duration=0.05)
        tau1, tau2 = 37.3 / FS, 12 / FS
        two_step = fractional_delay(fractional_delay(x, tau1), tau2)
        one_step = fractional_delay(x, tau1 + tau2)
        valid = slice(max(two_step.valid.start, one_step.valid.start), min(two_step.valid.stop, one_step.valid.stop))
        assert np.max(np.abs(two_step.samples[valid] - one_step.samples[valid])) < 1e-6

    def test_errors(self):
        with pytest.raises(SizeError):
            fractional_delay(SignalBuffer(np.ones(100), FS), 1e-6)
        with pytest.raises(DomainError):
            fractional_delay(tone(), -1e-6)


class TestApplySkywave:
    def test_alpha_zero_is_transparent(self):
        x = tone()
        received, skywave = apply_skywave(x, SkywaveParams(attenuation_alpha=0.0))
        assert np.array_equal(received.samples, x.samples)
        assert not np.any(skywave.samples)

    def test_superposition_identity(self):
        x = tone()
        p = SkywaveParams()
        received, skywave = apply_skywave(x, p)
        delayed = fractional_delay(x, skywave_delay(p))
        assert np.array_equal(skywave.samples, scale_signal(delayed, p.attenuation_alpha).samples)
        assert np.array_equal(received.samples, x.samples + skywave.samples)
        assert received.start_time == x.start_time

    def test_linearity(self):
        # scaling by a power of two is exact, so the channel commutes with it bit for bit
        x = tone()
        p = SkywaveParams()
        lhs, _ = apply_skywave(scale_signal(x, 2.0), p)
        rhs = scale_signal(apply_skywave(x, p)[0], 2.0)
        np.testing.assert_array_max_ulp(lhs.samples, rhs.samples, maxulp=1)

    def test_linearity_general_factor(self):
        # other factors round differently inside the convolution; near zero crossings
        # that is thousands of ulp but still far below 1e-12 in absolute terms
        x = tone()
        p = SkywaveParams()
        lhs, _ = apply_skywave(scale_signal(x, 3.0), p)
        rhs = scale_signal(apply_skywave(x, p)[0], 3.0)
        np.testing.assert_allclose(lhs.samples, rhs.samples, rtol=0, atol=1e-12)

    def test_quadrature_delay_tone(self):
        x = tone(amplitude=1.0)
        received, _ = superpose_delayed(x, delay_for_angle(math.pi / 2), 0.3)
        g = estimate_tone(x, F_TONE, received.valid)
        r = estimate_tone(received, F_TONE, received.valid)
        assert r.amplitude / g.amplitude == pytest.approx(math.sqrt(1.09), rel=1e-3)
        assert math.remainder(r.phase_rad - g.phase_rad, 2 * math.pi) == pytest.approx(-math.atan(0.3), abs=1e-3)

    def test_oracle_grid(self):
        x = tone(duration=0.1)
        for alpha in (0.1, 0.3, 0.5, 0.8):
            for k in range(24):
                t_d = delay_for_angle(k * math.pi / 12)
                received, _ = superpose_delayed(x, t_d, alpha)
                g = estimate_tone(x, F_TONE, received.valid)
                r = estimate_tone(received, F_TONE, received.valid)
                eta, beta = eta_beta_closed_form(alpha, OMEGA, t_d)
                beta_meas = r.phase_rad - g.phase_rad
                assert abs(r.amplitude / g.amplitude - eta) / eta < 1e-3, (alpha, k)
                assert abs(math.remainder(beta_meas - beta, 2 * math.pi)) < 1e-3, (alpha, k)


class TestEtaBeta:
    def test_no_skywave(self):
        assert eta_beta_closed_form(0.0, OMEGA, 1e-4) == (1.0, 0.0)

    def test_destructive(self):
        eta, beta = eta_beta_closed_form(0.5, 1.0, math.pi)
        assert eta == pytest.approx(0.5, abs=1e-12)
        assert beta == pytest.approx(0.0, abs=1e-12)

    def test_quadrature(self):
        eta, beta = eta_beta_closed_form(0.3, 1.0, math.pi / 2)
        assert eta == pytest.approx(1.0440, abs=1e-4)
        assert beta == pytest.approx(-0.2915, abs=1e-4)

    def test_literal_form_differs_in_sign_conventions(self):
        eta, beta = eta_beta_literal(0.3, 1.0, math.pi / 2)
        assert eta == pytest.approx(math.sqrt(1.09))
        assert beta == pytest.approx(math.atan(0.3))
        eta_lit, _ = eta_beta_literal(0.5, 1.0, math.pi)
        assert eta_lit == pytest.approx(1.5)

    def test_beta_range(self):
        for k in range(48):
            _, beta = eta_beta_closed_form(1.0, 1.0, k * math.pi / 24)
            assert -math.pi < beta <= math.pi

    def test_alpha_domain(self):
        with pytest.raises(DomainError):
            eta_beta_closed_form(1.2, 1.0, 1.0)


class TestAwgn:
    def test_disabled_passthrough(self):
        x = tone()
        assert np.array_equal(add_awgn(x, NoiseParams(snr_db=math.inf)).samples, x.samples)
        assert NoiseParams(snr_db=None).snr_db == math.inf
        assert not NoiseParams().enabled

    def test_deterministic(self):
        x = tone(duration=0.01)
        a = add_awgn(x, NoiseParams(snr_db=10, seed=4))
        b = add_awgn(x, NoiseParams(snr_db=10, seed=4))
        c = add_awgn(x, NoiseParams(snr_db=10, seed=5))
        assert a.samples.tobytes() == b.samples.tobytes()
        assert not np.array_equal(a.samples, c.samples)

    @pytest.mark.parametrize("snr_db", [20.0, 0.0])
    def test_calibration(self, snr_db):
        x = tone(duration=1_000_000 / FS)
        noisy = add_awgn(x, NoiseParams(snr_db=snr_db, seed=11))
        assert abs(estimate_snr(x, noisy) - snr_db) <= 0.5

    def test_reference_power(self):
        x = tone(amplitude=0.5, duration=1_000_000 / FS)
        reference = tone(amplitude=1.0, duration=1_000_000 / FS)
        noisy = add_awgn(x, NoiseParams(snr_db=20.0, seed=3), reference=reference)
        noise_power = np.mean((noisy.samples - x.samples) ** 2)
        assert 10 * math.log10(0.5 / noise_power) == pytest.approx(20.0, abs=0.5)

    def test_whiteness(self):
        x = tone(duration=1_000_000 / FS)
        noise = add_awgn(x, NoiseParams(snr_db=0.0, seed=21)).samples - x.samples
        noise = noise - noise.mean()
        energy = np.dot(noise, noise)
        for lag in range(1, 11):
            assert abs(np.dot(noise[:-lag], noise[lag:]) / energy) < 0.01

    def test_degenerate_and_invalid(self):
        with pytest.raises(DegenerateSignalError):
            add_awgn(SignalBuffer.zeros(100, FS), NoiseParams(snr_db=10))
        with pytest.raises(SizeError):
            add_awgn(SignalBuffer.zeros(0, FS), NoiseParams(snr_db=10))
        with pytest.raises(ConfigurationError):
            add_awgn(tone(), NoiseParams(snr_db=float("nan")))


class TestAlphaTable:
    TEXT = """
    # distance_km_min, distance_km_max, period, alpha
    0, 100, day, 0.1
    100, 300, day, 0.2   # trailing comment
    100, 300, night, 0.6
    """

    def test_lookup(self):
        table = AlphaTable.parse(self.TEXT)
        assert len(table.rows) == 3
        assert table.lookup(210_000, "day") == 0.2
        assert table.lookup(210_000, "night") == 0.6
        assert table.lookup(100_000, "day") == 0.2
        with pytest.raises(ConfigurationError):
            table.lookup(500_000, "day")

    @pytest.mark.parametrize("bad", ["0, 100, day", "0, 100, dusk, 0.1", "100, 0, day, 0.1", "0, 100, day, 1.5", "a, b, day, 0.1"])
    def test_rejects_bad_rows(self, bad):
        with pytest.raises(ConfigurationError):
            AlphaTable.parse(bad)

    def test_shipped_table_loads(self):
        from rmode_sim.config.settings import settings

        table = AlphaTable.load(settings.alpha_table)
        assert 0.0 <= table.lookup(210_000, "night") <= 1.0
