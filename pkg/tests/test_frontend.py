import math

import numpy as np
import pytest

from vlcpos.channel import ImpulseResponse
from vlcpos.frontend import (
    DEFAULT_LED_COEFFS,
    LedModel,
    NoiseModel,
    apply_channel,
    dbm_to_watts,
    electrical_power,
    led_transfer,
    photodetect,
    power_scale,
    resample_taps,
    set_signal_power,
    watts_to_dbm,
)


def single_bin_ir(gain, delay, bin_width=0.2e-9):
    idx = int(delay // bin_width)
    bins = np.zeros(idx + 1)
    bins[idx] = gain
    return ImpulseResponse(bin_width=bin_width, t0=0.0, bins_by_order=[bins])


class TestLedTransfer:
    def test_saturates_below_v_min(self):
        led = LedModel()
        lo = led_transfer(np.array([2.0]), led)[0]
        assert lo == pytest.approx(led_transfer(np.array([led.v_min]), led)[0])

    def test_saturates_above_v_max(self):
        led = LedModel()
        hi = led_transfer(np.array([9.0]), led)[0]
        assert hi == pytest.approx(led_transfer(np.array([led.v_max]), led)[0])

    def test_linear_model_is_affine(self):
        led = LedModel.linear(slope=0.5)
        v = np.linspace(2.5, 4.5, 7)
        p = led_transfer(v, led)
        np.testing.assert_allclose(np.diff(p) / np.diff(v), 0.5, rtol=1e-12)

    def test_default_power_at_bias_regression(self):
        # frozen once from the shipped coefficients
        led = LedModel()
        assert led_transfer(np.array([3.2]), led)[0] == pytest.approx(0.4951841193437758, rel=1e-12)

    def test_default_slope_at_bias(self):
        assert LedModel().small_signal_slope == pytest.approx(0.6942610300473007, rel=1e-9)

    def test_default_monotone_dense_grid(self):
        led = LedModel()
        v = np.linspace(led.v_min, led.v_max, 10_000)
        p = led_transfer(v, led)
        assert np.all(np.diff(p) >= 0)
        assert np.all(p >= 0)

    def test_non_monotone_rejected(self):
        with pytest.raises(ValueError):
            LedModel(poly_coeffs=(0.0, -1.0, 0.0, 0.0, 0.0, 0.0))

    def test_shipped_coefficient_anchors(self):
        led = LedModel()
        p = lambda v: led_transfer(np.array([v]), led)[0]
        assert p(3.0) == pytest.approx(0.35, abs=1e-9)
        assert p(3.5) == pytest.approx(0.70, abs=1e-9)
        assert len(DEFAULT_LED_COEFFS) == 6


class TestApplyChannel:
    def test_single_bin_scaling(self):
        ir = single_bin_ir(0.5, 0.0)
        x = np.array([1.0, 2.0, 3.0])
        np.testing.assert_allclose(apply_channel(x, ir, 50e6), 0.5 * x)

    def test_single_bin_delay(self):
        ir = single_bin_ir(0.5, 2.5 * 20e-9)  # lands in sample period 2
        x = np.array([1.0, 0.0, 0.0])
        out = apply_channel(x, ir, 50e6)
        np.testing.assert_allclose(out, [0, 0, 0.5, 0, 0])

    def test_two_path_hand_convolution(self):
        bins = np.zeros(101)
        bins[0] = 0.6
        bins[100] = 0.3  # 20 ns -> sample 1
        ir = ImpulseResponse(bin_width=0.2e-9, t0=0.0, bins_by_order=[bins])
        x = np.array([1.0, 2.0, 0.5])
        # hand convolution with taps [0.6, 0.3]
        expected = [0.6, 1.5, 0.9, 0.15]
        np.testing.assert_allclose(apply_channel(x, ir, 50e6), expected)

    def test_resampling_preserves_dc_gain(self, rng):
        bins = rng.uniform(0, 1e-6, 500)
        ir = ImpulseResponse(bin_width=0.2e-9, t0=0.0, bins_by_order=[bins])
        taps = resample_taps(ir, 50e6)
        assert taps.sum() == pytest.approx(bins.sum(), rel=1e-12)


class TestPhotodetect:
    def test_noise_power_minus_10_dbm(self):
        noise = NoiseModel(power_dbm=-10.0, rng_seed=3)
        assert noise.variance == pytest.approx(1e-4)
        w = photodetect(np.zeros(200_000), 1.0, noise)
        assert np.var(w) == pytest.approx(1e-4, rel=0.02)

    def test_zero_responsivity_pure_noise(self):
        noise = NoiseModel(rng_seed=5)
        y = photodetect(np.ones(1000), 0.0, noise)
        assert abs(np.mean(y)) < 5e-3

    def test_seed_reproducibility(self):
        noise = NoiseModel(rng_seed=11)
        y1 = photodetect(np.ones(100), 0.5, noise)
        y2 = photodetect(np.ones(100), 0.5, noise)
        np.testing.assert_array_equal(y1, y2)

    def test_disabled_noise(self):
        noise = NoiseModel(enabled=False)
        np.testing.assert_array_equal(photodetect(np.ones(10), 0.5, noise), 0.5 * np.ones(10))


class TestSignalPower:
    def test_snr_15_db_configuration(self):
        assert watts_to_dbm(dbm_to_watts(5.0)) == pytest.approx(5.0)
        assert 5.0 - (-10.0) == 15.0
        x = set_signal_power(np.sin(np.linspace(0, 40 * np.pi, 4096)), 5.0)
        assert watts_to_dbm(electrical_power(x)) == pytest.approx(5.0, abs=1e-9)

    @pytest.mark.parametrize("target,snr", [(5.0, 15.0), (-10.0, 0.0), (20.0, 30.0)])
    def test_snr_arithmetic(self, target, snr):
        assert target - (-10.0) == snr

    def test_zero_signal_rejected(self):
        with pytest.raises(ValueError):
            set_signal_power(np.zeros(16), 5.0)

    def test_measured_output_snr_matches_configured(self, rng):
        # scale a zero-mean signal to 5 dBm, add -10 dBm noise: SNR = 15 dB
        signal = set_signal_power(rng.normal(size=100_000), 5.0)
        noise = NoiseModel(power_dbm=-10.0, rng_seed=17)
        y = photodetect(signal, 1.0, noise)
        w = y - signal
        measured = 10 * math.log10(np.var(signal) / np.var(w))
        assert measured == pytest.approx(15.0, abs=0.2)


class TestLinearity:
    def test_superposition_through_linear_chain(self, rng):
        led = LedModel.linear(slope=0.5)
        ir = single_bin_ir(2e-5, 7e-9)
        bias = led.bias_voltage
        a = rng.uniform(0, 0.1, 256)
        b = rng.uniform(0, 0.1, 256)

        def chain(sig):
            optical = led_transfer(bias + sig, led)
            return photodetect(apply_channel(optical, ir, 50e6), 0.54,
                               NoiseModel(enabled=False))

        lhs = chain(a + b)
        rhs = chain(a) + chain(b) - chain(np.zeros(256))
        np.testing.assert_allclose(lhs, rhs, rtol=1e-9, atol=1e-15)
