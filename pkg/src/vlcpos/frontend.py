"""Electro-optical chain: LED transfer polynomial, channel convolution,
photodetection with AWGN, and electrical power scaling.

Electrical power uses a 1-Ohm reference throughout, so power = mean-square
amplitude and dBm = 10*log10(P / 1 mW).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ImpulseResponse

# Fifth-order fit through qualitative anchor points of a ~1 W white LED
# transfer curve: cut-in near 2.7 V, 0.35 W at 3.0 V, ~0.5 W at the 3.2 V
# bias, 0.7 W at 3.5 V, compressing toward 4.0 V.  Synthetic stand-in; the
# real device curve was never published, so treat these as configuration, not
# data.  Curvature at the bias is kept small so the nominal 5 dBm drive stays
# in the quasi-linear regime (high-order QAM decodes); large drive levels
# still run into the saturation knee and the clamp at v_max.
DEFAULT_LED_COEFFS = (
    -707.9368080485383,
    1038.470011680287,
    -608.6007649939462,
    178.00630044873796,
    -25.95980863150479,
    1.5097038888442642,
)


@dataclass
class LedModel:
    """Memoryless LED: optical power = poly(voltage), clamped to [v_min, v_max]."""

    poly_coeffs: tuple = DEFAULT_LED_COEFFS  # a0..a5, W per V^n
    bias_voltage: float = 3.2
    v_min: float = 3.0
    v_max: float = 4.0

    def __post_init__(self):
        if not self.v_min < self.v_max:
            raise ValueError("require v_min < v_max")
        if not self.v_min <= self.bias_voltage <= self.v_max:
            raise ValueError("bias_voltage outside [v_min, v_max]")
        grid = np.linspace(self.v_min, self.v_max, 1001)
        p = self._poly(grid)
        if np.any(np.diff(p) < -1e-12):
            raise ValueError("LED transfer must be monotone nondecreasing on [v_min, v_max]")
        if np.any(p < 0):
            raise ValueError("LED output must be nonnegative on [v_min, v_max]")

    def _poly(self, v):
        return np.polynomial.polynomial.polyval(v, self.poly_coeffs)

    @property
    def small_signal_slope(self) -> float:
        """dP/dV at the bias point, W/V."""
        deriv = np.polynomial.polynomial.polyder(np.asarray(self.poly_coeffs))
        return float(np.polynomial.polynomial.polyval(self.bias_voltage, deriv))

    @classmethod
    def linear(cls, slope: float = 0.5, bias_voltage: float = 3.2,
               bias_power: float = 0.5) -> "LedModel":
        """Affine diagnostic LED with a wide clamp range (never saturates in
        normal operation); p(bias) = bias_power, dP/dV = slope."""
        a0 = bias_power - slope * bias_voltage
        v_min = -a0 / slope if a0 < 0 else 0.0
        return cls(poly_coeffs=(a0, slope, 0.0, 0.0, 0.0, 0.0),
                   bias_voltage=bias_voltage, v_min=v_min, v_max=bias_voltage + 100.0)


@dataclass
class NoiseModel:
    """Receiver-referred AWGN.  `power_dbm` is total electrical noise power."""

    power_dbm: float = -10.0
    rng_seed: int = 0
    enabled: bool = True

    @property
    def variance(self) -> float:
        return dbm_to_watts(self.power_dbm)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts: float) -> float:
    return 10.0 * math.log10(watts) + 30.0


def electrical_power(samples: np.ndarray) -> float:
    """Mean-square power over a 1-Ohm reference."""
    samples = np.asarray(samples)
    return float(np.mean(samples * samples))


def led_transfer(voltages: np.ndarray, led: LedModel) -> np.ndarray:
    """Evaluate the LED polynomial; inputs outside [v_min, v_max] saturate."""
    v = np.clip(np.asarray(voltages, dtype=np.float64), led.v_min, led.v_max)
    return led._poly(v)


def resample_taps(ir: ImpulseResponse, sample_rate: float) -> np.ndarray:
    """Aggregate the impulse-response bins onto the signal sample grid.

    Every channel bin whose delay falls inside sample period k is summed into
    tap k, so the DC gain is preserved exactly.
    """
    g = ir.merged_bins()
    if len(g) == 0:
        return np.zeros(1)
    ts = 1.0 / sample_rate
    delays = ir.t0 + np.arange(len(g)) * ir.bin_width
    idx = np.floor(delays / ts).astype(np.int64)
    return np.bincount(idx, weights=g)


def apply_channel(samples: np.ndarray, ir: ImpulseResponse,
                  sample_rate: float) -> np.ndarray:
    """Linear convolution with the binned impulse response (full length)."""
    taps = resample_taps(ir, sample_rate)
    return np.convolve(np.asarray(samples, dtype=np.float64), taps)


def photodetect(optical: np.ndarray, responsivity: float,
                noise: NoiseModel) -> np.ndarray:
    """y = responsivity * p + w, with w zero-mean Gaussian of the configured
    electrical power.  A fresh generator is seeded per call, so a fixed seed
    reproduces the same noise sequence."""
    y = responsivity * np.asarray(optical, dtype=np.float64)
    if noise.enabled:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(noise.rng_seed)))
        y = y + rng.normal(0.0, math.sqrt(noise.variance), size=len(y))
    return y


def set_signal_power(samples: np.ndarray, target_dbm: float) -> np.ndarray:
    """Scale so the mean-square power (1-Ohm reference) equals the target."""
    return np.asarray(samples, dtype=np.float64) * power_scale(samples, target_dbm)


def power_scale(samples: np.ndarray, target_dbm: float) -> float:
    """The multiplier set_signal_power applies (needed by receiver calibration)."""
    p = electrical_power(samples)
    if p == 0.0:
        raise ValueError("cannot scale an all-zero signal")
    return math.sqrt(dbm_to_watts(target_dbm) / p)
