"""Single-carrier OOK baseline at the OFDM system's data rate.

The OOK receiver is intentionally simple: per-bit integrate-and-threshold
with no equalizer, so multipath ISI is left in.  That is the point of the
baseline -- its positioning accuracy collapses near walls exactly because
nothing mitigates the dispersed channel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class OokParams:
    power_one: float = 5.0     # W, optical level for a 1 bit
    power_zero: float = 3.0    # W, optical level for a 0 bit
    bit_rate: float = 25e6     # bits/s
    n_training_bits: int = 64

    def __post_init__(self):
        if not self.power_one > self.power_zero >= 0.0:
            raise ValueError("require power_one > power_zero >= 0")
        if self.bit_rate <= 0:
            raise ValueError("bit_rate must be positive")
        if self.n_training_bits < 1:
            raise ValueError("n_training_bits must be >= 1")

    def samples_per_bit(self, sample_rate: float) -> int:
        spb = sample_rate / self.bit_rate
        if abs(spb - round(spb)) > 1e-9 or round(spb) < 1:
            raise ValueError(
                f"sample_rate {sample_rate} is not an integer multiple of bit_rate")
        return int(round(spb))


def ook_modulate(bits: np.ndarray, params: OokParams, sample_rate: float) -> np.ndarray:
    """Rectangular NRZ optical waveform: power_one / power_zero per bit."""
    bits = np.asarray(bits, dtype=np.int64)
    if len(bits) == 0:
        raise ValueError("empty bit sequence")
    levels = np.where(bits == 1, params.power_one, params.power_zero)
    return np.repeat(levels, params.samples_per_bit(sample_rate))


def matched_filter(received: np.ndarray, params: OokParams,
                   sample_rate: float) -> np.ndarray:
    """Per-bit integration: average the samples within each bit period."""
    spb = params.samples_per_bit(sample_rate)
    n_bits = len(received) // spb
    return np.asarray(received[: n_bits * spb], dtype=np.float64).reshape(n_bits, spb).mean(axis=1)


def ook_estimate_dc_gain(received: np.ndarray, training_bits: np.ndarray,
                         params: OokParams, sample_rate: float,
                         calibration: float = 1.0) -> float:
    """Mean-power channel gain estimate over the training span.

    `received` must be aligned so its first sample is the first training
    bit's first sample.  `calibration` aggregates the known link constants
    (responsivity, transmit/receive scaling); dividing by it converts the
    electrical ratio to an optical DC gain.
    """
    training_bits = np.asarray(training_bits, dtype=np.int64)
    filtered = matched_filter(received, params, sample_rate)
    if len(filtered) < len(training_bits):
        raise ValueError("received signal shorter than the training span")
    sent_mean = float(np.where(training_bits == 1, params.power_one,
                               params.power_zero).mean())
    if sent_mean == 0.0:
        raise ValueError("zero transmitted mean over the training span")
    return float(filtered[: len(training_bits)].mean()) / (calibration * sent_mean)


def ook_threshold(mu_zero: float, mu_one: float) -> float:
    """Decision threshold between the filtered levels for 0 and 1 bits."""
    if not mu_one > mu_zero:
        raise ValueError("threshold ordering: mean level for 1 must exceed 0")
    return 0.5 * (mu_zero + mu_one)


def ook_detect(received: np.ndarray, threshold: float, params: OokParams,
               sample_rate: float) -> np.ndarray:
    """Per-bit integrate-and-threshold detection."""
    filtered = matched_filter(received, params, sample_rate)
    return (filtered > threshold).astype(np.int64)


def training_bits(params: OokParams, stream: int = 0) -> np.ndarray:
    """Fixed pseudo-random training pattern, known a priori at the receiver."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([0x00C0DE, stream])))
    return rng.integers(0, 2, size=params.n_training_bits)
