"""ACO-OFDM modulation, demodulation and training-based channel gain estimation.

Only the odd subcarriers carry data.  Mapping N/4 complex symbols I onto the
N-point subcarrier vector

    S = [0, I0, 0, I1, ..., 0, I_{N/4-1}, 0, I*_{N/4-1}, 0, ..., 0, I*_0]

gives a real IDFT output whose negative samples can be clipped to zero: the
clipping distortion lands entirely on the even subcarriers while every odd
subcarrier is scaled by exactly one half.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class OfdmParams:
    n_subcarriers: int = 512
    qam_order: int = 4
    cp_len: int | None = None      # None: derived from the channel delay spread
    n_training_symbols: int = 1
    sample_rate: float = 50e6

    def __post_init__(self):
        n = self.n_subcarriers
        if n < 8 or (n & (n - 1)) != 0:
            raise ValueError("n_subcarriers must be a power of two >= 8")
        m = self.qam_order
        if m not in (4, 16, 64):
            raise ValueError("qam_order must be one of 4, 16, 64")
        if self.cp_len is not None and self.cp_len < 0:
            raise ValueError("cp_len must be >= 0")
        if self.n_training_symbols < 1:
            raise ValueError("n_training_symbols must be >= 1")

    @property
    def data_symbols_per_frame(self) -> int:
        return self.n_subcarriers // 4

    @property
    def bits_per_qam_symbol(self) -> int:
        return int(math.log2(self.qam_order))


@dataclass
class OfdmFrame:
    """One ACO-OFDM symbol: data, mapped subcarriers and transmit samples."""

    data: np.ndarray      # N/4 complex symbols
    mapped: np.ndarray    # N subcarriers
    samples: np.ndarray   # N + cp_len real, nonnegative


@dataclass
class GainEstimate:
    """Scalar channel gain from training symbols.

    `h_tilde` is the mean magnitude ratio of received to sent training
    symbols; `kappa` is the calibration constant (clipping factor 1/2,
    photodetector responsivity, LED small-signal slope, and the known
    transmit/receive scaling) that converts it to an optical DC gain.
    """

    h_tilde: float
    kappa: float
    optical_gain: float

    def __post_init__(self):
        if self.h_tilde < 0:
            raise ValueError("h_tilde must be >= 0")
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")


def _gray_to_index(g: np.ndarray) -> np.ndarray:
    """Inverse Gray code (vectorized, small words)."""
    out = g.copy()
    shift = g >> 1
    while shift.any():
        out = out ^ shift
        shift = shift >> 1
    return out


def _index_to_gray(i: np.ndarray) -> np.ndarray:
    return i ^ (i >> 1)


def _pam_scale(m_order: int) -> float:
    # unit average energy for square M-QAM built from two sqrt(M)-PAM axes
    return math.sqrt(3.0 / (2.0 * (m_order - 1)))


def map_bits_to_qam(bits: np.ndarray, m_order: int) -> np.ndarray:
    """Gray-coded square M-QAM with unit average symbol energy.

    The first half of each symbol's bits selects the in-phase level, the
    second half the quadrature level.
    """
    bits = np.asarray(bits, dtype=np.int64)
    k = int(round(math.log2(m_order)))
    if 2 ** k != m_order or k % 2 != 0:
        raise ValueError("m_order must be a square QAM order (4, 16, 64, ...)")
    if len(bits) % k != 0:
        raise ValueError(f"bit count {len(bits)} not divisible by log2(M)={k}")
    kh = k // 2
    groups = bits.reshape(-1, k)
    weights = 1 << np.arange(kh - 1, -1, -1)
    gi = (groups[:, :kh] * weights).sum(axis=1)
    gq = (groups[:, kh:] * weights).sum(axis=1)
    levels = 2 * _gray_to_index(gi) - (2 ** kh - 1), 2 * _gray_to_index(gq) - (2 ** kh - 1)
    scale = _pam_scale(m_order)
    return scale * (levels[0] + 1j * levels[1])


def demap_qam_to_bits(symbols: np.ndarray, m_order: int) -> np.ndarray:
    """Hard-decision demapping, inverse of map_bits_to_qam."""
    k = int(math.log2(m_order))
    kh = k // 2
    n_lv = 2 ** kh
    scale = _pam_scale(m_order)

    def axis_bits(vals):
        idx = np.round((vals / scale + (n_lv - 1)) / 2.0).astype(np.int64)
        idx = np.clip(idx, 0, n_lv - 1)
        g = _index_to_gray(idx)
        return ((g[:, None] >> np.arange(kh - 1, -1, -1)) & 1)

    bi = axis_bits(np.real(symbols))
    bq = axis_bits(np.imag(symbols))
    return np.concatenate([bi, bq], axis=1).reshape(-1)


def hermitian_map(data: np.ndarray) -> np.ndarray:
    """Place N/4 symbols on the odd subcarriers with Hermitian symmetry."""
    data = np.asarray(data, dtype=np.complex128)
    n = 4 * len(data)
    if len(data) == 0:
        raise ValueError("empty data block")
    s = np.zeros(n, dtype=np.complex128)
    odd = np.arange(1, n // 2, 2)
    s[odd] = data
    s[n - odd] = np.conj(data)
    return s


def extract_odd_subcarriers(spectrum: np.ndarray) -> np.ndarray:
    n = len(spectrum)
    return spectrum[1 : n // 2 : 2]


def aco_modulate(data: np.ndarray, params: OfdmParams) -> np.ndarray:
    """IDFT the mapped subcarriers, prepend the cyclic prefix, clip at zero."""
    if len(data) != params.data_symbols_per_frame:
        raise ValueError(
            f"expected {params.data_symbols_per_frame} data symbols, got {len(data)}")
    if params.cp_len is None:
        raise ValueError("cp_len has not been resolved")
    x = np.fft.ifft(hermitian_map(data)).real
    if params.cp_len > 0:
        x = np.concatenate([x[-params.cp_len:], x])
    return np.maximum(x, 0.0)


def build_frame(data: np.ndarray, params: OfdmParams) -> OfdmFrame:
    return OfdmFrame(data=np.asarray(data, dtype=np.complex128),
                     mapped=hermitian_map(data),
                     samples=aco_modulate(data, params))


def aco_demodulate(samples: np.ndarray, params: OfdmParams) -> np.ndarray:
    """Drop the CP, DFT, and return the odd-subcarrier symbols (unequalized)."""
    if params.cp_len is None:
        raise ValueError("cp_len has not been resolved")
    n = params.n_subcarriers
    if len(samples) != n + params.cp_len:
        raise ValueError(f"expected {n + params.cp_len} samples, got {len(samples)}")
    spectrum = np.fft.fft(np.asarray(samples, dtype=np.float64)[params.cp_len:])
    return extract_odd_subcarriers(spectrum)


def equalize(received: np.ndarray, channel_gains: np.ndarray) -> np.ndarray:
    """Single-tap equalizer: divide each subcarrier by its channel gain."""
    received = np.asarray(received)
    channel_gains = np.asarray(channel_gains)
    if received.shape != channel_gains.shape:
        raise ValueError("received/gain length mismatch")
    if np.any(channel_gains == 0):
        raise ValueError("zero channel gain on an active subcarrier")
    return received / channel_gains


def estimate_dc_gain(received: np.ndarray, sent: np.ndarray, kappa: float) -> GainEstimate:
    """Mean magnitude ratio of received to sent training symbols.

    `received` and `sent` hold one row per training symbol (or a single
    vector).  The per-symbol attenuation |received/sent| is averaged over the
    frame's N/4 symbols and over all training symbols; dividing by `kappa`
    yields the optical channel DC gain.
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    received = np.atleast_2d(np.asarray(received))
    sent = np.atleast_2d(np.asarray(sent))
    if received.shape != sent.shape:
        raise ValueError("received/sent shape mismatch")
    if np.any(sent == 0):
        raise ValueError("zero-valued training symbol")
    h_tilde = float(np.mean(np.abs(received / sent)))
    return GainEstimate(h_tilde=h_tilde, kappa=kappa, optical_gain=h_tilde / kappa)


def training_symbols(params: OfdmParams, stream: int = 0) -> np.ndarray:
    """Fixed pseudo-random unit-energy QPSK training block, one row per
    training symbol.  Known a priori at the receiver."""
    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence([0x0FDA11, stream, params.n_subcarriers])))
    n = params.data_symbols_per_frame
    quad = rng.integers(0, 4, size=(params.n_training_symbols, n))
    return (2 * (quad & 1) - 1 + 1j * (2 * (quad >> 1) - 1)) / math.sqrt(2.0)
