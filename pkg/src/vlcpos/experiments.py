"""Experiment orchestration: TDM slots, grid sweeps, summaries and CSV output.

Link budget convention
----------------------
The transmit waveform is scaled to `target_power_dbm` (1-Ohm electrical).
The receiver front end applies a fixed calibration gain

    G_rx = 1 / (responsivity * LED_slope * H_ref)        (OFDM)
    G_rx = 1 / (responsivity * H_ref)                    (OOK, direct drive)

where H_ref is a configured reference channel gain (default: the weakest
corner-of-room LOS link).  Receiver noise of `noise.power_dbm` is added after
this gain, so the configured SNR (target - noise power) is realized at the
calibration point and every link sees it scaled by (H_k / H_ref)^2.  All
calibration factors are known to the receiver and folded into the gain
estimate's kappa, so the positioning math recovers true optical gains.

Every random stream (ray batches, per-slot noise) derives from the master
seed plus the link's position and luminaire index, so runs are reproducible
and grid points may be computed in any order.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import (
    ImpulseResponse,
    dc_gain,
    rms_delay_spread,
    simulate_impulse_response,
)
from .config import ExperimentConfig
from .frontend import (
    NoiseModel,
    apply_channel,
    led_transfer,
    photodetect,
    power_scale,
    resample_taps,
)
from .geometry import Luminaire, ReceiverSpec, Vec3
from .ofdm import (
    GainEstimate,
    aco_demodulate,
    aco_modulate,
    demap_qam_to_bits,
    equalize,
    estimate_dc_gain,
    map_bits_to_qam,
    training_symbols,
)
from .ook import (
    matched_filter,
    ook_estimate_dc_gain,
    ook_modulate,
    ook_threshold,
    training_bits,
)
from .positioning import Anchor, estimate_distance, horizontal_range, solve_position

ID_BITS = 8
_WARMUP_BITS = np.array([1, 0, 1, 0, 1, 0, 1, 0])


def _derive_seed(*parts: int) -> int:
    seq = np.random.SeedSequence([int(p) for p in parts])
    return int(seq.generate_state(1, np.uint64)[0])


def _position_key(x: float, y: float) -> tuple[int, int]:
    return int(round(x * 1e6)), int(round(y * 1e6))


def id_to_bits(id_code: int) -> np.ndarray:
    if not 0 <= id_code < 2 ** ID_BITS:
        raise ValueError(f"id_code {id_code} does not fit in {ID_BITS} bits")
    return (id_code >> np.arange(ID_BITS - 1, -1, -1)) & 1


def bits_to_id(bits: np.ndarray) -> int:
    return int((np.asarray(bits) << np.arange(ID_BITS - 1, -1, -1)).sum())


def majority_vote(bit_rows: np.ndarray) -> np.ndarray:
    """Per-column strict majority over repeated transmissions."""
    votes = bit_rows.sum(axis=0)
    return (2 * votes > len(bit_rows)).astype(np.int64)


@dataclass
class SlotResult:
    decoded_id: int | None
    gain: GainEstimate


@dataclass
class PointRecord:
    x: float
    y: float
    error: float | None
    clamped_anchors: int
    unresolved: bool
    gains: list[float]
    x_hat: float | None = None
    y_hat: float | None = None
    residual: float | None = None


@dataclass
class Summary:
    corner_m: float
    edge_m: float
    center_m: float
    rms_rect_m: float
    rms_total_m: float
    modulation: str
    n_subcarriers: int
    qam_order: int
    power_dbm: float
    seed: int


@dataclass
class ErrorMap:
    points: list[PointRecord]
    config: ExperimentConfig
    cp_len: int
    summary: Summary = field(init=False)

    def __post_init__(self):
        self.summary = summarize(self)


class ChannelCache:
    """Memoizes impulse responses by link geometry, tracing parameters and
    seed, so repeated sweeps (parameter comparisons, OFDM vs OOK) reuse the
    same channels."""

    def __init__(self):
        self._store: dict = {}

    def _key(self, config: ExperimentConfig, lum_idx: int, x: float, y: float):
        rt, room, rcv = config.raytrace, config.room, config.receiver
        lum = config.luminaires[lum_idx]
        return (
            _position_key(x, y), lum.position.as_tuple(), lum.lambertian_mode,
            room.length, room.width, room.height,
            room.rho_wall, room.rho_ceiling, room.rho_floor,
            rcv.position.z, rcv.area, rcv.fov_deg, rcv.refractive_index,
            rcv.optical_filter_gain,
            rt.max_bounces, rt.patch_side, rt.rays_per_source, rt.bin_width,
            config.rng_seed, lum_idx,
        )

    def link_seed(self, config: ExperimentConfig, lum_idx: int, x: float, y: float) -> int:
        kx, ky = _position_key(x, y)
        return _derive_seed(config.rng_seed, 0xC4A7, lum_idx, kx, ky)

    def get_or_simulate(self, config: ExperimentConfig, lum_idx: int,
                        x: float, y: float) -> ImpulseResponse:
        key = self._key(config, lum_idx, x, y)
        ir = self._store.get(key)
        if ir is None:
            rcv = replace(config.receiver,
                          position=Vec3(x, y, config.receiver.position.z))
            params = replace(config.raytrace,
                             rng_seed=self.link_seed(config, lum_idx, x, y))
            ir = simulate_impulse_response(config.room, config.luminaires[lum_idx],
                                           rcv, params)
            self._store[key] = ir
        return ir

    def __len__(self):
        return len(self._store)


@dataclass
class LinkBudget:
    """Receiver calibration constants shared by every link of a run."""

    reference_gain: float
    rx_gain_ofdm: float
    rx_gain_ook: float

    @classmethod
    def from_config(cls, config: ExperimentConfig) -> "LinkBudget":
        h_ref = config.resolved_reference_gain()
        eta = config.receiver.responsivity
        slope = config.led.small_signal_slope
        if slope <= 0:
            raise ValueError("LED small-signal slope must be positive at bias")
        return cls(reference_gain=h_ref,
                   rx_gain_ofdm=1.0 / (eta * slope * h_ref),
                   rx_gain_ook=1.0 / (eta * h_ref))


def _first_tap_index(ir: ImpulseResponse, sample_rate: float) -> int | None:
    """Ideal frame synchronization: align to the first arriving energy."""
    taps = resample_taps(ir, sample_rate)
    nz = np.nonzero(taps)[0]
    return int(nz[0]) if len(nz) else None


def _scramble_sequence(n: int) -> np.ndarray:
    """Fixed pseudo-random scrambling pattern, known to the receiver."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([0x5C2A, n])))
    return rng.integers(0, 2, size=n)


def _payload_bits(id_code: int, capacity: int) -> tuple[np.ndarray, int]:
    """ID repetitions XORed with a scrambler so the on-air waveform is not
    periodic (otherwise deterministic distortion and ISI would corrupt every
    repetition of a bit identically and voting could not help)."""
    reps = capacity // ID_BITS
    if reps < 1:
        raise ValueError("slot payload too small for one ID repetition")
    bits = np.concatenate([np.tile(id_to_bits(id_code), reps),
                           np.zeros(capacity - reps * ID_BITS, dtype=np.int64)])
    return bits ^ _scramble_sequence(capacity), reps


def _descramble(rx_bits: np.ndarray, capacity: int) -> np.ndarray:
    return rx_bits ^ _scramble_sequence(capacity)[: len(rx_bits)]


def _run_ofdm_slot(config: ExperimentConfig, lum: Luminaire, rcv: ReceiverSpec,
                   ir: ImpulseResponse, cp_len: int, noise_seed: int,
                   budget: LinkBudget) -> SlotResult:
    params = replace(config.ofdm, cp_len=cp_len)
    n, cp = params.n_subcarriers, cp_len
    k = params.bits_per_qam_symbol
    n_data = params.data_symbols_per_frame

    train = training_symbols(params)
    capacity = config.n_payload_symbols * n_data * k
    bits, reps = _payload_bits(lum.id_code, capacity)
    payload_rows = map_bits_to_qam(bits, params.qam_order).reshape(
        config.n_payload_symbols, n_data)

    blocks = [aco_modulate(row, params) for row in train] + \
             [aco_modulate(row, params) for row in payload_rows]
    waveform = np.concatenate(blocks)

    alpha = power_scale(waveform, config.target_power_dbm)
    drive = config.led.bias_voltage + alpha * waveform
    optical = led_transfer(drive, config.led)
    received = apply_channel(optical, ir, params.sample_rate)

    noise = replace(config.noise, rng_seed=noise_seed)
    y = photodetect(budget.rx_gain_ofdm * received, rcv.responsivity, noise)

    align = _first_tap_index(ir, params.sample_rate)
    if align is None:
        return SlotResult(None, GainEstimate(0.0, 1.0, 0.0))

    sym_len = n + cp
    def window(s):
        return y[align + s * sym_len: align + (s + 1) * sym_len]

    received_train = np.stack([aco_demodulate(window(s), params)
                               for s in range(params.n_training_symbols)])
    eta = rcv.responsivity
    kappa = 0.5 * eta * config.led.small_signal_slope * alpha * budget.rx_gain_ofdm
    estimate = estimate_dc_gain(received_train, train, kappa)

    channel_gains = np.mean(received_train / train, axis=0)
    if np.any(channel_gains == 0):
        return SlotResult(None, estimate)

    decoded_rows = []
    for s in range(config.n_payload_symbols):
        syms = aco_demodulate(window(params.n_training_symbols + s), params)
        decoded_rows.append(demap_qam_to_bits(equalize(syms, channel_gains),
                                              params.qam_order))
    rx_bits = _descramble(np.concatenate(decoded_rows), capacity)[: reps * ID_BITS]
    decoded = bits_to_id(majority_vote(rx_bits.reshape(reps, ID_BITS)))
    return SlotResult(decoded if decoded == lum.id_code else None, estimate)


def _run_ook_slot(config: ExperimentConfig, lum: Luminaire, rcv: ReceiverSpec,
                  ir: ImpulseResponse, cp_len: int, noise_seed: int,
                  budget: LinkBudget) -> SlotResult:
    fs = config.ofdm.sample_rate
    spb = config.ook.samples_per_bit(fs)
    slot_samples = (config.ofdm.n_training_symbols + config.n_payload_symbols) \
        * (config.ofdm.n_subcarriers + cp_len)
    n_bits = slot_samples // spb
    train = training_bits(config.ook)
    overhead = len(_WARMUP_BITS) + len(train)
    if n_bits <= overhead + ID_BITS:
        raise ValueError("OOK slot too short for training plus one ID repetition")
    payload, reps = _payload_bits(lum.id_code, n_bits - overhead)
    bits = np.concatenate([_WARMUP_BITS, train, payload])

    waveform = ook_modulate(bits, config.ook, fs)
    alpha = power_scale(waveform, config.target_power_dbm)
    received = apply_channel(alpha * waveform, ir, fs)

    noise = replace(config.noise, rng_seed=noise_seed)
    y = photodetect(budget.rx_gain_ook * received, rcv.responsivity, noise)

    align = _first_tap_index(ir, fs)
    if align is None:
        return SlotResult(None, GainEstimate(0.0, 1.0, 0.0))

    calibration = rcv.responsivity * budget.rx_gain_ook * alpha
    train_start = align + len(_WARMUP_BITS) * spb
    gain = ook_estimate_dc_gain(y[train_start:], train, config.ook, fs, calibration)
    estimate = GainEstimate(h_tilde=gain * calibration, kappa=calibration,
                            optical_gain=gain)

    filtered_train = matched_filter(y[train_start:], config.ook, fs)[: len(train)]
    ones = filtered_train[train == 1]
    zeros = filtered_train[train == 0]
    if len(ones) == 0 or len(zeros) == 0:
        return SlotResult(None, estimate)
    try:
        threshold = ook_threshold(float(zeros.mean()), float(ones.mean()))
    except ValueError:
        return SlotResult(None, estimate)

    payload_start = train_start + len(train) * spb
    filtered_payload = matched_filter(y[payload_start:], config.ook, fs)
    raw = (filtered_payload[: len(payload)] > threshold).astype(np.int64)
    rx_bits = _descramble(raw, len(payload))[: reps * ID_BITS]
    decoded = bits_to_id(majority_vote(rx_bits.reshape(reps, ID_BITS)))
    return SlotResult(decoded if decoded == lum.id_code else None, estimate)


def run_tdm_slot(config: ExperimentConfig, lum: Luminaire, rcv: ReceiverSpec,
                 ir: ImpulseResponse, cp_len: int, noise_seed: int,
                 budget: LinkBudget | None = None) -> SlotResult:
    """Simulate one luminaire's TDM slot end to end and estimate its gain."""
    budget = budget or LinkBudget.from_config(config)
    if config.modulation == "ofdm":
        return _run_ofdm_slot(config, lum, rcv, ir, cp_len, noise_seed, budget)
    return _run_ook_slot(config, lum, rcv, ir, cp_len, noise_seed, budget)


def resolve_cp_len(config: ExperimentConfig, irs) -> int:
    """Configured CP length, or 3x the worst RMS delay spread of the run."""
    if config.ofdm.cp_len is not None:
        return config.ofdm.cp_len
    spreads = [rms_delay_spread(ir) for ir in irs if dc_gain(ir) > 0.0]
    if not spreads:
        return 0
    return math.ceil(3.0 * max(spreads) * config.ofdm.sample_rate)


def run_sweep(config: ExperimentConfig, cache: ChannelCache | None = None) -> ErrorMap:
    """Position the receiver at every grid point and record the errors."""
    cache = cache if cache is not None else ChannelCache()
    positions = config.grid_positions()
    n_lum = len(config.luminaires)

    irs = {}
    for pi, (x, y) in enumerate(positions):
        for li in range(n_lum):
            irs[pi, li] = cache.get_or_simulate(config, li, x, y)

    cp_len = resolve_cp_len(config, irs.values())
    budget = LinkBudget.from_config(config)
    rcv_h = config.receiver.position.z
    g_cpc = config.receiver.concentrator_gain()

    points = []
    for pi, (x, y) in enumerate(positions):
        rcv = replace(config.receiver, position=Vec3(x, y, rcv_h))
        kx, ky = _position_key(x, y)
        gains = []
        decoded = []
        for li, lum in enumerate(config.luminaires):
            repeat_gains = []
            ok = True
            for rep in range(config.repeat_count):
                seed = _derive_seed(config.rng_seed, 0x5107, li, kx, ky, rep)
                slot = run_tdm_slot(config, lum, rcv, irs[pi, li], cp_len, seed, budget)
                repeat_gains.append(slot.gain.optical_gain)
                ok = ok and slot.decoded_id == lum.id_code
            gains.append(float(np.mean(repeat_gains)))
            decoded.append(ok)

        anchors = []
        ranges = []
        clamped = 0
        for li, lum in enumerate(config.luminaires):
            if not decoded[li] or gains[li] <= 0.0:
                continue
            d = estimate_distance(gains[li], lum.lambertian_mode,
                                  config.receiver.area,
                                  config.receiver.optical_filter_gain,
                                  g_cpc, lum.position.z, rcv_h)
            r, was_clamped = horizontal_range(d, lum.position.z, rcv_h)
            clamped += was_clamped
            anchors.append(Anchor(lum.position.x, lum.position.y, lum.id_code))
            ranges.append(r)

        if len(anchors) >= 3:
            result = solve_position(anchors, ranges, truth=(x, y))
            points.append(PointRecord(x=x, y=y, error=result.error,
                                      clamped_anchors=clamped, unresolved=False,
                                      gains=gains, x_hat=result.x_hat,
                                      y_hat=result.y_hat,
                                      residual=result.residual_norm))
        else:
            points.append(PointRecord(x=x, y=y, error=None,
                                      clamped_anchors=clamped, unresolved=True,
                                      gains=gains))

    return ErrorMap(points=points, config=config, cp_len=cp_len)


def _nearest_point(points: list[PointRecord], x: float, y: float) -> PointRecord:
    return min(points, key=lambda p: (p.x - x) ** 2 + (p.y - y) ** 2)


def _rms(errors) -> float:
    vals = [e for e in errors if e is not None]
    if not vals:
        return float("nan")
    return math.sqrt(sum(e * e for e in vals) / len(vals))


def summarize(error_map: ErrorMap) -> Summary:
    """Characteristic errors: room corner, mid-edge, room center, RMS over the
    luminaire rectangle, RMS over the whole grid.  The spot values use the
    grid point nearest each nominal location (exact when it lies on-grid)."""
    cfg = error_map.config
    pts = error_map.points
    room = cfg.room

    def spot(x, y):
        p = _nearest_point(pts, x, y)
        return p.error if p.error is not None else float("nan")

    xs = [l.position.x for l in cfg.luminaires]
    ys = [l.position.y for l in cfg.luminaires]
    rect = [p.error for p in pts
            if min(xs) - 1e-9 <= p.x <= max(xs) + 1e-9
            and min(ys) - 1e-9 <= p.y <= max(ys) + 1e-9]

    return Summary(
        corner_m=spot(0.0, 0.0),
        edge_m=spot(room.length / 2.0, 0.0),
        center_m=spot(room.length / 2.0, room.width / 2.0),
        rms_rect_m=_rms(rect),
        rms_total_m=_rms([p.error for p in pts]),
        modulation=cfg.modulation,
        n_subcarriers=cfg.ofdm.n_subcarriers,
        qam_order=cfg.ofdm.qam_order,
        power_dbm=cfg.target_power_dbm,
        seed=cfg.rng_seed,
    )


def compare_runs(configs: list[ExperimentConfig],
                 cache: ChannelCache | None = None) -> list[Summary]:
    """Run several configurations (sharing the channel cache) and collect
    their summaries for a side-by-side comparison."""
    if len(configs) < 2:
        raise ValueError("need at least two configurations to compare")
    cache = cache if cache is not None else ChannelCache()
    return [run_sweep(cfg, cache).summary for cfg in configs]


# ---------------------------------------------------------------------------
# CSV output

def _fmt(v) -> str:
    if v is None:
        return "nan"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_points_csv(error_map: ErrorMap, path: str) -> None:
    n_lum = len(error_map.config.luminaires)
    header = (["x_m", "y_m", "error_m", "clamped_anchors", "unresolved"]
              + [f"gain_{k + 1}" for k in range(n_lum)])
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for p in error_map.points:
            w.writerow([_fmt(p.x), _fmt(p.y), _fmt(p.error),
                        p.clamped_anchors, int(p.unresolved)]
                       + [_fmt(g) for g in p.gains])


def write_summary_csv(summaries: list[Summary], path: str) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["corner_m", "edge_m", "center_m", "rms_rect_m", "rms_total_m",
                    "modulation", "N", "M", "power_dBm", "seed"])
        for s in summaries:
            w.writerow([_fmt(s.corner_m), _fmt(s.edge_m), _fmt(s.center_m),
                        _fmt(s.rms_rect_m), _fmt(s.rms_total_m), s.modulation,
                        s.n_subcarriers, s.qam_order, _fmt(s.power_dbm), s.seed])


def write_impulse_csv(ir: ImpulseResponse, path: str) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["order", "delay_s", "gain"])
        for order, delay, gain in ir.csv_rows():
            w.writerow([order, _fmt(delay), _fmt(gain)])


def read_points_csv(path: str) -> list[PointRecord]:
    points = []
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            err = float(row["error_m"])
            gains = [float(v) for k, v in row.items() if k.startswith("gain_")]
            points.append(PointRecord(
                x=float(row["x_m"]), y=float(row["y_m"]),
                error=None if math.isnan(err) else err,
                clamped_anchors=int(row["clamped_anchors"]),
                unresolved=bool(int(row["unresolved"])),
                gains=gains))
    return points


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path
