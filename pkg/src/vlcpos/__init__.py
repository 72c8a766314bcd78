"""Desk-scale simulator of an indoor visible-light positioning system.

An ACO-OFDM (or baseline OOK) downlink is run over ray-traced multipath
optical channels in a rectangular room; per-luminaire channel DC gains are
estimated from training symbols and inverted to ranges, and the receiver
position is solved by linear least-squares lateration.
"""

from .channel import (
    ImpulseResponse,
    RayTraceParams,
    dc_gain,
    mc_first_bounce_gain,
    rms_delay_spread,
    simulate_impulse_response,
    worst_case_cp_samples,
)
from .config import ExperimentConfig, apply_preset, apply_presets, load_config
from .frontend import (
    LedModel,
    NoiseModel,
    apply_channel,
    led_transfer,
    photodetect,
    set_signal_power,
)
from .geometry import (
    Luminaire,
    ReceiverSpec,
    RoomModel,
    Vec3,
    channel_dc_gain_los,
    cpc_gain,
    default_scene,
    los_geometry,
)
from .ofdm import (
    GainEstimate,
    OfdmFrame,
    OfdmParams,
    aco_demodulate,
    aco_modulate,
    equalize,
    estimate_dc_gain,
    hermitian_map,
    map_bits_to_qam,
)
from .ook import OokParams, ook_detect, ook_estimate_dc_gain, ook_modulate
from .positioning import (
    Anchor,
    PositionResult,
    estimate_distance,
    horizontal_range,
    laterate,
    position_error,
)
from .experiments import (
    ChannelCache,
    ErrorMap,
    Summary,
    compare_runs,
    run_sweep,
    run_tdm_slot,
    summarize,
)

__version__ = "0.1.0"
