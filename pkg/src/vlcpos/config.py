"""Experiment configuration: defaults, TOML loading and presets.

The shipped defaults reproduce the stock scenario: 6 x 6 x 3.5 m room, four
luminaires in a 2 m square at 3.3 m, receiver plane at 1.2 m, ACO-OFDM with
4-QAM and 512 subcarriers at 5 dBm transmit electrical power against -10 dBm
receiver noise.
"""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field, replace

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .channel import RayTraceParams
from .frontend import LedModel, NoiseModel
from .geometry import Luminaire, ReceiverSpec, RoomModel, Vec3, channel_dc_gain_los
from .ofdm import OfdmParams
from .ook import OokParams

PRESETS = ("paper-ofdm", "paper-ook", "los-only", "linear-led")


@dataclass
class ExperimentConfig:
    room: RoomModel = field(default_factory=RoomModel)
    luminaires: list[Luminaire] = field(default_factory=lambda: [
        Luminaire(position=Vec3(2.0, 2.0, 3.3), id_code=1),
        Luminaire(position=Vec3(2.0, 4.0, 3.3), id_code=2),
        Luminaire(position=Vec3(4.0, 2.0, 3.3), id_code=3),
        Luminaire(position=Vec3(4.0, 4.0, 3.3), id_code=4),
    ])
    receiver: ReceiverSpec = field(default_factory=lambda: ReceiverSpec(
        position=Vec3(0.0, 0.0, 1.2)))
    ofdm: OfdmParams = field(default_factory=OfdmParams)
    ook: OokParams = field(default_factory=OokParams)
    led: LedModel = field(default_factory=LedModel)
    noise: NoiseModel = field(default_factory=NoiseModel)
    raytrace: RayTraceParams = field(default_factory=RayTraceParams)
    grid_nx: int = 8
    grid_ny: int = 8
    target_power_dbm: float = 5.0
    modulation: str = "ofdm"
    rng_seed: int = 20260810
    output_dir: str = "out"
    # Optical gain of the calibration link the receiver front end is
    # normalized to.  None: use the weakest corner-of-room LOS link.
    reference_gain: float | None = None
    n_payload_symbols: int = 1
    repeat_count: int = 1
    wavelength_nm: float = 420.0  # metadata only; no formula consumes it

    def __post_init__(self):
        if self.grid_nx < 1 or self.grid_ny < 1:
            raise ValueError("grid must have at least one point per axis")
        if self.modulation not in ("ofdm", "ook"):
            raise ValueError("modulation must be 'ofdm' or 'ook'")
        if self.n_payload_symbols < 1:
            raise ValueError("n_payload_symbols must be >= 1")
        if self.repeat_count < 1:
            raise ValueError("repeat_count must be >= 1")
        ids = [l.id_code for l in self.luminaires]
        if len(set(ids)) != len(ids):
            raise ValueError("luminaire id codes must be unique")
        for l in self.luminaires:
            if not self.room.contains(l.position):
                raise ValueError(f"luminaire at {l.position} outside the room")

    def resolved_reference_gain(self) -> float:
        """Weakest in-FOV corner link, unless configured explicitly."""
        if self.reference_gain is not None:
            return self.reference_gain
        h = self.receiver.position.z
        corners = [(0.0, 0.0), (self.room.length, 0.0),
                   (0.0, self.room.width), (self.room.length, self.room.width)]
        gains = []
        for cx, cy in corners:
            rcv = replace(self.receiver, position=Vec3(cx, cy, h))
            for lum in self.luminaires:
                g = channel_dc_gain_los(lum, rcv)
                if g > 0.0:
                    gains.append(g)
        if not gains:
            raise ValueError("no corner link is inside the receiver FOV; "
                             "set reference_gain explicitly")
        return min(gains)

    def grid_positions(self):
        """Endpoint-inclusive uniform grid over the floor plan, row-major in y
        then x (point index = iy * grid_nx + ix)."""
        import numpy as np
        xs = (np.linspace(0.0, self.room.length, self.grid_nx)
              if self.grid_nx > 1 else np.array([self.room.length / 2]))
        ys = (np.linspace(0.0, self.room.width, self.grid_ny)
              if self.grid_ny > 1 else np.array([self.room.width / 2]))
        return [(float(x), float(y)) for y in ys for x in xs]


def apply_preset(config: ExperimentConfig, preset: str) -> ExperimentConfig:
    """Return a copy of `config` with one named preset applied."""
    if preset == "paper-ofdm":
        return replace(config, modulation="ofdm",
                       ofdm=replace(config.ofdm, n_subcarriers=512, qam_order=4),
                       target_power_dbm=5.0)
    if preset == "paper-ook":
        return replace(config, modulation="ook", target_power_dbm=5.0)
    if preset == "los-only":
        return replace(config, raytrace=replace(config.raytrace, max_bounces=0))
    if preset == "linear-led":
        return replace(config, led=LedModel.linear())
    raise ValueError(f"unknown preset {preset!r}; choose from {PRESETS}")


def apply_presets(config: ExperimentConfig, presets) -> ExperimentConfig:
    for p in presets:
        config = apply_preset(config, p)
    return config


def _build_luminaire(entry: dict, default: Luminaire) -> Luminaire:
    pos = entry.get("position")
    position = Vec3(*pos) if pos is not None else default.position
    return Luminaire(
        position=position,
        lambertian_mode=entry.get("lambertian_mode", default.lambertian_mode),
        id_code=entry.get("id_code", default.id_code),
        elevation_deg=entry.get("elevation_deg", default.elevation_deg),
        azimuth_deg=entry.get("azimuth_deg", default.azimuth_deg),
    )


def _merge_dataclass(obj, section: dict, renames: dict | None = None):
    """Rebuild a dataclass with fields overridden from a TOML section."""
    if not section:
        return obj
    renames = renames or {}
    known = {f.name for f in dataclasses.fields(obj)}
    updates = {}
    for key, value in section.items():
        name = renames.get(key, key)
        if name not in known:
            raise ValueError(f"unknown config key {key!r} for {type(obj).__name__}")
        if isinstance(value, list):
            value = tuple(value)
        updates[name] = value
    return replace(obj, **updates)


def config_from_dict(raw: dict) -> ExperimentConfig:
    cfg = ExperimentConfig()
    room = _merge_dataclass(cfg.room, raw.get("room", {}))

    lums = cfg.luminaires
    if "luminaire" in raw:
        lums = [_build_luminaire(e, Luminaire(position=Vec3(0, 0, 3.3)))
                for e in raw["luminaire"]]

    rcv_sec = dict(raw.get("receiver", {}))
    rcv_pos = rcv_sec.pop("position", None)
    receiver = _merge_dataclass(cfg.receiver, rcv_sec)
    if rcv_pos is not None:
        receiver = replace(receiver, position=Vec3(*rcv_pos))
    elif "height" in raw.get("receiver", {}):
        pass  # position already carries the height

    ofdm = _merge_dataclass(cfg.ofdm, raw.get("ofdm", {}))
    ook = _merge_dataclass(cfg.ook, raw.get("ook", {}))
    led = _merge_dataclass(cfg.led, raw.get("led", {}))
    noise = _merge_dataclass(cfg.noise, raw.get("noise", {}))
    raytrace = _merge_dataclass(cfg.raytrace, raw.get("raytrace", {}))

    exp = dict(raw.get("experiment", {}))
    top = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(exp) - top
    if unknown:
        raise ValueError(f"unknown [experiment] keys: {sorted(unknown)}")

    return ExperimentConfig(room=room, luminaires=lums, receiver=receiver,
                            ofdm=ofdm, ook=ook, led=led, noise=noise,
                            raytrace=raytrace, **exp)


def load_config(path: str | None = None) -> ExperimentConfig:
    """Load a TOML config file; with no path, return the shipped defaults."""
    if path is None:
        return ExperimentConfig()
    with open(path, "rb") as f:
        raw = tomllib.load(f)
    return config_from_dict(raw)
