"""Room, luminaire and receiver geometry plus the closed-form Lambertian link formulas.

The downlink geometry is deliberately restricted: luminaires point straight
down, the photodiode points straight up.  Under that restriction the emission
angle phi (measured from the luminaire axis) and the incidence angle psi
(measured from the receiver axis) are equal, with

    cos(phi) = cos(psi) = (H - h) / d

where H and h are the transmitter/receiver heights and d the slant distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

SPEED_OF_LIGHT = 299_792_458.0  # m/s


@dataclass(frozen=True)
class Vec3:
    """A point in room coordinates, meters."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        for c in (self.x, self.y, self.z):
            if not math.isfinite(c):
                raise ValueError(f"non-finite coordinate in {self!r}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)


@dataclass(frozen=True)
class RoomModel:
    """Rectangular room with diffuse (Lambertian) surfaces."""

    length: float = 6.0  # x extent, m
    width: float = 6.0   # y extent, m
    height: float = 3.5  # z extent, m
    rho_wall: float = 0.66
    rho_ceiling: float = 0.35
    rho_floor: float = 0.60

    def __post_init__(self):
        if min(self.length, self.width, self.height) <= 0:
            raise ValueError("room dimensions must be positive")
        for name in ("rho_wall", "rho_ceiling", "rho_floor"):
            rho = getattr(self, name)
            if not 0.0 <= rho <= 1.0:
                raise ValueError(f"{name}={rho} outside [0, 1]")

    def contains(self, p: Vec3) -> bool:
        return (0.0 <= p.x <= self.length
                and 0.0 <= p.y <= self.width
                and 0.0 <= p.z <= self.height)


@dataclass(frozen=True)
class Luminaire:
    """A ceiling-mounted LED source with a generalized Lambertian pattern.

    `lambertian_mode` is the exponent m of the cos^m(phi) radiant intensity
    pattern.  Only the downward orientation (elevation -90) is modeled.
    """

    position: Vec3
    lambertian_mode: float = 1.0
    id_code: int = 1
    elevation_deg: float = -90.0
    azimuth_deg: float = 0.0

    def __post_init__(self):
        if self.lambertian_mode < 1.0:
            raise ValueError("lambertian_mode must be >= 1")
        if self.elevation_deg != -90.0:
            raise ValueError("only downward-facing luminaires are modeled")


@dataclass(frozen=True)
class ReceiverSpec:
    """Upward-facing photodiode with a compound parabolic concentrator.

    `optical_filter_gain` (T_s) has no published value for this link budget
    and defaults to 1; `refractive_index` of the concentrator is likewise
    unpublished and defaults to 1.5.  Both are free parameters of the model.
    """

    position: Vec3
    area: float = 1e-4           # m^2
    fov_deg: float = 70.0        # concentrator half-angle Psi_c
    refractive_index: float = 1.5
    optical_filter_gain: float = 1.0
    responsivity: float = 0.54   # A/W
    elevation_deg: float = 90.0
    azimuth_deg: float = 0.0

    def __post_init__(self):
        if self.area <= 0:
            raise ValueError("detector area must be positive")
        if not 0.0 < self.fov_deg <= 90.0:
            raise ValueError("fov_deg must be in (0, 90]")
        if self.refractive_index < 1.0:
            raise ValueError("refractive_index must be >= 1")
        if self.optical_filter_gain <= 0:
            raise ValueError("optical_filter_gain must be positive")
        if self.responsivity <= 0:
            raise ValueError("responsivity must be positive")
        if self.elevation_deg != 90.0:
            raise ValueError("only upward-facing receivers are modeled")

    def concentrator_gain(self) -> float:
        """CPC gain inside the field of view (constant over psi <= Psi_c)."""
        return cpc_gain(0.0, self.refractive_index, self.fov_deg)


@dataclass(frozen=True)
class LosGeometry:
    d: float        # slant distance, m
    cos_phi: float  # cosine of emission angle at the source
    cos_psi: float  # cosine of incidence angle at the receiver


def los_geometry(src: Luminaire, rcv: ReceiverSpec) -> LosGeometry:
    """Line-of-sight distance and angles for the coaxial down/up orientation."""
    sp, rp = src.position, rcv.position
    if sp.z <= rp.z:
        raise ValueError("luminaire must be above the receiver")
    d = math.dist(sp.as_tuple(), rp.as_tuple())
    if d == 0.0:
        raise ValueError("degenerate geometry: source and receiver coincide")
    c = (sp.z - rp.z) / d
    return LosGeometry(d=d, cos_phi=c, cos_psi=c)


def cpc_gain(psi_deg: float, refractive_index: float, fov_deg: float) -> float:
    """Compound parabolic concentrator gain: n^2/sin^2(Psi_c) inside the FOV, else 0."""
    if not 0.0 <= psi_deg <= 180.0:
        raise ValueError("psi_deg must be in [0, 180]")
    if psi_deg > fov_deg:
        return 0.0
    s = math.sin(math.radians(fov_deg))
    return refractive_index ** 2 / (s * s)


def channel_dc_gain_los(src: Luminaire, rcv: ReceiverSpec) -> float:
    """Closed-form LOS channel DC gain.

        H(0) = (m+1)/(2 pi d^2) * A * cos^m(phi) * T_s * g(psi) * cos(psi)

    Returns 0 when the incidence angle falls outside the receiver FOV.
    """
    geo = los_geometry(src, rcv)
    psi_deg = math.degrees(math.acos(min(1.0, geo.cos_psi)))
    g = cpc_gain(psi_deg, rcv.refractive_index, rcv.fov_deg)
    if g == 0.0:
        return 0.0
    m = src.lambertian_mode
    return ((m + 1.0) / (2.0 * math.pi * geo.d ** 2)
            * rcv.area
            * geo.cos_phi ** m
            * rcv.optical_filter_gain
            * g
            * geo.cos_psi)


def default_scene() -> tuple[RoomModel, list[Luminaire], ReceiverSpec]:
    """The stock 6 x 6 x 3.5 m room: four luminaires at 3.3 m in a 2 m square,
    receiver plane at 1.2 m."""
    room = RoomModel()
    lums = [
        Luminaire(position=Vec3(2.0, 2.0, 3.3), id_code=1),
        Luminaire(position=Vec3(2.0, 4.0, 3.3), id_code=2),
        Luminaire(position=Vec3(4.0, 2.0, 3.3), id_code=3),
        Luminaire(position=Vec3(4.0, 4.0, 3.3), id_code=4),
    ]
    rcv = ReceiverSpec(position=Vec3(3.0, 3.0, 1.2))
    return room, lums, rcv
