import math

import numpy as np
import pytest

from conftest import receiver_at
from vlcpos.geometry import (
    Luminaire,
    ReceiverSpec,
    RoomModel,
    Vec3,
    channel_dc_gain_los,
    cpc_gain,
    los_geometry,
)

LUM = Luminaire(position=Vec3(2.0, 2.0, 3.3))


class TestLosGeometry:
    def test_directly_beneath(self):
        geo = los_geometry(LUM, receiver_at(2.0, 2.0))
        assert geo.d == pytest.approx(2.1)
        assert geo.cos_phi == pytest.approx(1.0)
        assert geo.cos_psi == pytest.approx(1.0)

    def test_45_degree_offset(self):
        geo = los_geometry(LUM, receiver_at(2.0, 2.0 + 2.1))
        assert geo.d == pytest.approx(2.1 * math.sqrt(2))
        assert geo.cos_psi == pytest.approx(1 / math.sqrt(2))

    def test_hand_evaluated_offset(self):
        geo = los_geometry(LUM, receiver_at(3.0, 3.0))
        assert geo.d == pytest.approx(2.5318, abs=1e-4)
        assert geo.cos_psi == pytest.approx(2.1 / 2.5318, abs=1e-4)

    def test_source_below_receiver_rejected(self):
        low = Luminaire(position=Vec3(2.0, 2.0, 1.0))
        with pytest.raises(ValueError):
            los_geometry(low, receiver_at(2.0, 2.0))

    def test_degenerate_rejected(self):
        with pytest.raises(ValueError):
            los_geometry(LUM, receiver_at(2.0, 2.0, 3.3))


class TestCpcGain:
    def test_inside_fov(self):
        assert cpc_gain(0.0, 1.5, 70.0) == pytest.approx(2.25 / math.sin(math.radians(70)) ** 2)
        assert cpc_gain(0.0, 1.5, 70.0) == pytest.approx(2.5481, abs=1e-4)

    def test_outside_fov_is_zero(self):
        assert cpc_gain(75.0, 1.5, 70.0) == 0.0
        assert cpc_gain(75.0, 3.0, 70.0) == 0.0

    def test_unit_index_90_fov(self):
        assert cpc_gain(0.0, 1.0, 90.0) == pytest.approx(1.0)

    def test_piecewise_constant(self):
        inside = [cpc_gain(p, 1.5, 70.0) for p in (0.0, 35.0, 70.0)]
        assert inside[0] == inside[1] == inside[2]
        assert cpc_gain(70.0 + 1e-9, 1.5, 70.0) == 0.0

    def test_psi_range_checked(self):
        with pytest.raises(ValueError):
            cpc_gain(-1.0, 1.5, 70.0)


class TestChannelDcGainLos:
    def test_hand_value_directly_below(self):
        # (m+1)/(2 pi d^2) * A * g = 2/(2 pi 4.41) * 1e-4 * 2.5481
        gain = channel_dc_gain_los(LUM, receiver_at(2.0, 2.0))
        assert gain == pytest.approx(1.839e-5, rel=1e-3)

    def test_outside_fov_is_zero(self):
        # psi = 75 deg: horizontal offset = 2.1 * tan(75)
        x = 2.0 + 2.1 * math.tan(math.radians(75))
        assert channel_dc_gain_los(LUM, receiver_at(x, 2.0)) == 0.0

    def test_inverse_square(self):
        base = channel_dc_gain_los(LUM, receiver_at(2.0, 2.0))
        lum_high = Luminaire(position=Vec3(2.0, 2.0, 1.2 + 2 * 2.1))
        assert channel_dc_gain_los(lum_high, receiver_at(2.0, 2.0)) == pytest.approx(base / 4)

    def test_inverse_square_three_distances(self):
        gains = []
        for scale in (1.0, 1.5, 2.5):
            lum = Luminaire(position=Vec3(2.0, 2.0, 1.2 + 2.1 * scale))
            gains.append(channel_dc_gain_los(lum, receiver_at(2.0, 2.0)) * (2.1 * scale) ** 2)
        assert gains[0] == pytest.approx(gains[1], rel=1e-12)
        assert gains[0] == pytest.approx(gains[2], rel=1e-12)

    def test_nonnegative_everywhere(self, rng):
        for _ in range(300):
            x, y = rng.uniform(0, 6, 2)
            g = channel_dc_gain_los(LUM, receiver_at(x, y))
            assert g >= 0.0

    def test_rotation_invariance(self):
        # rotating the receiver about the vertical axis through the source
        r, h = 1.7, 1.2
        gains = []
        for theta in np.linspace(0.0, 2 * math.pi, 17):
            rcv = receiver_at(2.0 + r * math.cos(theta), 2.0 + r * math.sin(theta), h)
            gains.append(channel_dc_gain_los(LUM, rcv))
        assert np.ptp(gains) < 1e-18

    def test_zero_iff_outside_fov(self, rng):
        rcv_template = receiver_at(0.0, 0.0)
        cos_fov = math.cos(math.radians(rcv_template.fov_deg))
        for _ in range(200):
            x, y = rng.uniform(-8, 8, 2)
            rcv = receiver_at(2.0 + x, 2.0 + y)
            geo = los_geometry(LUM, rcv)
            gain = channel_dc_gain_los(LUM, rcv)
            if geo.cos_psi >= cos_fov:
                assert gain > 0.0
            else:
                assert gain == 0.0


class TestModelValidation:
    def test_room_rejects_bad_reflectivity(self):
        with pytest.raises(ValueError):
            RoomModel(rho_wall=1.2)
        with pytest.raises(ValueError):
            RoomModel(length=-1.0)

    def test_luminaire_rejects_low_mode(self):
        with pytest.raises(ValueError):
            Luminaire(position=Vec3(1, 1, 3), lambertian_mode=0.5)

    def test_receiver_rejects_bad_fov(self):
        with pytest.raises(ValueError):
            receiver_at(0, 0, fov_deg=0.0)
        with pytest.raises(ValueError):
            receiver_at(0, 0, fov_deg=91.0)

    def test_only_coaxial_orientations(self):
        with pytest.raises(ValueError):
            Luminaire(position=Vec3(1, 1, 3), elevation_deg=-45.0)
        with pytest.raises(ValueError):
            receiver_at(0, 0, elevation_deg=45.0)

    def test_vec3_rejects_nan(self):
        with pytest.raises(ValueError):
            Vec3(float("nan"), 0.0, 0.0)
