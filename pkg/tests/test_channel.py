import math
from dataclasses import replace

import numpy as np
import pytest

from conftest import receiver_at
from vlcpos.channel import (
    ImpulseResponse,
    RayTraceParams,
    dc_gain,
    mc_first_bounce_gain,
    rms_delay_spread,
    simulate_impulse_response,
    worst_case_cp_samples,
)
from vlcpos.geometry import SPEED_OF_LIGHT, Luminaire, RoomModel, Vec3, channel_dc_gain_los

LUM = Luminaire(position=Vec3(2.0, 2.0, 3.3))
FAST = RayTraceParams(rays_per_source=20_000, rng_seed=101)


@pytest.fixture(scope="module")
def room():
    return RoomModel()


@pytest.fixture(scope="module")
def center_ir(room):
    return simulate_impulse_response(room, LUM, receiver_at(3.0, 3.0), FAST)


class TestLosOrder:
    def test_los_only_when_reflectivities_zero(self, room):
        dark = RoomModel(rho_wall=0.0, rho_ceiling=0.0, rho_floor=0.0)
        ir = simulate_impulse_response(dark, LUM, receiver_at(3.0, 3.0), FAST)
        totals = ir.total_by_order()
        assert totals[0] > 0
        np.testing.assert_allclose(totals[1:], 0.0)

    def test_max_bounces_zero_single_bin(self, room):
        params = replace(FAST, max_bounces=0)
        ir = simulate_impulse_response(room, LUM, receiver_at(2.0, 2.0), params)
        assert len(ir.bins_by_order) == 1
        bins = ir.bins_by_order[0]
        assert np.count_nonzero(bins) == 1
        assert bins.sum() == pytest.approx(1.839e-5, rel=1e-3)
        # delay 2.1 m / c = 7.005 ns, within one bin
        idx = np.nonzero(bins)[0][0]
        assert idx * ir.bin_width == pytest.approx(2.1 / SPEED_OF_LIGHT, abs=ir.bin_width)

    def test_los_bin_matches_analytic_gain(self, room, center_ir):
        expected = channel_dc_gain_los(LUM, receiver_at(3.0, 3.0))
        assert center_ir.bins_by_order[0].sum() == pytest.approx(expected, rel=1e-12)

    def test_los_outside_fov_empty(self, room):
        far = receiver_at(2.0 + 2.1 * math.tan(math.radians(75)), 2.0)
        params = replace(FAST, max_bounces=0)
        ir = simulate_impulse_response(room, LUM, far, params)
        assert dc_gain(ir) == 0.0


class TestDeterminismAndSanity:
    def test_bit_identical_for_same_seed(self, room, center_ir):
        again = simulate_impulse_response(room, LUM, receiver_at(3.0, 3.0), FAST)
        assert len(again.bins_by_order) == len(center_ir.bins_by_order)
        for a, b in zip(again.bins_by_order, center_ir.bins_by_order):
            np.testing.assert_array_equal(a, b)

    def test_different_seed_changes_mc_orders(self, room, center_ir):
        other = simulate_impulse_response(room, LUM, receiver_at(3.0, 3.0),
                                          replace(FAST, rng_seed=999))
        np.testing.assert_array_equal(other.bins_by_order[0], center_ir.bins_by_order[0])
        np.testing.assert_array_equal(other.bins_by_order[1], center_ir.bins_by_order[1])
        assert not np.array_equal(other.bins_by_order[2], center_ir.bins_by_order[2])

    def test_all_bins_nonnegative(self, center_ir):
        for bins in center_ir.bins_by_order:
            assert np.all(bins >= 0.0)

    def test_order_count(self, center_ir):
        assert len(center_ir.bins_by_order) == FAST.max_bounces + 1

    def test_params_validated(self):
        with pytest.raises(ValueError):
            RayTraceParams(max_bounces=-1)
        with pytest.raises(ValueError):
            RayTraceParams(patch_side=0.0)
        with pytest.raises(ValueError):
            RayTraceParams(rays_per_source=0)


class TestMonteCarloQuality:
    def test_doubling_rays_within_standard_error(self, room):
        base = replace(FAST, rays_per_source=40_000)
        ir1 = simulate_impulse_response(room, LUM, receiver_at(3.0, 3.0), base)
        ir2 = simulate_impulse_response(room, LUM, receiver_at(3.0, 3.0),
                                        replace(base, rays_per_source=80_000))
        g1 = ir1.bins_by_order[2].sum()
        g2 = ir2.bins_by_order[2].sum()
        se = ir1.mc_stderr_by_order[2]
        assert abs(g2 - g1) < 3.0 * se

    def test_first_bounce_cross_check(self, room):
        # deterministic patch sum vs Monte Carlo gather, center-of-room link
        det_ir = simulate_impulse_response(room, LUM, receiver_at(3.0, 3.0), FAST)
        det = det_ir.bins_by_order[1].sum()
        mc, se = mc_first_bounce_gain(room, LUM, receiver_at(3.0, 3.0),
                                      replace(FAST, rays_per_source=200_000))
        assert abs(mc - det) / det < 0.05

    def test_corner_location_more_dispersive_than_center(self, room):
        # summed over the four luminaires, the corner location has a larger
        # non-LOS power fraction than the room center
        lums = [Luminaire(position=Vec3(x, y, 3.3)) for x, y in
                [(2, 2), (2, 4), (4, 2), (4, 4)]]

        def nlos_fraction(x, y):
            los = nlos = 0.0
            for lum in lums:
                ir = simulate_impulse_response(room, lum, receiver_at(x, y), FAST)
                totals = ir.total_by_order()
                los += totals[0]
                nlos += totals[1:].sum()
            return nlos / (los + nlos)

        assert nlos_fraction(0.0, 0.0) > nlos_fraction(3.0, 3.0)


class TestDelaySpread:
    def test_single_bin_zero_spread(self):
        bins = np.zeros(5)
        bins[3] = 1e-5
        ir = ImpulseResponse(bin_width=1e-9, t0=0.0, bins_by_order=[bins])
        assert rms_delay_spread(ir) == 0.0

    def test_two_equal_bins(self):
        # equal gains at 0 and 2*delta -> spread = delta
        bins = np.zeros(3)
        bins[0] = bins[2] = 0.5
        ir = ImpulseResponse(bin_width=1e-9, t0=0.0, bins_by_order=[bins])
        assert rms_delay_spread(ir) == pytest.approx(1e-9)

    def test_zero_gain_rejected(self):
        ir = ImpulseResponse(bin_width=1e-9, t0=0.0, bins_by_order=[np.zeros(4)])
        with pytest.raises(ValueError):
            rms_delay_spread(ir)

    def test_corner_link_regression(self, room):
        # frozen from this simulator's own output at the pinned seed
        ir = simulate_impulse_response(room, LUM, receiver_at(0.0, 0.0),
                                       replace(FAST, rng_seed=42, rays_per_source=100_000))
        assert rms_delay_spread(ir) == pytest.approx(6.83e-9, rel=0.03)

    def test_worst_case_cp(self):
        bins = np.zeros(3)
        bins[0] = bins[2] = 0.5  # spread = 10 ns with 10 ns bins
        ir = ImpulseResponse(bin_width=10e-9, t0=0.0, bins_by_order=[bins])
        assert worst_case_cp_samples([ir], 100e6) == 3

    def test_worst_case_cp_single_bin(self):
        bins = np.array([1.0])
        ir = ImpulseResponse(bin_width=1e-9, t0=0.0, bins_by_order=[bins])
        assert worst_case_cp_samples([ir], 50e6) == 0

    def test_worst_case_cp_definition(self):
        bins = np.zeros(5)
        bins[0] = bins[4] = 0.5  # spread = 2 samples * bw
        bw = 4e-9
        ir = ImpulseResponse(bin_width=bw, t0=0.0, bins_by_order=[bins])
        spread = rms_delay_spread(ir)
        fs = 50e6
        assert worst_case_cp_samples([ir], fs) == math.ceil(3 * spread * fs)

    def test_empty_list_rejected(self):
        with pytest.raises(ValueError):
            worst_case_cp_samples([], 50e6)


class TestDcGain:
    def test_sums_all_orders(self):
        ir = ImpulseResponse(bin_width=1e-9, t0=0.0,
                             bins_by_order=[np.array([1.0]), np.array([0.5, 0.25]),
                                            np.array([0.25])])
        assert dc_gain(ir) == pytest.approx(2.0)

    def test_empty_is_zero(self):
        ir = ImpulseResponse(bin_width=1e-9, t0=0.0, bins_by_order=[np.zeros(0)])
        assert dc_gain(ir) == 0.0

    def test_csv_rows(self):
        bins = np.zeros(4)
        bins[2] = 1e-6
        ir = ImpulseResponse(bin_width=1e-9, t0=0.0, bins_by_order=[bins])
        rows = list(ir.csv_rows())
        assert rows == [(0, 2e-9, 1e-6)]
