# Python standard library imports
import dataclasses
import math

# Third-party imports
import numpy as np

# Django framework imports
from django.test import SimpleTestCase

# Local imports
from ..exceptions import DomainError, InfiniteLoadError, SingularityError
from ..utils.radio_helpers import (
    LinkSample,
    admit_round_robin,
    area_load,
    cell_link_samples,
    disc_grid,
    effective_throughput,
    integrate_load,
    los_mask,
    los_visible,
    noise_power_w,
    sinr,
    throughput_coverage,
    user_load,
)
from ..utils.scenario_helpers import LosGeometry, RadioParams, TrafficModel
from .factories import make_snapshot, make_uav

RADIO = RadioParams()
TRAFFIC = TrafficModel()


class NoiseAndSinrTests(SimpleTestCase):
    def test_noise_power(self):
        self.assertAlmostEqual(noise_power_w(-174.0, 1.0) / 3.981e-21, 1.0, places=3)
        self.assertAlmostEqual(noise_power_w(0.0, 1.0), 1e-3)
        self.assertAlmostEqual(noise_power_w(-174.0, 2e7) / (3.981e-21 * 2e7), 1.0, places=3)

    def test_noise_needs_bandwidth(self):
        with self.assertRaises(DomainError):
            noise_power_w(-174.0, 0.0)

    def test_single_uav_sinr_at_100m(self):
        uav = make_uav(altitude=100.0)
        value = sinr((0.0, 0.0), uav, [uav], RADIO)
        expected = 10.0 * 1.5 / 100.0**3 / noise_power_w(-174.0, 2e7)
        self.assertAlmostEqual(value / expected, 1.0, places=9)
        self.assertAlmostEqual(value / 1.884e8, 1.0, places=2)

    def test_equidistant_interferer(self):
        a = make_uav(0, position=(-50.0, 0.0))
        b = make_uav(1, position=(50.0, 0.0))
        self.assertAlmostEqual(sinr((0.0, 0.0), a, [a, b], RADIO), 1.0, places=6)

    def test_unavailable_uav_does_not_interfere(self):
        a = make_uav(0, position=(-50.0, 0.0))
        b = make_uav(1, position=(50.0, 0.0), available=0)
        self.assertGreater(sinr((0.0, 0.0), a, [a, b], RADIO), 1e6)

    def test_zero_distance_is_singular(self):
        uav = make_uav(altitude=0.0)
        with self.assertRaises(SingularityError):
            sinr((0.0, 0.0), uav, [uav], RADIO)


class SinrPropertyTests(SimpleTestCase):
    def random_cell(self, rng, interferers=3):
        user = tuple(rng.uniform(-200.0, 200.0, 2))
        fleet = [
            make_uav(uid, position=tuple(rng.uniform(-300.0, 300.0, 2)), altitude=rng.uniform(50.0, 400.0))
            for uid in range(interferers + 1)
        ]
        return user, fleet[0], fleet

    def test_scaling_powers_and_noise_together(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            user, serving, fleet = self.random_cell(rng)
            c = rng.uniform(0.1, 10.0)
            scaled = dataclasses.replace(
                RADIO,
                tx_power_w=RADIO.tx_power_w * c,
                noise_psd_dbm_hz=RADIO.noise_psd_dbm_hz + 10 * math.log10(c),
            )
            ratio = sinr(user, serving, fleet, scaled) / sinr(user, serving, fleet, RADIO)
            self.assertAlmostEqual(ratio, 1.0, places=9)

    def test_more_power_helps_against_noise(self):
        rng = np.random.default_rng(12)
        for _ in range(50):
            user, serving, fleet = self.random_cell(rng)
            louder = dataclasses.replace(RADIO, tx_power_w=RADIO.tx_power_w * rng.uniform(2.0, 10.0))
            self.assertGreater(sinr(user, serving, fleet, louder), sinr(user, serving, fleet, RADIO))

    def test_noise_lowers_sinr(self):
        rng = np.random.default_rng(13)
        for _ in range(50):
            user, serving, fleet = self.random_cell(rng)
            values = [
                sinr(user, serving, fleet, dataclasses.replace(RADIO, noise_psd_dbm_hz=psd))
                for psd in (-174.0, -164.0, -154.0, -144.0)
            ]
            self.assertTrue(all(a > b for a, b in zip(values, values[1:])), values)

    def test_serving_distance_lowers_sinr(self):
        rng = np.random.default_rng(14)
        for _ in range(50):
            user, serving, fleet = self.random_cell(rng)
            angle = rng.uniform(0.0, 2 * math.pi)
            values = []
            for offset in (0.0, 50.0, 100.0, 200.0, 400.0):
                position = (user[0] + offset * math.cos(angle), user[1] + offset * math.sin(angle))
                moved = make_uav(0, position=position, altitude=serving.altitude_m)
                values.append(sinr(user, moved, [moved, *fleet[1:]], RADIO))
            self.assertTrue(all(a > b for a, b in zip(values, values[1:])), values)


class LoadTests(SimpleTestCase):
    def test_user_load_and_throughput(self):
        s = 1.884e8
        self.assertAlmostEqual(user_load(RADIO, TRAFFIC, s) / 5.82e-6, 1.0, places=2)
        self.assertAlmostEqual(effective_throughput(s, 200, RADIO) / 2.75e6, 1.0, places=2)

    def test_zero_sinr_load_is_infinite(self):
        with self.assertRaises(InfiniteLoadError):
            user_load(RADIO, TRAFFIC, 0.0)

    def test_throughput_needs_a_user(self):
        with self.assertRaises(DomainError):
            effective_throughput(10.0, 0, RADIO)

    def test_empty_area_has_zero_load(self):
        load = area_load(make_snapshot(users=0), [make_uav()], RADIO, TRAFFIC, 16)
        self.assertEqual(load.value, 0.0)
        self.assertTrue(load.fully_served)

    def test_uniform_sinr_integrates_to_disc_area(self):
        points, cell = disc_grid((0.0, 0.0), 100.0, 32)
        self.assertAlmostEqual(cell * len(points), math.pi * 100.0**2)
        load = integrate_load(np.full(len(points), 15.0), cell, RADIO, TRAFFIC)
        expected = math.pi * 100.0**2 * 2.0 * 1600.0 / (2e7 * math.log2(16.0))
        self.assertAlmostEqual(load.value / expected, 1.0, places=9)

    def test_unservable_points_are_counted(self):
        points, cell = disc_grid((0.0, 0.0), 100.0, 8)
        values = np.ones(len(points))
        values[:3] = 0.0
        load = integrate_load(values, cell, RADIO, TRAFFIC)
        self.assertEqual(load.unserved_points, 3)
        self.assertFalse(load.fully_served)

    def test_grid_refinement_converges(self):
        fleet = [make_uav(altitude=150.0)]
        area = make_snapshot()
        coarse = area_load(area, fleet, RADIO, TRAFFIC, 32).value
        fine = area_load(area, fleet, RADIO, TRAFFIC, 64).value
        self.assertLess(abs(coarse - fine) / fine, 0.01)

    def test_no_available_uav_leaves_area_unserved(self):
        load = area_load(make_snapshot(), [make_uav(available=0)], RADIO, TRAFFIC, 8)
        self.assertEqual(load.value, 0.0)
        self.assertGreater(load.unserved_points, 0)


class CoverageTests(SimpleTestCase):
    def test_line_of_sight_cone(self):
        los = LosGeometry()
        uav = make_uav(altitude=150.0)
        self.assertFalse(los_visible((0.0, 0.0), uav, los))
        self.assertTrue(los_visible((50.0, 0.0), uav, los))
        self.assertTrue(los_visible((100.0, 0.0), uav, los))
        self.assertFalse(los_visible((120.0, 0.0), uav, los))
        mask = los_mask([(0.0, 0.0), (50.0, 0.0), (100.0, 0.0), (120.0, 0.0)], uav, los)
        self.assertEqual(mask.tolist(), [False, True, True, False])

    def test_throughput_coverage(self):
        good = LinkSample.build((0, 0), 0, 100.0, 1.0)
        blocked = LinkSample.build((0, 0), None, 100.0, 0.0)
        self.assertEqual(throughput_coverage([good] * 4, 0.045), 1.0)
        self.assertEqual(throughput_coverage([blocked] * 4, 0.045), 0.0)
        self.assertAlmostEqual(throughput_coverage([good] * 7 + [blocked] * 3, 0.045), 0.7)
        with self.assertRaises(DomainError):
            throughput_coverage([], 0.045)

    def test_coverage_falls_with_threshold(self):
        rng = np.random.default_rng(15)
        for _ in range(20):
            sinrs = np.concatenate((rng.exponential(0.2, 40), np.zeros(5)))
            samples = [LinkSample.build((0, 0), 0, 100.0, s) for s in sinrs]
            thresholds = np.sort(rng.uniform(0.0, 1.0, 25))
            values = [throughput_coverage(samples, t) for t in thresholds]
            self.assertTrue(all(a >= b for a, b in zip(values, values[1:])), values)

    def test_round_robin_admission(self):
        self.assertEqual(admit_round_robin([3.0, 1.0, 2.0], 0.5).tolist(), [0, 2])
        self.assertEqual(admit_round_robin([3.0, 1.0, 2.0], 0.5, capacity=1).tolist(), [0])
        self.assertEqual(admit_round_robin([3.0, 1.0, 2.0], 0.1).tolist(), [0, 2, 1])
        self.assertEqual(len(admit_round_robin([], 0.5)), 0)

    def test_terrestrial_cell_respects_capacity(self):
        users = [(10.0, 0.0), (20.0, 0.0), (30.0, 0.0)]
        samples = cell_link_samples(users, None, (0.0, 0.0), [], RADIO, LosGeometry(), 1, 0.045)
        self.assertEqual(len(samples), 3)
        self.assertEqual(sum(1 for s in samples if s.sinr > 0), 1)
        self.assertTrue(all(s.serving_uav is None for s in samples))

    def test_uav_takes_visible_users_first(self):
        uav = make_uav(position=(0.0, 0.0), altitude=150.0)
        users = [(50.0, 0.0), (0.0, 0.0)]
        samples = cell_link_samples(users, uav, (0.0, 0.0), [uav], RADIO, LosGeometry(), 300, 0.045)
        self.assertEqual(samples[0].serving_uav, uav.id)
        self.assertIsNone(samples[1].serving_uav)
        self.assertGreater(samples[1].sinr, 0)
