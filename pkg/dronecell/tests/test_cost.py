# Python standard library imports
import math

# Third-party imports
import numpy as np

# Django framework imports
from django.test import SimpleTestCase

# Local imports
from ..exceptions import DomainError, SingularityError
from ..utils.cost_helpers import (
    EnergyBreakdown,
    cost_area,
    cost_overall,
    cost_uav,
    density_constraint_ok,
    energy_bs,
    energy_comm,
    energy_travel,
    energy_uav,
    log_poisson_pmf,
    mobility_time,
    n_req,
    phi_area,
    phi_uav,
    poisson_pmf,
)
from ..utils.scenario_helpers import CostWeights, RadioParams, UavEnergyParams
from .factories import make_snapshot, make_station, make_uav


class RequestCountTests(SimpleTestCase):
    def test_n_req_rounds_up(self):
        self.assertEqual(n_req(0, 50), 0)
        self.assertEqual(n_req(1, 50), 1)
        self.assertEqual(n_req(50, 50), 1)
        self.assertEqual(n_req(51, 50), 2)
        self.assertEqual(n_req(150, 50), 3)

    def test_n_req_domain(self):
        with self.assertRaises(DomainError):
            n_req(10, 0)
        with self.assertRaises(DomainError):
            n_req(-1, 50)


class PoissonTests(SimpleTestCase):
    def test_empty_process(self):
        self.assertEqual(poisson_pmf(0, 0.0), 1.0)
        self.assertEqual(poisson_pmf(3, 0.0), 0.0)
        self.assertEqual(poisson_pmf(-1, 2.0), 0.0)

    def test_normalised(self):
        for mean in (0.1, 0.667, 5.0, 20.0, 50.0):
            with self.subTest(mean=mean):
                k_max = int(mean + 40 * math.sqrt(mean) + 40)
                total = math.fsum(poisson_pmf(k, mean) for k in range(k_max + 1))
                self.assertAlmostEqual(total, 1.0, delta=1e-9)

    def test_large_k_stays_finite(self):
        expected = 100 * math.log(2 / 3) - 2 / 3 - math.lgamma(101)
        self.assertAlmostEqual(log_poisson_pmf(100, 2 / 3), expected, places=9)
        self.assertGreaterEqual(poisson_pmf(100, 2 / 3), 0.0)

    def test_negative_mean(self):
        with self.assertRaises(DomainError):
            log_poisson_pmf(1, -0.5)

    def test_densities(self):
        snap = make_snapshot(requests=2, users=300)
        self.assertAlmostEqual(phi_area(snap, make_station()), math.exp(-1) / 2)
        self.assertAlmostEqual(phi_uav(50.0, 2, 50), poisson_pmf(50, 25.0))
        with self.assertRaises(DomainError):
            phi_uav(50.0, 0, 50)


class DensityConstraintTests(SimpleTestCase):
    def test_no_users_violates(self):
        check = density_constraint_ok(make_snapshot(users=0), make_station())
        self.assertFalse(check)
        self.assertIn("negative radicand", check.diagnostic)

    def test_full_cell_with_expected_drops(self):
        check = density_constraint_ok(make_snapshot(users=300), make_station())
        self.assertTrue(check)
        self.assertAlmostEqual(check.lhs, math.sqrt(0.95))

    def test_explicit_drops(self):
        snap = make_snapshot(requests=4, users=75)
        self.assertFalse(density_constraint_ok(snap, make_station(), drops=[0, 0, 0, 0]))
        with self.assertRaises(DomainError):
            density_constraint_ok(snap, make_station(), drops=[0, 0])

    def test_sampled_drops_are_reproducible(self):
        snap = make_snapshot(requests=120, users=280)
        a = density_constraint_ok(snap, make_station(), rng=np.random.default_rng(3))
        b = density_constraint_ok(snap, make_station(), rng=np.random.default_rng(3))
        self.assertEqual(a, b)

    def test_needs_requests(self):
        with self.assertRaises(DomainError):
            density_constraint_ok(make_snapshot(requests=0), make_station())


class EnergyTests(SimpleTestCase):
    def test_energy_bs(self):
        bs = make_station(energy_per_load=2.0, solar=[3.0] * 24, charge_time_h=2.0)
        self.assertEqual(energy_bs(bs, 5, hour=7), 12.0)
        with self.assertRaises(DomainError):
            energy_bs(bs, -1, hour=0)

    def test_energy_uav(self):
        params = UavEnergyParams(e_per_m=1.0, e_per_s=1.0, e_per_load=1.0, charge_time_h=0.0)
        self.assertEqual(energy_uav(make_uav(), params, 10.0, 5.0, 5.0), 20.0)
        params = UavEnergyParams(e_per_m=1.0, e_per_s=1.0, e_per_load=1.0, charge_time_h=1 / 3600)
        self.assertAlmostEqual(energy_uav(make_uav(), params, 10.0, 5.0, 5.0), 19.0)
        self.assertEqual(energy_uav(make_uav(), params, 10.0, 5.0, 5.0, recharge_credit=False), 20.0)

    def test_energy_travel(self):
        params = UavEnergyParams(e_travel_per_m=0.5)
        self.assertEqual(energy_travel(params, 100.0, mobility_time(100.0, 5.0)), 1000.0)
        with self.assertRaises(DomainError):
            mobility_time(10.0, 0.0)

    def test_energy_comm(self):
        radio = RadioParams(n_links=3)
        noise = 10 ** (-17.4) * 2e7 / 1000
        expected = 0.5 * 3 * 10.0 * math.log2(1 + 10.0 * 10.0 / noise)
        self.assertAlmostEqual(energy_comm(radio) / expected, 1.0, places=9)

    def test_breakdown_weights(self):
        weights = CostWeights(w_bs=1.0, w_uav=2.0, w_travel=3.0, w_comm=4.0)
        breakdown = EnergyBreakdown.compose(10.0, 20.0, 30.0, 40.0, weights)
        self.assertEqual(breakdown.e_total_area, -10.0 + 90.0 + 160.0)
        self.assertEqual(breakdown.e_total_uav, 40.0 + 90.0 + 160.0)
        self.assertTrue(breakdown.is_consistent(weights))


class CostTests(SimpleTestCase):
    def setUp(self):
        self.weights = CostWeights()
        self.breakdown = EnergyBreakdown.compose(1.0, 1.0, 1.0, 1.0, self.weights)

    def test_unavailable_area_costs_nothing(self):
        self.assertEqual(
            cost_area(make_snapshot(), make_station(), self.breakdown, self.weights, 0, 5.0), 0.0
        )

    def test_uav_cost_at_zero_distance(self):
        with self.assertRaises(SingularityError):
            cost_uav(make_snapshot(), make_uav(), 0.0, self.breakdown, self.weights, 1, 0.5, 3.0)

    def test_cost_overall_example(self):
        weights = CostWeights(backend_cost=1.0, lstm_weight=0.0)
        self.assertEqual(cost_overall([2.0, 4.0], [2.0, 4.0], [0.0, 0.0], weights, 2), 7.0)
        self.assertEqual(cost_overall([2.0, 4.0], [2.0, 4.0], [0.0, 0.0], weights, [1, 2]), 8.0)

    def test_cost_overall_single_pair(self):
        weights = CostWeights(backend_cost=1.0, lstm_weight=1.0)
        self.assertAlmostEqual(cost_overall([2.0], [3.0], [1.0], weights, 1), 7.0)

    def test_forecasts_scale_only_the_area_term(self):
        weights = CostWeights(backend_cost=1.0, lstm_weight=1.0)
        base = cost_overall([2.0, 4.0], [2.0, 4.0], [1.0, 3.0], weights, 2)
        tripled = cost_overall([2.0, 4.0], [2.0, 4.0], [3.0, 9.0], weights, 2)
        self.assertAlmostEqual(tripled - base, 2 * (1.0 + 3.0) / 2)

    def test_cost_overall_domain(self):
        with self.assertRaises(DomainError):
            cost_overall([1.0], [], [], self.weights, 1)
        with self.assertRaises(DomainError):
            cost_overall([1.0], [1.0], [0.0], self.weights, 0)
        with self.assertRaises(DomainError):
            cost_overall([], [1.0], [0.0], self.weights, 1)

    def test_matches_closed_form_on_random_inputs(self):
        rng = np.random.default_rng(42)
        for _ in range(1000):
            weights = CostWeights(
                zeta1=rng.uniform(0, 2),
                zeta2=rng.uniform(0, 2),
                w_bs=rng.uniform(0, 1),
                w_uav=rng.uniform(0, 1),
                w_travel=rng.uniform(0, 1),
                w_comm=rng.uniform(0, 1),
                backend_cost=rng.uniform(0, 5),
                lstm_weight=rng.uniform(0, 1),
            )
            e = rng.uniform(0, 100, size=4)
            breakdown = EnergyBreakdown.compose(*e, weights)
            users = int(rng.integers(1, 300))
            snap = make_snapshot(requests=int(rng.integers(0, 150)), users=users)
            bs = make_station()
            a_i = int(rng.integers(0, 2))
            load = rng.uniform(0, 10)
            dist = rng.uniform(1, 500)
            phi_u = rng.uniform(0, 1)
            p = rng.uniform(0, 1e6)
            u_t = int(rng.integers(1, 5))

            area = cost_area(snap, bs, breakdown, weights, a_i, load)
            uav = cost_uav(snap, make_uav(), dist, breakdown, weights, a_i, phi_u, 3.0)
            total = cost_overall([uav], [area], [p], weights, u_t)

            phi_a = math.exp(
                snap.service_requests * math.log(users / 300)
                - users / 300
                - math.lgamma(snap.service_requests + 1)
            )
            e_area = -weights.w_bs * e[0] + weights.w_travel * e[2] + weights.w_comm * e[3]
            e_uav = weights.w_uav * e[1] + weights.w_travel * e[2] + weights.w_comm * e[3]
            want_area = a_i * phi_a * load * (weights.zeta1 * snap.service_requests + weights.zeta2 * 300 + e_area)
            want_uav = a_i * phi_u * dist**3 * (weights.zeta1 * snap.service_requests + weights.zeta2 * users + e_uav)
            want = (want_uav + weights.backend_cost) + (want_area + weights.lstm_weight * p) / u_t
            self.assertTrue(math.isclose(total, want, rel_tol=1e-9, abs_tol=1e-9), (total, want))
