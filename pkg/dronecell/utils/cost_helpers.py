# Python standard library imports
import math
from dataclasses import dataclass

# Third-party imports
import numpy as np
from scipy.special import gammaln

# Local imports
from ..exceptions import DomainError, SingularityError
from .radio_helpers import noise_power_w

# One load unit at the BS is worth one joule; charging time enters as
# charging power (J per hour) times hours.
LOAD_UNIT_J = 1.0
CHARGE_HOUR_J = 1.0


def n_req(service_reqs, uav_capacity):
    """UAVs needed to absorb service_reqs requests: ceil(R_s / R_n)."""
    if uav_capacity < 1:
        raise DomainError("uav_capacity must be >= 1")
    if service_reqs < 0:
        raise DomainError("service_reqs must be >= 0")
    return -(-int(service_reqs) // int(uav_capacity))


def log_poisson_pmf(k, mean):
    """
    ln P(K = k) for K ~ Poisson(mean), via log-gamma.

    mean == 0 is the empty process: 0.0 for k == 0, -inf otherwise.
    """
    if mean < 0:
        raise DomainError("Poisson mean must be >= 0")
    if k < 0:
        return -math.inf
    if mean == 0:
        return 0.0 if k == 0 else -math.inf
    return float(k * math.log(mean) - mean - gammaln(k + 1))


def poisson_pmf(k, mean):
    return math.exp(log_poisson_pmf(k, mean))


def phi_area(snapshot, bs):
    """User-distribution density of an area: pmf(R_s; u_a / Theta_r)."""
    if bs.user_capacity <= 0:
        raise DomainError("user_capacity must be > 0")
    return poisson_pmf(snapshot.service_requests, snapshot.active_users / bs.user_capacity)


def phi_uav(area_load, fleet_size, uav_capacity):
    """Unmet-request density per deployed UAV: pmf(R_n; Lambda_a / n)."""
    if fleet_size < 1:
        raise DomainError("phi_uav needs at least one deployed UAV")
    return poisson_pmf(uav_capacity, area_load / fleet_size)


@dataclass(frozen=True)
class DensityCheck:
    ok: bool
    lhs: float
    rhs: float
    diagnostic: str = ""

    def __bool__(self):
        return self.ok


def density_constraint_ok(snapshot, bs, rng=None, drops=None):
    """
    Request-density constraint of an area.

    Each request i carries the cell's utilisation share Theta^i = u_a / Theta_r and a
    drop term Pi^i. Pi^i is taken from drops when given, drawn Bernoulli(Pi_d) when
    an rng is given, and set to its expectation Pi_d otherwise.

    Satisfied iff sqrt(mean_i(Theta^i - Pi^i)) <= u_a / Theta_r.
    A negative radicand reports the constraint as violated.

    Returns: DensityCheck (truthy when satisfied)
    """
    r_s = snapshot.service_requests
    if r_s < 1:
        raise DomainError("density constraint needs at least one service request")
    share = snapshot.active_users / bs.user_capacity
    if drops is not None:
        pi = np.asarray(drops, dtype=float)
        if len(pi) != r_s:
            raise DomainError(f"expected {r_s} drop terms, got {len(pi)}")
    elif rng is not None:
        pi = (rng.random(r_s) < bs.packet_loss_frac).astype(float)
    else:
        pi = np.full(r_s, bs.packet_loss_frac)

    radicand = float(np.mean(share - pi))
    if radicand < 0:
        return DensityCheck(
            ok=False,
            lhs=math.nan,
            rhs=share,
            diagnostic=f"negative radicand {radicand:.6g} (drops exceed utilisation)",
        )
    lhs = math.sqrt(radicand)
    if lhs <= share:
        return DensityCheck(ok=True, lhs=lhs, rhs=share)
    return DensityCheck(ok=False, lhs=lhs, rhs=share, diagnostic=f"{lhs:.6g} > {share:.6g}")


def energy_bs(bs, offloaded, hour):
    """Energy conserved at a BS when offloaded load units move to UAVs."""
    if offloaded < 0:
        raise DomainError("offloaded load must be >= 0")
    return bs.energy_per_load * (
        offloaded * LOAD_UNIT_J + bs.solar_at(hour) - bs.charge_time_h * CHARGE_HOUR_J
    )


def energy_uav(uav, params, dist_m, service_s, load, recharge_credit=True):
    """
    Energy spent by one UAV: distance, hover time and load terms, less the
    recharge credit e_per_s * T_charge (in seconds) when recharge_credit is set.
    """
    if min(dist_m, service_s, load) < 0:
        raise DomainError("distance, service time and load must be >= 0")
    spent = params.e_per_m * dist_m + params.e_per_s * service_s + params.e_per_load * load
    if recharge_credit:
        spent -= params.e_per_s * params.charge_time_h * 3600.0
    return spent


def mobility_time(dist_m, speed_m_s):
    if speed_m_s <= 0:
        raise DomainError("speed must be > 0")
    return dist_m / speed_m_s


def energy_travel(params, dist_m, mobility_s):
    if dist_m < 0 or mobility_s < 0:
        raise DomainError("distance and mobility time must be >= 0")
    return params.e_travel_per_m * dist_m * mobility_s


def energy_comm(radio):
    """eta * sum over K links of E_t * log2(1 + G * E_t / N)."""
    if radio.n_links < 1:
        raise DomainError("n_links must be >= 1")
    gain = 10 ** (radio.channel_gain_db / 10)
    noise = noise_power_w(radio.noise_psd_dbm_hz, radio.bandwidth_hz)
    per_link = radio.tx_power_w * math.log2(1 + gain * radio.tx_power_w / noise)
    return radio.comm_energy_coeff * radio.n_links * per_link


@dataclass(frozen=True)
class EnergyBreakdown:
    e_bs: float
    e_uav: float
    e_travel: float
    e_comm: float
    e_total_area: float
    e_total_uav: float

    @classmethod
    def compose(cls, e_bs, e_uav, e_travel, e_comm, weights):
        return cls(
            e_bs=e_bs,
            e_uav=e_uav,
            e_travel=e_travel,
            e_comm=e_comm,
            e_total_area=-weights.w_bs * e_bs + weights.w_travel * e_travel + weights.w_comm * e_comm,
            e_total_uav=weights.w_uav * e_uav + weights.w_travel * e_travel + weights.w_comm * e_comm,
        )

    def is_consistent(self, weights):
        again = self.compose(self.e_bs, self.e_uav, self.e_travel, self.e_comm, weights)
        return again == self


def cost_area(snapshot, bs, breakdown, weights, a_i, area_load, phi=None):
    """a_i * Phi^A * Lambda_a * (zeta1 * R_s + zeta2 * Theta_r + E_total^A)."""
    if a_i == 0:
        return 0.0
    if phi is None:
        phi = phi_area(snapshot, bs)
    bracket = (
        weights.zeta1 * snapshot.service_requests
        + weights.zeta2 * bs.user_capacity
        + breakdown.e_total_area
    )
    return a_i * phi * area_load * bracket


def cost_uav(snapshot, uav, dist_m, breakdown, weights, a_i, phi_u, path_loss_exp):
    """a_i * Phi^U * D**beta * (zeta1 * R_s + zeta2 * u_a + E_total^U)."""
    if dist_m <= 0:
        raise SingularityError("UAV cost evaluated at zero distance")
    if a_i == 0:
        return 0.0
    bracket = (
        weights.zeta1 * snapshot.service_requests
        + weights.zeta2 * snapshot.active_users
        + breakdown.e_total_uav
    )
    return a_i * phi_u * dist_m**path_loss_exp * bracket


def cost_overall(uav_costs, area_costs, p_lstm, weights, fleet_in_area, fleet_size=None):
    """
    Overall cost of an allocation.

    (1/n) * sum_i (C^U_i + C_backend) + sum_j (C^A_j + lstm_weight * P_j) / U_T,j

    fleet_in_area is U_T: one count for every area or one count per area.
    fleet_size (n) defaults to len(uav_costs).
    Raises: DomainError on empty inputs or U_T == 0
    """
    if not area_costs or len(area_costs) != len(p_lstm):
        raise DomainError("need one forecast per area cost and at least one area")
    n = len(uav_costs) if fleet_size is None else fleet_size
    if n < 1:
        raise DomainError("fleet size must be >= 1")
    if isinstance(fleet_in_area, (int, np.integer)):
        fleet_in_area = [int(fleet_in_area)] * len(area_costs)
    if len(fleet_in_area) != len(area_costs):
        raise DomainError("need one U_T per area")
    if any(u <= 0 for u in fleet_in_area):
        raise DomainError("U_T must be >= 1")

    uav_term = sum(c + weights.backend_cost for c in uav_costs) / n
    area_term = sum(
        (c + weights.lstm_weight * p) / u for c, p, u in zip(area_costs, p_lstm, fleet_in_area)
    )
    return uav_term + area_term
