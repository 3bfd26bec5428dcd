# Python standard library imports
import math
from dataclasses import dataclass

# Third-party imports
import numpy as np

# Local imports
from ..exceptions import DomainError, InfiniteLoadError, SingularityError


@dataclass(frozen=True)
class LinkSample:
    """One user's link: serving_uav is None for the terrestrial cell or a blocked user."""

    user_pos_m: tuple[float, float]
    serving_uav: int | None
    distance_m: float
    sinr: float
    spectral_eff_bps_hz: float

    @classmethod
    def build(cls, user_pos_m, serving_uav, distance_m, sinr):
        return cls(
            tuple(float(c) for c in user_pos_m),
            serving_uav,
            float(distance_m),
            float(sinr),
            spectral_efficiency(sinr),
        )


@dataclass(frozen=True)
class AreaLoad:
    value: float
    unserved_points: int = 0

    @property
    def fully_served(self):
        return self.unserved_points == 0


def noise_power_w(psd_dbm_hz, bandwidth_hz):
    """Thermal noise over the band: dBm/Hz density -> watts."""
    if bandwidth_hz <= 0:
        raise DomainError("bandwidth must be > 0")
    return 10 ** ((psd_dbm_hz + 10 * math.log10(bandwidth_hz) - 30) / 10)


def spectral_efficiency(sinr):
    return float(np.log2(1.0 + sinr))


def distance_3d(user_pos, uav_pos, altitude_m):
    return math.sqrt(
        (user_pos[0] - uav_pos[0]) ** 2 + (user_pos[1] - uav_pos[1]) ** 2 + altitude_m**2
    )


def received_power(tx_power_w, geometry_const, distance_m, path_loss_exp):
    """E_t * kappa / D**beta, element-wise on arrays."""
    distance_m = np.asarray(distance_m, dtype=float)
    if np.any(distance_m <= 0):
        raise SingularityError("path loss evaluated at zero distance")
    return tx_power_w * geometry_const / distance_m**path_loss_exp


def _distance_matrix(points, uavs):
    """Rows: UAVs, columns: points."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    pos = np.array([u.position_m for u in uavs], dtype=float).reshape(-1, 2)
    alt = np.array([u.altitude_m for u in uavs], dtype=float)
    dx = points[None, :, 0] - pos[:, None, 0]
    dy = points[None, :, 1] - pos[:, None, 1]
    return np.sqrt(dx**2 + dy**2 + alt[:, None] ** 2)


def sinr(user_pos, serving, fleet, radio):
    """
    SINR at a user for one serving UAV.

    Only available UAVs (available == 1) other than the serving one interfere.
    Raises: SingularityError if any considered UAV sits exactly on the user.
    """
    noise = noise_power_w(radio.noise_psd_dbm_hz, radio.bandwidth_hz)
    signal = received_power(
        radio.tx_power_w,
        radio.geometry_const,
        distance_3d(user_pos, serving.position_m, serving.altitude_m),
        radio.path_loss_exp,
    )
    interferers = [u for u in fleet if u.available == 1 and u.id != serving.id]
    interference = 0.0
    if interferers:
        dist = _distance_matrix([user_pos], interferers)[:, 0]
        interference = float(
            np.sum(received_power(radio.tx_power_w, radio.geometry_const, dist, radio.path_loss_exp))
        )
    return float(signal / (interference + noise))


def best_sinr_field(points, fleet, radio):
    """
    Best SINR over the available fleet at every point.

    Returns: (sinr array, index into the available-UAV list or -1);
    points get SINR 0 and index -1 when no UAV is available.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    available = [u for u in fleet if u.available == 1]
    if not available:
        return np.zeros(len(points)), np.full(len(points), -1)
    noise = noise_power_w(radio.noise_psd_dbm_hz, radio.bandwidth_hz)
    rx = received_power(
        radio.tx_power_w, radio.geometry_const, _distance_matrix(points, available), radio.path_loss_exp
    )
    total = rx.sum(axis=0)
    best = np.argmax(rx, axis=0)
    signal = rx[best, np.arange(len(points))]
    return signal / (total - signal + noise), best


def user_load(radio, traffic, sinr_value):
    """Fraction of channel time a user's traffic occupies: lambda*bits / (B*log2(1+SINR))."""
    if sinr_value <= 0:
        raise InfiniteLoadError("user with zero SINR cannot be served")
    return traffic.arrival_rate_req_s * traffic.mean_packet_bits / (
        radio.bandwidth_hz * math.log2(1.0 + sinr_value)
    )


def effective_throughput(sinr_value, active_users, radio):
    """Round-Robin share of the cell capacity, in bits/s."""
    if active_users < 1:
        raise DomainError("effective throughput needs at least one active user")
    if sinr_value < 0:
        raise DomainError("SINR must be >= 0")
    return radio.bandwidth_hz * math.log2(1.0 + sinr_value) / active_users


def disc_grid(center, radius_m, grid_res):
    """
    Midpoints of a grid_res x grid_res lattice over the disc's bounding square
    that fall inside the disc.

    The per-point area is rescaled so the kept points cover exactly pi*r^2.
    Returns: (points array (n, 2), cell_area_m2)
    """
    if grid_res < 2:
        raise DomainError("grid_res must be >= 2")
    step = 2 * radius_m / grid_res
    axis = -radius_m + step * (np.arange(grid_res) + 0.5)
    gx, gy = np.meshgrid(axis, axis, indexing="ij")
    inside = gx**2 + gy**2 <= radius_m**2
    points = np.column_stack((gx[inside] + center[0], gy[inside] + center[1]))
    return points, math.pi * radius_m**2 / len(points)


def integrate_load(sinr_values, cell_area_m2, radio, traffic):
    """
    Midpoint-rule integral of the per-point load.

    Points with SINR 0 cannot be served and are counted instead of integrated.
    Summation order follows the array order.
    """
    sinr_values = np.asarray(sinr_values, dtype=float)
    servable = sinr_values > 0
    per_point = (
        traffic.arrival_rate_req_s
        * traffic.mean_packet_bits
        / (radio.bandwidth_hz * np.log2(1.0 + sinr_values[servable]))
    )
    return AreaLoad(
        value=float(np.sum(per_point) * cell_area_m2),
        unserved_points=int(np.count_nonzero(~servable)),
    )


def area_load(area, fleet, radio, traffic, grid_res, center=(0.0, 0.0), radius_m=100.0):
    """
    Load integrated over the served disc of one area (Lambda_a).

    Each grid point is served by its best-SINR available UAV; an empty cell has zero load.
    Returns: AreaLoad (value and count of unservable grid points)
    """
    if area.active_users == 0 or traffic.arrival_rate_req_s == 0:
        return AreaLoad(0.0, 0)
    points, cell_area = disc_grid(center, radius_m, grid_res)
    field, _ = best_sinr_field(points, fleet, radio)
    return integrate_load(field, cell_area, radio, traffic)


def los_visible(user_pos, uav, los):
    d_h = math.hypot(user_pos[0] - uav.position_m[0], user_pos[1] - uav.position_m[1])
    theta = math.atan2(uav.altitude_m, d_h)
    return los.min_elev_rad <= theta <= los.max_elev_rad and d_h <= los.max_radius_m


def los_mask(points, uav, los):
    """los_visible over an array of user positions."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    d_h = np.hypot(points[:, 0] - uav.position_m[0], points[:, 1] - uav.position_m[1])
    theta = np.arctan2(uav.altitude_m, d_h)
    return (theta >= los.min_elev_rad) & (theta <= los.max_elev_rad) & (d_h <= los.max_radius_m)


def throughput_coverage(samples, threshold_bps_hz):
    """Fraction of users whose spectral efficiency reaches the threshold."""
    if not samples:
        raise DomainError("throughput coverage needs at least one user")
    covered = sum(1 for s in samples if s.spectral_eff_bps_hz >= threshold_bps_hz)
    return covered / len(samples)


def admit_round_robin(spectral_eff, threshold_bps_hz, capacity=None):
    """
    Round-Robin admission control.

    Users are admitted best spectral efficiency first while the worst admitted
    user's share se/k stays at or above the threshold, up to capacity.
    Returns: indices of admitted users (into spectral_eff)
    """
    spectral_eff = np.asarray(spectral_eff, dtype=float)
    order = np.argsort(-spectral_eff, kind="stable")
    ks = np.arange(1, len(order) + 1)
    ok = spectral_eff[order] / ks >= threshold_bps_hz
    # se sorted descending over growing k: ok is a prefix
    admitted = int(np.argmin(ok)) if not ok.all() else len(order)
    if capacity is not None:
        admitted = min(admitted, int(capacity))
    return order[:admitted]


def sinr_for_server(points, serving, fleet, radio):
    """Vectorised sinr(): one serving UAV, many user positions."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    noise = noise_power_w(radio.noise_psd_dbm_hz, radio.bandwidth_hz)
    signal = received_power(
        radio.tx_power_w,
        radio.geometry_const,
        _distance_matrix(points, [serving])[0],
        radio.path_loss_exp,
    )
    interferers = [u for u in fleet if u.available == 1 and u.id != serving.id]
    interference = np.zeros(len(points))
    if interferers:
        rx = received_power(
            radio.tx_power_w,
            radio.geometry_const,
            _distance_matrix(points, interferers),
            radio.path_loss_exp,
        )
        interference = rx.sum(axis=0)
    return signal / (interference + noise)


def cell_link_samples(users, uav, bs_pos, fleet, radio, los, user_capacity, threshold_bps_hz):
    """
    Link samples for every user in one cell.

    Process:
    1. The cell's UAV (if any) admits LOS-visible users by Round-Robin admission
    2. The terrestrial cell (noise-limited link from bs_pos) admits the rest up to user_capacity
    3. Users admitted by neither are blocked (SINR 0)

    Returns: list of LinkSample, one per user row
    """
    users = np.asarray(users, dtype=float).reshape(-1, 2)
    n = len(users)
    served_sinr = np.zeros(n)
    served_by = [None] * n
    remaining = np.ones(n, dtype=bool)
    dist = np.sqrt(
        (users[:, 0] - bs_pos[0]) ** 2 + (users[:, 1] - bs_pos[1]) ** 2 + radio.bs_antenna_m**2
    )

    if uav is not None and uav.available == 1 and n:
        visible = np.flatnonzero(los_mask(users, uav, los))
        if len(visible):
            field = sinr_for_server(users[visible], uav, fleet, radio)
            take = admit_round_robin(np.log2(1.0 + field), threshold_bps_hz)
            chosen = visible[take]
            served_sinr[chosen] = field[take]
            dist[chosen] = _distance_matrix(users[chosen], [uav])[0]
            remaining[chosen] = False
            for i in chosen.tolist():
                served_by[i] = uav.id

    rest = np.flatnonzero(remaining)
    if len(rest):
        noise = noise_power_w(radio.noise_psd_dbm_hz, radio.bandwidth_hz)
        bs_sinr = (
            received_power(radio.bs_tx_power_w, radio.geometry_const, dist[rest], radio.path_loss_exp)
            / noise
        )
        take = admit_round_robin(np.log2(1.0 + bs_sinr), threshold_bps_hz, user_capacity)
        served_sinr[rest[take]] = bs_sinr[take]

    return [LinkSample.build(users[i], served_by[i], dist[i], served_sinr[i]) for i in range(n)]
