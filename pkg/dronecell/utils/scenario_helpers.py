# Python standard library imports
import dataclasses
import enum
import json
import math
import typing
from dataclasses import dataclass, field
from pathlib import Path

# Third-party imports
import numpy as np

# Django framework imports
from django.core.exceptions import ValidationError

# Local imports
from ..exceptions import InvariantViolation
from .seed_helpers import derive_seed

HOURS_PER_DAY = 24
DAYS_PER_YEAR = 365
HOURS_PER_YEAR = HOURS_PER_DAY * DAYS_PER_YEAR
HOURS_PER_WEEK = 168
SECONDS_PER_HOUR = 3600.0
JOULES_PER_KWH = 3.6e6


# ---------------------------------------------------------------------------
# Parameter sets (all immutable, JSON round-trippable)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RadioParams:
    """UAV air-interface constants plus the terrestrial small-cell link."""

    bandwidth_hz: float = 2.0e7
    tx_power_w: float = 10.0
    geometry_const: float = 1.5
    path_loss_exp: float = 3.0
    noise_psd_dbm_hz: float = -174.0
    channel_gain_db: float = 10.0
    comm_energy_coeff: float = 0.5
    n_links: int = 1
    bs_tx_power_w: float = 1.0
    bs_antenna_m: float = 10.0

    def clean(self):
        errors = {}
        if self.bandwidth_hz <= 0:
            errors["bandwidth_hz"] = ["must be > 0"]
        if self.tx_power_w <= 0:
            errors["tx_power_w"] = ["must be > 0"]
        if self.path_loss_exp < 2:
            errors["path_loss_exp"] = ["must be >= 2"]
        if self.n_links < 1:
            errors["n_links"] = ["must be >= 1"]
        if self.geometry_const <= 0:
            errors["geometry_const"] = ["must be > 0"]
        if self.bs_tx_power_w <= 0:
            errors["bs_tx_power_w"] = ["must be > 0"]
        if self.bs_antenna_m <= 0:
            errors["bs_antenna_m"] = ["must be > 0"]
        return errors


@dataclass(frozen=True)
class TrafficModel:
    """
    Request arrival process of one user.

    offered_traffic is the per-user load ratio. It is stored as given and never
    checked against arrival_rate_req_s / mean_packet_bits (the default
    values are not mutually consistent).
    """

    arrival_rate_req_s: float = 2.0
    mean_packet_bits: float = 1600.0
    extra_users: int = 0
    offered_traffic: float = 0.01

    def clean(self):
        errors = {}
        if self.arrival_rate_req_s <= 0:
            errors["arrival_rate_req_s"] = ["must be > 0"]
        if self.mean_packet_bits <= 0:
            errors["mean_packet_bits"] = ["must be > 0"]
        if self.extra_users < 0:
            errors["extra_users"] = ["must be >= 0"]
        return errors


@dataclass(frozen=True)
class LosGeometry:
    altitude_m: float = 150.0
    min_elev_rad: float = 0.5
    max_elev_rad: float = 1.4
    max_radius_m: float = 100.0
    cell_length_m: float = 500.0

    def clean(self):
        errors = {}
        if not 0 < self.min_elev_rad < self.max_elev_rad <= math.pi / 2:
            errors["max_elev_rad"] = ["need 0 < min_elev_rad < max_elev_rad <= pi/2"]
        if self.altitude_m <= 0:
            errors["altitude_m"] = ["must be > 0"]
        if self.max_radius_m <= 0:
            errors["max_radius_m"] = ["must be > 0"]
        if self.cell_length_m <= 0:
            errors["cell_length_m"] = ["must be > 0"]
        return errors


@dataclass(frozen=True)
class CostWeights:
    """
    Weights of the cost stack.

    w_bs / w_uav / w_travel / w_comm weight the energy terms of the combined
    area and UAV energies, zeta1 / zeta2 weight requests and capacity, and
    lstm_weight scales the forecast expenditure (joules) entering the overall
    cost. penalty_weight multiplies constraint violations in the GA fitness.
    """

    zeta1: float = 1.0
    zeta2: float = 1.0
    w_bs: float = 1e-6
    w_uav: float = 1e-3
    w_travel: float = 1e-3
    w_comm: float = 1e-3
    backend_cost: float = 1.0
    penalty_weight: float = 10.0
    lstm_weight: float = 1e-6

    def clean(self):
        errors = {}
        for f in dataclasses.fields(self):
            if getattr(self, f.name) < 0:
                errors[f.name] = ["must be >= 0"]
        if self.penalty_weight <= 0:
            errors["penalty_weight"] = ["must be > 0"]
        return errors


@dataclass(frozen=True)
class UavEnergyParams:
    e_per_m: float = 0.02
    e_per_s: float = 50.0
    e_per_load: float = 500.0
    e_travel_per_m: float = 0.02
    charge_time_h: float = 2.0

    def clean(self):
        return {
            f.name: ["must be >= 0"]
            for f in dataclasses.fields(self)
            if getattr(self, f.name) < 0
        }


@dataclass(frozen=True)
class BsEnergyParams:
    """Defaults applied to every small-cell base station."""

    user_capacity: int = 300
    battery_capacity_j: float = 2 * JOULES_PER_KWH
    initial_soc: float = 1.0
    energy_per_load: float = 3000.0
    charge_time_h: float = 2.0
    packet_loss_frac: float = 0.05
    solar_peak_j: float = 1.2e6

    def clean(self):
        errors = {}
        if self.user_capacity <= 0:
            errors["user_capacity"] = ["must be > 0"]
        if self.battery_capacity_j < 0:
            errors["battery_capacity_j"] = ["must be >= 0"]
        if not 0 <= self.initial_soc <= 1:
            errors["initial_soc"] = ["must lie in [0, 1]"]
        if self.energy_per_load < 0:
            errors["energy_per_load"] = ["must be >= 0"]
        if self.charge_time_h < 0:
            errors["charge_time_h"] = ["must be >= 0"]
        if not 0 <= self.packet_loss_frac <= 1:
            errors["packet_loss_frac"] = ["must lie in [0, 1]"]
        if self.solar_peak_j <= 0:
            errors["solar_peak_j"] = ["must be > 0"]
        return errors


@dataclass(frozen=True)
class FleetParams:
    """
    Fleet description.

    release_soc: UAVs stationed at a deficit cell leave only once the cell's
    battery has recovered to this fraction of capacity.
    """

    capacity_reqs: int = 50
    speed_m_s: float = 20.0
    battery_capacity_j: float = 0.5 * JOULES_PER_KWH
    altitudes_m: tuple[float, ...] = (150.0, 450.0)
    charging_stations: tuple[int, ...] = (0, 2, 4)
    return_reserve_frac: float = 0.05
    release_soc: float = 0.3

    def clean(self):
        errors = {}
        if self.capacity_reqs <= 0:
            errors["capacity_reqs"] = ["must be > 0"]
        if self.speed_m_s <= 0:
            errors["speed_m_s"] = ["must be > 0"]
        if self.battery_capacity_j < 0:
            errors["battery_capacity_j"] = ["must be >= 0"]
        if any(h <= 0 for h in self.altitudes_m):
            errors["altitudes_m"] = ["altitudes must be > 0"]
        if not self.charging_stations:
            errors["charging_stations"] = ["at least one charging station is required"]
        if not 0 <= self.return_reserve_frac < 1:
            errors["return_reserve_frac"] = ["must lie in [0, 1)"]
        if not 0 <= self.release_soc <= 1:
            errors["release_soc"] = ["must lie in [0, 1]"]
        return errors


@dataclass(frozen=True)
class DemandParams:
    base_users: int = 200
    requests_min: int = 100
    requests_max: int = 150

    def clean(self):
        errors = {}
        if self.base_users < 0:
            errors["base_users"] = ["must be >= 0"]
        if not 0 <= self.requests_min <= self.requests_max:
            errors["requests_max"] = ["need 0 <= requests_min <= requests_max"]
        return errors


@dataclass(frozen=True)
class SweepParams:
    extra_users: tuple[int, ...] = (0, 100, 200, 300, 400, 500, 600, 700)
    fleet_sizes: tuple[int, ...] = (0, 2, 4, 6, 8, 10)
    densities: tuple[float, ...] = (0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0)
    coverage_hours: tuple[int, ...] = (9, 12, 15, 18)
    sweep_horizon_h: int = 336

    def clean(self):
        errors = {}
        if list(self.extra_users) != sorted(self.extra_users) or any(
            x < 0 for x in self.extra_users
        ):
            errors["extra_users"] = ["must be nonnegative and nondecreasing"]
        if list(self.fleet_sizes) != sorted(self.fleet_sizes) or any(
            x < 0 for x in self.fleet_sizes
        ):
            errors["fleet_sizes"] = ["must be nonnegative and nondecreasing"]
        if list(self.densities) != sorted(self.densities) or any(
            x < 0 for x in self.densities
        ):
            errors["densities"] = ["must be nonnegative and nondecreasing"]
        if any(not 0 <= h < HOURS_PER_DAY for h in self.coverage_hours):
            errors["coverage_hours"] = ["hours must lie in 0..23"]
        if self.sweep_horizon_h < 1:
            errors["sweep_horizon_h"] = ["must be >= 1"]
        return errors


@dataclass(frozen=True)
class ScenarioConfig:
    n_uavs: int = 10
    n_areas: int = 5
    horizon: int = 8 * HOURS_PER_WEEK
    rng_seed: int = 2024
    radio: RadioParams = field(default_factory=RadioParams)
    traffic: TrafficModel = field(default_factory=TrafficModel)
    weights: CostWeights = field(default_factory=CostWeights)
    los: LosGeometry = field(default_factory=LosGeometry)
    uav_energy: UavEnergyParams = field(default_factory=UavEnergyParams)
    bs_defaults: BsEnergyParams = field(default_factory=BsEnergyParams)
    fleet: FleetParams = field(default_factory=FleetParams)
    demand: DemandParams = field(default_factory=DemandParams)
    sweeps: SweepParams = field(default_factory=SweepParams)
    grid_res: int = 16
    coverage_sample_every_h: int = 24
    solar_trace_path: str = ""

    def clean(self):
        errors = {}
        if self.n_uavs < 0:
            errors["n_uavs"] = ["must be >= 0"]
        if self.n_areas < 1:
            errors["n_areas"] = ["must be >= 1"]
        if self.horizon < 1:
            errors["horizon"] = ["must be >= 1"]
        if not 0 <= self.rng_seed < 2**64:
            errors["rng_seed"] = ["must be a 64-bit unsigned integer"]
        if self.grid_res < 2:
            errors["grid_res"] = ["must be >= 2"]
        if self.coverage_sample_every_h < 1:
            errors["coverage_sample_every_h"] = ["must be >= 1"]
        bad = [s for s in self.fleet.charging_stations if not 0 <= s < self.n_areas]
        if bad:
            errors["fleet.charging_stations"] = [f"unknown station ids {bad}"]
        return errors

    def full_clean(self):
        """
        Validate the whole scenario, nested parameter sets included.

        Raises: ValidationError keyed by dotted field path
        ("radio.bandwidth_hz", "n_areas", ...).
        """
        errors = dict(self.clean())
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if dataclasses.is_dataclass(value):
                for key, messages in value.clean().items():
                    errors.setdefault(f"{f.name}.{key}", []).extend(messages)
        if errors:
            raise ValidationError(errors)
        return self

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


# ---------------------------------------------------------------------------
# Config file (JSON) round trip
# ---------------------------------------------------------------------------


def _coerce(tp, value, path):
    origin = typing.get_origin(tp)
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ValidationError({path: ["expected a list"]})
        (item_tp, _ellipsis) = typing.get_args(tp)
        return tuple(_coerce(item_tp, v, path) for v in value)
    if isinstance(value, bool) and tp is not bool:
        raise ValidationError({path: [f"expected {tp.__name__}, got boolean"]})
    if tp is float:
        if not isinstance(value, (int, float)):
            raise ValidationError({path: ["expected a number"]})
        return float(value)
    if tp is int:
        if isinstance(value, float) and value.is_integer():
            return int(value)
        if not isinstance(value, int):
            raise ValidationError({path: ["expected an integer"]})
        return value
    if tp is str:
        if not isinstance(value, str):
            raise ValidationError({path: ["expected a string"]})
        return value
    if tp is bool:
        if not isinstance(value, bool):
            raise ValidationError({path: ["expected true/false"]})
        return value
    return value


def dataclass_from_dict(cls, data, prefix=""):
    """
    Build a (possibly nested) parameter dataclass from parsed JSON.

    Features:
    - Missing keys keep their dataclass default
    - Unknown keys and wrongly typed values are reported per dotted path
    - Nested dataclasses are built recursively

    Returns: instance of cls
    Raises: ValidationError with every problem found, not just the first
    """
    if not isinstance(data, dict):
        raise ValidationError({prefix.rstrip(".") or "__all__": ["expected an object"]})
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    errors = {}
    for key in sorted(set(data) - names):
        errors[f"{prefix}{key}"] = ["unknown field"]

    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name not in data:
            continue
        tp = hints[f.name]
        path = f"{prefix}{f.name}"
        try:
            if dataclasses.is_dataclass(tp):
                kwargs[f.name] = dataclass_from_dict(tp, data[f.name], f"{path}.")
            else:
                kwargs[f.name] = _coerce(tp, data[f.name], path)
        except ValidationError as exc:
            exc.update_error_dict(errors)
    if errors:
        raise ValidationError(errors)
    return cls(**kwargs)


def dataclass_to_dict(obj):
    """Plain JSON-ready dict; tuples become lists."""
    return json.loads(json.dumps(dataclasses.asdict(obj)))


def scenario_from_dict(data):
    return dataclass_from_dict(ScenarioConfig, data).full_clean()


def load_scenario(path):
    """Read and validate a ScenarioConfig from a JSON file."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return scenario_from_dict(data)


def save_scenario(config, path):
    Path(path).write_text(
        json.dumps(dataclass_to_dict(config), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


# ---------------------------------------------------------------------------
# World-state types
# ---------------------------------------------------------------------------


class UavState(enum.Enum):
    IDLE = "idle"
    TRAVELING = "traveling"
    SERVING = "serving"
    RETURNING = "returning"
    CHARGING = "charging"


# Legal transitions of the UAV state machine.
UAV_TRANSITIONS = {
    UavState.IDLE: {UavState.TRAVELING},
    UavState.TRAVELING: {UavState.SERVING},
    UavState.SERVING: {UavState.RETURNING},
    UavState.RETURNING: {UavState.CHARGING},
    UavState.CHARGING: {UavState.IDLE},
}


@dataclass
class BaseStation:
    id: int
    position_m: tuple[float, float]
    user_capacity: int
    active_users: int
    battery_j: float
    battery_capacity_j: float
    solar_trace: np.ndarray = field(repr=False)
    energy_per_load: float
    charge_time_h: float
    packet_loss_frac: float
    is_charging_station: bool = False

    def solar_at(self, hour):
        """E_gen for a simulation hour; full-year traces wrap around."""
        return float(self.solar_trace[hour % len(self.solar_trace)])


@dataclass
class Uav:
    id: int
    altitude_m: float
    capacity_reqs: int
    battery_j: float
    battery_capacity_j: float
    speed_m_s: float
    available: int
    position_m: tuple[float, float]
    home_station: int
    state: UavState = UavState.IDLE
    target_area: int | None = None

    def move_to(self, state):
        if state not in UAV_TRANSITIONS[self.state]:
            raise InvariantViolation(
                f"illegal transition {self.state.value} -> {state.value}", drone=self.id
            )
        self.state = state


@dataclass(frozen=True)
class DemandSnapshot:
    area_id: int
    hour: int
    service_requests: int
    active_users: int
    user_positions_m: np.ndarray = field(compare=False, repr=False)


def area_center(config, area_id):
    """Cells sit on a line, one cell length apart."""
    return (float(area_id) * config.los.cell_length_m, 0.0)


def build_stations(config, solar_traces):
    """
    Instantiate the small-cell base stations.

    solar_traces: one hourly series per station (synthetic or loaded).
    Returns: list of BaseStation, index == station id
    """
    bs = config.bs_defaults
    stations = []
    for sid in range(config.n_areas):
        stations.append(
            BaseStation(
                id=sid,
                position_m=area_center(config, sid),
                user_capacity=bs.user_capacity,
                active_users=0,
                battery_j=bs.initial_soc * bs.battery_capacity_j,
                battery_capacity_j=bs.battery_capacity_j,
                solar_trace=np.asarray(solar_traces[sid], dtype=float),
                energy_per_load=bs.energy_per_load,
                charge_time_h=bs.charge_time_h,
                packet_loss_frac=bs.packet_loss_frac,
                is_charging_station=sid in config.fleet.charging_stations,
            )
        )
    return stations


def build_fleet(config, n_uavs=None, altitude_m=None):
    """UAVs start fully charged at their home charging station (round-robin)."""
    count = config.n_uavs if n_uavs is None else n_uavs
    homes = config.fleet.charging_stations
    fleet = []
    for uid in range(count):
        home = homes[uid % len(homes)]
        fleet.append(
            Uav(
                id=uid,
                altitude_m=config.los.altitude_m if altitude_m is None else altitude_m,
                capacity_reqs=config.fleet.capacity_reqs,
                battery_j=config.fleet.battery_capacity_j,
                battery_capacity_j=config.fleet.battery_capacity_j,
                speed_m_s=config.fleet.speed_m_s,
                available=1,
                position_m=area_center(config, home),
                home_station=home,
            )
        )
    return fleet


# ---------------------------------------------------------------------------
# Synthetic data
# ---------------------------------------------------------------------------

_DAYLIGHT = np.array(
    [math.sin(math.pi * (h - 6) / 12) if 6 < h < 18 else 0.0 for h in range(24)]
)


def synth_solar(seed, days, peak_j):
    """
    Synthetic hourly solar harvest standing in for a measured trace.

    Process:
    1. Daylight shape: half-sinusoid between 06:00 and 18:00, zero at night
    2. Day-level cloudiness from a clear/overcast persistence chain
       (overcast spells last about 2.5 days on average)
    3. Hour-level multiplicative noise in [0.85, 1.15]

    Values never exceed 1.1 * 1.15 * peak_j.

    Returns: numpy array of days * 24 energies (joules), all >= 0
    """
    if days < 1:
        raise ValueError("days must be >= 1")
    if peak_j <= 0:
        raise ValueError("peak_j must be > 0")
    rng = np.random.default_rng(seed)
    series = np.empty((days, HOURS_PER_DAY))
    overcast = False
    # one day at a time, so a longer series extends a shorter one
    for day in range(days):
        overcast = rng.random() < (0.6 if overcast else 0.2)
        factor = rng.uniform(0.15, 0.45) if overcast else rng.uniform(0.75, 1.1)
        noise = rng.uniform(0.85, 1.15, size=HOURS_PER_DAY)
        series[day] = factor * _DAYLIGHT * noise * peak_j
    return series.ravel()


def diurnal_factor(hour):
    """Demand shape: trough 0.2 at 03:00, peak 1.0 at 15:00."""
    return 0.6 + 0.4 * math.sin(2 * math.pi * ((hour % HOURS_PER_DAY) - 9) / 24)


def uniform_disc(rng, count, center, radius):
    """count points uniformly distributed in a disc."""
    r = radius * np.sqrt(rng.random(count))
    theta = 2 * math.pi * rng.random(count)
    return np.column_stack((center[0] + r * np.cos(theta), center[1] + r * np.sin(theta)))


def synth_demand(
    seed,
    areas,
    hours,
    base_users,
    *,
    requests_range=(100, 150),
    radius_m=100.0,
    centers=None,
):
    """
    Synthetic per-area hourly demand.

    Process:
    1. Active users follow the diurnal factor with +/-10% noise, never above base_users
    2. Service requests are drawn in requests_range and scaled by the diurnal factor
    3. User positions are uniform in the cell disc of radius radius_m

    Returns: list of DemandSnapshot ordered by hour, then area
    """
    if areas < 1 or hours < 1:
        raise ValueError("areas and hours must be >= 1")
    if centers is None:
        centers = [(0.0, 0.0)] * areas
    rngs = [np.random.default_rng(derive_seed(seed, "demand", a)) for a in range(areas)]
    lo, hi = requests_range
    snapshots = []
    for hour in range(hours):
        f = diurnal_factor(hour)
        for area in range(areas):
            rng = rngs[area]
            users = int(min(base_users, round(base_users * f * rng.uniform(0.9, 1.1))))
            requests = int(round(rng.uniform(lo, hi) * f))
            positions = uniform_disc(rng, users, centers[area], radius_m)
            positions.setflags(write=False)
            snapshots.append(
                DemandSnapshot(
                    area_id=area,
                    hour=hour,
                    service_requests=requests,
                    active_users=users,
                    user_positions_m=positions,
                )
            )
    return snapshots


def scale_demand(snapshot, factor):
    """Demand snapshot with users and requests multiplied by a density factor."""
    users = int(round(snapshot.active_users * factor))
    positions = snapshot.user_positions_m
    if users > len(positions) and len(positions):
        positions = np.resize(positions, (users, 2))
    else:
        positions = positions[:users]
    return dataclasses.replace(
        snapshot,
        service_requests=int(round(snapshot.service_requests * factor)),
        active_users=users,
        user_positions_m=positions,
    )


def scenario_demand(config, hours=None):
    """synth_demand wired to a scenario's seed, geometry and demand ranges."""
    return synth_demand(
        derive_seed(config.rng_seed, "demand"),
        config.n_areas,
        config.horizon if hours is None else hours,
        config.demand.base_users,
        requests_range=(config.demand.requests_min, config.demand.requests_max),
        radius_m=config.los.max_radius_m,
        centers=[area_center(config, a) for a in range(config.n_areas)],
    )


def scenario_solar(config, days=None):
    """One synthetic solar series per station, long enough for the horizon."""
    if days is None:
        days = max(1, math.ceil(config.horizon / HOURS_PER_DAY))
    return [
        synth_solar(derive_seed(config.rng_seed, "solar", sid), days, config.bs_defaults.solar_peak_j)
        for sid in range(config.n_areas)
    ]


def demand_by_hour(snapshots):
    """Index snapshots as {hour: [snapshot per area]}."""
    table = {}
    for snap in snapshots:
        table.setdefault(snap.hour, []).append(snap)
    for row in table.values():
        row.sort(key=lambda s: s.area_id)
    return table
