# Python standard library imports
import dataclasses
import logging
import math
from dataclasses import dataclass, field

# Third-party imports
import numpy as np

# Local imports
from ..exceptions import InvariantViolation
from . import cost_helpers as costs
from .evolution_helpers import allocate_greedy
from .forecast_helpers import StationHistory, predict
from .radio_helpers import area_load, cell_link_samples, distance_3d, throughput_coverage
from .scenario_helpers import (
    HOURS_PER_DAY,
    HOURS_PER_WEEK,
    SECONDS_PER_HOUR,
    Uav,
    UavState,
    area_center,
    build_fleet,
    build_stations,
    demand_by_hour,
    scale_demand,
    scenario_demand,
    scenario_solar,
    uniform_disc,
)
from .seed_helpers import make_rng

logger = logging.getLogger(__name__)

COVERAGE_THRESHOLD_BPS_HZ = 0.045
# Hour of day at which run_sim samples throughput coverage.
COVERAGE_SAMPLE_HOUR = 12


# ---------------------------------------------------------------------------
# World state
# ---------------------------------------------------------------------------


@dataclass
class StationHour:
    """Ledger row: one station during one hour."""

    station: int
    hour: int
    battery_before: float
    harvest_j: float
    users: int
    requests: int
    served_uav: int
    served_bs: int
    unserved: int
    battery_after: float
    energy_per_load: float
    outage: bool = False

    def as_dict(self):
        return dataclasses.asdict(self)


@dataclass
class WorldState:
    hour: int
    stations: list
    fleet: list
    pending_dispatches: list = field(default_factory=list)
    outage_log: list = field(default_factory=list)
    served_load: dict = field(default_factory=dict)
    deficit: set = field(default_factory=set)
    history: dict = field(default_factory=dict)

    def check(self):
        """Raise InvariantViolation naming the first inconsistent station or drone."""
        for bs in self.stations:
            if not 0 <= bs.battery_j <= bs.battery_capacity_j:
                raise InvariantViolation(f"battery {bs.battery_j} outside capacity", station=bs.id)
        pending = {uid for uid, _, _ in self.pending_dispatches}
        for uav in self.fleet:
            if not 0 <= uav.battery_j <= uav.battery_capacity_j + 1e-9:
                raise InvariantViolation(f"battery {uav.battery_j} outside capacity", drone=uav.id)
            if uav.available not in (0, 1):
                raise InvariantViolation("availability flag must be 0 or 1", drone=uav.id)
            if uav.state is UavState.TRAVELING and uav.id not in pending:
                raise InvariantViolation("traveling without a dispatch", drone=uav.id)
            if uav.state is UavState.SERVING and uav.target_area is None:
                raise InvariantViolation("serving without a target area", drone=uav.id)
        last = {}
        for station, hour in self.outage_log:
            if hour <= last.get(station, -1):
                raise InvariantViolation("outage log out of order", station=station)
            last[station] = hour


def hover_energy(config, seconds, load):
    return config.uav_energy.e_per_s * seconds + config.uav_energy.e_per_load * load


def trip_energy(config, dist_m):
    """Movement energy for one leg: per-metre term plus the sustained-mobility term."""
    params = config.uav_energy
    return params.e_per_m * dist_m + costs.energy_travel(
        params, dist_m, costs.mobility_time(dist_m, config.fleet.speed_m_s)
    )


def horizontal_distance(a, b):
    return math.hypot(a[0] - b[0], a[1] - b[1])


def home_position(config, uav):
    return area_center(config, uav.home_station)


def reserve_j(config, uav):
    return config.fleet.return_reserve_frac * uav.battery_capacity_j


def can_serve_hour(config, uav, area):
    """Battery covers a full service hour at capacity plus the trip home and the reserve."""
    center = area_center(config, area)
    need = hover_energy(config, SECONDS_PER_HOUR, uav.capacity_reqs)
    need += trip_energy(config, horizontal_distance(center, home_position(config, uav)))
    return uav.battery_j >= need + reserve_j(config, uav)


def can_dispatch(config, uav, area):
    if uav.state is not UavState.IDLE or uav.available != 1:
        return False
    center = area_center(config, area)
    outbound = trip_energy(config, horizontal_distance(uav.position_m, center))
    return uav.battery_j - outbound >= 0 and can_serve_hour(
        config, dataclasses.replace(uav, battery_j=uav.battery_j - outbound), area
    )


# ---------------------------------------------------------------------------
# Policies
# ---------------------------------------------------------------------------


class NoUavPolicy:
    name = "no-uav"

    def allocate(self, world, needs, ctx):
        return {}


class GreedyDispatch:
    """Cheapest (UAV, area) pairs first: C^U plus the weighted energy of getting there."""

    name = "greedy"

    def pair_costs(self, world, needs, ctx, ready):
        cfg = ctx.config
        weights = cfg.weights
        e_comm = costs.energy_comm(cfg.radio)
        pair_cost, pair_dist = {}, {}
        for area, need in needs.items():
            if need <= 0:
                continue
            center = area_center(cfg, area)
            snap = ctx.current_demand[area]
            bs = world.stations[area]
            stand_in = Uav(
                id=-1,
                altitude_m=cfg.los.altitude_m,
                capacity_reqs=cfg.fleet.capacity_reqs,
                battery_j=0.0,
                battery_capacity_j=0.0,
                speed_m_s=cfg.fleet.speed_m_s,
                available=1,
                position_m=center,
                home_station=area,
            )
            lam = area_load(snap, [stand_in], cfg.radio, cfg.traffic, cfg.grid_res, center, cfg.los.max_radius_m)
            phi_u = costs.phi_uav(lam.value, max(1, need), cfg.fleet.capacity_reqs)
            e_bs = costs.energy_bs(bs, min(snap.service_requests, cfg.fleet.capacity_reqs), world.hour)
            for uav in ready:
                travel = horizontal_distance(uav.position_m, center)
                e_travel = costs.energy_travel(cfg.uav_energy, travel, costs.mobility_time(travel, uav.speed_m_s))
                e_uav = costs.energy_uav(
                    uav, cfg.uav_energy, travel, SECONDS_PER_HOUR, cfg.fleet.capacity_reqs, recharge_credit=False
                )
                breakdown = costs.EnergyBreakdown.compose(e_bs, e_uav, e_travel, e_comm, weights)
                c_u = costs.cost_uav(
                    snap,
                    uav,
                    distance_3d(center, uav.position_m, uav.altitude_m),
                    breakdown,
                    weights,
                    uav.available,
                    phi_u,
                    cfg.radio.path_loss_exp,
                )
                movement = weights.w_uav * cfg.uav_energy.e_per_m * travel + weights.w_travel * e_travel
                pair_cost[(uav.id, area)] = c_u + movement
                pair_dist[(uav.id, area)] = travel
        return pair_cost, pair_dist

    def allocate(self, world, needs, ctx):
        ready = ctx.ready_uavs(world)
        if not ready:
            return {}
        pair_cost, pair_dist = self.pair_costs(world, needs, ctx, ready)
        pair_cost = {p: c for p, c in pair_cost.items() if can_dispatch(ctx.config, ctx.uav(world, p[0]), p[1])}
        return allocate_greedy(ready, pair_cost, needs, pair_dist)


class GenomeDispatch(GreedyDispatch):
    """An evolved allocation decides which drones go where; greedy fills what it leaves open."""

    name = "genome"

    def __init__(self, genome):
        self.genome = genome

    def allocate(self, world, needs, ctx):
        ready = {u.id: u for u in ctx.ready_uavs(world)}
        preferred = self.genome.allocation_map()
        allocation, remaining = {}, dict(needs)
        for area in sorted(needs):
            for uid in preferred.get(area, []):
                if remaining[area] <= 0:
                    break
                uav = ready.get(uid)
                if uav is not None and can_dispatch(ctx.config, uav, area):
                    allocation.setdefault(area, []).append(uid)
                    del ready[uid]
                    remaining[area] -= 1
        if ready and any(v > 0 for v in remaining.values()):
            leftover = list(ready.values())
            pair_cost, pair_dist = self.pair_costs(world, remaining, ctx, leftover)
            pair_cost = {
                p: c for p, c in pair_cost.items() if can_dispatch(ctx.config, ready[p[0]], p[1])
            }
            for area, uids in allocate_greedy(leftover, pair_cost, remaining, pair_dist).items():
                allocation.setdefault(area, []).extend(uids)
        return allocation


# ---------------------------------------------------------------------------
# Stepping
# ---------------------------------------------------------------------------


@dataclass
class SimContext:
    config: object
    policy: object
    forecaster: object = None
    current_demand: list = field(default_factory=list)
    dispatches: int = 0

    def uav(self, world, uid):
        return world.fleet[uid]

    def ready_uavs(self, world):
        return [u for u in world.fleet if u.state is UavState.IDLE and u.available == 1]

    def predict_next_energy(self, world, station):
        """Next-hour demand energy: forecaster output, or the current hour's offered energy."""
        users, energy = world.history.get(station, ([], []))
        model = self.forecaster
        if model is not None:
            window = getattr(model, "window_hours", None) or HOURS_PER_DAY
            if len(energy) >= window:
                history = StationHistory(
                    station, world.hour - window + 1, users[-window:], energy[-window:]
                )
                return float(max(0.0, predict(model, history.features()[None, :, :])[0]))
        return float(energy[-1]) if energy else 0.0


def _send_home(config, world, uav):
    uav.move_to(UavState.RETURNING)
    home = home_position(config, uav)
    uav.battery_j = max(0.0, uav.battery_j - trip_energy(config, horizontal_distance(uav.position_m, home)))
    uav.position_m = home
    uav.target_area = None
    uav.move_to(UavState.CHARGING)


def _serve(config, uavs, requests, seconds):
    """Serving UAVs take up to R_n requests each; returns the number served."""
    served = 0
    for uav in uavs:
        take = min(uav.capacity_reqs, requests - served)
        uav.battery_j = max(0.0, uav.battery_j - hover_energy(config, seconds, take))
        served += take
    return served


def step(world, demand_row, ctx):
    """
    Advance the world by one hour.

    Process:
    1. Land dispatches due this hour; serving drones that cannot afford another
       hour, or whose cell has recovered, head home
    2. Per station: harvest solar energy, stationed drones serve first, the BS
       serves the rest within its user capacity and battery
    3. Detect deficits (forecast energy above battery plus expected harvest,
       or users above capacity)
    4. The policy dispatches idle drones; those arriving within the hour serve
       what is still unserved
    5. Charging drones recharge; unserved demand at a depleted station is an outage

    Returns: list of StationHour ledger rows
    """
    cfg = ctx.config
    hour = world.hour
    ctx.current_demand = demand_row

    still_pending = []
    for uid, area, arrival in world.pending_dispatches:
        if arrival <= hour:
            uav = world.fleet[uid]
            uav.move_to(UavState.SERVING)
            uav.position_m = area_center(cfg, area)
        else:
            still_pending.append((uid, area, arrival))
    world.pending_dispatches = still_pending

    for uav in world.fleet:
        if uav.state is UavState.SERVING:
            released = uav.target_area not in world.deficit
            if released or not can_serve_hour(cfg, uav, uav.target_area):
                _send_home(cfg, world, uav)

    rows = []
    for bs in world.stations:
        snap = demand_row[bs.id]
        e = bs.energy_per_load
        harvest = bs.solar_at(hour)
        before = bs.battery_j
        requests = snap.service_requests

        stationed = [u for u in world.fleet if u.state is UavState.SERVING and u.target_area == bs.id]
        served_uav = _serve(cfg, stationed, requests, SECONDS_PER_HOUR)
        remaining = requests - served_uav

        cap_limit = requests
        if snap.active_users > bs.user_capacity:
            cap_limit = math.floor(requests * bs.user_capacity / snap.active_users)
        energy_limit = math.floor((before + harvest) / e) if e > 0 else remaining
        served_bs = max(0, min(remaining, cap_limit, energy_limit))
        after = min(bs.battery_capacity_j, max(0.0, before + harvest - e * served_bs))
        bs.battery_j = after
        bs.active_users = snap.active_users

        rows.append(
            StationHour(
                station=bs.id,
                hour=hour,
                battery_before=before,
                harvest_j=harvest,
                users=snap.active_users,
                requests=requests,
                served_uav=served_uav,
                served_bs=served_bs,
                unserved=remaining - served_bs,
                battery_after=after,
                energy_per_load=e,
            )
        )
        users_hist, energy_hist = world.history.setdefault(bs.id, ([], []))
        users_hist.append(float(snap.active_users))
        energy_hist.append(float(e * requests))

    needs = {}
    for bs, row in zip(world.stations, rows):
        snap = demand_row[bs.id]
        expected_harvest = bs.solar_at(hour + 1 - HOURS_PER_DAY) if hour + 1 >= HOURS_PER_DAY else 0.0
        energy_short = ctx.predict_next_energy(world, bs.id) > row.battery_after + expected_harvest
        over_capacity = snap.active_users > bs.user_capacity
        if bs.id in world.deficit:
            recovered = row.battery_after >= cfg.fleet.release_soc * bs.battery_capacity_j
            if recovered and not energy_short and not over_capacity:
                world.deficit.discard(bs.id)
        elif energy_short or over_capacity:
            world.deficit.add(bs.id)

        if bs.id not in world.deficit:
            continue
        if energy_short or row.battery_after < cfg.fleet.release_soc * bs.battery_capacity_j:
            wanted = costs.n_req(snap.service_requests, cfg.fleet.capacity_reqs)
        else:
            excess = snap.service_requests - math.floor(
                snap.service_requests * bs.user_capacity / max(1, snap.active_users)
            )
            wanted = costs.n_req(max(0, excess), cfg.fleet.capacity_reqs)
        committed = sum(
            1
            for u in world.fleet
            if u.target_area == bs.id and u.state in (UavState.SERVING, UavState.TRAVELING)
        )
        if wanted > committed:
            needs[bs.id] = wanted - committed

    allocation = ctx.policy.allocate(world, needs, ctx) if needs else {}
    for area in sorted(allocation):
        center = area_center(cfg, area)
        row = rows[area]
        for uid in allocation[area]:
            uav = world.fleet[uid]
            travel = horizontal_distance(uav.position_m, center)
            travel_s = costs.mobility_time(travel, uav.speed_m_s)
            uav.move_to(UavState.TRAVELING)
            uav.target_area = area
            uav.battery_j = max(0.0, uav.battery_j - trip_energy(cfg, travel))
            ctx.dispatches += 1
            arrival = hour + int(travel_s // SECONDS_PER_HOUR)
            logger.debug("hour %d: drone %d -> station %d (%.0f m)", hour, uid, area, travel)
            if arrival > hour:
                world.pending_dispatches.append((uid, area, arrival))
                continue
            uav.move_to(UavState.SERVING)
            uav.position_m = center
            extra = _serve(cfg, [uav], row.unserved, SECONDS_PER_HOUR - travel_s)
            row.served_uav += extra
            row.unserved -= extra

    for uav in world.fleet:
        if uav.state is UavState.CHARGING:
            rate = uav.battery_capacity_j / max(cfg.uav_energy.charge_time_h, 1e-9)
            uav.battery_j = min(uav.battery_capacity_j, uav.battery_j + rate)
            if uav.battery_j >= uav.battery_capacity_j:
                uav.move_to(UavState.IDLE)

    for row in rows:
        world.served_load.setdefault(row.station, []).append(row.served_uav + row.served_bs)
        if row.unserved > 0 and row.battery_after < row.energy_per_load:
            row.outage = True
            world.outage_log.append((row.station, hour))
            logger.debug("hour %d: outage at station %d (%d unserved)", hour, row.station, row.unserved)

    world.hour += 1
    return rows


# ---------------------------------------------------------------------------
# Runs and metrics
# ---------------------------------------------------------------------------


@dataclass
class RunMetrics:
    policy: str
    fleet_size: int
    horizon: int
    stations: int
    outage_hours: int
    outage_events: int
    outage_pct_per_week: list
    mean_time_between_outages_h: float
    service_coverage: float
    throughput_coverage: float | None
    dispatches: int

    def as_dict(self):
        return dataclasses.asdict(self)


@dataclass
class SimResult:
    metrics: RunMetrics
    world: WorldState
    ledger: list
    trace: list = field(default_factory=list)
    coverage: list = field(default_factory=list)

    def worst_hour_view(self, config, demand):
        """
        The hour with the most unserved requests, packaged for the GA fitness context.

        Drones are reported as they start a run: at home, charged and available.
        """
        by_hour = {}
        for row in self.ledger:
            by_hour.setdefault(row.hour, []).append(row)
        hour = max(sorted(by_hour), key=lambda h: sum(r.unserved for r in by_hour[h]))
        rows = sorted(by_hour[hour], key=lambda r: r.station)
        table = demand_by_hour(demand)
        return {
            "hour": hour,
            "fleet": build_fleet(config),
            "snapshots": table[hour],
            "stations": self.world.stations,
            "unserved": [r.unserved for r in rows],
        }


def outage_events(outage_log):
    """Runs of consecutive outage hours per station count as one event each."""
    events = 0
    last = {}
    for station, hour in sorted(outage_log):
        if last.get(station) != hour - 1:
            events += 1
        last[station] = hour
    return events


def mean_time_between_outages(station_hours, events):
    """
    Pooled over stations: all station-hours divided by all outage events, floored
    at 1 hour. With no events the whole station-hour budget is returned. This is
    not the mean of per-station gaps; a station that never fails still adds its
    hours to the numerator.
    """
    return max(1.0, station_hours / max(1, events))


def weekly_outage_pct(outage_log, stations, horizon):
    weeks = max(1, math.ceil(horizon / HOURS_PER_WEEK))
    counts = [0] * weeks
    for _, hour in outage_log:
        counts[hour // HOURS_PER_WEEK] += 1
    pct = []
    for w in range(weeks):
        hours = min(HOURS_PER_WEEK, horizon - w * HOURS_PER_WEEK)
        pct.append(100.0 * counts[w] / (stations * hours))
    return pct


def _trace_row(world, rows):
    return {
        "hour": rows[0].hour if rows else world.hour - 1,
        "stations": [r.as_dict() for r in rows],
        "uavs": [
            {
                "id": u.id,
                "state": u.state.value,
                "battery_j": u.battery_j,
                "target_area": u.target_area,
                "position_m": list(u.position_m),
            }
            for u in world.fleet
        ],
    }


def run_sim(
    config,
    policy,
    horizon=None,
    *,
    demand=None,
    solar=None,
    fleet_size=None,
    forecaster=None,
    trace=False,
    threshold_bps_hz=COVERAGE_THRESHOLD_BPS_HZ,
    check_every=1,
):
    """
    Simulate the scenario hour by hour under one dispatch policy.

    demand / solar default to the scenario's synthetic data; passing them lets
    paired runs share inputs. Throughput coverage is sampled at noon every
    coverage_sample_every_h hours.

    Returns: SimResult (metrics, final world, per-station ledger, optional per-hour trace)
    """
    horizon = config.horizon if horizon is None else horizon
    if demand is None:
        demand = scenario_demand(config, hours=horizon)
    if solar is None:
        solar = scenario_solar(config, days=max(1, math.ceil(horizon / HOURS_PER_DAY)))
    table = demand_by_hour(demand)
    if len(table) < horizon:
        raise InvariantViolation(f"demand covers {len(table)} hours, horizon is {horizon}")

    n = config.n_uavs if fleet_size is None else fleet_size
    world = WorldState(hour=0, stations=build_stations(config, solar), fleet=build_fleet(config, n))
    ctx = SimContext(config=config, policy=policy, forecaster=forecaster)

    ledger, trace_rows, coverage_samples = [], [], []
    every = config.coverage_sample_every_h
    for hour in range(horizon):
        rows = step(world, table[hour], ctx)
        ledger.extend(rows)
        if check_every and hour % check_every == 0:
            world.check()
        if trace:
            trace_rows.append(_trace_row(world, rows))
        if hour % every == COVERAGE_SAMPLE_HOUR % every:
            value = _sampled_coverage(config, world, table[hour], threshold_bps_hz)
            if value is not None:
                coverage_samples.append((hour, value))

    station_hours = len(world.stations) * horizon
    events = outage_events(world.outage_log)
    metrics = RunMetrics(
        policy=policy.name,
        fleet_size=n,
        horizon=horizon,
        stations=len(world.stations),
        outage_hours=len(world.outage_log),
        outage_events=events,
        outage_pct_per_week=weekly_outage_pct(world.outage_log, len(world.stations), horizon),
        mean_time_between_outages_h=mean_time_between_outages(station_hours, events),
        service_coverage=sum(1 for r in ledger if r.unserved == 0) / max(1, len(ledger)),
        throughput_coverage=float(np.mean([v for _, v in coverage_samples])) if coverage_samples else None,
        dispatches=ctx.dispatches,
    )
    logger.info(
        "%s run: %d outage hours over %d station-hours, %d dispatches",
        policy.name,
        metrics.outage_hours,
        station_hours,
        ctx.dispatches,
    )
    return SimResult(metrics=metrics, world=world, ledger=ledger, trace=trace_rows, coverage=coverage_samples)


def _sampled_coverage(config, world, demand_row, threshold):
    values = []
    for bs in world.stations:
        snap = demand_row[bs.id]
        if not len(snap.user_positions_m):
            continue
        uav = next(
            (u for u in world.fleet if u.state is UavState.SERVING and u.target_area == bs.id), None
        )
        samples = cell_link_samples(
            snap.user_positions_m,
            uav,
            bs.position_m,
            world.fleet,
            config.radio,
            config.los,
            bs.user_capacity,
            threshold,
        )
        values.append(throughput_coverage(samples, threshold))
    return float(np.mean(values)) if values else None


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


def sweep_extra_users(config, extra_user_counts=None, altitudes=None, threshold_bps_hz=COVERAGE_THRESHOLD_BPS_HZ):
    """
    Throughput coverage versus extra users per cell.

    One drone hovers over each cell centre at the given altitude (or none for
    the baseline). Extra users are prefixes of one fixed draw per cell and hour,
    so a larger count always adds users to a smaller one.

    Returns: {None: baseline curve, altitude: curve, ...}, curves aligned with the counts
    """
    counts = list(config.sweeps.extra_users if extra_user_counts is None else extra_user_counts)
    altitudes = list(config.fleet.altitudes_m if altitudes is None else altitudes)
    if counts != sorted(counts):
        raise ValueError("extra user counts must be nondecreasing")
    hours = list(config.sweeps.coverage_hours)
    demand = demand_by_hour(scenario_demand(config, hours=max(hours) + 1))
    top = max(counts, default=0)

    cells = []
    for hour in hours:
        for snap in demand[hour]:
            center = area_center(config, snap.area_id)
            rng = make_rng(config.rng_seed, "extra-users", snap.area_id, hour)
            extra = uniform_disc(rng, top, center, config.los.max_radius_m)
            cells.append((snap, center, extra))

    curves = {}
    for altitude in [None] + altitudes:
        fleet = []
        if altitude is not None:
            fleet = [
                Uav(
                    id=a,
                    altitude_m=altitude,
                    capacity_reqs=config.fleet.capacity_reqs,
                    battery_j=config.fleet.battery_capacity_j,
                    battery_capacity_j=config.fleet.battery_capacity_j,
                    speed_m_s=config.fleet.speed_m_s,
                    available=1,
                    position_m=area_center(config, a),
                    home_station=a,
                    state=UavState.SERVING,
                    target_area=a,
                )
                for a in range(config.n_areas)
            ]
        curve = []
        for count in counts:
            values = []
            for snap, center, extra in cells:
                users = np.vstack((snap.user_positions_m.reshape(-1, 2), extra[:count]))
                if not len(users):
                    continue
                uav = fleet[snap.area_id] if fleet else None
                samples = cell_link_samples(
                    users,
                    uav,
                    center,
                    fleet,
                    config.radio,
                    config.los,
                    config.bs_defaults.user_capacity,
                    threshold_bps_hz,
                )
                values.append(throughput_coverage(samples, threshold_bps_hz))
            curve.append(float(np.mean(values)) if values else 1.0)
        curves[altitude] = curve
    return curves


@dataclass(frozen=True)
class FleetPoint:
    fleet_size: int
    mean_time_between_outages_h: float
    outage_hours: int
    outage_events: int
    marginal_gain_h: float | None = None


def sweep_fleet(config, fleet_sizes=None, policy=None, horizon=None, solar=None):
    """Mean time between outages per fleet size, on shared demand and solar inputs."""
    sizes = list(config.sweeps.fleet_sizes if fleet_sizes is None else fleet_sizes)
    if sizes != sorted(sizes):
        raise ValueError("fleet sizes must be nondecreasing")
    horizon = config.horizon if horizon is None else horizon
    demand = scenario_demand(config, hours=horizon)
    if solar is None:
        solar = scenario_solar(config, days=max(1, math.ceil(horizon / HOURS_PER_DAY)))
    points, previous = [], None
    for size in sizes:
        run_policy = (policy or GreedyDispatch()) if size > 0 else NoUavPolicy()
        m = run_sim(config, run_policy, horizon, demand=demand, solar=solar, fleet_size=size).metrics
        gain = None if previous is None else m.mean_time_between_outages_h - previous
        points.append(FleetPoint(size, m.mean_time_between_outages_h, m.outage_hours, m.outage_events, gain))
        previous = m.mean_time_between_outages_h
    return points


@dataclass(frozen=True)
class DensityPoint:
    density: float
    uav_coverage: float
    baseline_coverage: float

    @property
    def gain(self):
        return self.uav_coverage - self.baseline_coverage


def sweep_density(config, densities=None, policy=None, horizon=None, solar=None):
    """
    Service coverage (share of area-hours fully served) per demand-density factor,
    with and without drones.
    """
    levels = list(config.sweeps.densities if densities is None else densities)
    if levels != sorted(levels) or any(d < 0 for d in levels):
        raise ValueError("densities must be nonnegative and nondecreasing")
    horizon = config.sweeps.sweep_horizon_h if horizon is None else horizon
    base = scenario_demand(config, hours=horizon)
    if solar is None:
        solar = scenario_solar(config, days=max(1, math.ceil(horizon / HOURS_PER_DAY)))
    points = []
    for level in levels:
        demand = [scale_demand(s, level) for s in base]
        with_uav = run_sim(config, policy or GreedyDispatch(), horizon, demand=demand, solar=solar)
        without = run_sim(config, NoUavPolicy(), horizon, demand=demand, solar=solar, fleet_size=0)
        points.append(
            DensityPoint(level, with_uav.metrics.service_coverage, without.metrics.service_coverage)
        )
    return points
