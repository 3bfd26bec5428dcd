# Python standard library imports
import dataclasses
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

# Third-party imports
import numpy as np

# Local imports
from ..exceptions import DivergenceError, DomainError, EvolutionAborted
from . import cost_helpers as costs
from .forecast_helpers import (
    FEATURES,
    LstmModel,
    TrainConfig,
    evaluate,
    predict,
    split_dataset,
    train,
)
from .radio_helpers import area_load, distance_3d
from .scenario_helpers import SECONDS_PER_HOUR, Uav, area_center
from .seed_helpers import derive_seed

logger = logging.getLogger(__name__)

# Finite fitness assigned to individuals whose training diverged.
DIVERGED_FITNESS = 1e12


# ---------------------------------------------------------------------------
# Genome
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Genome:
    """
    LSTM hyperparameters plus a UAV-to-area allocation.

    allocation holds one (area_id, uav_ids) pair per area, sorted by area;
    a UAV appears in at most one area.
    """

    learning_rate: float = 0.01
    hidden_layers: int = 1
    neurons_per_layer: int = 50
    activation: str = "tanh"
    dropout_rate: float = 0.0
    lstm_units: int = 32
    forget_bias: float = 1.0
    allocation: tuple = ()

    HYPER_GENES = (
        "learning_rate",
        "hidden_layers",
        "neurons_per_layer",
        "activation",
        "dropout_rate",
        "lstm_units",
        "forget_bias",
    )

    def hyper_key(self):
        """Stable text key of the hyperparameter genes (allocation excluded)."""
        return "|".join(f"{name}={getattr(self, name)!r}" for name in self.HYPER_GENES)

    def allocation_map(self):
        return {area: list(uavs) for area, uavs in self.allocation}

    def assigned_uavs(self):
        return [uid for _, uavs in self.allocation for uid in uavs]

    def with_allocation(self, mapping, n_areas):
        return dataclasses.replace(self, allocation=normalise_allocation(mapping, n_areas))

    def to_dict(self):
        data = {name: getattr(self, name) for name in self.HYPER_GENES}
        data["allocation"] = {str(area): list(uavs) for area, uavs in self.allocation}
        return data

    @classmethod
    def from_dict(cls, data):
        try:
            hyper = {name: data[name] for name in cls.HYPER_GENES}
            mapping = {int(k): [int(u) for u in v] for k, v in data.get("allocation", {}).items()}
        except (KeyError, TypeError, ValueError) as exc:
            raise DomainError(f"malformed genome: {exc}") from exc
        n_areas = max(mapping, default=-1) + 1
        return cls(**hyper, allocation=normalise_allocation(mapping, n_areas))


def normalise_allocation(mapping, n_areas, n_uavs=None):
    """
    Canonical allocation tuple.

    UAVs assigned to several areas keep their lowest-numbered area; ids outside
    0..n_uavs-1 are dropped when n_uavs is given.
    """
    seen = set()
    result = []
    for area in range(n_areas):
        kept = []
        for uid in sorted(mapping.get(area, ())):
            if uid in seen or (n_uavs is not None and not 0 <= uid < n_uavs):
                continue
            seen.add(uid)
            kept.append(int(uid))
        result.append((area, tuple(kept)))
    return tuple(result)


@dataclass(frozen=True)
class GenomeSpace:
    """
    Gene ranges. choices pins a gene to a discrete value set (used for
    exhaustively enumerable lattices).
    """

    learning_rate: tuple = (0.001, 0.1)
    hidden_layers: tuple = (1, 5)
    neurons_per_layer: tuple = (50, 500)
    activations: tuple = ("relu", "sigmoid", "tanh")
    dropout_rate: tuple = (0.0, 0.5)
    lstm_units: tuple = (20, 200)
    forget_bias: tuple = (1.0, 5.0)
    choices: dict = field(default_factory=dict)

    def sample_gene(self, name, rng):
        if name in self.choices:
            options = self.choices[name]
            return options[int(rng.integers(len(options)))]
        if name == "learning_rate":
            lo, hi = self.learning_rate
            return float(math.exp(rng.uniform(math.log(lo), math.log(hi))))
        if name == "activation":
            return self.activations[int(rng.integers(len(self.activations)))]
        lo, hi = getattr(self, name)
        if isinstance(lo, int) and isinstance(hi, int):
            return int(rng.integers(lo, hi + 1))
        return float(rng.uniform(lo, hi))

    def contains(self, genome):
        for name in Genome.HYPER_GENES:
            value = getattr(genome, name)
            if name in self.choices:
                if value not in self.choices[name]:
                    return False
            elif name == "activation":
                if value not in self.activations:
                    return False
            else:
                lo, hi = getattr(self, name)
                if not lo <= value <= hi:
                    return False
        return True


def random_allocation(rng, n_uavs, n_areas):
    """Every UAV independently goes to a random area or stays home."""
    mapping = {}
    for uid in range(n_uavs):
        slot = int(rng.integers(n_areas + 1))
        if slot < n_areas:
            mapping.setdefault(slot, []).append(uid)
    return normalise_allocation(mapping, n_areas)


def sample_genome(space, rng, n_uavs, n_areas):
    genes = {name: space.sample_gene(name, rng) for name in Genome.HYPER_GENES}
    return Genome(**genes, allocation=random_allocation(rng, n_uavs, n_areas))


# ---------------------------------------------------------------------------
# GA configuration and fitness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 50
    max_generations: int = 30
    tournament_size: int = 3
    crossover_prob: float = 0.9
    mutation_prob: float = 0.1
    elitism: int = 2
    patience: int = 15
    seed: int = 11
    evolution_epochs: int = 5
    truncate_hours: int = 336
    workers: int = 1

    def clean(self):
        errors = {}
        if self.population_size < 2:
            errors["population_size"] = ["must be >= 2"]
        if not 0 <= self.elitism < self.population_size:
            errors["elitism"] = ["must lie in [0, population_size)"]
        if self.tournament_size < 1:
            errors["tournament_size"] = ["must be >= 1"]
        for name in ("crossover_prob", "mutation_prob"):
            if not 0 <= getattr(self, name) <= 1:
                errors[name] = ["must lie in [0, 1]"]
        if self.max_generations < 1:
            errors["max_generations"] = ["must be >= 1"]
        if self.patience < 1:
            errors["patience"] = ["must be >= 1"]
        if self.evolution_epochs < 1:
            errors["evolution_epochs"] = ["must be >= 1"]
        if self.workers < 1:
            errors["workers"] = ["must be >= 1"]
        return errors


@dataclass(frozen=True)
class Fitness:
    raw_cost: float
    penalty: float
    total: float
    diverged: bool = False
    diagnostic: str = ""

    @classmethod
    def build(cls, raw_cost, penalty, penalty_weight):
        return cls(raw_cost, penalty, raw_cost + penalty_weight * penalty)

    @classmethod
    def divergent(cls, diagnostic):
        return cls(DIVERGED_FITNESS, 0.0, DIVERGED_FITNESS, diverged=True, diagnostic=diagnostic)


@dataclass
class FitnessContext:
    """
    Everything the fitness of a genome depends on.

    Built from one simulated hour (normally the worst no-UAV hour): the fleet
    as it stood, each area's demand snapshot and BS, the requests the BS left
    unserved (offload_needs), and the true next-hour expenditure per area.
    windows are the forecaster inputs ending at that hour.
    """

    config: object
    hour: int
    fleet: list
    snapshots: list
    stations: list
    offload_needs: list
    p_true: np.ndarray
    windows: np.ndarray
    dataset: object = None
    train_cfg: TrainConfig = field(default_factory=TrainConfig)
    train_seed: int = 0
    area_loads: list = field(default_factory=list)

    def __post_init__(self):
        if not self.area_loads:
            cfg = self.config
            self.area_loads = []
            for area, snap in enumerate(self.snapshots):
                center = area_center(cfg, area)
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
                load = area_load(
                    snap, [stand_in], cfg.radio, cfg.traffic, cfg.grid_res, center, cfg.los.max_radius_m
                )
                self.area_loads.append(load.value)


def allocation_cost(ctx, allocation, p_lstm):
    """
    Overall cost of an allocation for given per-area forecasts.

    Each assigned UAV contributes C^U for its area; each area contributes C^A with
    the availability of its assigned drones (1 when the BS carries it alone).
    """
    cfg = ctx.config
    weights, radio = cfg.weights, cfg.radio
    fleet = {u.id: u for u in ctx.fleet}
    e_comm = costs.energy_comm(radio)
    uav_costs, area_costs, u_t = [], [], []

    for area, uav_ids in allocation:
        snap, bs = ctx.snapshots[area], ctx.stations[area]
        center = area_center(cfg, area)
        assigned = [fleet[uid] for uid in uav_ids if uid in fleet]
        offloaded = min(ctx.offload_needs[area], cfg.fleet.capacity_reqs * len(assigned))
        e_bs = costs.energy_bs(bs, offloaded, ctx.hour)

        for uav in assigned:
            dist = distance_3d(center, uav.position_m, uav.altitude_m)
            travel = math.hypot(center[0] - uav.position_m[0], center[1] - uav.position_m[1])
            e_uav = costs.energy_uav(
                uav, cfg.uav_energy, travel, SECONDS_PER_HOUR, offloaded / len(assigned)
            )
            e_travel = costs.energy_travel(
                cfg.uav_energy, travel, costs.mobility_time(travel, uav.speed_m_s)
            )
            breakdown = costs.EnergyBreakdown.compose(e_bs, e_uav, e_travel, e_comm, weights)
            phi_u = costs.phi_uav(ctx.area_loads[area], len(assigned), uav.capacity_reqs)
            uav_costs.append(
                costs.cost_uav(snap, uav, dist, breakdown, weights, uav.available, phi_u, radio.path_loss_exp)
            )

        a_i = max((u.available for u in assigned), default=1)
        breakdown = costs.EnergyBreakdown.compose(e_bs, 0.0, 0.0, e_comm, weights)
        area_costs.append(costs.cost_area(snap, bs, breakdown, weights, a_i, ctx.area_loads[area]))
        u_t.append(max(1, len(assigned)))

    return costs.cost_overall(
        uav_costs, area_costs, list(p_lstm), weights, u_t, fleet_size=max(1, len(ctx.fleet))
    )


def allocation_penalty(ctx, allocation):
    """
    Constraint-violation magnitude of an allocation.

    Terms:
    - density constraint: (lhs - rhs) for every area failing it that has at least one drone
      assigned; areas left to their BS and areas without requests add nothing
    - each assigned unavailable UAV: 1
    - capacity: requests left uncovered, in units of R_n
    - battery: energy shortfall for travel plus one service hour, in battery capacities
    - assignments beyond the number of available drones
    """
    cfg = ctx.config
    fleet = {u.id: u for u in ctx.fleet}
    r_n = cfg.fleet.capacity_reqs
    penalty = 0.0
    assigned_total = 0
    for area, uav_ids in allocation:
        assigned = [fleet[uid] for uid in uav_ids if uid in fleet]
        assigned_total += len(assigned)
        snap, bs = ctx.snapshots[area], ctx.stations[area]
        if assigned and snap.service_requests >= 1:
            check = costs.density_constraint_ok(snap, bs)
            if not check.ok:
                penalty += (check.lhs - check.rhs) if math.isfinite(check.lhs) else check.rhs
        penalty += sum(1.0 for u in assigned if u.available != 1)
        covered = r_n * sum(1 for u in assigned if u.available == 1)
        penalty += max(0.0, ctx.offload_needs[area] - covered) / r_n

        center = area_center(cfg, area)
        for uav in assigned:
            travel = math.hypot(center[0] - uav.position_m[0], center[1] - uav.position_m[1])
            need = costs.energy_uav(uav, cfg.uav_energy, travel, SECONDS_PER_HOUR, r_n, recharge_credit=False)
            need += costs.energy_travel(cfg.uav_energy, travel, costs.mobility_time(travel, uav.speed_m_s))
            if need > uav.battery_j and uav.battery_capacity_j > 0:
                penalty += (need - uav.battery_j) / uav.battery_capacity_j
    available = sum(1 for u in ctx.fleet if u.available == 1)
    penalty += max(0, assigned_total - available)
    return penalty


def genome_model(genome, train_cfg, train_seed, max_epochs=None):
    """Untrained model and TrainConfig for a genome; seeds depend on its hyperparameters only."""
    seed = derive_seed(train_seed, genome.hyper_key())
    model = LstmModel.initialise(
        len(FEATURES),
        genome.lstm_units,
        np.random.default_rng(seed),
        forget_bias=genome.forget_bias,
        dropout_rate=genome.dropout_rate,
        dense_layers=genome.hidden_layers - 1,
        dense_units=genome.neurons_per_layer,
        activation=genome.activation,
    )
    cfg = dataclasses.replace(
        train_cfg,
        learning_rate=genome.learning_rate,
        hidden_units=genome.lstm_units,
        forget_bias=genome.forget_bias,
        seed=seed,
        max_epochs=train_cfg.max_epochs if max_epochs is None else max_epochs,
    )
    return model, cfg


def fitness(genome, ctx, model):
    """
    Penalised fitness of a genome with its trained forecaster.

    raw = C^O(true P) + |C^O(predicted P) - C^O(true P)|
    total = raw + penalty_weight * penalty
    """
    p_pred = predict(model, ctx.windows) if len(ctx.windows) else np.zeros(len(ctx.p_true))
    c_true = allocation_cost(ctx, genome.allocation, ctx.p_true)
    c_pred = allocation_cost(ctx, genome.allocation, p_pred)
    raw = c_true + abs(c_pred - c_true)
    penalty = allocation_penalty(ctx, genome.allocation)
    return Fitness.build(raw, penalty, ctx.config.weights.penalty_weight)


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------


def init_population(cfg, space, n_uavs, n_areas, rng, seeds=()):
    """population_size genomes; seeds (e.g. a greedy allocation or a previous best) go first."""
    population = [g for g in seeds][: cfg.population_size]
    while len(population) < cfg.population_size:
        population.append(sample_genome(space, rng, n_uavs, n_areas))
    return population


def tournament(fitnesses, cfg, rng):
    size = min(cfg.tournament_size, len(fitnesses))
    entrants = rng.choice(len(fitnesses), size=size, replace=False)
    totals = [fitnesses[i].total for i in entrants]
    return int(entrants[int(np.argmin(totals))])


def select(population, fitnesses, cfg, rng, pairs=None):
    """Parent pairs by tournament selection (lower total fitness wins)."""
    if not population:
        raise DomainError("cannot select from an empty population")
    if pairs is None:
        pairs = math.ceil((cfg.population_size - cfg.elitism) / 2)
    return [
        (population[tournament(fitnesses, cfg, rng)], population[tournament(fitnesses, cfg, rng)])
        for _ in range(pairs)
    ]


def crossover(parent_a, parent_b, cfg, rng, n_uavs=None):
    """Uniform crossover of hyper genes and per-area allocations, then repair."""
    if rng.random() >= cfg.crossover_prob:
        return parent_a, parent_b
    genes_a, genes_b = {}, {}
    for name in Genome.HYPER_GENES:
        a, b = getattr(parent_a, name), getattr(parent_b, name)
        if rng.random() < 0.5:
            a, b = b, a
        genes_a[name], genes_b[name] = a, b
    map_a, map_b = parent_a.allocation_map(), parent_b.allocation_map()
    n_areas = max(len(parent_a.allocation), len(parent_b.allocation))
    alloc_a, alloc_b = {}, {}
    for area in range(n_areas):
        x, y = map_a.get(area, []), map_b.get(area, [])
        if rng.random() < 0.5:
            x, y = y, x
        alloc_a[area], alloc_b[area] = x, y
    return (
        Genome(**genes_a, allocation=normalise_allocation(alloc_a, n_areas, n_uavs)),
        Genome(**genes_b, allocation=normalise_allocation(alloc_b, n_areas, n_uavs)),
    )


def mutate(genome, space, cfg, rng, n_uavs):
    """Per-gene resampling with mutation_prob plus at most one reassignment move."""
    genes = {}
    for name in Genome.HYPER_GENES:
        genes[name] = (
            space.sample_gene(name, rng) if rng.random() < cfg.mutation_prob else getattr(genome, name)
        )
    allocation = genome.allocation
    if n_uavs and rng.random() < cfg.mutation_prob:
        n_areas = len(allocation)
        mapping = {area: [u for u in uavs] for area, uavs in allocation}
        uid = int(rng.integers(n_uavs))
        for uavs in mapping.values():
            if uid in uavs:
                uavs.remove(uid)
        slot = int(rng.integers(n_areas + 1))
        if slot < n_areas:
            mapping.setdefault(slot, []).append(uid)
        allocation = normalise_allocation(mapping, n_areas, n_uavs)
    return Genome(**genes, allocation=allocation)


def allocate_greedy(fleet, costs_by_pair, needs, distances=None):
    """
    Baseline allocator.

    Repeatedly takes the cheapest (UAV, area) pair among available, unassigned
    UAVs and areas still short of their need. Ties break on distance, then UAV id.

    costs_by_pair: {(uav_id, area_id): cost}
    needs: {area_id: UAVs wanted}
    Returns: {area_id: [uav ids]}
    """
    available = {u.id for u in fleet if u.available == 1}
    distances = distances or {}
    candidates = sorted(
        (
            (cost, distances.get(pair, 0.0), pair[0], pair[1])
            for pair, cost in costs_by_pair.items()
            if pair[0] in available and needs.get(pair[1], 0) > 0
        )
    )
    remaining = dict(needs)
    taken = set()
    allocation = {}
    for _cost, _dist, uid, area in candidates:
        if uid in taken or remaining.get(area, 0) <= 0:
            continue
        allocation.setdefault(area, []).append(uid)
        taken.add(uid)
        remaining[area] -= 1
    return allocation


def greedy_seed(ctx, base=None):
    """
    Genome whose allocation is the greedy answer for ctx's hour.

    Pair cost is the marginal overall cost of adding that one drone to an empty
    allocation; each area asks for n_req of its unserved requests.
    """
    base = base or Genome()
    n_areas = len(ctx.snapshots)
    empty = tuple((area, ()) for area in range(n_areas))
    baseline = allocation_cost(ctx, empty, ctx.p_true)
    needs = {
        area: costs.n_req(need, ctx.config.fleet.capacity_reqs)
        for area, need in enumerate(ctx.offload_needs)
        if need > 0
    }
    pair_cost, pair_dist = {}, {}
    for area in needs:
        center = area_center(ctx.config, area)
        for uav in ctx.fleet:
            single = tuple((a, (uav.id,) if a == area else ()) for a in range(n_areas))
            pair_cost[(uav.id, area)] = allocation_cost(ctx, single, ctx.p_true) - baseline
            pair_dist[(uav.id, area)] = math.hypot(
                center[0] - uav.position_m[0], center[1] - uav.position_m[1]
            )
    mapping = allocate_greedy(ctx.fleet, pair_cost, needs, pair_dist)
    return base.with_allocation(mapping, n_areas)


# ---------------------------------------------------------------------------
# Generational loop
# ---------------------------------------------------------------------------


@dataclass
class GenerationStats:
    generation: int
    best_fitness: float
    mean_fitness: float
    penalty_rate: float

    def as_row(self):
        return [self.generation, repr(self.best_fitness), repr(self.mean_fitness), repr(self.penalty_rate)]


@dataclass
class EvolutionResult:
    best: Genome
    best_fitness: Fitness
    model: LstmModel
    history: list
    test_metrics: object = None
    fine_tuned: bool = False
    state: dict = field(default_factory=dict)


class Evolution:
    """
    Genetic search over forecaster hyperparameters and UAV allocations.

    Algorithm:
    1. Train and score every individual (cached by genome; training seeded by hyperparameters)
    2. Keep the elite, fill the rest by tournament selection, crossover and mutation
    3. Stop after patience generations without improvement or at max_generations
    4. Fine-tune the best genome's forecaster on the full series when a UAV is available
    5. Report test-split metrics of the final model

    evaluate_fn(genome) -> (Fitness, model) replaces training-based scoring when given.
    """

    def __init__(self, ctx, ga_cfg, space=None, evaluate_fn=None, workers=None):
        self.ctx = ctx
        self.cfg = ga_cfg
        self.space = space or GenomeSpace()
        self.evaluate_fn = evaluate_fn
        self.workers = workers or ga_cfg.workers
        self.models = {}
        self.scores = {}
        self._datasets = None

    @property
    def n_uavs(self):
        return len(self.ctx.fleet)

    @property
    def n_areas(self):
        return len(self.ctx.snapshots)

    def _training_data(self):
        """Training split thinned to about truncate_hours windows per station."""
        if self._datasets is None:
            ds = self.ctx.dataset
            truncated = ds
            if ds is not None and self.cfg.truncate_hours:
                x, y = ds.train
                limit = self.cfg.truncate_hours * max(1, self.n_areas)
                if len(y) > limit:
                    keep = np.linspace(0, len(y) - 1, limit).round().astype(int)
                    truncated = dataclasses.replace(ds, train=(x[keep], y[keep]))
            self._datasets = truncated
        return self._datasets

    def _trained_model(self, genome, dataset, max_epochs):
        model, cfg = genome_model(genome, self.ctx.train_cfg, self.ctx.train_seed, max_epochs)
        train(model, dataset, cfg)
        return model

    def score(self, genome):
        if genome in self.scores:
            return self.scores[genome]
        if self.evaluate_fn is not None:
            result = self.evaluate_fn(genome)
        else:
            key = genome.hyper_key()
            model = self.models.get(key)
            if model is None:
                try:
                    model = self._trained_model(genome, self._training_data(), self.cfg.evolution_epochs)
                except DivergenceError as exc:
                    model = exc
                self.models[key] = model
            if isinstance(model, DivergenceError):
                result = (Fitness.divergent(str(model)), None)
            else:
                result = (fitness(genome, self.ctx, model), model)
        self.scores[genome] = result
        return result

    def evaluate_population(self, population):
        if self.workers > 1 and self.evaluate_fn is None:
            # train distinct hyper keys concurrently; scoring stays sequential
            pending = {}
            for genome in population:
                key = genome.hyper_key()
                if key not in self.models and key not in pending:
                    pending[key] = genome
            if pending:
                data = self._training_data()
                with ThreadPoolExecutor(max_workers=self.workers) as pool:
                    futures = {
                        key: pool.submit(self._trained_model, g, data, self.cfg.evolution_epochs)
                        for key, g in pending.items()
                    }
                    for key, future in futures.items():
                        try:
                            self.models[key] = future.result()
                        except DivergenceError as exc:
                            self.models[key] = exc
        return [self.score(g)[0] for g in population]

    def run(self, seeds=(), state=None, on_generation=None):
        cfg = self.cfg
        rng = np.random.default_rng(cfg.seed)
        history = []
        generation = 0
        best, best_fit, stale = None, None, 0

        if state:
            rng.bit_generator.state = state["rng_state"]
            population = [Genome.from_dict(g) for g in state["population"]]
            history = [GenerationStats(**row) for row in state["history"]]
            generation = state["generation"]
            stale = state["stale"]
            best = Genome.from_dict(state["best"])
            best_fit = self.score(best)[0]
        else:
            population = init_population(cfg, self.space, self.n_uavs, self.n_areas, rng, seeds)

        while generation < cfg.max_generations:
            fits = self.evaluate_population(population)
            if all(f.diverged for f in fits):
                raise EvolutionAborted(generation, [f.diagnostic for f in fits])

            order = sorted(range(len(population)), key=lambda i: (fits[i].total, i))
            gen_best = population[order[0]]
            gen_fit = fits[order[0]]
            if best_fit is None or gen_fit.total < best_fit.total:
                best, best_fit, stale = gen_best, gen_fit, 0
            else:
                stale += 1

            finite = [f.total for f in fits if not f.diverged]
            stats = GenerationStats(
                generation=generation,
                best_fitness=gen_fit.total,
                mean_fitness=float(np.mean(finite)),
                penalty_rate=sum(1 for f in fits if f.penalty > 0) / len(fits),
            )
            history.append(stats)
            logger.info(
                "generation %d best=%.6g mean=%.6g penalised=%.0f%%",
                generation,
                stats.best_fitness,
                stats.mean_fitness,
                100 * stats.penalty_rate,
            )
            generation += 1

            elite = [population[i] for i in order[: cfg.elitism]]
            children = []
            for a, b in select(population, fits, cfg, rng):
                for child in crossover(a, b, cfg, rng, self.n_uavs):
                    children.append(mutate(child, self.space, cfg, rng, self.n_uavs))
            population = elite + children[: cfg.population_size - len(elite)]

            state = {
                "generation": generation,
                "population": [g.to_dict() for g in population],
                "rng_state": rng.bit_generator.state,
                "history": [dataclasses.asdict(h) for h in history],
                "stale": stale,
                "best": best.to_dict(),
            }
            if on_generation is not None:
                on_generation(state)
            if stale >= cfg.patience:
                break

        return self._finish(best, best_fit, history, state)

    def _finish(self, best, best_fit, history, state):
        _, model = self.score(best)
        fine_tuned = False
        dataset = self.ctx.dataset
        if self.evaluate_fn is None and dataset is not None:
            if any(u.available == 1 for u in self.ctx.fleet):
                model = self._trained_model(best, dataset, None)
                fine_tuned = True
        metrics = None
        if model is not None and dataset is not None and len(dataset.test[1]):
            metrics = evaluate(model, dataset.test)
        return EvolutionResult(
            best=best,
            best_fitness=best_fit,
            model=model,
            history=history,
            test_metrics=metrics,
            fine_tuned=fine_tuned,
            state=state or {},
        )


def build_context(config, hour_view, histories, train_cfg, train_seed):
    """
    Fitness context for one simulated hour.

    hour_view: dict with "hour", "fleet", "snapshots", "stations", "unserved"
    (as produced by the simulator's worst-hour view).
    histories: per-station StationHistory used for training and for the forecast windows.
    """
    hour = hour_view["hour"]
    window = train_cfg.window_hours
    windows, p_true = [], []
    for history in histories:
        features = history.features()
        end = min(max(hour, window - 1), len(history) - 2)
        windows.append(features[end - window + 1 : end + 1])
        p_true.append(history.energy_j[end + 1])
    dataset = split_dataset(histories, window)
    return FitnessContext(
        config=config,
        hour=hour,
        fleet=hour_view["fleet"],
        snapshots=hour_view["snapshots"],
        stations=hour_view["stations"],
        offload_needs=list(hour_view["unserved"]),
        p_true=np.asarray(p_true, dtype=float),
        windows=np.asarray(windows, dtype=float),
        dataset=dataset,
        train_cfg=train_cfg,
        train_seed=train_seed,
    )
