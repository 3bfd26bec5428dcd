# Python standard library imports
import dataclasses
import json
from pathlib import Path

# Django framework imports
from django.core.management.base import CommandError

# Local imports
from ...exceptions import DivergenceError, DomainError, EvolutionAborted, ShapeError, TraceParseError
from ...utils import report_helpers as reports
from ...utils import simulation_helpers as sim
from ...utils.evolution_helpers import Evolution, GaConfig, GenerationStats, build_context, greedy_seed
from ...utils.forecast_helpers import history_from_demand, save_checkpoint
from ...utils.import_helpers import export_history_csv, load_history_csv
from ...utils.scenario_helpers import scenario_demand
from ..base import EXIT_ARTIFACT, EXIT_DIVERGENCE, EXIT_INPUT, RunCommand, dronecell_setting

STATE_NAME = "ga_state.json"


class Command(RunCommand):
    help = "Evolve forecaster hyperparameters and a drone allocation with the genetic algorithm"
    command_name = "train"

    def add_arguments(self, parser):
        self.add_run_arguments(parser)
        source = parser.add_mutually_exclusive_group()
        source.add_argument("--synthetic", action="store_true", help="Train on the scenario's synthetic demand")
        source.add_argument("--data", help="Station history CSV/XLSX (station,hour,users,energy_j)")
        parser.add_argument("--generations", type=int, help="Overrides evolution.max_generations")
        parser.add_argument("--population", type=int, help="Overrides evolution.population_size")
        parser.add_argument("--workers", type=int, help="Individuals trained concurrently")
        parser.add_argument(
            "--resume", action="store_true", help=f"Continue from {STATE_NAME} in the output directory"
        )

    def handle(self, *args, **options):
        self.run_training(options)

    def run_training(self, options, seeds=(), extra_summary=None):
        run_config = self.load_config(options)
        run_config = dataclasses.replace(run_config, evolution=self.ga_config(run_config.evolution, options))
        if not options.get("synthetic") and not options.get("data"):
            raise CommandError("no training data: pass --data PATH or --synthetic", returncode=EXIT_INPUT)

        if options["resume"]:
            options = {**options, "force": True}
        out = self.output_dir(options, run_config.scenario.rng_seed)
        state = self.load_state(out, run_config) if options["resume"] else None
        histories = self.load_histories(run_config, options)
        self.check_histories(histories, run_config)

        manifest = self.begin(run_config, out, options)
        try:
            summary = self.evolve(run_config, histories, out, state=state, seeds=seeds)
        except (EvolutionAborted, DivergenceError) as exc:
            self.fail(manifest, f"training diverged: {exc}", EXIT_DIVERGENCE)
        except (DomainError, ShapeError) as exc:
            self.fail(manifest, f"training data does not fit the scenario: {exc}", EXIT_INPUT)
        summary.update(extra_summary or {})
        self.finish(manifest, summary)
        self.stdout.write(self.style.SUCCESS(f"Best genome and model written to {out}"))

    def ga_config(self, ga_cfg, options):
        """Flags override the config file; DRONECELL['EVALUATION_WORKERS'] fills an unset worker count."""
        changes = {}
        if options.get("generations") is not None:
            changes["max_generations"] = options["generations"]
        if options.get("population") is not None:
            changes["population_size"] = options["population"]
            changes["elitism"] = min(ga_cfg.elitism, max(0, options["population"] - 1))
        if options.get("workers") is not None:
            changes["workers"] = options["workers"]
        elif ga_cfg.workers == GaConfig().workers:
            changes["workers"] = dronecell_setting("EVALUATION_WORKERS")
        ga_cfg = dataclasses.replace(ga_cfg, **changes)
        errors = ga_cfg.clean()
        if errors:
            lines = "\n".join(f"evolution.{k}: {m}" for k, msgs in sorted(errors.items()) for m in msgs)
            raise CommandError(f"invalid evolution settings:\n{lines}", returncode=EXIT_INPUT)
        return ga_cfg

    def load_histories(self, run_config, options):
        if options.get("data"):
            try:
                histories = load_history_csv(options["data"])
            except FileNotFoundError:
                raise CommandError(f"training data not found: {options['data']}", returncode=EXIT_INPUT)
            except TraceParseError as exc:
                raise CommandError(f"training data {options['data']}: {exc}", returncode=EXIT_INPUT)
            if not histories:
                raise CommandError(f"training data {options['data']} holds no rows", returncode=EXIT_INPUT)
            return histories
        config = run_config.scenario
        return history_from_demand(scenario_demand(config), config.bs_defaults.energy_per_load)

    def check_histories(self, histories, run_config):
        """One history per scenario area, each long enough for a window and its next-hour target."""
        n_areas = run_config.scenario.n_areas
        window = run_config.training.window_hours
        stations = sorted(h.station for h in histories)
        if stations != list(range(n_areas)):
            raise CommandError(
                f"training data covers stations {stations}; the scenario needs stations 0..{n_areas - 1}",
                returncode=EXIT_INPUT,
            )
        short = [h.station for h in histories if len(h) < window + 1]
        if short:
            raise CommandError(
                f"training data for stations {short} is shorter than one {window}-hour window "
                "plus its target hour",
                returncode=EXIT_INPUT,
            )

    def load_state(self, out, run_config):
        path = Path(out) / STATE_NAME
        try:
            state = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise CommandError(f"nothing to resume: {path} not found", returncode=EXIT_INPUT)
        except (OSError, json.JSONDecodeError) as exc:
            raise CommandError(f"cannot read {path}: {exc}", returncode=EXIT_ARTIFACT)
        if state.get("config_hash") != run_config.config_hash:
            raise CommandError(
                f"{path} was written for a different config; resume with the original one",
                returncode=EXIT_ARTIFACT,
            )
        return state

    def evolve(self, run_config, histories, out, state=None, seeds=()):
        """
        Worst no-drone hour -> fitness context -> GA -> artifacts.

        Files: best_genome.json, model.json, history.csv, ga_state.json,
        heldout.csv, metrics.json
        """
        config = run_config.scenario
        demand = scenario_demand(config)
        baseline = sim.run_sim(config, sim.NoUavPolicy(), demand=demand, fleet_size=0)
        view = baseline.worst_hour_view(config, demand)
        ctx = build_context(config, view, histories, run_config.training, run_config.training.seed)
        self.stdout.write(
            f"Worst hour {view['hour']}: {sum(view['unserved'])} unserved requests; "
            f"{sum(ctx.dataset.sizes())} training windows"
        )

        def checkpoint(ga_state):
            reports.write_json(out / STATE_NAME, {**ga_state, "config_hash": run_config.config_hash})
            history = [GenerationStats(**row) for row in ga_state["history"]]
            reports.write_history_csv(out / "history.csv", history)

        evolution = Evolution(ctx, run_config.evolution)
        result = evolution.run(seeds=[*seeds, greedy_seed(ctx)], state=state, on_generation=checkpoint)

        reports.write_history_csv(out / "history.csv", result.history)
        best = result.best.to_dict()
        reports.write_json(
            out / "best_genome.json",
            {**best, "fitness": dataclasses.asdict(result.best_fitness)},
        )
        if result.model is not None:
            save_checkpoint(result.model, out / "model.json")
        export_history_csv(ctx.dataset.heldout, out / "heldout.csv")
        metrics = {
            "best_fitness": result.best_fitness.total,
            "generations": len(result.history),
            "fine_tuned": result.fine_tuned,
            "test": result.test_metrics.as_dict() if result.test_metrics else None,
        }
        reports.write_json(out / "metrics.json", metrics)

        if result.test_metrics:
            m = result.test_metrics
            r2 = "undefined" if m.r2 is None else f"{m.r2:.3f}"
            self.stdout.write(f"Test split: RMSE {m.rmse:.1f}  MAE {m.mae:.1f}  R2 {r2}")
        return {**metrics, "best_genome": best}

