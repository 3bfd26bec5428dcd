# Python standard library imports
import json
import math
from pathlib import Path

# Django framework imports
from django.core.management.base import CommandError

# Local imports
from ...exceptions import (
    CheckpointError,
    DomainError,
    InvariantViolation,
    TraceDuplicateError,
    TraceParseError,
    TraceShapeError,
)
from ...utils import report_helpers as reports
from ...utils import simulation_helpers as sim
from ...utils.evolution_helpers import Genome
from ...utils.forecast_helpers import load_checkpoint
from ...utils.import_helpers import export_demand_csv, export_solar_csv, load_solar_trace
from ...utils.scenario_helpers import HOURS_PER_DAY, scenario_demand, scenario_solar
from ..base import EXIT_ARTIFACT, EXIT_INPUT, RunCommand, dronecell_setting

SWEEPS = ("extra-users", "fleet", "density")


class Command(RunCommand):
    help = "Run the small-cell simulation (with and without drones) or one of the parameter sweeps"
    command_name = "simulate"

    def add_arguments(self, parser):
        self.add_run_arguments(parser)
        parser.add_argument("--no-uav", action="store_true", help="Fleet size 0 (baseline only)")
        parser.add_argument("--sweep", choices=SWEEPS, help="Run a parameter sweep instead of one horizon")
        parser.add_argument("--trace", action="store_true", help="Write the per-hour trace as NDJSON")
        parser.add_argument(
            "--export-inputs", action="store_true", help="Write the solar and demand inputs as CSV"
        )
        parser.add_argument("--model", help="Forecaster checkpoint used for deficit prediction")
        parser.add_argument("--genome", help="best_genome.json whose allocation drives dispatch")

    def handle(self, *args, **options):
        run_config = self.load_config(options)
        config = run_config.scenario
        if options["no_uav"]:
            config = config.replace(n_uavs=0)
        threshold = dronecell_setting("COVERAGE_THRESHOLD_BPS_HZ")

        forecaster = self._load_model(options.get("model"))
        policy = self._load_policy(options.get("genome"))
        days = max(1, math.ceil(config.horizon / HOURS_PER_DAY))
        solar = self._load_solar(config, days)

        out = self.output_dir(options, config.rng_seed)
        manifest = self.begin(run_config, out, options)
        sweep = options.get("sweep")
        try:
            if options["export_inputs"]:
                export_solar_csv(solar, out / "solar.csv")
                export_demand_csv(scenario_demand(config), out / "demand.csv")

            if sweep == "extra-users":
                altitudes = [] if options["no_uav"] else None
                counts = list(config.sweeps.extra_users)
                curves = sim.sweep_extra_users(config, counts, altitudes, threshold)
                summary = reports.write_extra_users_report(out, counts, curves)
            elif sweep == "fleet":
                sizes = [0] if options["no_uav"] else None
                points = sim.sweep_fleet(config, sizes, policy, solar=solar)
                summary = reports.write_fleet_report(out, points)
            elif sweep == "density":
                points = sim.sweep_density(config, policy=policy, solar=solar)
                summary = reports.write_density_report(out, points)
            else:
                summary = self._paired_run(config, policy, forecaster, solar, threshold, out, options)
        except (InvariantViolation, DomainError) as exc:
            self.fail(manifest, f"simulation stopped: {exc}", EXIT_INPUT)
        except OSError as exc:
            self.fail(manifest, f"cannot write results: {exc}", EXIT_INPUT)

        summary = {"sweep": sweep or "none", "seed": config.rng_seed, **summary}
        self.finish(manifest, summary)
        self.stdout.write(self.style.SUCCESS(f"Results written to {out}"))

    def _paired_run(self, config, policy, forecaster, solar, threshold, out, options):
        demand = scenario_demand(config)
        results = {
            "no_uav": sim.run_sim(
                config,
                sim.NoUavPolicy(),
                demand=demand,
                solar=solar,
                fleet_size=0,
                forecaster=forecaster,
                trace=options["trace"] and config.n_uavs == 0,
                threshold_bps_hz=threshold,
            )
        }
        if config.n_uavs > 0:
            results["uav"] = sim.run_sim(
                config,
                policy,
                demand=demand,
                solar=solar,
                forecaster=forecaster,
                trace=options["trace"],
                threshold_bps_hz=threshold,
            )
        summary = reports.write_run_reports(out, results)
        if options["trace"]:
            traced = results.get("uav", results["no_uav"])
            reports.write_ndjson(out / "trace.ndjson", traced.trace)

        for label, result in results.items():
            m = result.metrics
            self.stdout.write(
                f"{label}: {m.outage_hours} outage hours, "
                f"{m.mean_time_between_outages_h:.1f} h between outages, "
                f"service coverage {100 * m.service_coverage:.1f}%"
            )
        if "uav" in results and results["no_uav"].metrics.outage_hours:
            base = results["no_uav"].metrics.outage_hours
            reduction = 100.0 * (base - results["uav"].metrics.outage_hours) / base
            summary["outage_reduction_pct"] = reduction
            self.stdout.write(self.style.SUCCESS(f"Outage reduction: {reduction:.1f}%"))
        return summary

    def _load_model(self, path):
        if not path:
            return None
        try:
            return load_checkpoint(path)
        except CheckpointError as exc:
            raise CommandError(str(exc), returncode=EXIT_ARTIFACT)

    def _load_policy(self, path):
        if not path:
            return sim.GreedyDispatch()
        try:
            genome = Genome.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except FileNotFoundError:
            raise CommandError(f"genome file not found: {path}", returncode=EXIT_INPUT)
        except (OSError, json.JSONDecodeError, DomainError) as exc:
            raise CommandError(f"cannot use genome {path}: {exc}", returncode=EXIT_ARTIFACT)
        return sim.GenomeDispatch(genome)

    def _load_solar(self, config, days):
        if not config.solar_trace_path:
            return scenario_solar(config, days)
        try:
            return load_solar_trace(config.solar_trace_path, config.n_areas)
        except FileNotFoundError:
            raise CommandError(f"solar trace not found: {config.solar_trace_path}", returncode=EXIT_INPUT)
        except (TraceParseError, TraceDuplicateError, TraceShapeError) as exc:
            raise CommandError(f"solar trace {config.solar_trace_path}: {exc}", returncode=EXIT_INPUT)
