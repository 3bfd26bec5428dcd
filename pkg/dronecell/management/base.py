# Python standard library imports
import dataclasses
import logging
from pathlib import Path

# Django framework imports
from django.conf import settings
from django.core.exceptions import ValidationError
from django.core.management.base import BaseCommand, CommandError

# Local imports
from ..utils import report_helpers as reports
from ..utils.seed_helpers import derive_seed

logger = logging.getLogger(__name__)

EXIT_INPUT = 2
EXIT_DIVERGENCE = 3
EXIT_ARTIFACT = 4


def dronecell_setting(name):
    return settings.DRONECELL[name]


class RunCommand(BaseCommand):
    """
    Shared plumbing for commands that produce a run directory.

    Features:
    - --config / --seed / --output / --force handling
    - Field-level config diagnostics mapped to exit code 2
    - manifest.json written before results, ExperimentRun recorded afterwards
    """

    command_name = ""

    def add_run_arguments(self, parser):
        parser.add_argument("--config", help="Scenario JSON (defaults to DRONECELL['DEFAULT_CONFIG'])")
        parser.add_argument("--seed", type=int, help="Master seed; replaces every seed in the config")
        parser.add_argument("--output", help="Run directory (defaults to RUNS_DIR/<command>/seed-<seed>)")
        parser.add_argument("--force", action="store_true", help="Overwrite an existing run directory")

    def load_config(self, options):
        """
        Config file plus flag overrides.

        Precedence: dataclass defaults < config file < --seed.
        """
        path = Path(options.get("config") or dronecell_setting("DEFAULT_CONFIG"))
        try:
            run_config = reports.load_run_config(path)
        except FileNotFoundError:
            raise CommandError(f"config file not found: {path}", returncode=EXIT_INPUT)
        except OSError as exc:
            raise CommandError(f"cannot read config {path}: {exc}", returncode=EXIT_INPUT)
        except ValidationError as exc:
            raise CommandError(
                f"invalid config {path}:\n{reports.format_validation_error(exc)}", returncode=EXIT_INPUT
            )

        seed = options.get("seed")
        if seed is not None:
            if seed < 0:
                raise CommandError("--seed must be >= 0", returncode=EXIT_INPUT)
            run_config = dataclasses.replace(
                run_config,
                scenario=run_config.scenario.replace(rng_seed=seed),
                training=dataclasses.replace(run_config.training, seed=derive_seed(seed, "training")),
                evolution=dataclasses.replace(run_config.evolution, seed=derive_seed(seed, "evolution")),
            )
        return run_config

    def output_dir(self, options, seed):
        path = options.get("output") or Path(dronecell_setting("RUNS_DIR")) / self.command_name / f"seed-{seed}"
        try:
            return reports.prepare_output_dir(path, force=options.get("force", False))
        except FileExistsError as exc:
            raise CommandError(str(exc), returncode=EXIT_INPUT)
        except OSError as exc:
            raise CommandError(f"cannot create {path}: {exc}", returncode=EXIT_INPUT)

    def begin(self, run_config, out, options):
        recorded = {k: v for k, v in options.items() if k not in ("stdout", "stderr", "skip_checks")}
        return reports.start_manifest(
            self.command_name,
            run_config,
            run_config.scenario.rng_seed,
            out,
            options={k: str(v) if isinstance(v, Path) else v for k, v in recorded.items()},
        )

    def finish(self, manifest, summary, status="ok"):
        reports.finish_manifest(manifest, status)
        if status == "ok":
            reports.write_json(Path(manifest.output_dir) / reports.SUMMARY_NAME, summary)
        reports.record_run(manifest, summary)

    def fail(self, manifest, message, returncode):
        """Close the manifest as failed and stop with the given exit code."""
        logger.error("%s failed: %s", self.command_name, message)
        self.finish(manifest, {"error": message}, status="failed")
        raise CommandError(message, returncode=returncode)
