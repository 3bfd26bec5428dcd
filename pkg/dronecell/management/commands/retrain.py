# Python standard library imports
import json
from pathlib import Path

# Django framework imports
from django.core.management.base import CommandError

# Local imports
from ...exceptions import DomainError
from ...utils.evolution_helpers import Genome
from ..base import EXIT_ARTIFACT, EXIT_INPUT
from .train import Command as TrainCommand


class Command(TrainCommand):
    help = "Re-run the genetic search on fresh data, starting from a previous run's best genome"
    command_name = "retrain"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--from", dest="from_run", required=True, help="Run directory of a previous train")

    def handle(self, *args, **options):
        previous = Path(options["from_run"])
        if not options.get("config"):
            # the exact bytes the previous run used
            options = {**options, "config": previous / "config.json"}
        seed_genome = self.load_previous_best(previous)
        self.run_training(options, seeds=[seed_genome], extra_summary={"retrained_from": str(previous)})

    def load_previous_best(self, run_dir):
        path = Path(run_dir) / "best_genome.json"
        try:
            return Genome.from_dict(json.loads(path.read_text(encoding="utf-8")))
        except FileNotFoundError:
            raise CommandError(f"{run_dir} has no best_genome.json", returncode=EXIT_INPUT)
        except (OSError, json.JSONDecodeError, DomainError) as exc:
            raise CommandError(f"cannot use {path}: {exc}", returncode=EXIT_ARTIFACT)
