# Python standard library imports
from pathlib import Path

# Third-party imports
import numpy as np

# Django framework imports
from django.core.management.base import BaseCommand, CommandError
from django.utils import timezone

# Local imports
from ...exceptions import CheckpointError, DomainError, TraceParseError
from ...utils import report_helpers as reports
from ...utils.forecast_helpers import FEATURES, TrainConfig, evaluate, load_checkpoint, make_windows
from ...utils.import_helpers import load_history_csv
from ...utils.seed_helpers import git_blob_sha1
from ..base import EXIT_ARTIFACT, EXIT_INPUT


class Command(BaseCommand):
    help = "Score a forecaster checkpoint on station history (RMSE, MAE, R2)"

    def add_arguments(self, parser):
        parser.add_argument("model", help="model.json written by train")
        parser.add_argument("data", help="Station history CSV/XLSX, e.g. heldout.csv")
        parser.add_argument("--output", help="Metrics JSON (defaults to evaluation.json next to the model)")

    def handle(self, *args, **options):
        model_path = Path(options["model"])
        try:
            model = load_checkpoint(model_path)
        except CheckpointError as exc:
            raise CommandError(str(exc), returncode=EXIT_ARTIFACT)
        if model.input_dim != len(FEATURES):
            raise CommandError(
                f"checkpoint expects {model.input_dim} features, data provides {len(FEATURES)}",
                returncode=EXIT_ARTIFACT,
            )

        try:
            histories = load_history_csv(options["data"])
        except FileNotFoundError:
            raise CommandError(f"data file not found: {options['data']}", returncode=EXIT_INPUT)
        except TraceParseError as exc:
            raise CommandError(f"data {options['data']}: {exc}", returncode=EXIT_INPUT)

        window = model.window_hours or TrainConfig().window_hours
        pairs = [make_windows(h, window) for h in histories]
        windows = np.concatenate([x for x, _ in pairs]) if pairs else np.zeros((0, window, len(FEATURES)))
        targets = np.concatenate([y for _, y in pairs]) if pairs else np.zeros(0)
        try:
            metrics = evaluate(model, (windows, targets))
        except DomainError:
            raise CommandError(
                f"data {options['data']} is shorter than one {window}-hour window plus a target",
                returncode=EXIT_INPUT,
            )

        self.stdout.write(f"RMSE: {metrics.rmse:.6g}")
        self.stdout.write(f"MAE: {metrics.mae:.6g}")
        if metrics.r2 is None:
            self.stdout.write(self.style.WARNING("R2: undefined (constant target)"))
        else:
            self.stdout.write(f"R2: {metrics.r2:.3f}")

        output = Path(options.get("output") or model_path.parent / "evaluation.json")
        result = {**metrics.as_dict(), "samples": int(len(targets)), "window_hours": window}
        reports.write_json(output, result)

        now = timezone.now().isoformat()
        manifest = reports.RunManifest(
            command="evaluate",
            config_path=str(model_path),
            seed=0,
            config_hash=git_blob_sha1(model_path.read_bytes()),
            output_dir=str(output.parent),
            started_at=now,
            finished_at=now,
            status="ok",
        )
        reports.record_run(manifest, result)
        self.stdout.write(self.style.SUCCESS(f"Metrics written to {output}"))
