# Python standard library imports
import csv
import json
import math
import tempfile
from io import StringIO
from pathlib import Path
from unittest import mock

# Third-party imports
import numpy as np

# Django framework imports
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import TestCase

# Local imports
from ..exceptions import DomainError
from ..management.commands.train import Command as TrainCommand
from ..models import ExperimentRun
from ..utils import report_helpers as reports
from ..utils.forecast_helpers import FEATURES, LstmModel, StationHistory, save_checkpoint
from ..utils.import_helpers import export_history_csv
from ..utils.scenario_helpers import dataclass_to_dict
from .factories import small_config

SMALL_TRAINING = {
    "max_epochs": 2,
    "early_stop_patience": 1,
    "batch_size": 32,
    "window_hours": 6,
    "hidden_units": 2,
}
SMALL_EVOLUTION = {
    "population_size": 3,
    "elitism": 1,
    "max_generations": 2,
    "evolution_epochs": 1,
    "truncate_hours": 24,
}


class CommandTestCase(TestCase):
    def setUp(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.tmp = Path(tmp.name)
        self.config_path = self.write_config()

    def write_config(self, name="scenario.json", **extra):
        data = dataclass_to_dict(small_config())
        data.update(training=SMALL_TRAINING, evolution=SMALL_EVOLUTION, **extra)
        path = self.tmp / name
        path.write_text(json.dumps(data, indent=2), encoding="utf-8")
        return path

    def call(self, command, *args):
        out = StringIO()
        call_command(command, *[str(a) for a in args], stdout=out, stderr=StringIO())
        return out.getvalue()

    def assertExitCode(self, code, command, *args):
        with self.assertRaises(CommandError) as ctx:
            self.call(command, *args)
        self.assertEqual(ctx.exception.returncode, code, str(ctx.exception))
        return str(ctx.exception)


class SimulateCommandTests(CommandTestCase):
    def test_paired_run_writes_reports(self):
        out = self.tmp / "run"
        stdout = self.call("simulate", "--config", self.config_path, "--output", out)

        for name in (reports.OUTAGES_CSV, reports.THROUGHPUT_CSV, reports.SERVICE_CSV, reports.INTERVAL_CSV):
            self.assertTrue((out / name).exists(), name)
        with open(out / reports.OUTAGES_CSV, newline="", encoding="utf-8") as fh:
            self.assertEqual(next(csv.reader(fh)), ["week", "no_uav", "uav"])
        manifest = json.loads((out / reports.MANIFEST_NAME).read_text(encoding="utf-8"))
        self.assertEqual(manifest["status"], "ok")
        self.assertEqual((out / "config.json").read_bytes(), self.config_path.read_bytes())
        self.assertIn("no_uav:", stdout)
        self.assertTrue(ExperimentRun.objects.filter(command="simulate", status="ok").exists())

    def test_same_seed_gives_identical_reports(self):
        first, second = self.tmp / "a", self.tmp / "b"
        self.call("simulate", "--config", self.config_path, "--seed", 9, "--output", first)
        self.call("simulate", "--config", self.config_path, "--seed", 9, "--output", second)
        for name in (reports.OUTAGES_CSV, reports.THROUGHPUT_CSV, reports.SERVICE_CSV, reports.INTERVAL_CSV):
            self.assertEqual((first / name).read_bytes(), (second / name).read_bytes(), name)

    def test_missing_config(self):
        missing = self.tmp / "nope.json"
        message = self.assertExitCode(2, "simulate", "--config", missing, "--output", self.tmp / "run")
        self.assertIn(str(missing), message)

    def test_invalid_config_lists_fields(self):
        path = self.write_config("bad.json", radio={"bandwidth_hz": "wide"}, n_uav=3)
        message = self.assertExitCode(2, "simulate", "--config", path, "--output", self.tmp / "run")
        self.assertIn("radio.bandwidth_hz", message)
        self.assertIn("n_uav: unknown field", message)

        path = self.write_config("range.json", horizon=0)
        message = self.assertExitCode(2, "simulate", "--config", path, "--output", self.tmp / "run")
        self.assertIn("horizon: must be >= 1", message)

    def test_existing_run_needs_force(self):
        out = self.tmp / "run"
        self.call("simulate", "--config", self.config_path, "--output", out, "--no-uav")
        self.assertExitCode(2, "simulate", "--config", self.config_path, "--output", out, "--no-uav")
        self.call("simulate", "--config", self.config_path, "--output", out, "--no-uav", "--force")

    def test_baseline_only(self):
        out = self.tmp / "run"
        self.call("simulate", "--config", self.config_path, "--output", out, "--no-uav", "--trace", "--export-inputs")
        with open(out / reports.OUTAGES_CSV, newline="", encoding="utf-8") as fh:
            self.assertEqual(next(csv.reader(fh)), ["week", "no_uav"])
        lines = (out / "trace.ndjson").read_text(encoding="utf-8").splitlines()
        self.assertEqual(len(lines), 48)
        self.assertTrue((out / "solar.csv").exists())
        self.assertTrue((out / "demand.csv").exists())

    def test_fleet_sweep(self):
        out = self.tmp / "run"
        self.call("simulate", "--config", self.config_path, "--output", out, "--sweep", "fleet")
        with open(out / reports.INTERVAL_CSV, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        self.assertEqual(rows[0][0], "fleet_size")
        self.assertEqual([r[0] for r in rows[1:]], ["0", "2", "4"])
        summary = json.loads((out / reports.SUMMARY_NAME).read_text(encoding="utf-8"))
        self.assertEqual(summary["sweep"], "fleet")

    def test_extra_users_sweep(self):
        out = self.tmp / "run"
        self.call("simulate", "--config", self.config_path, "--output", out, "--sweep", "extra-users")
        with open(out / reports.THROUGHPUT_CSV, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        self.assertEqual(rows[0], ["extra_users", "no_uav", "uav_150m", "uav_450m"])
        self.assertEqual(len(rows), 4)

    def test_bad_artifacts(self):
        broken = self.tmp / "model.json"
        broken.write_text('{"format": "dronecell-lstm", "version": 1}', encoding="utf-8")
        self.assertExitCode(4, "simulate", "--config", self.config_path, "--output", self.tmp / "a", "--model", broken)
        self.assertExitCode(
            2, "simulate", "--config", self.config_path, "--output", self.tmp / "b", "--genome", self.tmp / "none.json"
        )
        genome = self.tmp / "genome.json"
        genome.write_text("[1, 2", encoding="utf-8")
        self.assertExitCode(4, "simulate", "--config", self.config_path, "--output", self.tmp / "c", "--genome", genome)

    def test_unreadable_solar_trace(self):
        path = self.write_config("solar.json", solar_trace_path=str(self.tmp / "missing.csv"))
        message = self.assertExitCode(2, "simulate", "--config", path, "--output", self.tmp / "run")
        self.assertIn("solar trace not found", message)


class TrainCommandTests(CommandTestCase):
    def test_train_and_resume(self):
        out = self.tmp / "train"
        self.call("train", "--config", self.config_path, "--synthetic", "--output", out)
        for name in ("best_genome.json", "model.json", "history.csv", "ga_state.json", "heldout.csv", "metrics.json"):
            self.assertTrue((out / name).exists(), name)
        metrics = json.loads((out / "metrics.json").read_text(encoding="utf-8"))
        self.assertEqual(metrics["generations"], 2)

        self.call("train", "--config", self.config_path, "--synthetic", "--output", out, "--resume", "--generations", 3)
        with open(out / "history.csv", newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        self.assertEqual(rows[0], ["generation", "best_fitness", "mean_fitness", "penalty_rate"])
        self.assertEqual([r[0] for r in rows[1:]], ["0", "1", "2"])

        stdout = self.call("evaluate", out / "model.json", out / "heldout.csv")
        self.assertIn("RMSE:", stdout)
        self.assertTrue((out / "evaluation.json").exists())

        again = self.tmp / "retrain"
        self.call("retrain", "--from", out, "--synthetic", "--output", again, "--generations", 1)
        summary = json.loads((again / reports.SUMMARY_NAME).read_text(encoding="utf-8"))
        self.assertEqual(summary["retrained_from"], str(out))

    def test_resume_needs_the_same_config(self):
        out = self.tmp / "train"
        out.mkdir()
        reports.write_json(out / "ga_state.json", {"config_hash": "0" * 40})
        self.assertExitCode(4, "train", "--config", self.config_path, "--synthetic", "--output", out, "--resume")

    def test_no_training_data(self):
        message = self.assertExitCode(2, "train", "--config", self.config_path, "--output", self.tmp / "t")
        self.assertIn("no training data", message)
        self.assertExitCode(2, "train", "--config", self.config_path, "--data", self.tmp / "none.csv", "--output", self.tmp / "u")

    def write_history(self, stations, hours):
        path = self.tmp / "history.csv"
        export_history_csv(
            [StationHistory(s, 0, np.full(hours, 120.0), np.full(hours, 3.0e5)) for s in stations], path
        )
        return path

    def test_data_missing_stations(self):
        data = self.write_history([0], 8)
        out = self.tmp / "t"
        message = self.assertExitCode(2, "train", "--config", self.config_path, "--data", data, "--output", out)
        self.assertIn("stations [0]", message)
        self.assertFalse((out / reports.MANIFEST_NAME).exists())

    def test_data_shorter_than_a_window(self):
        data = self.write_history([0, 1, 2], 6)
        message = self.assertExitCode(
            2, "train", "--config", self.config_path, "--data", data, "--output", self.tmp / "t"
        )
        self.assertIn("shorter than one 6-hour window", message)

    def test_domain_error_during_evolution_closes_the_manifest(self):
        out = self.tmp / "t"
        with mock.patch.object(TrainCommand, "evolve", side_effect=DomainError("training split is empty")):
            message = self.assertExitCode(
                2, "train", "--config", self.config_path, "--synthetic", "--output", out
            )
        self.assertIn("training split is empty", message)
        manifest = json.loads((out / reports.MANIFEST_NAME).read_text(encoding="utf-8"))
        self.assertEqual(manifest["status"], "failed")

    def test_invalid_population(self):
        self.assertExitCode(
            2, "train", "--config", self.config_path, "--synthetic", "--output", self.tmp / "t", "--population", 1
        )

    def test_retrain_needs_a_previous_run(self):
        self.assertExitCode(
            2, "retrain", "--from", self.tmp / "empty", "--config", self.config_path, "--synthetic", "--output", self.tmp / "r"
        )


class EvaluateCommandTests(CommandTestCase):
    def alternating_history(self, hours=50):
        energy = np.where(np.arange(hours) % 2 == 0, 1.0e5, 2.0e5)
        path = self.tmp / "history.csv"
        export_history_csv([StationHistory(0, 0, np.full(hours, 120.0), energy)], path)
        return path

    def perfect_model(self):
        """One-unit network whose output is the opposite of the last normalised energy."""
        model = LstmModel(len(FEATURES), 1)
        model.window_hours = 4
        model.feature_mean = np.array([0.0, 1.5e5, 0.0, 0.0])
        model.feature_std = np.array([1.0, 0.5e5, 1.0, 1.0])
        model.target_mean = 1.5e5
        model.target_std = 0.5e5
        model.params["W"][3, 1] = 1.0  # candidate gate reads the energy column
        model.params["b"][:] = [-30.0, 30.0, 30.0, 0.0]  # forget off, input and output open
        model.params["Wy"][0, 0] = -1.0 / math.tanh(math.tanh(1.0))
        path = self.tmp / "model.json"
        save_checkpoint(model, path)
        return path

    def test_perfect_forecast(self):
        stdout = self.call("evaluate", self.perfect_model(), self.alternating_history())
        self.assertIn("R2: 1.000", stdout)
        result = json.loads((self.tmp / "evaluation.json").read_text(encoding="utf-8"))
        self.assertEqual(result["samples"], 46)
        self.assertGreater(result["r2"], 0.999999)
        self.assertLess(result["rmse"], 1e-3)
        self.assertTrue(ExperimentRun.objects.filter(command="evaluate").exists())

    def test_custom_output(self):
        target = self.tmp / "scores" / "eval.json"
        target.parent.mkdir()
        self.call("evaluate", self.perfect_model(), self.alternating_history(), "--output", target)
        self.assertTrue(target.exists())

    def test_corrupted_checkpoint(self):
        path = self.perfect_model()
        data = json.loads(path.read_text(encoding="utf-8"))
        data["params"]["U"]["data"] = data["params"]["U"]["data"][:-1]
        path.write_text(json.dumps(data), encoding="utf-8")
        self.assertExitCode(4, "evaluate", path, self.alternating_history())

    def test_feature_mismatch(self):
        path = self.tmp / "narrow.json"
        save_checkpoint(LstmModel(3, 1), path)
        self.assertExitCode(4, "evaluate", path, self.alternating_history())

    def test_bad_data(self):
        model = self.perfect_model()
        self.assertExitCode(2, "evaluate", model, self.tmp / "none.csv")
        message = self.assertExitCode(2, "evaluate", model, self.alternating_history(hours=3))
        self.assertIn("shorter than one 4-hour window", message)
