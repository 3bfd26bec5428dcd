# Python standard library imports
import csv
import json
import tempfile
from pathlib import Path
from unittest import skipUnless

# Third-party imports
import numpy as np

# Django framework imports
from django.core.exceptions import ValidationError
from django.test import SimpleTestCase

# Local imports
from ..exceptions import InvariantViolation, TraceDuplicateError, TraceParseError, TraceShapeError
from ..utils.import_helpers import (
    HAS_OPENPYXL,
    export_history_csv,
    export_solar_csv,
    load_history_csv,
    load_solar_trace,
)
from ..utils.forecast_helpers import StationHistory
from ..utils.report_helpers import run_config_from_bytes
from ..utils.scenario_helpers import (
    HOURS_PER_YEAR,
    ScenarioConfig,
    UavState,
    dataclass_from_dict,
    load_scenario,
    save_scenario,
    scale_demand,
    synth_demand,
    synth_solar,
)
from .factories import make_uav


class ScenarioConfigTests(SimpleTestCase):
    def test_defaults_validate(self):
        config = ScenarioConfig().full_clean()
        self.assertEqual(config.n_areas, 5)
        self.assertEqual(config.fleet.capacity_reqs, 50)
        self.assertEqual(config.bs_defaults.user_capacity, 300)

    def test_nested_errors_use_dotted_paths(self):
        config = dataclass_from_dict(ScenarioConfig, {"radio": {"bandwidth_hz": 0.0}, "n_areas": 0})
        with self.assertRaises(ValidationError) as ctx:
            config.full_clean()
        self.assertIn("radio.bandwidth_hz", ctx.exception.message_dict)
        self.assertIn("n_areas", ctx.exception.message_dict)

    def test_unknown_and_mistyped_fields_are_all_reported(self):
        with self.assertRaises(ValidationError) as ctx:
            dataclass_from_dict(ScenarioConfig, {"n_uav": 3, "los": {"altitude_m": "high"}})
        errors = ctx.exception.message_dict
        self.assertEqual(errors["n_uav"], ["unknown field"])
        self.assertIn("los.altitude_m", errors)

    def test_json_round_trip(self):
        config = ScenarioConfig(n_uavs=3, horizon=72)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "scenario.json"
            save_scenario(config, path)
            self.assertEqual(load_scenario(path), config)

    def test_training_and_evolution_sections(self):
        raw = json.dumps(
            {"n_uavs": 2, "training": {"batch_size": 0}, "evolution": {"population_size": 1}}
        ).encode()
        with self.assertRaises(ValidationError) as ctx:
            run_config_from_bytes(raw)
        errors = ctx.exception.message_dict
        self.assertIn("training.batch_size", errors)
        self.assertIn("evolution.population_size", errors)

        run_config = run_config_from_bytes(json.dumps({"training": {"window_hours": 12}}).encode())
        self.assertEqual(run_config.training.window_hours, 12)
        self.assertEqual(len(run_config.config_hash), 40)

    def test_uav_state_machine(self):
        uav = make_uav()
        for state in (UavState.TRAVELING, UavState.SERVING, UavState.RETURNING, UavState.CHARGING, UavState.IDLE):
            uav.move_to(state)
        self.assertIs(uav.state, UavState.IDLE)
        with self.assertRaises(InvariantViolation):
            uav.move_to(UavState.SERVING)


class SyntheticDataTests(SimpleTestCase):
    def test_solar_day_bounds(self):
        series = synth_solar(1, 1, 3600.0)
        self.assertEqual(len(series), 24)
        self.assertEqual(series[0], 0.0)
        self.assertGreater(series[12], 0.0)
        self.assertLessEqual(series[12], 1.5 * 3600.0)

    def test_solar_determinism(self):
        np.testing.assert_array_equal(synth_solar(1, 30, 1e6), synth_solar(1, 30, 1e6))
        self.assertFalse(np.array_equal(synth_solar(1, 30, 1e6), synth_solar(2, 30, 1e6)))

    def test_longer_solar_series_extends_shorter(self):
        np.testing.assert_array_equal(synth_solar(4, 10, 1e6)[:48], synth_solar(4, 2, 1e6))

    def test_solar_has_overcast_days(self):
        daily = synth_solar(3, 365, 1.2e6).reshape(365, 24).sum(axis=1)
        self.assertLess(daily.min(), 0.5 * daily.max())

    def test_demand_shape_and_bounds(self):
        snaps = synth_demand(9, 5, 24, 200)
        self.assertEqual(len(snaps), 120)
        for snap in snaps:
            self.assertLessEqual(snap.active_users, 300)
            self.assertLessEqual(snap.active_users, 200)
            self.assertEqual(len(snap.user_positions_m), snap.active_users)
            self.assertGreaterEqual(snap.service_requests, 0)
            self.assertLessEqual(snap.service_requests, 150)

    def test_demand_determinism(self):
        a = synth_demand(9, 2, 48, 200)
        b = synth_demand(9, 2, 48, 200)
        self.assertEqual(a, b)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.user_positions_m, y.user_positions_m)

    def test_scale_demand(self):
        snap = synth_demand(9, 1, 1, 200)[0]
        self.assertEqual(scale_demand(snap, 0.0).service_requests, 0)
        doubled = scale_demand(snap, 2.0)
        self.assertEqual(doubled.active_users, 2 * snap.active_users)
        self.assertEqual(len(doubled.user_positions_m), doubled.active_users)


class SolarTraceImportTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.path = Path(self.tmp.name) / "solar.csv"
        self.traces = [synth_solar(s, 365, 1e6) for s in range(5)]
        export_solar_csv(self.traces, self.path)

    def rows(self):
        with open(self.path, newline="", encoding="utf-8") as fh:
            return list(csv.reader(fh))

    def write(self, rows):
        with open(self.path, "w", newline="", encoding="utf-8") as fh:
            csv.writer(fh).writerows(rows)

    def test_full_year_loads(self):
        loaded = load_solar_trace(self.path, 5)
        self.assertEqual(len(loaded), 5)
        for original, series in zip(self.traces, loaded):
            self.assertEqual(len(series), HOURS_PER_YEAR)
            np.testing.assert_array_equal(series, original)

    def test_hour_out_of_range_reports_line(self):
        rows = self.rows()
        rows[10][2] = "24"
        self.write(rows)
        with self.assertRaises(TraceParseError) as ctx:
            load_solar_trace(self.path, 5)
        self.assertEqual(ctx.exception.line, 11)

    def test_gap_is_reported(self):
        rows = [r for r in self.rows() if r[:3] != ["3", "200", "5"]]
        self.write(rows)
        with self.assertRaises(TraceShapeError) as ctx:
            load_solar_trace(self.path, 5)
        self.assertIn((3, 200, 5), ctx.exception.gaps)
        self.assertIn("station 3 day 200 hour 5", str(ctx.exception))

    def test_duplicate_is_rejected(self):
        rows = self.rows()
        rows.append(rows[1])
        self.write(rows)
        with self.assertRaises(TraceDuplicateError):
            load_solar_trace(self.path, 5)

    def test_missing_station(self):
        with self.assertRaises(TraceShapeError):
            load_solar_trace(self.path, 6)

    @skipUnless(HAS_OPENPYXL, "openpyxl not installed")
    def test_xlsx_workbook(self):
        import openpyxl

        wb = openpyxl.Workbook()
        ws = wb.active
        ws.append(["station", "day", "hour", "energy_j"])
        for index in range(HOURS_PER_YEAR):
            ws.append([0, index // 24 + 1, index % 24, float(self.traces[0][index])])
        path = Path(self.tmp.name) / "solar.xlsx"
        wb.save(path)
        loaded = load_solar_trace(path, 1)
        np.testing.assert_allclose(loaded[0], self.traces[0])


class HistoryCsvTests(SimpleTestCase):
    def test_round_trip(self):
        histories = [StationHistory(s, 100, np.arange(30.0), np.arange(30.0) * 3000) for s in range(2)]
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "history.csv"
            export_history_csv(histories, path)
            loaded = load_history_csv(path)
        self.assertEqual([h.station for h in loaded], [0, 1])
        self.assertEqual(loaded[0].start_hour, 100)
        np.testing.assert_array_equal(loaded[1].energy_j, histories[1].energy_j)

    def test_non_contiguous_hours_rejected(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "history.csv"
            path.write_text("station,hour,users,energy_j\n0,1,5,10\n0,3,5,10\n", encoding="utf-8")
            with self.assertRaises(TraceParseError):
                load_history_csv(path)
