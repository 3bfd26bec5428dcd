# Python standard library imports
import csv
import dataclasses
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

# Django framework imports
from django.core.exceptions import ValidationError
from django.db import DatabaseError
from django.utils import timezone
from django.utils.dateparse import parse_datetime

# Local imports
from .evolution_helpers import GaConfig
from .forecast_helpers import TrainConfig
from .scenario_helpers import ScenarioConfig, dataclass_from_dict, dataclass_to_dict
from .seed_helpers import git_blob_sha1

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
SUMMARY_NAME = "summary.json"
OUTAGES_CSV = "outages_per_week.csv"
THROUGHPUT_CSV = "throughput_coverage.csv"
SERVICE_CSV = "service_coverage.csv"
INTERVAL_CSV = "outage_interval.csv"


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass
class RunConfig:
    """Scenario plus the optional training and evolution sections of one config file."""

    scenario: ScenarioConfig
    training: TrainConfig
    evolution: GaConfig
    path: str = ""
    raw: bytes = field(default=b"", repr=False)

    @property
    def config_hash(self):
        return git_blob_sha1(self.raw)

    def as_dict(self):
        data = dataclass_to_dict(self.scenario)
        data["training"] = dataclass_to_dict(self.training)
        data["evolution"] = dataclass_to_dict(self.evolution)
        return data


def _clean_section(obj, prefix):
    errors = obj.clean()
    if errors:
        raise ValidationError({f"{prefix}{k}": v for k, v in errors.items()})
    return obj


def run_config_from_bytes(raw, path=""):
    """
    Parse config bytes into a RunConfig.

    Process:
    1. Decode JSON; `training` and `evolution` are split off the scenario fields
    2. Build every section, collecting field errors across all of them
    3. Validate ranges (ScenarioConfig.full_clean and the sections' clean())

    Raises: ValidationError keyed by dotted field path
    """
    try:
        data = json.loads(raw.decode("utf-8-sig") if raw else "{}")
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValidationError({"__all__": [f"{path or 'config'} is not valid JSON: {exc}"]}) from exc
    if not isinstance(data, dict):
        raise ValidationError({"__all__": ["config must be a JSON object"]})
    data = dict(data)
    training_data = data.pop("training", {})
    evolution_data = data.pop("evolution", {})

    errors = {}
    built = {}
    for name, cls, section, prefix in (
        ("scenario", ScenarioConfig, data, ""),
        ("training", TrainConfig, training_data, "training."),
        ("evolution", GaConfig, evolution_data, "evolution."),
    ):
        try:
            built[name] = dataclass_from_dict(cls, section, prefix)
        except ValidationError as exc:
            exc.update_error_dict(errors)
    if errors:
        raise ValidationError(errors)

    for name, prefix in (("training", "training."), ("evolution", "evolution.")):
        try:
            _clean_section(built[name], prefix)
        except ValidationError as exc:
            exc.update_error_dict(errors)
    try:
        built["scenario"].full_clean()
    except ValidationError as exc:
        exc.update_error_dict(errors)
    if errors:
        raise ValidationError(errors)
    return RunConfig(raw=raw, path=str(path), **built)


def load_run_config(path):
    """Read a config file; a missing file surfaces as OSError for the caller."""
    path = Path(path)
    return run_config_from_bytes(path.read_bytes(), path)


def format_validation_error(exc):
    """One `field: message` line per problem, sorted by field path."""
    if hasattr(exc, "error_dict"):
        lines = []
        for key in sorted(exc.message_dict):
            for message in exc.message_dict[key]:
                lines.append(f"{key}: {message}")
        return "\n".join(lines)
    return "\n".join(exc.messages)


# ---------------------------------------------------------------------------
# Run directory and manifest
# ---------------------------------------------------------------------------


def prepare_output_dir(path, force=False, marker=MANIFEST_NAME):
    """
    Create the run directory.

    A directory that already holds a manifest is refused unless force is set.
    Returns: Path
    Raises: FileExistsError
    """
    path = Path(path)
    if (path / marker).exists() and not force:
        raise FileExistsError(f"{path} already holds a run; pass --force to overwrite")
    path.mkdir(parents=True, exist_ok=True)
    return path


@dataclass
class RunManifest:
    command: str
    config_path: str
    seed: int
    config_hash: str
    output_dir: str
    started_at: str
    finished_at: str | None = None
    status: str = "running"
    options: dict = field(default_factory=dict)

    def as_dict(self):
        return dataclasses.asdict(self)


def start_manifest(command, run_config, seed, output_dir, options=None):
    """Write manifest.json before any result file and return it."""
    manifest = RunManifest(
        command=command,
        config_path=str(run_config.path),
        seed=int(seed),
        config_hash=run_config.config_hash,
        output_dir=str(output_dir),
        started_at=timezone.now().isoformat(),
        options=dict(options or {}),
    )
    out = Path(output_dir)
    write_json(out / MANIFEST_NAME, manifest.as_dict())
    # the exact config bytes, so the hash can be checked against the run directory
    (out / "config.json").write_bytes(run_config.raw)
    return manifest


def finish_manifest(manifest, status="ok"):
    manifest.finished_at = timezone.now().isoformat()
    manifest.status = status
    write_json(Path(manifest.output_dir) / MANIFEST_NAME, manifest.as_dict())
    return manifest


def record_run(manifest, summary=None):
    """
    Best-effort ExperimentRun row for the admin.

    Returns: the saved ExperimentRun, or None when the database is unavailable
    """
    from ..models import ExperimentRun

    try:
        return ExperimentRun.objects.create(
            command=manifest.command,
            config_path=manifest.config_path,
            seed=manifest.seed,
            config_hash=manifest.config_hash,
            output_dir=manifest.output_dir,
            started_at=parse_datetime(manifest.started_at),
            finished_at=parse_datetime(manifest.finished_at) if manifest.finished_at else None,
            status=manifest.status,
            summary=summary or {},
        )
    except DatabaseError as exc:
        logger.warning("could not record run %s: %s", manifest.output_dir, exc)
        return None


# ---------------------------------------------------------------------------
# Writers
# ---------------------------------------------------------------------------


def write_json(path, data):
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(["" if v is None else v for v in row])


def _num(value):
    return "" if value is None else repr(float(value))


def write_ndjson(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def write_run_reports(output_dir, results):
    """
    Per-figure CSVs for one or more simulation runs sharing a horizon.

    results: {label: SimResult}; each CSV gets one column per label.

    Files:
    - outages_per_week.csv: week, outage percentage per label
    - throughput_coverage.csv: sampled hour, coverage per label
    - service_coverage.csv: station, share of fully served hours per label
    - outage_interval.csv: one row per label with outage totals and time between outages

    Returns: summary dict
    """
    out = Path(output_dir)
    labels = list(results)
    metrics = {label: results[label].metrics for label in labels}

    weeks = max(len(m.outage_pct_per_week) for m in metrics.values())
    write_csv(
        out / OUTAGES_CSV,
        ["week"] + labels,
        [
            [w + 1] + [_num(metrics[l].outage_pct_per_week[w]) if w < len(metrics[l].outage_pct_per_week) else "" for l in labels]
            for w in range(weeks)
        ],
    )

    hours = sorted({h for r in results.values() for h, _ in r.coverage})
    by_label = {l: dict(results[l].coverage) for l in labels}
    write_csv(
        out / THROUGHPUT_CSV,
        ["hour"] + labels,
        [[h] + [_num(by_label[l].get(h)) for l in labels] for h in hours],
    )

    stations = sorted({row.station for r in results.values() for row in r.ledger})
    service = {}
    for label in labels:
        counts, served = {}, {}
        for row in results[label].ledger:
            counts[row.station] = counts.get(row.station, 0) + 1
            served[row.station] = served.get(row.station, 0) + (row.unserved == 0)
        service[label] = {s: served.get(s, 0) / counts[s] for s in counts}
    write_csv(
        out / SERVICE_CSV,
        ["station"] + labels,
        [[s] + [_num(service[l].get(s)) for l in labels] for s in stations],
    )

    write_csv(
        out / INTERVAL_CSV,
        ["run", "fleet_size", "outage_hours", "outage_events", "mean_time_between_outages_h"],
        [
            [l, m.fleet_size, m.outage_hours, m.outage_events, _num(m.mean_time_between_outages_h)]
            for l, m in metrics.items()
        ],
    )
    return {label: m.as_dict() for label, m in metrics.items()}


def write_extra_users_report(output_dir, counts, curves):
    """curves: {None: baseline, altitude: curve}."""
    labels = [a for a in curves if a is None] + sorted(a for a in curves if a is not None)
    names = ["no_uav" if a is None else f"uav_{a:g}m" for a in labels]
    write_csv(
        Path(output_dir) / THROUGHPUT_CSV,
        ["extra_users"] + names,
        [[c] + [_num(curves[a][i]) for a in labels] for i, c in enumerate(counts)],
    )
    return {"extra_users": list(counts), **{n: curves[a] for n, a in zip(names, labels)}}


def write_fleet_report(output_dir, points):
    write_csv(
        Path(output_dir) / INTERVAL_CSV,
        ["fleet_size", "mean_time_between_outages_h", "outage_hours", "outage_events", "marginal_gain_h"],
        [
            [p.fleet_size, _num(p.mean_time_between_outages_h), p.outage_hours, p.outage_events, _num(p.marginal_gain_h)]
            for p in points
        ],
    )
    return {"fleet": [dataclasses.asdict(p) for p in points]}


def write_density_report(output_dir, points):
    write_csv(
        Path(output_dir) / SERVICE_CSV,
        ["density", "uav", "no_uav", "gain"],
        [[_num(p.density), _num(p.uav_coverage), _num(p.baseline_coverage), _num(p.gain)] for p in points],
    )
    return {
        "density": [
            {"density": p.density, "uav": p.uav_coverage, "no_uav": p.baseline_coverage, "gain": p.gain}
            for p in points
        ]
    }


def write_history_csv(path, history):
    write_csv(path, ["generation", "best_fitness", "mean_fitness", "penalty_rate"], [h.as_row() for h in history])
