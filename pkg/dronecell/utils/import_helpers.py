# Python standard library imports
import csv
import io
import logging
from pathlib import Path

# Third-party imports
import numpy as np

# Local imports
from ..exceptions import TraceDuplicateError, TraceParseError, TraceShapeError
from .forecast_helpers import StationHistory
from .scenario_helpers import DAYS_PER_YEAR, HOURS_PER_DAY, HOURS_PER_YEAR

# Optional Excel support with graceful fallback
try:
    import openpyxl
    HAS_OPENPYXL = True
except Exception:
    HAS_OPENPYXL = False

logger = logging.getLogger(__name__)

SOLAR_HEADER = ["station", "day", "hour", "energy_j"]
DEMAND_HEADER = ["area", "hour", "users", "requests"]
HISTORY_HEADER = ["station", "hour", "users", "energy_j"]


def read_import_file(path):
    """
    File reader supporting CSV and Excel formats.

    Supported formats:
    - CSV files (UTF-8 with BOM support)
    - Excel files (.xlsx, .xlsm) if openpyxl available

    Returns: Tuple of (headers_list, rows_list)
    """
    path = Path(path)
    headers = []
    rows = []

    if path.suffix.lower() in (".xlsx", ".xlsm"):
        if not HAS_OPENPYXL:
            raise TraceParseError(1, "openpyxl is required to read Excel traces")
        wb = openpyxl.load_workbook(filename=path, read_only=True, data_only=True)
        ws = wb.active
        for i, row in enumerate(ws.iter_rows(values_only=True)):
            if i == 0:
                headers = [str(c).strip() if c is not None else "" for c in row]
                continue
            rows.append(list(row))
        wb.close()
    else:
        text = path.read_bytes().decode("utf-8-sig")
        reader = csv.reader(io.StringIO(text))
        for i, row in enumerate(reader):
            if i == 0:
                headers = [c.strip() for c in row]
                continue
            rows.append(row)

    return headers, rows


def _parse_int(raw, line, name, lo, hi):
    try:
        value = float(str(raw).strip())
    except (TypeError, ValueError):
        raise TraceParseError(line, f"{name} {raw!r} is not a number") from None
    if not value.is_integer():
        raise TraceParseError(line, f"{name} {raw!r} is not an integer")
    value = int(value)
    if not lo <= value <= hi:
        raise TraceParseError(line, f"{name} {value} outside {lo}..{hi}")
    return value


def load_solar_trace(path, station_count):
    """
    Load hour-wise solar harvest for every station.

    Expected columns: station, day, hour, energy_j
    - station: 0 .. station_count-1
    - day: 1 .. 365
    - hour: 0 .. 23
    - energy_j: joules harvested during that hour, >= 0

    Process:
    1. Read rows (CSV or XLSX) and validate every field
    2. Reject duplicate (station, day, hour) records
    3. Require a dense 365 x 24 grid per station; gaps are reported, never filled

    Returns: list of station_count numpy arrays of length 8760
    Raises: TraceParseError, TraceDuplicateError, TraceShapeError
    """
    headers, rows = read_import_file(path)
    if [h.lower() for h in headers] != SOLAR_HEADER:
        raise TraceParseError(1, f"expected header {','.join(SOLAR_HEADER)}, got {','.join(headers)}")

    traces = np.full((station_count, HOURS_PER_YEAR), np.nan)
    seen_stations = set()
    for offset, row in enumerate(rows):
        line = offset + 2
        if not row or all(c in (None, "") for c in row):
            continue
        if len(row) != 4:
            raise TraceParseError(line, f"expected 4 fields, got {len(row)}")
        station = _parse_int(row[0], line, "station", 0, 2**31)
        day = _parse_int(row[1], line, "day", 1, DAYS_PER_YEAR)
        hour = _parse_int(row[2], line, "hour", 0, HOURS_PER_DAY - 1)
        try:
            energy = float(str(row[3]).strip())
        except (TypeError, ValueError):
            raise TraceParseError(line, f"energy_j {row[3]!r} is not a number") from None
        if not np.isfinite(energy) or energy < 0:
            raise TraceParseError(line, f"energy_j {energy} must be finite and >= 0")

        seen_stations.add(station)
        if station >= station_count:
            continue
        index = (day - 1) * HOURS_PER_DAY + hour
        if not np.isnan(traces[station, index]):
            raise TraceDuplicateError(line, station, day, hour)
        traces[station, index] = energy

    if seen_stations != set(range(station_count)):
        raise TraceShapeError(
            f"expected stations 0..{station_count - 1}, found {sorted(seen_stations)}"
        )

    missing = np.argwhere(np.isnan(traces))
    if len(missing):
        gaps = [
            (int(s), int(i) // HOURS_PER_DAY + 1, int(i) % HOURS_PER_DAY)
            for s, i in missing
        ]
        shown = ", ".join(f"station {s} day {d} hour {h}" for s, d, h in gaps[:10])
        more = f" (+{len(gaps) - 10} more)" if len(gaps) > 10 else ""
        raise TraceShapeError(f"missing hours: {shown}{more}", gaps=gaps)

    logger.info("loaded solar trace %s (%d stations)", path, station_count)
    return [traces[s].copy() for s in range(station_count)]


def export_solar_csv(traces, path):
    """Write full-year traces in the format load_solar_trace reads."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SOLAR_HEADER)
        for station, series in enumerate(traces):
            for index in range(HOURS_PER_YEAR):
                day, hour = divmod(index, HOURS_PER_DAY)
                writer.writerow([station, day + 1, hour, repr(float(series[index % len(series)]))])


def export_demand_csv(snapshots, path):
    """Demand snapshots as area,hour,users,requests rows."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(DEMAND_HEADER)
        for snap in snapshots:
            writer.writerow([snap.area_id, snap.hour, snap.active_users, snap.service_requests])


def export_history_csv(histories, path):
    """Station histories as station,hour,users,energy_j rows (absolute hours)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTORY_HEADER)
        for history in histories:
            for offset in range(len(history)):
                writer.writerow(
                    [
                        history.station,
                        history.start_hour + offset,
                        repr(float(history.users[offset])),
                        repr(float(history.energy_j[offset])),
                    ]
                )


def load_history_csv(path):
    """
    Read station histories written by export_history_csv (CSV or XLSX).

    Each station's hours must be contiguous.
    Returns: list of StationHistory ordered by station id
    Raises: TraceParseError on malformed rows or gaps
    """
    headers, rows = read_import_file(path)
    if [h.lower() for h in headers] != HISTORY_HEADER:
        raise TraceParseError(1, f"expected header {','.join(HISTORY_HEADER)}, got {','.join(headers)}")

    per_station = {}
    for offset, row in enumerate(rows):
        line = offset + 2
        if not row or all(c in (None, "") for c in row):
            continue
        if len(row) != 4:
            raise TraceParseError(line, f"expected 4 fields, got {len(row)}")
        station = _parse_int(row[0], line, "station", 0, 2**31)
        hour = _parse_int(row[1], line, "hour", 0, 2**31)
        try:
            users, energy = float(row[2]), float(row[3])
        except (TypeError, ValueError):
            raise TraceParseError(line, "users and energy_j must be numbers") from None
        records = per_station.setdefault(station, [])
        if records and hour != records[-1][0] + 1:
            raise TraceParseError(line, f"station {station}: hour {hour} does not follow {records[-1][0]}")
        records.append((hour, users, energy))

    return [
        StationHistory(
            station=station,
            start_hour=records[0][0],
            users=[r[1] for r in records],
            energy_j=[r[2] for r in records],
        )
        for station, records in sorted(per_station.items())
    ]
