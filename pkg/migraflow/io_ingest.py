# Copyright (c) 2024 The migraflow Developers
# Released under the MIT License; see the LICENSE file at the repository root.

"""Reading and writing of region tables, distance and flow matrices, time series, NPV tables and
scenario documents, plus great-circle distances.

Row numbers in error messages are file line numbers, so the header is row 1.
"""

import logging
import math
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from migraflow import default_settings
from migraflow.core_model import DistanceMatrix, EconomicProfile, FlowMatrix, Region, ScenarioConfig, validate_scenario
from migraflow.dynamics import TimeSeries
from migraflow.exceptions import ConfigurationError, IngestError, InvalidInputError
from migraflow.helper_functions import build_meta_dict, format_number

NPV_COLUMNS = ["origin", "destination", "benefits", "costs"]


def load_regions(path):
    """Reads a region table.

    The header must be exactly ``id,name,lat,lon,population,gdp,wage_rate,unemployment_rate``,
    optionally followed by ``charge``. Empty ``lat``/``lon`` fields give positionless regions and an
    empty ``charge`` field leaves the charge to be derived.

    Parameters
    ----------
    path : str or Path
        A UTF-8 CSV file.

    Returns
    -------
    regions   : list of Region
    overrides : dict
        Charges pinned by the ``charge`` column, keyed by region id.

    Raises
    ------
    IngestError
        On a header mismatch, a non-numeric field, a profile violation or a duplicate id; the
        message carries the row number of the first problem found.
    """

    logger = logging.getLogger()
    frame = _read_table(path)
    columns = list(frame.columns)
    with_charge = default_settings.REGION_COLUMNS + [default_settings.CHARGE_COLUMN]
    if columns not in (default_settings.REGION_COLUMNS, with_charge):
        missing = [c for c in default_settings.REGION_COLUMNS if c not in columns]
        detail = f"missing columns: {', '.join(missing)}" if missing else f"got {','.join(columns)}"
        raise IngestError(
            f"{path}: header must be {','.join(default_settings.REGION_COLUMNS)}"
            f"[,{default_settings.CHARGE_COLUMN}]; {detail}"
        )
    if frame.empty:
        raise IngestError(f"{path}: the region table has no data rows")

    regions, overrides, first_row = [], {}, {}
    for offset, record in enumerate(frame.to_dict(orient="records")):
        row = offset + 2
        region_id = record["id"].strip()
        if region_id in first_row:
            raise IngestError(f"{path}: duplicate region id '{region_id}' in rows {first_row[region_id]} and {row}")
        first_row[region_id] = row

        profile = EconomicProfile(
            population=_parse_float(record["population"], "population", path, row),
            gdp=_parse_float(record["gdp"], "gdp", path, row),
            wage_rate=_parse_float(record["wage_rate"], "wage_rate", path, row),
            unemployment_rate=_parse_float(record["unemployment_rate"], "unemployment_rate", path, row),
        )
        region = Region(
            id=region_id,
            name=record["name"],
            profile=profile,
            lat=_parse_float(record["lat"], "lat", path, row, optional=True),
            lon=_parse_float(record["lon"], "lon", path, row, optional=True),
        )
        problems = region.violations()
        if problems:
            raise IngestError(f"{path}: row {row}: {problems[0]}")
        regions.append(region)

        charge = _parse_float(record.get(default_settings.CHARGE_COLUMN, ""), "charge", path, row, optional=True)
        if charge is not None:
            overrides[region_id] = charge

    logger.info(f"Loaded {len(regions)} regions from {path}")
    return regions, overrides


def write_regions(regions, path, overrides=None):
    """Writes regions in the region table format; the ``charge`` column is added when ``overrides`` is given."""

    columns = list(default_settings.REGION_COLUMNS)
    if overrides is not None:
        columns.append(default_settings.CHARGE_COLUMN)
    records = []
    for region in regions:
        p = region.profile
        record = [
            region.id,
            region.name,
            "" if region.lat is None else format_number(region.lat),
            "" if region.lon is None else format_number(region.lon),
            format_number(p.population),
            format_number(p.gdp),
            format_number(p.wage_rate),
            format_number(p.unemployment_rate),
        ]
        if overrides is not None:
            record.append(format_number(overrides[region.id]) if region.id in overrides else "")
        records.append(record)
    _write_table(pd.DataFrame.from_records(records, columns=columns), path)


def haversine_distance(lat1, lon1, lat2, lon2):
    """Great-circle distance in km between two points given in degrees, on a sphere of radius 6371.0 km.

    Raises
    ------
    InvalidInputError
        If a latitude is outside [-90, 90] or a longitude outside [-180, 180].
    """

    _check_coordinates(lat1, lon1)
    _check_coordinates(lat2, lon2)
    return float(_haversine(np.array([[lat1, lon1]]), np.array([[lat2, lon2]]))[0, 0])


def haversine_matrix(regions):
    """Great-circle distances between all positioned ``regions`` as a ``DistanceMatrix``."""

    unpositioned = [r.id for r in regions if r.position is None]
    if unpositioned:
        raise InvalidInputError(f"Regions without coordinates: {', '.join(unpositioned)}")
    for region in regions:
        _check_coordinates(region.lat, region.lon)
    coordinates = np.array([r.position for r in regions], dtype=float).reshape(-1, 2)
    values = _haversine(coordinates, coordinates)
    np.fill_diagonal(values, 0.0)
    return DistanceMatrix(tuple(r.id for r in regions), values)


def resolve_distances(regions, distance_matrix: DistanceMatrix | None = None):
    """Returns ``distance_matrix`` when given, otherwise the great-circle distances of ``regions``.

    Distances are never mixed: without an explicit matrix every region needs coordinates.
    """

    if distance_matrix is not None:
        return distance_matrix
    unpositioned = [r.id for r in regions if r.position is None]
    if unpositioned:
        raise InvalidInputError(
            f"No distance matrix given and regions lack coordinates: {', '.join(unpositioned)}; "
            "supply --distances or fill lat/lon for every region"
        )
    return haversine_matrix(regions)


def load_distance_matrix(path, region_ids=None):
    """Reads a square distance matrix with a region-id header row and a leading id column.

    Parameters
    ----------
    path       : str or Path
        CSV file; empty cells are missing entries.
    region_ids : iterable of str or None, optional, default: None
        If given, the matrix must cover exactly these ids.

    Raises
    ------
    IngestError
        Naming asymmetric pairs with both values, nonzero diagonals, missing entries and ids that
        do not match the region table.
    """

    matrix = _read_matrix(path, DistanceMatrix)
    problems = matrix.violations() + _id_mismatches(matrix.ids, region_ids, "distance matrix")
    if problems:
        raise IngestError(f"{path}: " + "; ".join(problems))
    return matrix


def write_distance_matrix(matrix: DistanceMatrix, path):
    _write_matrix(matrix, path, default_settings.DISTANCE_MATRIX_CORNER)


def load_flow_matrix(path, region_ids=None):
    """Reads a flow matrix written by ``write_flow_matrix`` (or observed flows in the same layout)."""

    matrix = _read_matrix(path, FlowMatrix)
    problems = matrix.violations() + _id_mismatches(matrix.ids, region_ids, "flow matrix")
    if problems:
        raise IngestError(f"{path}: " + "; ".join(problems))
    return matrix


def write_flow_matrix(matrix: FlowMatrix, path):
    """Writes ``origin,<destination ids...>`` followed by one row per origin, numbers with 12 significant digits."""

    _write_matrix(matrix, path, default_settings.FLOW_MATRIX_CORNER)


def write_timeseries(series: TimeSeries, path):
    frame = series.to_frame()
    out = pd.DataFrame(
        {
            "step": frame["step"].astype(int).astype(str),
            "region_id": frame["region_id"].astype(str),
            "population": frame["population"].map(format_number),
            "charge": frame["charge"].map(format_number),
            "net_inflow": frame["net_inflow"].map(format_number),
        },
        columns=default_settings.TIMESERIES_COLUMNS,
    )
    _write_table(out, path)


def load_timeseries(path):
    frame = _read_table(path)
    if list(frame.columns) != default_settings.TIMESERIES_COLUMNS:
        raise IngestError(f"{path}: header must be {','.join(default_settings.TIMESERIES_COLUMNS)}")
    records = []
    for offset, record in enumerate(frame.to_dict(orient="records")):
        row = offset + 2
        step = _parse_float(record["step"], "step", path, row)
        if step != int(step) or step < 0:
            raise IngestError(f"{path}: row {row}: step must be a non-negative integer, got {record['step']!r}")
        records.append(
            (
                int(step),
                record["region_id"],
                _parse_float(record["population"], "population", path, row),
                _parse_float(record["charge"], "charge", path, row),
                _parse_float(record["net_inflow"], "net_inflow", path, row),
            )
        )
    series = TimeSeries(pd.DataFrame.from_records(records, columns=default_settings.TIMESERIES_COLUMNS))
    if series.steps != list(range(len(series.steps))):
        raise IngestError(f"{path}: step indices must be contiguous from 0")
    return series


def load_config(path):
    """Reads a YAML scenario document and merges it into ``DEFAULT_SETTING_SCENARIO``.

    Keys may be nested (``gravity: {G: 2}``) or dotted (``gravity.G: 2``).

    Raises
    ------
    IngestError
        If the file cannot be read.
    ConfigurationError
        If the document is not a mapping, holds unknown keys or values of the wrong type.
    """

    text = _read_text(path)
    try:
        document = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ConfigurationError(f"{path}: not a valid YAML document: {err}") from err
    if document is None:
        document = {}
    if not isinstance(document, dict):
        raise ConfigurationError(f"{path}: the scenario document must be a mapping of keys to values")
    try:
        return ScenarioConfig.from_dict(build_meta_dict(document, default_settings.DEFAULT_SETTING_SCENARIO))
    except ConfigurationError as err:
        raise ConfigurationError(f"{path}: {err}") from err


def load_npv_table(path, benefits_column="benefits", costs_column="costs"):
    """Reads per-pair benefits and costs into a frame with columns ``origin, destination, benefits, costs``."""

    frame = _read_table(path)
    required = ["origin", "destination", benefits_column, costs_column]
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise IngestError(f"{path}: missing columns: {', '.join(missing)}")

    records, seen = [], {}
    for offset, record in enumerate(frame.to_dict(orient="records")):
        row = offset + 2
        pair = (record["origin"].strip(), record["destination"].strip())
        if pair in seen:
            raise IngestError(f"{path}: duplicate pair {pair} in rows {seen[pair]} and {row}")
        seen[pair] = row
        benefits = _parse_float(record[benefits_column], benefits_column, path, row)
        costs = _parse_float(record[costs_column], costs_column, path, row)
        if not (math.isfinite(benefits) and math.isfinite(costs)) or costs < 0:
            raise IngestError(f"{path}: row {row}: benefits must be finite and costs finite and non-negative")
        records.append((*pair, benefits, costs))
    return pd.DataFrame.from_records(records, columns=NPV_COLUMNS)


def load_scenario(regions_path, config_path, distances_path=None):
    """Loads and validates a complete scenario.

    A relative ``npv.table`` path is resolved against the directory of the scenario document.

    Raises
    ------
    IngestError, ConfigurationError, InvalidInputError
        When a file cannot be parsed.
    ScenarioValidationError
        Listing all invariant violations of the assembled scenario.
    """

    config = load_config(config_path)
    regions, overrides = load_regions(regions_path)
    explicit = None
    if distances_path is not None:
        explicit = _read_matrix(distances_path, DistanceMatrix)
    distances = resolve_distances(regions, explicit)

    npv_table = None
    if config.npv.table is not None:
        table_path = Path(config.npv.table)
        if not table_path.is_absolute():
            table_path = Path(config_path).parent / table_path
        npv_table = load_npv_table(table_path, config.npv.benefits_column, config.npv.costs_column)

    return validate_scenario(config, regions, distances, charge_overrides=overrides, npv_table=npv_table)


def _haversine(first, second):
    """Pairwise great-circle distances between the rows of two ``(n, 2)`` arrays of (lat, lon) degrees."""

    radians1, radians2 = np.radians(first), np.radians(second)
    cos_lat1, cos_lat2 = np.cos(radians1[:, [0]]), np.cos(radians2[:, [0]])
    differences = radians2[np.newaxis, :, :] - radians1[:, np.newaxis, :]
    h = np.sin(differences[:, :, 0] / 2) ** 2 + cos_lat1.dot(cos_lat2.T) * np.sin(differences[:, :, 1] / 2) ** 2
    return 2 * default_settings.EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def _check_coordinates(lat, lon):
    if not (math.isfinite(lat) and -90 <= lat <= 90):
        raise InvalidInputError(f"latitude {lat} out of [-90,90]")
    if not (math.isfinite(lon) and -180 <= lon <= 180):
        raise InvalidInputError(f"longitude {lon} out of [-180,180]")


def _read_text(path):
    try:
        return Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as err:
        raise IngestError(f"{path}: cannot read file: {err}") from err


def _read_table(path):
    """All cells as stripped strings; nothing is interpreted as NA."""

    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8", skipinitialspace=True)
    except FileNotFoundError as err:
        raise IngestError(f"{path}: file not found") from err
    except (OSError, UnicodeDecodeError, pd.errors.ParserError, pd.errors.EmptyDataError) as err:
        raise IngestError(f"{path}: cannot parse CSV: {err}") from err
    frame.columns = [str(c).strip() for c in frame.columns]
    return frame


def _read_matrix(path, matrix_type):
    frame = _read_table(path)
    if frame.shape[1] < 2:
        raise IngestError(f"{path}: a matrix needs an id column and at least one region column")
    corner = frame.columns[0]
    row_ids = [str(i).strip() for i in frame[corner]]
    column_ids = list(frame.columns[1:])
    for ids, what in ((row_ids, "row"), (column_ids, "column")):
        duplicates = sorted({i for i in ids if ids.count(i) > 1})
        if duplicates:
            raise IngestError(f"{path}: duplicate {what} ids: {', '.join(duplicates)}")
    if sorted(row_ids) != sorted(column_ids):
        only_rows = [i for i in row_ids if i not in column_ids]
        only_columns = [i for i in column_ids if i not in row_ids]
        raise IngestError(
            f"{path}: row and column ids differ (rows only: {', '.join(only_rows) or '-'}; "
            f"columns only: {', '.join(only_columns) or '-'})"
        )

    values = np.empty((len(row_ids), len(row_ids)))
    for offset, record in enumerate(frame.to_dict(orient="records")):
        for j, column in enumerate(row_ids):
            values[offset, j] = _parse_float(record[column], column, path, offset + 2, optional=True, missing=math.nan)
    return matrix_type(tuple(row_ids), values)


def _write_matrix(matrix, path, corner):
    frame = matrix.to_frame(corner).reset_index()
    for column in matrix.ids:
        frame[column] = frame[column].map(format_number)
    _write_table(frame, path)


def _write_table(frame, path):
    try:
        frame.to_csv(path, index=False, encoding="utf-8", lineterminator="\n")
    except OSError as err:
        raise IngestError(f"{path}: cannot write file: {err}") from err


def _id_mismatches(ids, region_ids, what):
    if region_ids is None:
        return []
    region_ids = list(region_ids)
    out = []
    missing = [i for i in region_ids if i not in ids]
    unknown = [i for i in ids if i not in region_ids]
    if missing:
        out.append(f"{what} has no entries for regions: {', '.join(missing)}")
    if unknown:
        out.append(f"{what} contains unknown region ids: {', '.join(unknown)}")
    return out


def _parse_float(text, column, path, row, optional=False, missing=None):
    text = "" if text is None else str(text).strip()
    if not text:
        if optional:
            return missing
        raise IngestError(f"{path}: row {row}, column '{column}': value is missing")
    try:
        return float(text)
    except ValueError:
        raise IngestError(f"{path}: row {row}, column '{column}': '{text}' is not a number") from None
