"""Parse raw export files per a schema manifest into canonical per-feature series.

Exports from different devices disagree on layout, so a small YAML manifest
maps each file onto (timestamp column, value columns). Each value column
becomes one RawSeries with a feature base name, a unit, and a sampling kind:

fast    sub-daily sampling, aggregated to daily statistics downstream
slow    sparser than daily (e.g. body weight), linearly interpolated
daily   exactly one meaningful value per day
binary  daily 0/1 indicator

Timestamps are normalized to UTC; naive timestamps are assumed UTC.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from pathlib import Path

import yaml

from .errors import (
    EmptySeries,
    HeaderMismatch,
    ParseError,
    ValidationError,
)

VALID_KINDS = ("fast", "slow", "daily", "binary")


@dataclass(frozen=True)
class ValueColumn:
    """One CSV column mapped onto a feature."""

    column: str
    feature: str
    unit: str
    kind: str
    sensor_range: tuple[float, float] | None = None


@dataclass(frozen=True)
class SourceSpec:
    """One export file: where the timestamps live and which columns matter."""

    id: str
    file: str
    timestamp_column: str
    timestamp_format: str  # "iso8601" or a strptime pattern
    values: tuple[ValueColumn, ...]


@dataclass(frozen=True)
class SourceManifest:
    sources: tuple[SourceSpec, ...]

    def feature_names(self) -> list[str]:
        return [v.feature for s in self.sources for v in s.values]


@dataclass(frozen=True)
class RawSeries:
    """One source variable as (UTC timestamp, value) samples.

    Timestamps are strictly increasing and values finite; when a sensor_range
    is declared every value lies inside it.
    """

    feature: str
    unit: str
    kind: str
    samples: tuple[tuple[datetime, float], ...]
    sensor_range: tuple[float, float] | None = None

    def values(self) -> list[float]:
        return [v for _, v in self.samples]

    def days(self) -> set[date]:
        return {t.date() for t, _ in self.samples}


@dataclass
class ImportResult:
    series: list[RawSeries]
    rows_total: int = 0
    rows_skipped: int = 0
    cells_skipped: int = 0
    cells_clipped: int = 0


@dataclass
class QualityEntry:
    feature: str
    unit: str
    kind: str
    n_samples: int
    days_covered: int
    missing_day_fraction: float
    saturation_fraction: float
    outlier_note: str = ""


@dataclass
class QualityReport:
    start: date
    end: date
    entries: list[QualityEntry] = field(default_factory=list)


def load_manifest(path: str | Path) -> SourceManifest:
    """Load and validate a YAML source manifest.

    Raises ParseError for malformed documents and ValidationError for
    duplicate source ids, duplicate feature names, unknown kinds, or a
    sensor_range whose min is not below its max.
    """
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("sources"), list):
        raise ParseError(f"{path}: expected a mapping with a 'sources' list")

    sources = []
    for i, raw in enumerate(doc["sources"]):
        try:
            values = tuple(
                ValueColumn(
                    column=str(v["column"]),
                    feature=str(v["feature"]),
                    unit=str(v.get("unit", "")),
                    kind=str(v["kind"]),
                    sensor_range=_parse_range(v.get("sensor_range")),
                )
                for v in raw["values"]
            )
            spec = SourceSpec(
                id=str(raw["id"]),
                file=str(raw["file"]),
                timestamp_column=str(raw["timestamp_column"]),
                timestamp_format=str(raw.get("timestamp_format", "iso8601")),
                values=values,
            )
        except (KeyError, TypeError) as exc:
            raise ParseError(f"{path}: source #{i} is malformed: {exc}") from exc
        sources.append(spec)

    seen_ids: set[str] = set()
    seen_features: set[str] = set()
    for spec in sources:
        if spec.id in seen_ids:
            raise ValidationError(f"duplicate source id {spec.id!r}")
        seen_ids.add(spec.id)
        if not spec.values:
            raise ValidationError(f"source {spec.id!r} declares no value columns")
        for v in spec.values:
            if v.kind not in VALID_KINDS:
                raise ValidationError(f"{v.feature!r}: unknown kind {v.kind!r}")
            if v.feature in seen_features:
                raise ValidationError(f"duplicate feature name {v.feature!r}")
            seen_features.add(v.feature)
    return SourceManifest(sources=tuple(sources))


def _parse_range(raw) -> tuple[float, float] | None:
    if raw is None:
        return None
    if not isinstance(raw, (list, tuple)) or len(raw) != 2:
        raise ValidationError(f"sensor_range must be [min, max], got {raw!r}")
    lo, hi = float(raw[0]), float(raw[1])
    if not lo < hi:
        raise ValidationError(f"sensor_range min must be < max, got [{lo}, {hi}]")
    return (lo, hi)


def parse_timestamp(text: str, fmt: str) -> datetime:
    """Parse a timestamp and convert it to UTC. Naive inputs are taken as UTC."""
    text = text.strip()
    if fmt == "iso8601":
        if text.endswith("Z"):
            text = text[:-1] + "+00:00"
        dt = datetime.fromisoformat(text)
    else:
        dt = datetime.strptime(text, fmt)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def import_csv(path: str | Path, spec: SourceSpec) -> ImportResult:
    """Import one CSV file into one RawSeries per declared value column.

    Rows with an unparseable timestamp are skipped and counted; a cell that
    fails to parse as a finite number is skipped for that column only. When a
    timestamp occurs more than once the last occurrence in file order wins.
    Values outside a declared sensor_range are clipped to the nearest bound
    and counted, mirroring the physical clipping such ranges describe.
    """
    path = Path(path)
    if not path.exists():
        raise OSError(f"input file not found: {path}")
    result = ImportResult(series=[])
    # keep-last: per column, later rows overwrite earlier ones at equal timestamps
    accum: dict[str, dict[datetime, float]] = {v.column: {} for v in spec.values}

    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        needed = [spec.timestamp_column] + [v.column for v in spec.values]
        missing = [c for c in needed if c not in header]
        if missing:
            raise HeaderMismatch(f"{path}: missing columns {missing}")
        for row in reader:
            result.rows_total += 1
            try:
                ts = parse_timestamp(row[spec.timestamp_column] or "", spec.timestamp_format)
            except (ValueError, TypeError):
                result.rows_skipped += 1
                continue
            for v in spec.values:
                cell = row.get(v.column)
                try:
                    value = float(cell)
                except (TypeError, ValueError):
                    result.cells_skipped += 1
                    continue
                if not math.isfinite(value):
                    result.cells_skipped += 1
                    continue
                if v.sensor_range is not None:
                    lo, hi = v.sensor_range
                    if value < lo or value > hi:
                        value = min(max(value, lo), hi)
                        result.cells_clipped += 1
                accum[v.column][ts] = value

    if all(not samples for samples in accum.values()):
        raise EmptySeries(f"{path}: no valid rows")

    for v in spec.values:
        samples = tuple(sorted(accum[v.column].items()))
        result.series.append(
            RawSeries(
                feature=v.feature,
                unit=v.unit,
                kind=v.kind,
                samples=samples,
                sensor_range=v.sensor_range,
            )
        )
    return result


def quality_report(
    series: list[RawSeries], start: date, end: date
) -> QualityReport:
    """Summarize coverage, saturation, and outliers per series over [start, end]."""
    if end < start:
        raise ValidationError("quality_report: end date before start date")
    n_days = (end - start).days + 1
    report = QualityReport(start=start, end=end)
    for s in series:
        values = s.values()
        n = len(values)
        covered = sum(1 for d in s.days() if start <= d <= end)
        missing = 1.0 - covered / n_days
        saturated = 0.0
        if s.sensor_range is not None and n:
            lo, hi = s.sensor_range
            saturated = sum(1 for v in values if v == lo or v == hi) / n
        report.entries.append(
            QualityEntry(
                feature=s.feature,
                unit=s.unit,
                kind=s.kind,
                n_samples=n,
                days_covered=covered,
                missing_day_fraction=missing,
                saturation_fraction=saturated,
                outlier_note=_outlier_note(values),
            )
        )
    return report


def _outlier_note(values: list[float]) -> str:
    """Flag samples beyond a 3x interquartile-range fence."""
    if len(values) < 4:
        return ""
    v = sorted(values)
    q1 = _quantile_sorted(v, 0.25)
    q3 = _quantile_sorted(v, 0.75)
    iqr = q3 - q1
    if iqr == 0:
        return ""
    lo, hi = q1 - 3.0 * iqr, q3 + 3.0 * iqr
    k = sum(1 for x in v if x < lo or x > hi)
    return f"{k} samples outside 3*IQR fence" if k else ""


def _quantile_sorted(v: list[float], q: float) -> float:
    h = (len(v) - 1) * q
    lo = math.floor(h)
    hi = math.ceil(h)
    return v[lo] + (h - lo) * (v[hi] - v[lo])


def write_series_csv(series: RawSeries, directory: str | Path) -> Path:
    """Write one canonical CSV (timestamp,value) for a series. Returns the path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{series.feature}.csv"
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "value"])
        for ts, value in series.samples:
            writer.writerow([ts.isoformat(), repr(float(value))])
    return path


def read_series_csv(
    path: str | Path,
    feature: str,
    unit: str,
    kind: str,
    sensor_range: tuple[float, float] | None = None,
) -> RawSeries:
    """Read a canonical per-series CSV back into a RawSeries."""
    spec = SourceSpec(
        id=feature,
        file=str(path),
        timestamp_column="timestamp",
        timestamp_format="iso8601",
        values=(
            ValueColumn(
                column="value",
                feature=feature,
                unit=unit,
                kind=kind,
                sensor_range=sensor_range,
            ),
        ),
    )
    return import_csv(path, spec).series[0]


def covered_range(series: list[RawSeries]) -> tuple[date, date]:
    """Smallest [start, end] date range covering every sample of every series."""
    days = [d for s in series for d in s.days()]
    if not days:
        raise EmptySeries("no samples in any series")
    return min(days), max(days)
