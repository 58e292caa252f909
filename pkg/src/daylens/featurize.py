"""Aggregate raw series to one row per day, impute, lag, and standardize.

Column names are canonical and fully parseable. An aggregated column is
"<Base><Aggregator>()" (e.g. "CO2Median()"), a raw daily column is just the
base name, and lagged copies carry a suffix: "Yesterday" (lag 1),
"Ereyesterday" (lag 2), then "<k>DaysAgo".
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, replace
from datetime import date, timedelta
from itertools import groupby
from pathlib import Path

import numpy as np

from .errors import (
    AllDropped,
    EmptyInput,
    OutOfRange,
    TooFewSamples,
    TooShort,
    ValidationError,
)
from .ingest import RawSeries

AGGREGATORS = ("Sum", "Mean", "Median", "P05", "P95")
RAW = "Raw"

_LAG_RE = re.compile(r"^(?P<stem>.*?)(?P<suffix>Ereyesterday|Yesterday|(?P<k>\d+)DaysAgo)?$")


@dataclass(frozen=True)
class FeatureMeta:
    name: str
    base: str
    aggregator: str  # one of AGGREGATORS or "Raw"
    lag: int = 0


def lag_suffix(lag: int) -> str:
    if lag == 0:
        return ""
    if lag == 1:
        return "Yesterday"
    if lag == 2:
        return "Ereyesterday"
    return f"{lag}DaysAgo"


def feature_name(base: str, aggregator: str, lag: int = 0) -> str:
    stem = base if aggregator == RAW else f"{base}{aggregator}()"
    return stem + lag_suffix(lag)


def parse_feature_name(name: str) -> FeatureMeta:
    """Recover (base, aggregator, lag) from a canonical column name."""
    m = _LAG_RE.match(name)
    suffix = m.group("suffix")
    if suffix is None:
        stem, lag = name, 0
    elif suffix == "Yesterday":
        stem, lag = m.group("stem"), 1
    elif suffix == "Ereyesterday":
        stem, lag = m.group("stem"), 2
    else:
        stem, lag = m.group("stem"), int(m.group("k"))
    for agg in AGGREGATORS:
        if stem.endswith(f"{agg}()"):
            return FeatureMeta(name=name, base=stem[: -len(agg) - 2], aggregator=agg, lag=lag)
    return FeatureMeta(name=name, base=stem, aggregator=RAW, lag=lag)


@dataclass
class DailyMatrix:
    """Days x features table with a missingness mask (True = observed)."""

    dates: list[date]
    features: list[FeatureMeta]
    values: np.ndarray  # (n_days, n_features), NaN where masked
    mask: np.ndarray  # bool, same shape
    target_name: str

    def __post_init__(self) -> None:
        if any(b >= a for a, b in zip(self.dates[1:], self.dates)):
            raise ValidationError("dates must be strictly increasing")
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise ValidationError("duplicate feature names in matrix")
        if self.values.shape != (len(self.dates), len(self.features)):
            raise ValidationError("values shape does not match dates x features")
        if self.mask.shape != self.values.shape:
            raise ValidationError("mask shape does not match values")
        if not np.all(np.isfinite(self.values[self.mask])):
            raise ValidationError("observed cells must be finite")

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    def index_of(self, name: str) -> int:
        for i, f in enumerate(self.features):
            if f.name == name:
                return i
        raise KeyError(name)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.index_of(name)]

    def column_mask(self, name: str) -> np.ndarray:
        return self.mask[:, self.index_of(name)]

    @property
    def target_index(self) -> int:
        return self.index_of(self.target_name)

    def row_of(self, day: date) -> int:
        try:
            return self.dates.index(day)
        except ValueError:
            raise KeyError(day) from None

    def take_features(self, indices: list[int]) -> "DailyMatrix":
        return DailyMatrix(
            dates=list(self.dates),
            features=[self.features[j] for j in indices],
            values=self.values[:, indices].copy(),
            mask=self.mask[:, indices].copy(),
            target_name=self.target_name,
        )

    def take_rows(self, indices: list[int]) -> "DailyMatrix":
        return DailyMatrix(
            dates=[self.dates[i] for i in indices],
            features=list(self.features),
            values=self.values[indices, :].copy(),
            mask=self.mask[indices, :].copy(),
            target_name=self.target_name,
        )


def percentile(values, q: float) -> float:
    """Percentile by linear interpolation between closest order statistics.

    rank h = (n-1)*q; result = v[floor(h)] + (h - floor(h)) * (v[ceil(h)] - v[floor(h)])
    on the sorted values.
    """
    n = len(values)
    if n == 0:
        raise EmptyInput("percentile of empty list")
    if not 0.0 <= q <= 1.0:
        raise OutOfRange(f"q must be in [0, 1], got {q}")
    v = sorted(float(x) for x in values)
    h = (n - 1) * q
    lo = math.floor(h)
    hi = math.ceil(h)
    return v[lo] + (h - lo) * (v[hi] - v[lo])


def aggregate_daily(series: RawSeries) -> dict[str, dict[date, float]]:
    """Aggregate a sub-daily (fast) series to Sum/Mean/Median/P05/P95 per day.

    Days without samples are simply absent from the returned dicts.
    """
    if series.kind != "fast":
        raise ValueError(f"aggregate_daily expects kind='fast', got {series.kind!r}")
    out: dict[str, dict[date, float]] = {agg: {} for agg in AGGREGATORS}
    for day, group in groupby(series.samples, key=lambda s: s[0].date()):
        vals = [v for _, v in group]
        out["Sum"][day] = float(sum(vals))
        out["Mean"][day] = float(sum(vals) / len(vals))
        out["Median"][day] = percentile(vals, 0.5)
        out["P05"][day] = percentile(vals, 0.05)
        out["P95"][day] = percentile(vals, 0.95)
    return out


def daily_raw(series: RawSeries) -> dict[date, float]:
    """One value per day for daily/binary series; the day's last sample wins."""
    out: dict[date, float] = {}
    for ts, v in series.samples:
        out[ts.date()] = v
    return out


def interpolate_slow(series: RawSeries, dates: list[date]) -> dict[date, float]:
    """Linear interpolation of a slow series at daily resolution.

    Days outside the first and last measurement remain absent (no
    extrapolation). Needs at least two measurement days.
    """
    if series.kind != "slow":
        raise ValueError(f"interpolate_slow expects kind='slow', got {series.kind!r}")
    measured = daily_raw(series)
    if len(measured) < 2:
        raise TooFewSamples(f"{series.feature}: interpolation needs >= 2 measurement days")
    mdays = sorted(measured)
    ords = [d.toordinal() for d in mdays]
    vals = [measured[d] for d in mdays]
    out: dict[date, float] = {}
    j = 0
    for d in dates:
        o = d.toordinal()
        if o < ords[0] or o > ords[-1]:
            continue
        while j + 1 < len(ords) and ords[j + 1] < o:
            j += 1
        if o == ords[j]:
            out[d] = vals[j]
        else:
            a, b = ords[j], ords[j + 1]
            out[d] = vals[j] + (o - a) / (b - a) * (vals[j + 1] - vals[j])
    return out


def build_daily_matrix(
    series: list[RawSeries],
    target: str,
    aggregators: tuple[str, ...] = AGGREGATORS,
) -> DailyMatrix:
    """Assemble the day-by-feature matrix from raw series.

    The date axis runs contiguously from the first to the last observed day
    across all series. Fast series contribute one column per aggregator, slow
    series one interpolated column, daily/binary series one raw column. The
    target series (raw daily) is the last column.
    """
    for agg in aggregators:
        if agg not in AGGREGATORS:
            raise ValidationError(f"unknown aggregator {agg!r}")
    by_feature = {}
    for s in series:
        if s.feature in by_feature:
            raise ValidationError(f"duplicate series for feature {s.feature!r}")
        by_feature[s.feature] = s
    if target not in by_feature:
        raise ValidationError(f"target series {target!r} not found")

    all_days = sorted({d for s in series for d in s.days()})
    if not all_days:
        raise EmptyInput("no samples in any series")
    first, last = all_days[0], all_days[-1]
    dates = [first + timedelta(days=i) for i in range((last - first).days + 1)]

    columns: list[tuple[FeatureMeta, dict[date, float]]] = []
    for name in sorted(by_feature):
        if name == target:
            continue
        s = by_feature[name]
        if s.kind == "fast":
            aggregated = aggregate_daily(s)
            for agg in aggregators:
                meta = FeatureMeta(feature_name(name, agg), name, agg, 0)
                columns.append((meta, aggregated[agg]))
        elif s.kind == "slow":
            meta = FeatureMeta(feature_name(name, RAW), name, RAW, 0)
            columns.append((meta, interpolate_slow(s, dates)))
        else:
            meta = FeatureMeta(feature_name(name, RAW), name, RAW, 0)
            columns.append((meta, daily_raw(s)))
    target_meta = FeatureMeta(feature_name(target, RAW), target, RAW, 0)
    columns.append((target_meta, daily_raw(by_feature[target])))

    values = np.full((len(dates), len(columns)), np.nan)
    row_of = {d: i for i, d in enumerate(dates)}
    for j, (_, col) in enumerate(columns):
        for d, v in col.items():
            values[row_of[d], j] = v
    mask = np.isfinite(values)
    return DailyMatrix(
        dates=dates,
        features=[meta for meta, _ in columns],
        values=values,
        mask=mask,
        target_name=target_meta.name,
    )


@dataclass
class DropLog:
    dropped_features: list[str]
    dropped_days: list[date]

    def lines(self) -> list[str]:
        out = [f"dropped feature {n}" for n in self.dropped_features]
        out += [f"dropped day {d.isoformat()}" for d in self.dropped_days]
        return out


def drop_sparse(
    matrix: DailyMatrix,
    day_threshold: float = 0.5,
    feature_threshold: float = 0.5,
) -> tuple[DailyMatrix, DropLog]:
    """Drop features missing too often, then days missing too many features.

    The target column is exempt: it is never dropped and does not count
    toward a day's missing fraction (days with missing target are simply
    excluded from training later).
    """
    for t in (day_threshold, feature_threshold):
        if not 0.0 < t <= 1.0:
            raise OutOfRange(f"thresholds must be in (0, 1], got {t}")
    tgt = matrix.target_index
    n_days = len(matrix.dates)
    keep_features = []
    dropped_features = []
    for j, f in enumerate(matrix.features):
        if j == tgt:
            keep_features.append(j)
            continue
        missing = 1.0 - matrix.mask[:, j].sum() / n_days
        if missing > feature_threshold:
            dropped_features.append(f.name)
        else:
            keep_features.append(j)
    if len(keep_features) <= 1:  # only the target left
        raise AllDropped("every feature exceeded the missingness threshold")
    trimmed = matrix.take_features(keep_features)

    tgt = trimmed.target_index
    feat_cols = [j for j in range(len(trimmed.features)) if j != tgt]
    keep_days = []
    dropped_days = []
    for i, d in enumerate(trimmed.dates):
        missing = 1.0 - trimmed.mask[i, feat_cols].sum() / len(feat_cols)
        if missing > day_threshold:
            dropped_days.append(d)
        else:
            keep_days.append(i)
    if not keep_days:
        raise AllDropped("every day exceeded the missingness threshold")
    return trimmed.take_rows(keep_days), DropLog(dropped_features, dropped_days)


def train_feature_means(matrix: DailyMatrix, train_rows) -> dict[str, float]:
    """Mean of each non-target feature over its observed training cells."""
    rows = np.asarray(list(train_rows), dtype=int)
    means: dict[str, float] = {}
    tgt = matrix.target_index
    for j, f in enumerate(matrix.features):
        if j == tgt:
            continue
        observed = matrix.mask[rows, j]
        if observed.any():
            means[f.name] = float(matrix.values[rows, j][observed].mean())
    return means


def impute_mean(
    matrix: DailyMatrix,
    train_rows,
    means: dict[str, float] | None = None,
) -> DailyMatrix:
    """Fill masked feature cells with the feature's training mean.

    The target column is never imputed. Features with no observed training
    cell (and so no defined mean) are left masked.
    """
    if means is None:
        means = train_feature_means(matrix, train_rows)
    values = matrix.values.copy()
    mask = matrix.mask.copy()
    tgt = matrix.target_index
    for j, f in enumerate(matrix.features):
        if j == tgt or f.name not in means:
            continue
        hole = ~mask[:, j]
        values[hole, j] = means[f.name]
        mask[hole, j] = True
    return DailyMatrix(
        dates=list(matrix.dates),
        features=list(matrix.features),
        values=values,
        mask=mask,
        target_name=matrix.target_name,
    )


def build_lagged_matrix(matrix: DailyMatrix, target_lags: int) -> DailyMatrix:
    """Append yesterday's copy of every feature plus deeper target lags.

    Every lag-0 column gains a lag-1 twin ("...Yesterday"); the target
    additionally gains lags 2..K. A lag cell is observed only when the source
    date k calendar days earlier exists in the matrix and is itself observed,
    so gaps in the date axis break lag links instead of spanning them. The
    first max(1, K) rows, which cannot carry full lags, are removed.
    """
    k_max = int(target_lags)
    if k_max < 1:
        raise OutOfRange("target_lags must be >= 1")
    n = len(matrix.dates)
    if n <= k_max:
        raise TooShort(f"need more than {k_max} rows, have {n}")

    row_of = {d: i for i, d in enumerate(matrix.dates)}

    def shifted(j: int, lag: int) -> tuple[np.ndarray, np.ndarray]:
        col = np.full(n, np.nan)
        got = np.zeros(n, dtype=bool)
        for i, d in enumerate(matrix.dates):
            src = row_of.get(d - timedelta(days=lag))
            if src is not None and matrix.mask[src, j]:
                col[i] = matrix.values[src, j]
                got[i] = True
        return col, got

    new_cols: list[tuple[FeatureMeta, np.ndarray, np.ndarray]] = []
    for j, f in enumerate(matrix.features):
        meta = FeatureMeta(feature_name(f.base, f.aggregator, 1), f.base, f.aggregator, 1)
        col, got = shifted(j, 1)
        new_cols.append((meta, col, got))
    tgt = matrix.target_index
    tf = matrix.features[tgt]
    for lag in range(2, k_max + 1):
        meta = FeatureMeta(feature_name(tf.base, tf.aggregator, lag), tf.base, tf.aggregator, lag)
        col, got = shifted(tgt, lag)
        new_cols.append((meta, col, got))

    values = np.column_stack([matrix.values] + [c for _, c, _ in new_cols])
    mask = np.column_stack([matrix.mask] + [g for _, _, g in new_cols])
    features = list(matrix.features) + [m for m, _, _ in new_cols]
    drop = max(1, k_max)
    return DailyMatrix(
        dates=list(matrix.dates[drop:]),
        features=features,
        values=values[drop:, :],
        mask=mask[drop:, :],
        target_name=matrix.target_name,
    )


@dataclass
class Standardizer:
    """Per-feature training mean and population std (denominator n)."""

    names: list[str]
    mean: np.ndarray
    std: np.ndarray
    dropped: list[str]

    def index_of(self, name: str) -> int:
        return self.names.index(name)

    def mean_of(self, name: str) -> float:
        return float(self.mean[self.index_of(name)])

    def std_of(self, name: str) -> float:
        return float(self.std[self.index_of(name)])

    def to_dict(self) -> dict:
        return {
            "names": list(self.names),
            "mean": [float(x) for x in self.mean],
            "std": [float(x) for x in self.std],
            "dropped": list(self.dropped),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(
            names=list(d["names"]),
            mean=np.asarray(d["mean"], dtype=float),
            std=np.asarray(d["std"], dtype=float),
            dropped=list(d["dropped"]),
        )


def fit_standardizer(matrix: DailyMatrix, train_rows) -> Standardizer:
    """Fit per-feature mean/std on observed training cells only.

    Constant training columns (zero variance, or no observed training cell)
    are recorded as dropped rather than raising; a constant target is fatal.
    """
    rows = np.asarray(list(train_rows), dtype=int)
    if rows.size == 0:
        raise ValidationError("fit_standardizer needs non-empty train rows")
    names, mean, std, dropped = [], [], [], []
    for j, f in enumerate(matrix.features):
        observed = matrix.mask[rows, j]
        cells = matrix.values[rows, j][observed]
        m = float(cells.mean()) if cells.size else 0.0
        s = float(cells.std()) if cells.size else 0.0  # population: ddof=0
        if cells.size == 0 or s == 0.0 or not math.isfinite(s):
            if f.name == matrix.target_name:
                raise ValidationError("target is constant on the training rows")
            dropped.append(f.name)
            continue
        names.append(f.name)
        mean.append(m)
        std.append(s)
    return Standardizer(
        names=names,
        mean=np.asarray(mean, dtype=float),
        std=np.asarray(std, dtype=float),
        dropped=dropped,
    )


def apply_standardizer(matrix: DailyMatrix, s: Standardizer) -> DailyMatrix:
    """Transform all rows with training statistics; dropped columns are removed."""
    indices = [matrix.index_of(name) for name in s.names]
    sub = matrix.take_features(indices)
    values = (sub.values - s.mean) / s.std
    values[~sub.mask] = np.nan
    return DailyMatrix(
        dates=sub.dates,
        features=sub.features,
        values=values,
        mask=sub.mask,
        target_name=sub.target_name,
    )


def to_csv(matrix: DailyMatrix, path: str | Path) -> None:
    """Write the canonical matrix CSV: ISO date column, one column per feature.

    Masked cells are empty. Floats use shortest round-trip formatting, so the
    file is byte-identical for identical inputs.
    """
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date"] + matrix.names)
        for i, d in enumerate(matrix.dates):
            row = [d.isoformat()]
            for j in range(len(matrix.features)):
                row.append(repr(float(matrix.values[i, j])) if matrix.mask[i, j] else "")
            writer.writerow(row)


def from_csv(path: str | Path, target_name: str) -> DailyMatrix:
    """Read a canonical matrix CSV back; empty cells become masked."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        names = header[1:]
        dates = []
        rows = []
        for record in reader:
            dates.append(date.fromisoformat(record[0]))
            rows.append([float(cell) if cell else math.nan for cell in record[1:]])
    values = np.asarray(rows, dtype=float)
    if values.size == 0:
        raise EmptyInput(f"{path}: empty matrix")
    return DailyMatrix(
        dates=dates,
        features=[parse_feature_name(n) for n in names],
        values=values,
        mask=np.isfinite(values),
        target_name=target_name,
    )
