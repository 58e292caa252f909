"""Synthetic tracking data with planted ground truth, plus brute-force oracles.

The generator emits the same raw CSV + manifest layout the ingest module
consumes, so the whole pipeline can be exercised end to end against a known
answer: a handful of features drive the target through fixed coefficients,
the target carries a lag-1 autoregressive term, and the noise level can be
solved so the irreducible part leaves a requested share of variance
explainable.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta, timezone
from pathlib import Path

import numpy as np
import yaml

from .errors import TooLarge, ValidationError
from .ingest import write_series_csv, RawSeries

FAST_PREFIX = "Fast"
SLOW_PREFIX = "Slow"
DAILY_PREFIX = "Daily"


@dataclass
class SynthConfig:
    days: int = 300
    n_fast: int = 5
    n_slow: int = 1
    n_daily: int = 3
    support: list[tuple[str, float]] = field(default_factory=list)
    noise_std: float | None = None
    target_r2: float | None = None  # solves noise_std when set
    ar_coef: float = 0.3
    missing_rate: float = 0.02
    target_missing_rate: float = 0.0
    saturation: dict[str, float] = field(default_factory=dict)  # feature -> upper bound
    samples_per_day: int = 24
    intraday_noise: float = 0.2
    slow_every_days: int = 7
    seed: int = 0
    target: str = "Mood"
    start: date = date(2021, 1, 1)


@dataclass
class GroundTruth:
    support: dict[str, float]
    ar_coef: float
    noise_std: float
    target_values: np.ndarray
    levels: dict[str, np.ndarray]


def feature_names_for(config: SynthConfig) -> dict[str, list[str]]:
    return {
        "fast": [f"{FAST_PREFIX}{i + 1:02d}" for i in range(config.n_fast)],
        "slow": [f"{SLOW_PREFIX}{i + 1:02d}" for i in range(config.n_slow)],
        "daily": [f"{DAILY_PREFIX}{i + 1:02d}" for i in range(config.n_daily)],
    }


def _level_walk(rng: np.random.Generator, days: int) -> np.ndarray:
    """Stationary AR(1) daily level with roughly unit variance."""
    level = np.empty(days)
    level[0] = rng.normal()
    shocks = rng.normal(size=days) * 0.6
    for d in range(1, days):
        level[d] = 0.8 * level[d - 1] + shocks[d]
    return level


def generate(config: SynthConfig, out_dir: str | Path) -> GroundTruth:
    """Write raw CSVs, a manifest, and ground_truth.json under out_dir.

    Deterministic per seed: identical configs produce byte-identical files.
    Returns the ground truth (true support, noise level, daily latent levels).
    """
    names = feature_names_for(config)
    all_names = names["fast"] + names["slow"] + names["daily"]
    for feature, coef in config.support:
        if feature not in all_names:
            raise ValidationError(f"support feature {feature!r} is not generated")
        if not math.isfinite(coef):
            raise ValidationError(f"support coefficient for {feature!r} must be finite")
    for rate in (config.missing_rate, config.target_missing_rate):
        if not 0.0 <= rate < 1.0:
            raise ValidationError(f"missingness rates must be in [0, 1), got {rate}")

    out_dir = Path(out_dir)
    raw_dir = out_dir / "raw"
    raw_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(config.seed)
    days = config.days
    dates = [config.start + timedelta(days=i) for i in range(days)]

    levels: dict[str, np.ndarray] = {}
    for name in names["fast"] + names["daily"]:
        levels[name] = _level_walk(rng, days)
    slow_marks: dict[str, list[tuple[int, float]]] = {}
    for name in names["slow"]:
        mark_days = list(range(0, days, config.slow_every_days))
        if mark_days[-1] != days - 1:
            mark_days.append(days - 1)
        walk = 70.0 + np.cumsum(rng.normal(size=len(mark_days)) * 0.3)
        slow_marks[name] = list(zip(mark_days, walk))
        daily = np.empty(days)
        for (d0, v0), (d1, v1) in zip(slow_marks[name], slow_marks[name][1:]):
            for d in range(d0, d1 + 1):
                daily[d] = v0 + (d - d0) / (d1 - d0) * (v1 - v0)
        levels[name] = daily

    # target: y = signal + ar * y[-1] + sigma * eps, split linearly in sigma
    support = dict(config.support)
    signal = np.zeros(days)
    for feature, coef in support.items():
        signal += coef * levels[feature]
    eps = rng.normal(size=days)
    y_sig = np.empty(days)
    y_eps = np.empty(days)
    y_sig[0], y_eps[0] = signal[0], eps[0]
    for d in range(1, days):
        y_sig[d] = signal[d] + config.ar_coef * y_sig[d - 1]
        y_eps[d] = eps[d] + config.ar_coef * y_eps[d - 1]
    sigma = _solve_noise_std(config, y_sig, y_eps)
    target_values = y_sig + sigma * y_eps

    # raw sample emission (all rng draws above are order-fixed, so files are
    # reproducible per seed)
    def ts(day: date, hour: float) -> datetime:
        whole = int(hour)
        minute = int(round((hour - whole) * 60))
        return datetime.combine(day, time(whole, minute), tzinfo=timezone.utc)

    manifest_sources = []
    for name in names["fast"]:
        hours = [24.0 * k / config.samples_per_day for k in range(config.samples_per_day)]
        keep = rng.random(days) >= config.missing_rate
        bound = config.saturation.get(name)
        samples = []
        for d in range(days):
            if not keep[d]:
                continue
            noise = rng.normal(size=len(hours)) * config.intraday_noise
            for h, nz in zip(hours, noise):
                v = levels[name][d] + nz
                if bound is not None:
                    v = min(v, bound)
                samples.append((ts(dates[d], h), float(v)))
        _write_raw(raw_dir, name, samples)
        manifest_sources.append(_source_entry(name, kind="fast", bound=bound))
    for name in names["slow"]:
        samples = [(ts(dates[d], 8.0), float(v)) for d, v in slow_marks[name]]
        _write_raw(raw_dir, name, samples)
        manifest_sources.append(_source_entry(name, kind="slow", bound=None))
    for name in names["daily"]:
        keep = rng.random(days) >= config.missing_rate
        samples = [
            (ts(dates[d], 20.0), float(levels[name][d])) for d in range(days) if keep[d]
        ]
        _write_raw(raw_dir, name, samples)
        manifest_sources.append(_source_entry(name, kind="daily", bound=None))
    keep = rng.random(days) >= config.target_missing_rate
    samples = [
        (ts(dates[d], 23.0), float(target_values[d])) for d in range(days) if keep[d]
    ]
    _write_raw(raw_dir, config.target, samples)
    manifest_sources.append(_source_entry(config.target, kind="daily", bound=None))

    manifest = {"sources": manifest_sources}
    (out_dir / "manifest.yaml").write_text(
        yaml.safe_dump(manifest, sort_keys=False), encoding="utf-8"
    )
    truth = GroundTruth(
        support=support,
        ar_coef=config.ar_coef,
        noise_std=sigma,
        target_values=target_values,
        levels=levels,
    )
    (out_dir / "ground_truth.json").write_text(
        json.dumps(
            {
                "support": {k: float(v) for k, v in sorted(support.items())},
                "ar_coef": float(config.ar_coef),
                "noise_std": float(sigma),
                "target": config.target,
                "seed": config.seed,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    return truth


def _solve_noise_std(config: SynthConfig, y_sig: np.ndarray, y_eps: np.ndarray) -> float:
    if config.noise_std is not None:
        return float(config.noise_std)
    if config.target_r2 is None:
        return 1.0
    r2 = float(config.target_r2)
    if not 0.0 < r2 < 1.0:
        raise ValidationError(f"target_r2 must be in (0, 1), got {r2}")

    def unexplained(sigma: float) -> float:
        y = y_sig + sigma * y_eps
        var = float(y.var())
        return sigma * sigma / var if var > 0 else 1.0

    lo, hi = 1e-9, 10.0 * (float(y_sig.std()) + 1.0)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if unexplained(mid) < 1.0 - r2:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _write_raw(raw_dir: Path, feature: str, samples: list[tuple[datetime, float]]) -> None:
    series = RawSeries(
        feature=feature, unit="", kind="daily", samples=tuple(samples), sensor_range=None
    )
    write_series_csv(series, raw_dir)


def _source_entry(feature: str, kind: str, bound: float | None) -> dict:
    value: dict = {"column": "value", "feature": feature, "unit": "", "kind": kind}
    if bound is not None:
        # effectively an upper bound only; the generator never goes that low
        value["sensor_range"] = [-1e9, float(bound)]
    return {
        "id": feature.lower(),
        "file": f"raw/{feature}.csv",
        "timestamp_column": "timestamp",
        "timestamp_format": "iso8601",
        "values": [value],
    }


def oracle_elastic_net(X, y, sample_weight, alpha: float, l1_ratio: float) -> np.ndarray:
    """Reference elastic-net minimizer: dense grid then coordinate bisection.

    Deliberately avoids the closed-form soft-threshold update so it is an
    independent check on the production solver. Capped at 3 features and 200
    rows to keep the brute force tractable.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if p > 3 or n > 200:
        raise TooLarge(f"oracle caps at 3 features x 200 rows, got {p} x {n}")
    sw = np.ones(n) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    total = float(sw.sum())

    def obj(w: np.ndarray) -> float:
        r = y - X @ w
        return (
            0.5 * float(sw @ (r * r)) / total
            + alpha * l1_ratio * float(np.abs(w).sum())
            + 0.5 * alpha * (1.0 - l1_ratio) * float(w @ w)
        )

    # bracket the search box around the unpenalized least-squares solution
    root_w = np.sqrt(sw)
    w_ls, *_ = np.linalg.lstsq(X * root_w[:, None], y * root_w, rcond=None)
    radius = max(2.0 * float(np.max(np.abs(w_ls))), 1.0)
    grid = np.linspace(-radius, radius, 15)
    best_w = np.zeros(p)
    best_obj = obj(best_w)
    for combo in itertools.product(grid, repeat=p):
        w = np.asarray(combo)
        v = obj(w)
        if v < best_obj:
            best_obj, best_w = v, w.copy()

    # coordinate bisection: per coordinate, sample a local grid and recenter
    # on its argmin, halving the span when the argmin is interior and
    # doubling it when the minimum escapes the bracket. The objective is
    # convex and its nonsmooth part separable, so coordinatewise minimality
    # implies global minimality.
    w = best_w
    spans = np.full(p, float(grid[1] - grid[0]))
    before = obj(w)
    for _ in range(400):
        for j in range(p):
            ts = np.linspace(w[j] - spans[j], w[j] + spans[j], 17)
            old = w[j]
            vals = []
            for t in ts:
                w[j] = t
                vals.append(obj(w))
            w[j] = old
            k = int(np.argmin(vals))
            if vals[k] < obj(w):
                w[j] = float(ts[k])
            if k == 0 or k == 16:
                spans[j] *= 2.0
            else:
                spans[j] = max(spans[j] * 0.5, 1e-12)
        now = obj(w)
        if before - now < 1e-15 and float(spans.max()) < 1e-10:
            break
        before = now
    return w


def oracle_bh(pvals) -> list[float]:
    """Literal Benjamini-Hochberg adjustment: min over j >= i of m*p_(j)/j."""
    p = [float(v) for v in pvals]
    if len(p) > 10:
        raise TooLarge("oracle_bh caps at 10 p-values")
    m = len(p)
    order = sorted(range(m), key=lambda i: p[i])
    adjusted = [0.0] * m
    for rank, idx in enumerate(order):
        candidates = []
        for later in range(rank, m):
            j = later + 1
            candidates.append(m * p[order[later]] / j)
        adjusted[idx] = min(min(candidates), 1.0)
    return adjusted
