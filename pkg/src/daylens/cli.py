"""Command-line front end: each subcommand reads the previous stage's
artifacts from the data directory and writes its own.

    synth      generate raw CSVs + manifest with planted ground truth
    import     parse raw exports into canonical per-feature series + quality report
    featurize  build the daily matrix: aggregate, drop sparse, pick lags, lag
    correlate  correlation report with BH correction + PCA diagnostic
    train      elastic net via time-series CV (optionally the neural net too)
    predict    prediction record with interval and contributions for a date
    explain    waterfall + per-feature bar and triangle charts
    plot       time-series and scatter exploration charts
    report     regression-weight and correlation tables as CSV

Everything is deterministic given the config and --seed; re-running a stage
with unchanged inputs rewrites byte-identical artifacts.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

import numpy as np
import yaml

from . import elasticnet, explain, featurize, ingest, mlp, stats, synth
from .errors import ConfigError, DaylensError, MissingStage, TooShort

DATA_DIR_ENV = "DAYLENS_DATA_DIR"


def default_alpha_grid() -> list[float]:
    # 30 log-spaced penalty strengths plus 0.12, a known-good default
    grid = set(float(a) for a in np.logspace(-3, 1, 30))
    grid.add(0.12)
    return sorted(grid)


DEFAULT_RHO_GRID = [0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0]


@dataclass
class RunConfig:
    data_dir: Path = Path("data")
    manifest: str = "manifest.yaml"
    target: str = "Mood"
    aggregators: tuple[str, ...] = featurize.AGGREGATORS
    day_threshold: float = 0.5
    feature_threshold: float = 0.5
    significance: float = 0.05
    max_lag: int = 10
    train_fraction: float = 0.8
    folds: int = 5
    alpha_grid: list[float] = field(default_factory=default_alpha_grid)
    rho_grid: list[float] = field(default_factory=lambda: list(DEFAULT_RHO_GRID))
    use_sample_weights: bool = True
    seed: int = 0
    model: str = "linear"  # linear | mlp | both
    target_scale: tuple[float, float] | None = None
    charts_dir: str = "charts"
    chart_width: int = 480
    chart_height: int = 320
    mlp_max_epochs: int = 2000
    mlp_patience: int = 500
    mlp_learning_rate: float = 1e-4
    mlp_weight_decay: float = 1.0
    synth: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path: str | Path | None, overrides: dict | None = None) -> "RunConfig":
        raw: dict = {}
        if path is not None:
            p = Path(path)
            if not p.exists():
                raise ConfigError(f"config file not found: {p}")
            try:
                raw = yaml.safe_load(p.read_text(encoding="utf-8")) or {}
            except yaml.YAMLError as exc:
                raise ConfigError(f"{p}: {exc}") from exc
            if not isinstance(raw, dict):
                raise ConfigError(f"{p}: config must be a mapping")
        cfg = cls()
        merged = dict(raw)
        merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
        for key, value in merged.items():
            if not hasattr(cfg, key):
                raise ConfigError(f"unknown config key {key!r}")
            setattr(cfg, key, value)
        cfg.data_dir = Path(os.environ.get(DATA_DIR_ENV, cfg.data_dir))
        if overrides and overrides.get("data_dir") is not None:
            cfg.data_dir = Path(overrides["data_dir"])
        cfg.aggregators = tuple(cfg.aggregators)
        if cfg.target_scale is not None:
            cfg.target_scale = (float(cfg.target_scale[0]), float(cfg.target_scale[1]))
        if cfg.model not in ("linear", "mlp", "both"):
            raise ConfigError(f"model must be linear|mlp|both, got {cfg.model!r}")
        if not 0.0 < cfg.significance < 1.0:
            raise ConfigError("significance must be in (0, 1)")
        return cfg

    # artifact paths
    def path(self, name: str) -> Path:
        return self.data_dir / name

    @property
    def charts_path(self) -> Path:
        return self.data_dir / self.charts_dir


def _require(path: Path, producer: str) -> Path:
    if not path.exists():
        raise MissingStage(f"{path.name} not found; run `{producer}` first")
    return path


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# stages


def stage_synth(cfg: RunConfig) -> dict:
    options = dict(cfg.synth)
    options.setdefault("seed", cfg.seed)
    options.setdefault("target", cfg.target)
    if "support" in options:
        options["support"] = [(str(f), float(c)) for f, c in options["support"]]
    if "start" in options:
        options["start"] = date.fromisoformat(str(options["start"]))
    scfg = synth.SynthConfig(**options)
    truth = synth.generate(scfg, cfg.data_dir)
    return {"noise_std": truth.noise_std, "support": truth.support}


def stage_import(cfg: RunConfig) -> dict:
    manifest_path = _require(cfg.path(cfg.manifest), "synth (or provide a manifest)")
    manifest = ingest.load_manifest(manifest_path)
    series_dir = cfg.path("series")
    all_series: list[ingest.RawSeries] = []
    totals = {"rows": 0, "skipped_rows": 0, "skipped_cells": 0, "clipped_cells": 0}
    for source in manifest.sources:
        matches = sorted(cfg.data_dir.glob(source.file))
        if not matches:
            raise MissingStage(f"no files match {source.file!r} under {cfg.data_dir}")
        merged: dict[str, ingest.RawSeries] = {}
        for file in matches:
            result = ingest.import_csv(file, source)
            totals["rows"] += result.rows_total
            totals["skipped_rows"] += result.rows_skipped
            totals["skipped_cells"] += result.cells_skipped
            totals["clipped_cells"] += result.cells_clipped
            for s in result.series:
                merged[s.feature] = _merge_series(merged.get(s.feature), s)
        all_series.extend(merged.values())
    for s in all_series:
        ingest.write_series_csv(s, series_dir)

    start, end = ingest.covered_range(all_series)
    report = ingest.quality_report(all_series, start, end)
    with cfg.path("quality.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([
            "feature", "unit", "kind", "samples", "days_covered",
            "missing_day_fraction", "saturation_fraction", "outlier_note",
        ])
        for e in sorted(report.entries, key=lambda e: e.feature):
            writer.writerow([
                e.feature, e.unit, e.kind, e.n_samples, e.days_covered,
                repr(e.missing_day_fraction), repr(e.saturation_fraction), e.outlier_note,
            ])
    return {"series": len(all_series), **totals}


def _merge_series(base: ingest.RawSeries | None, extra: ingest.RawSeries) -> ingest.RawSeries:
    if base is None:
        return extra
    combined: dict = dict(base.samples)
    combined.update(dict(extra.samples))  # later files win at equal timestamps
    return ingest.RawSeries(
        feature=base.feature,
        unit=base.unit,
        kind=base.kind,
        samples=tuple(sorted(combined.items())),
        sensor_range=base.sensor_range,
    )


def _load_series(cfg: RunConfig) -> list[ingest.RawSeries]:
    manifest = ingest.load_manifest(_require(cfg.path(cfg.manifest), "synth"))
    series_dir = _require(cfg.path("series"), "import")
    out = []
    for source in manifest.sources:
        for v in source.values:
            path = series_dir / f"{v.feature}.csv"
            if not path.exists():
                raise MissingStage(f"{path.name} not found; run `import` first")
            out.append(
                ingest.read_series_csv(path, v.feature, v.unit, v.kind, v.sensor_range)
            )
    return out


def stage_featurize(cfg: RunConfig) -> dict:
    series = _load_series(cfg)
    matrix = featurize.build_daily_matrix(series, cfg.target, cfg.aggregators)
    matrix, drop_log = featurize.drop_sparse(
        matrix, cfg.day_threshold, cfg.feature_threshold
    )

    target_mask = matrix.column_mask(matrix.target_name)
    target_obs = matrix.column(matrix.target_name)[target_mask]
    max_lag = min(cfg.max_lag, len(target_obs) - 2)
    try:
        pacf_result = stats.pacf(target_obs, max_lag)
        lags = pacf_result.selected_k
    except (TooShort, DaylensError):
        pacf_result = None
        lags = 1
    matrix = featurize.build_lagged_matrix(matrix, lags)

    featurize.to_csv(matrix, cfg.path("matrix.csv"))
    lines = drop_log.lines() + [f"selected target lags: {lags}"]
    cfg.path("drop_log.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    with cfg.path("pacf.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lag", "pacf", "band"])
        if pacf_result is not None:
            for i, phi in enumerate(pacf_result.coefficients, start=1):
                writer.writerow([i, repr(phi), repr(pacf_result.band)])
    return {
        "days": len(matrix.dates),
        "features": len(matrix.features) - 1,
        "target_lags": lags,
    }


def _load_matrix(cfg: RunConfig) -> featurize.DailyMatrix:
    return featurize.from_csv(_require(cfg.path("matrix.csv"), "featurize"), cfg.target)


def stage_correlate(cfg: RunConfig) -> dict:
    matrix = _load_matrix(cfg)
    report = stats.correlation_report(matrix, significance=cfg.significance)
    with cfg.path("correlations.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature", "corr_coeff", "p_value", "p_raw", "n", "significant"])
        for row in report.rows:
            writer.writerow([
                row.feature, repr(row.r), repr(row.p_adj), repr(row.p_raw),
                row.n, int(row.significant),
            ])

    # PCA multicollinearity diagnostic on the standardized feature block
    all_rows = range(len(matrix.dates))
    imputed = featurize.impute_mean(matrix, all_rows)
    std = featurize.fit_standardizer(imputed, all_rows)
    z = featurize.apply_standardizer(imputed, std)
    cols = [j for j, f in enumerate(z.features) if f.name != z.target_name]
    ratios = stats.pca_explained(z.values[:, cols])
    with cfg.path("pca.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["component", "explained_variance_ratio"])
        for i, ratio in enumerate(ratios, start=1):
            writer.writerow([i, repr(float(ratio))])
    n_sig = sum(1 for row in report.rows if row.significant)
    return {"tested": len(report.rows), "significant": n_sig,
            "components_over_1pct": int((ratios > 0.01).sum())}


@dataclass
class PreparedData:
    matrix: featurize.DailyMatrix
    split: elasticnet.SplitSpec
    standardizer: featurize.Standardizer
    impute_means: dict[str, float]
    feature_names: list[str]
    X: np.ndarray  # standardized, all rows
    y: np.ndarray  # standardized target, NaN where unobserved
    train_rows: np.ndarray  # train rows with observed target
    test_rows: np.ndarray  # test rows with observed target


def prepare_training(cfg: RunConfig, matrix: featurize.DailyMatrix) -> PreparedData:
    split = elasticnet.time_series_split(len(matrix.dates), cfg.train_fraction)
    means = featurize.train_feature_means(matrix, split.train)
    imputed = featurize.impute_mean(matrix, split.train, means)
    standardizer = featurize.fit_standardizer(imputed, split.train)
    z = featurize.apply_standardizer(imputed, standardizer)

    tgt = z.target_index
    feature_idx = [j for j in range(len(z.features)) if j != tgt]
    X = z.values[:, feature_idx]
    y = z.values[:, tgt]
    target_seen = z.mask[:, tgt]
    train_rows = np.asarray([i for i in split.train if target_seen[i]], dtype=int)
    test_rows = np.asarray([i for i in split.test if target_seen[i]], dtype=int)
    if train_rows.size == 0 or test_rows.size == 0:
        raise TooShort("no rows with an observed target on one side of the split")
    return PreparedData(
        matrix=matrix,
        split=split,
        standardizer=standardizer,
        impute_means=means,
        feature_names=[z.features[j].name for j in feature_idx],
        X=X,
        y=y,
        train_rows=train_rows,
        test_rows=test_rows,
    )


def stage_train(cfg: RunConfig) -> dict:
    matrix = _load_matrix(cfg)
    prep = prepare_training(cfg, matrix)
    weight_fn = elasticnet.sample_weights if cfg.use_sample_weights else None
    metrics: dict = {}

    cv = elasticnet.cv_grid_search(
        prep.X[prep.train_rows],
        prep.y[prep.train_rows],
        cfg.alpha_grid,
        cfg.rho_grid,
        folds=cfg.folds,
        weight_fn=weight_fn,
        feature_names=prep.feature_names,
    )
    model = cv.model
    model.standardizer = prep.standardizer
    model.target_name = matrix.target_name
    mse, ev = elasticnet.evaluate(model, prep.X[prep.test_rows], prep.y[prep.test_rows])
    _write_json(cfg.path("model_linear.json"), {
        "model": model.to_dict(),
        "impute_means": {k: float(v) for k, v in sorted(prep.impute_means.items())},
        "train_fraction": cfg.train_fraction,
        "n_train_rows": int(prep.train_rows.size),
        "n_test_rows": int(prep.test_rows.size),
    })
    with cfg.path("cv_table.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["alpha", "l1_ratio", "mean_val_mse"])
        for cell in cv.table:
            writer.writerow([repr(cell.alpha), repr(cell.l1_ratio), repr(cell.mean_val_mse)])
    metrics["linear"] = {
        "alpha": cv.alpha,
        "l1_ratio": cv.l1_ratio,
        "mse_standardized": mse,
        "explained_variance": ev,
        "n_nonzero": len(model.nonzero()),
        "residual_std": cv.residual_std,
    }

    if cfg.model in ("mlp", "both"):
        result = mlp.train_early_stopping(
            prep.X[prep.train_rows],
            prep.y[prep.train_rows],
            folds=cfg.folds,
            max_epochs=cfg.mlp_max_epochs,
            seed=cfg.seed,
            learning_rate=cfg.mlp_learning_rate,
            weight_decay=cfg.mlp_weight_decay,
            patience=cfg.mlp_patience,
        )
        preds = mlp.forward(result.network, prep.X[prep.test_rows])
        res = preds - prep.y[prep.test_rows]
        mlp_mse = float(res @ res) / len(res)
        _write_json(cfg.path("model_mlp.json"), {
            "network": result.network.to_dict(),
            "chosen_epochs": result.chosen_epochs,
            "feature_names": prep.feature_names,
        })
        with cfg.path("mlp_curve.csv").open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "train_mse", "val_mse"])
            for epoch, train_mse, val_mse in result.curve:
                writer.writerow([epoch, repr(train_mse), repr(val_mse)])
        metrics["mlp"] = {
            "chosen_epochs": result.chosen_epochs,
            "mse_standardized": mlp_mse,
            "explained_variance": 1.0 - mlp_mse,
        }

    _write_json(cfg.path("metrics.json"), metrics)
    return metrics


def _load_model(cfg: RunConfig) -> tuple[elasticnet.LinearModel, dict[str, float]]:
    path = _require(cfg.path("model_linear.json"), "train")
    payload = json.loads(path.read_text(encoding="utf-8"))
    model = elasticnet.LinearModel.from_dict(payload["model"])
    return model, payload["impute_means"]


def _standardized_row(
    matrix: featurize.DailyMatrix,
    model: elasticnet.LinearModel,
    means: dict[str, float],
    row: int,
) -> np.ndarray:
    s = model.standardizer
    out = np.empty(len(model.feature_names))
    for k, name in enumerate(model.feature_names):
        j = matrix.index_of(name)
        if matrix.mask[row, j]:
            value = float(matrix.values[row, j])
        else:
            value = float(means[name])
        out[k] = (value - s.mean_of(name)) / s.std_of(name)
    return out


def _resolve_row(matrix: featurize.DailyMatrix, date_str: str | None) -> int:
    if date_str is None:
        return len(matrix.dates) - 1
    return matrix.row_of(date.fromisoformat(date_str))


def stage_predict(cfg: RunConfig, date_str: str | None = None) -> dict:
    matrix = _load_matrix(cfg)
    model, means = _load_model(cfg)
    row = _resolve_row(matrix, date_str)
    x = _standardized_row(matrix, model, means, row)
    breakdown = explain.contributions(model, x, clip=cfg.target_scale)
    record = {
        "date": matrix.dates[row].isoformat(),
        "y_std": breakdown.y_std,
        "y_original": breakdown.y_original,
        "half_width_std": breakdown.half_width_std,
        "half_width_original": breakdown.half_width_original,
        "target_mean": breakdown.target_mean,
        "target_std": breakdown.target_std,
        "contributions": [
            {
                "feature": r.feature,
                "today_std": r.today_std,
                "weight": r.weight,
                "contribution": r.contribution,
            }
            for r in breakdown.rows
        ],
    }
    _write_json(cfg.path("prediction.json"), record)
    return record


def stage_explain(cfg: RunConfig, date_str: str | None = None, feature: str | None = None) -> dict:
    matrix = _load_matrix(cfg)
    model, means = _load_model(cfg)
    row = _resolve_row(matrix, date_str)
    x = _standardized_row(matrix, model, means, row)
    breakdown = explain.contributions(model, x, clip=cfg.target_scale)

    charts = cfg.charts_path
    charts.mkdir(parents=True, exist_ok=True)
    scale = cfg.target_scale
    if scale is None:
        half = 3.0 * (breakdown.target_std or 1.0)
        scale = (breakdown.target_mean - half, breakdown.target_mean + half)
    written = {}
    spec = explain.waterfall_spec(breakdown, scale=scale, width=cfg.chart_width)
    written["waterfall"] = _write_chart(charts / "waterfall.svg", spec)

    if breakdown.rows:
        chosen = feature or breakdown.rows[0].feature
        match = [r for r in breakdown.rows if r.feature == chosen]
        if not match:
            raise ConfigError(f"feature {chosen!r} has zero weight or is unknown")
        r = match[0]
        written["bar"] = _write_chart(
            charts / "bar.svg",
            explain.bar_chart_spec(r, width=cfg.chart_width, height=200),
        )

        s = model.standardizer
        tj = matrix.target_index
        fj = matrix.index_of(r.feature)
        shared = matrix.mask[:, fj] & matrix.mask[:, tj]
        points = list(zip(matrix.values[shared, fj], matrix.values[shared, tj]))
        x_std, y_std_dev = s.std_of(r.feature), s.std_of(matrix.target_name)
        raw_cell = matrix.values[row, fj] if matrix.mask[row, fj] else means[r.feature]
        written["triangle"] = _write_chart(
            charts / "triangle.svg",
            explain.triangle_spec(
                feature=r.feature,
                points=points,
                x_mean=s.mean_of(r.feature),
                y_mean=s.mean_of(matrix.target_name),
                x_today=float(raw_cell),
                slope=r.weight * y_std_dev / x_std,
                width=cfg.chart_width,
            ),
        )
    return written


def stage_plot(
    cfg: RunConfig,
    feature: str | None = None,
    x_name: str | None = None,
    y_name: str | None = None,
) -> dict:
    matrix = _load_matrix(cfg)
    charts = cfg.charts_path
    charts.mkdir(parents=True, exist_ok=True)
    written = {}

    shown = feature or matrix.target_name
    j = matrix.index_of(shown)
    values = [
        float(matrix.values[i, j]) if matrix.mask[i, j] else None
        for i in range(len(matrix.dates))
    ]
    spec = explain.timeseries_spec(
        shown, [d.isoformat() for d in matrix.dates], values,
        width=max(cfg.chart_width, 560),
    )
    written["timeseries"] = _write_chart(charts / "timeseries.svg", spec)

    if x_name is None:
        report = stats.correlation_report(matrix, include_matrix=False,
                                          significance=cfg.significance)
        finite = [r for r in report.rows if math.isfinite(r.r)]
        if finite:
            x_name = max(finite, key=lambda r: abs(r.r)).feature
    if x_name is not None:
        y_col = y_name or matrix.target_name
        xj, yj = matrix.index_of(x_name), matrix.index_of(y_col)
        shared = matrix.mask[:, xj] & matrix.mask[:, yj]
        xs = matrix.values[shared, xj]
        ys = matrix.values[shared, yj]
        r = stats.pearson_r(xs, ys)
        slope = r * float(ys.std()) / float(xs.std())
        intercept = float(ys.mean()) - slope * float(xs.mean())
        written["scatter"] = _write_chart(
            charts / "scatter.svg",
            explain.scatter_spec(x_name, y_col, xs, ys, r, slope, intercept,
                                 width=cfg.chart_width),
        )
    return written


def _write_chart(path: Path, spec: explain.ChartSpec) -> str:
    path.write_text(explain.render_chart(spec), encoding="utf-8")
    return str(path)


def stage_report(cfg: RunConfig) -> dict:
    model, _ = _load_model(cfg)
    correlations = _require(cfg.path("correlations.csv"), "correlate")

    weights_path = cfg.path("report_weights.csv")
    with weights_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature", "regression weight"])
        for name, w in model.nonzero():
            writer.writerow([name, f"{w:.3f}"])

    by_name = dict(zip(model.feature_names, model.weights))
    rows = []
    with correlations.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            p_adj = float(rec["p_value"]) if rec["p_value"] != "nan" else math.nan
            rows.append((p_adj, rec["feature"], float(rec["corr_coeff"])
                         if rec["corr_coeff"] != "nan" else math.nan))
    rows = [r for r in rows if math.isfinite(r[0])]
    rows.sort(key=lambda r: (r[0], r[1]))
    correlations_path = cfg.path("report_correlations.csv")
    with correlations_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature", "corr. coeff.", "p-value", "reg. weight"])
        for p_adj, name, r in rows:
            weight = by_name.get(name)
            writer.writerow([
                name, f"{r:.3f}", f"{p_adj:.2E}",
                "" if weight is None else f"{float(weight):.3f}",
            ])
    return {"weights": str(weights_path), "correlations": str(correlations_path)}


# ---------------------------------------------------------------------------
# entry point

COMMANDS = (
    "synth", "import", "featurize", "correlate", "train",
    "predict", "explain", "plot", "report",
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="daylens",
        description="Daily tracking data to correlations, predictions, and charts.",
    )
    parser.add_argument("--config", help="YAML run configuration")
    parser.add_argument("--seed", type=int, help="seed for all stochastic stages")
    parser.add_argument("--out", help="data directory for all artifacts")
    parser.add_argument("--target", help="target feature name")
    parser.add_argument("--model", choices=("linear", "mlp", "both"))
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        if name in ("predict", "explain"):
            cmd.add_argument("--date", help="ISO date of the row to explain")
        if name in ("explain", "plot"):
            cmd.add_argument("--feature", help="feature to chart")
        if name == "plot":
            cmd.add_argument("--x", dest="x_name", help="x feature for the scatter")
            cmd.add_argument("--y", dest="y_name", help="y feature for the scatter")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {
        "seed": args.seed,
        "data_dir": args.out,
        "target": args.target,
        "model": args.model,
    }
    try:
        cfg = RunConfig.load(args.config, overrides)
        cfg.data_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "synth":
            summary = stage_synth(cfg)
        elif args.command == "import":
            summary = stage_import(cfg)
        elif args.command == "featurize":
            summary = stage_featurize(cfg)
        elif args.command == "correlate":
            summary = stage_correlate(cfg)
        elif args.command == "train":
            summary = stage_train(cfg)
        elif args.command == "predict":
            summary = stage_predict(cfg, args.date)
        elif args.command == "explain":
            summary = stage_explain(cfg, args.date, args.feature)
        elif args.command == "plot":
            summary = stage_plot(cfg, args.feature, args.x_name, args.y_name)
        else:
            summary = stage_report(cfg)
    except DaylensError as exc:
        line = json.dumps({"error": type(exc).__name__, "message": str(exc)})
        print(line, file=sys.stderr)
        return 3 if isinstance(exc, MissingStage) else 2 if isinstance(exc, ConfigError) else 1
    print(json.dumps({"command": args.command, "summary": _jsonable(summary)}))
    return 0


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        return float(value)
    return value


if __name__ == "__main__":
    sys.exit(main())
