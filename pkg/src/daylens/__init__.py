"""daylens: personal tracking exports to daily features, correlations,
predictions, and explanation charts."""

__version__ = "0.1.0"

from .ingest import RawSeries, SourceManifest, load_manifest, import_csv, quality_report
from .featurize import DailyMatrix, Standardizer, build_daily_matrix
from .stats import correlation_report, pacf, pca_explained
from .elasticnet import LinearModel, fit, cv_grid_search, time_series_split
from .mlp import Network, init_network, train_early_stopping
from .explain import ContributionBreakdown, contributions, render_chart
from .synth import SynthConfig, generate

__all__ = [
    "RawSeries",
    "SourceManifest",
    "load_manifest",
    "import_csv",
    "quality_report",
    "DailyMatrix",
    "Standardizer",
    "build_daily_matrix",
    "correlation_report",
    "pacf",
    "pca_explained",
    "LinearModel",
    "fit",
    "cv_grid_search",
    "time_series_split",
    "Network",
    "init_network",
    "train_early_stopping",
    "ContributionBreakdown",
    "contributions",
    "render_chart",
    "SynthConfig",
    "generate",
]
