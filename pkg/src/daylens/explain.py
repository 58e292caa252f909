"""Decompose linear predictions into per-feature contributions and render
explanation charts as deterministic SVG.

A prediction in standardized space is w . x, so each selected feature owns a
signed contribution w_j * x_j and the rows sum to the prediction exactly.
Five chart kinds ship: a waterfall of all contributions with the interval
marker, a three-bar breakdown of one feature, a regression triangle on the
raw scatter, a time series with trailing moving average, and a scatter with
regression line and correlation bar. Rendering is pure string building with
fixed-precision numbers, so identical specs yield byte-identical files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from .elasticnet import LinearModel, predict_interval
from .errors import InvalidSpec, ModelNotFitted, OutOfRange

GREEN = "#2E7D32"
RED = "#C62828"
DEEP_TEAL = "#00695C"
LIGHT_TEAL = "#4DB6AC"
INK = "#212121"
GRID = "#BDBDBD"


@dataclass
class ContributionRow:
    feature: str
    today_std: float
    weight: float
    contribution: float


@dataclass
class ContributionBreakdown:
    """Per-feature signed contributions whose sum is the prediction."""

    rows: list[ContributionRow]
    total: float
    y_std: float
    target_mean: float | None = None
    target_std: float | None = None
    y_original: float | None = None
    half_width_std: float | None = None
    half_width_original: float | None = None


def contributions(
    model: LinearModel, x_row, clip: tuple[float, float] | None = None
) -> ContributionBreakdown:
    """Break a prediction into one row per nonzero-weight feature.

    Rows are ordered by |contribution| descending. Interval and original
    scale fields are filled when the model carries a residual scale and a
    standardizer; otherwise they stay None.
    """
    if model.weights is None or len(model.weights) != len(model.feature_names):
        raise ModelNotFitted("model has no fitted weights")
    x = np.asarray(x_row, dtype=float)
    if x.shape != (len(model.weights),):
        raise ModelNotFitted(f"x_row has shape {x.shape}, expected ({len(model.weights)},)")
    rows = [
        ContributionRow(
            feature=name,
            today_std=float(xj),
            weight=float(wj),
            contribution=float(wj) * float(xj),
        )
        for name, wj, xj in zip(model.feature_names, model.weights, x)
        if wj != 0.0
    ]
    rows.sort(key=lambda r: (-abs(r.contribution), r.feature))
    total = math.fsum(r.contribution for r in rows)
    breakdown = ContributionBreakdown(rows=rows, total=total, y_std=total)
    if model.residual_std is not None and model.standardizer is not None:
        interval = predict_interval(model, x, clip=clip)
        breakdown.y_original = interval.y_original
        breakdown.half_width_std = interval.half_width_std
        breakdown.half_width_original = interval.half_width_original
        breakdown.target_mean = model.standardizer.mean_of(model.target_name)
        breakdown.target_std = model.standardizer.std_of(model.target_name)
    return breakdown


def moving_average(series, window: int = 7) -> np.ndarray:
    """Trailing mean over the last `window` observed values.

    The first window-1 entries average their shorter prefix; NaN entries are
    skipped, and a window with no observed value yields NaN.
    """
    if window < 1:
        raise OutOfRange("window must be >= 1")
    x = np.asarray(series, dtype=float)
    out = np.full(x.shape, np.nan)
    for i in range(x.size):
        chunk = x[max(0, i - window + 1): i + 1]
        good = chunk[np.isfinite(chunk)]
        if good.size:
            out[i] = good.mean()
    return out


@dataclass
class ChartSpec:
    kind: str  # waterfall | bar | triangle | timeseries | scatter
    data: dict
    width: int = 480
    height: int = 320


def waterfall_spec(
    breakdown: ContributionBreakdown, scale: tuple[float, float] = (1.0, 9.0),
    width: int = 480, height: int | None = None,
) -> ChartSpec:
    if breakdown.y_original is None:
        raise InvalidSpec("waterfall needs a breakdown with interval fields")
    h = height if height is not None else 120 + 26 * len(breakdown.rows)
    return ChartSpec(
        kind="waterfall",
        data={
            "rows": [(r.feature, r.contribution) for r in breakdown.rows],
            "y_original": breakdown.y_original,
            "half_width_original": breakdown.half_width_original,
            "scale": (float(scale[0]), float(scale[1])),
        },
        width=width,
        height=h,
    )


def bar_chart_spec(row: ContributionRow, width: int = 480, height: int = 200) -> ChartSpec:
    return ChartSpec(
        kind="bar",
        data={
            "feature": row.feature,
            "weight": row.weight,
            "difference": row.today_std,
            "contribution": row.contribution,
        },
        width=width,
        height=height,
    )


def triangle_spec(
    feature: str,
    points: list[tuple[float, float]],
    x_mean: float,
    y_mean: float,
    x_today: float,
    slope: float,
    width: int = 480,
    height: int = 360,
) -> ChartSpec:
    """Regression triangle over the raw scatter of (feature, target).

    `slope` is the regularized weight rescaled to original axes; the vertical
    leg (x_today, y_mean) -> (x_today, y_mean + slope * (x_today - x_mean))
    encodes the contribution in original target units.
    """
    return ChartSpec(
        kind="triangle",
        data={
            "feature": feature,
            "points": [(float(a), float(b)) for a, b in points],
            "x_mean": float(x_mean),
            "y_mean": float(y_mean),
            "x_today": float(x_today),
            "slope": float(slope),
        },
        width=width,
        height=height,
    )


def timeseries_spec(
    label: str, dates: list[str], values, window: int = 7,
    width: int = 560, height: int = 280,
) -> ChartSpec:
    vals = [None if v is None or not math.isfinite(v) else float(v) for v in values]
    return ChartSpec(
        kind="timeseries",
        data={"label": label, "dates": list(dates), "values": vals, "window": int(window)},
        width=width,
        height=height,
    )


def scatter_spec(
    x_label: str, y_label: str, x, y, r: float, slope: float, intercept: float,
    width: int = 480, height: int = 360,
) -> ChartSpec:
    return ChartSpec(
        kind="scatter",
        data={
            "x_label": x_label,
            "y_label": y_label,
            "x": [float(v) for v in x],
            "y": [float(v) for v in y],
            "r": float(r),
            "slope": float(slope),
            "intercept": float(intercept),
        },
        width=width,
        height=height,
    )


def render_chart(spec: ChartSpec) -> str:
    """Render a spec to an SVG 1.1 document string."""
    renderers = {
        "waterfall": _render_waterfall,
        "bar": _render_bar,
        "triangle": _render_triangle,
        "timeseries": _render_timeseries,
        "scatter": _render_scatter,
    }
    if spec.kind not in renderers:
        raise InvalidSpec(f"unknown chart kind {spec.kind!r}")
    try:
        body = renderers[spec.kind](spec)
    except (KeyError, TypeError, IndexError) as exc:
        raise InvalidSpec(f"{spec.kind} spec incomplete: {exc}") from exc
    return (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{spec.width}" height="{spec.height}" '
        f'viewBox="0 0 {spec.width} {spec.height}">\n'
        f'<rect x="0" y="0" width="{spec.width}" height="{spec.height}" fill="#FFFFFF"/>\n'
        + body
        + "</svg>\n"
    )


def _fmt(v: float) -> str:
    return f"{float(v):.4f}"


def _el(tag: str, attrs: dict, text: str | None = None) -> str:
    pieces = [f"<{tag}"]
    for key, value in attrs.items():
        pieces.append(f" {key}={quoteattr(str(value))}")
    if text is None:
        pieces.append("/>")
    else:
        pieces.append(f">{escape(text)}</{tag}>")
    return "".join(pieces) + "\n"


def _text(x: float, y: float, s: str, anchor: str = "start", size: int = 11) -> str:
    return _el(
        "text",
        {
            "x": _fmt(x), "y": _fmt(y), "text-anchor": anchor,
            "font-family": "sans-serif", "font-size": size, "fill": INK,
        },
        text=s,
    )


def _contribution_color(value: float) -> str:
    return GREEN if value >= 0 else RED


class _Frame:
    """Affine map from data coordinates to pixel coordinates (y flipped)."""

    def __init__(self, x_range, y_range, px_box):
        (self.x0, self.x1) = x_range
        (self.y0, self.y1) = y_range
        (self.left, self.top, self.right, self.bottom) = px_box
        self.x_span = (self.x1 - self.x0) or 1.0
        self.y_span = (self.y1 - self.y0) or 1.0

    def x(self, v: float) -> float:
        return self.left + (v - self.x0) / self.x_span * (self.right - self.left)

    def y(self, v: float) -> float:
        return self.bottom - (v - self.y0) / self.y_span * (self.bottom - self.top)

    @property
    def y_scale(self) -> float:
        return (self.bottom - self.top) / self.y_span


def _pad_range(values, frac: float = 0.08) -> tuple[float, float]:
    lo, hi = min(values), max(values)
    if lo == hi:
        lo, hi = lo - 1.0, hi + 1.0
    pad = (hi - lo) * frac
    return lo - pad, hi + pad


def _render_waterfall(spec: ChartSpec) -> str:
    rows = spec.data["rows"]
    y_orig = spec.data["y_original"]
    half = spec.data["half_width_original"]
    lo, hi = spec.data["scale"]
    width, height = spec.width, spec.height
    label_w = 180
    mid = label_w + (width - label_w - 20) / 2
    half_span = (width - label_w - 20) / 2
    biggest = max((abs(c) for _, c in rows), default=1.0) or 1.0
    px_per_unit = half_span / biggest

    out = [_text(16, 24, "Prediction breakdown", size=14)]
    y = 48
    out.append(_el("line", {
        "x1": _fmt(mid), "y1": _fmt(y - 8), "x2": _fmt(mid),
        "y2": _fmt(y + 26 * max(len(rows), 1) - 8), "stroke": GRID, "stroke-width": "1",
    }))
    for name, contribution in rows:
        bar_w = abs(contribution) * px_per_unit
        x = mid if contribution >= 0 else mid - bar_w
        out.append(_text(label_w - 10, y + 4, name, anchor="end"))
        out.append(_el("rect", {
            "class": "contribution-bar",
            "data-feature": name,
            "data-value": repr(float(contribution)),
            "x": _fmt(x), "y": _fmt(y - 7),
            "width": _fmt(bar_w), "height": "14",
            "fill": _contribution_color(contribution),
        }))
        y += 26
    y += 18

    # prediction marker: scale axis with box and whiskers
    frame = _Frame((lo, hi), (0, 1), (label_w, y, width - 20, y))
    out.append(_el("line", {
        "x1": _fmt(frame.x(lo)), "y1": _fmt(y), "x2": _fmt(frame.x(hi)), "y2": _fmt(y),
        "stroke": INK, "stroke-width": "1",
    }))
    ticks = int(hi - lo) + 1 if float(hi - lo).is_integer() and hi - lo <= 20 else 2
    for i in range(ticks):
        v = lo + i * (hi - lo) / max(ticks - 1, 1)
        out.append(_el("line", {
            "x1": _fmt(frame.x(v)), "y1": _fmt(y - 3), "x2": _fmt(frame.x(v)), "y2": _fmt(y + 3),
            "stroke": INK, "stroke-width": "1",
        }))
        out.append(_text(frame.x(v), y + 16, f"{v:g}", anchor="middle", size=10))
    wl = frame.x(max(lo, y_orig - half))
    wr = frame.x(min(hi, y_orig + half))
    cx = frame.x(y_orig)
    marker = [
        _el("line", {"x1": _fmt(wl), "y1": _fmt(y - 12), "x2": _fmt(wr), "y2": _fmt(y - 12),
                     "stroke": INK, "stroke-width": "1.5"}),
        _el("line", {"x1": _fmt(wl), "y1": _fmt(y - 17), "x2": _fmt(wl), "y2": _fmt(y - 7),
                     "stroke": INK, "stroke-width": "1.5"}),
        _el("line", {"x1": _fmt(wr), "y1": _fmt(y - 17), "x2": _fmt(wr), "y2": _fmt(y - 7),
                     "stroke": INK, "stroke-width": "1.5"}),
        _el("rect", {"x": _fmt(cx - 5), "y": _fmt(y - 17), "width": "10", "height": "10",
                     "fill": INK, "data-value": repr(float(y_orig))}),
    ]
    out.append('<g class="interval-marker">\n' + "".join(marker) + "</g>\n")
    return "".join(out)


def _render_bar(spec: ChartSpec) -> str:
    feature = spec.data["feature"]
    weight = spec.data["weight"]
    difference = spec.data["difference"]
    contribution = spec.data["contribution"]
    width = spec.width
    label_w = 150
    mid = label_w + (width - label_w - 20) / 2
    half_span = (width - label_w - 20) / 2
    biggest = max(abs(weight), abs(difference), abs(contribution), 1e-12)
    scale = half_span / biggest

    bars = [
        ("bar-weight", "weight", weight, DEEP_TEAL),
        ("bar-difference", "difference from average", difference, LIGHT_TEAL),
        ("bar-contribution", "contribution", contribution, _contribution_color(contribution)),
    ]
    out = [_text(16, 24, f"Contribution of {feature}", size=14)]
    out.append(_el("g", {"class": "bars", "data-scale": repr(float(scale))}, text=""))
    y = 64
    out.append(_el("line", {
        "x1": _fmt(mid), "y1": _fmt(y - 16), "x2": _fmt(mid), "y2": _fmt(y + 3 * 40 - 16),
        "stroke": GRID, "stroke-width": "1",
    }))
    for cls, label, value, color in bars:
        bar_w = abs(value) * scale
        x = mid if value >= 0 else mid - bar_w
        out.append(_text(label_w - 10, y + 4, label, anchor="end"))
        out.append(_el("rect", {
            "class": cls,
            "data-value": repr(float(value)),
            "x": _fmt(x), "y": _fmt(y - 9),
            "width": _fmt(bar_w), "height": "18",
            "fill": color,
        }))
        y += 40
    return "".join(out)


def _render_triangle(spec: ChartSpec) -> str:
    feature = spec.data["feature"]
    points = spec.data["points"]
    x_mean = spec.data["x_mean"]
    y_mean = spec.data["y_mean"]
    x_today = spec.data["x_today"]
    slope = spec.data["slope"]
    y_today_line = y_mean + slope * (x_today - x_mean)
    contribution = y_today_line - y_mean

    xs = [p[0] for p in points] + [x_mean, x_today]
    ys = [p[1] for p in points] + [y_mean, y_today_line]
    frame = _Frame(_pad_range(xs), _pad_range(ys), (56, 40, spec.width - 16, spec.height - 36))

    out = [_text(16, 22, f"{feature} vs target", size=14)]
    out.append(_el("g", {"class": "plot", "data-yscale": repr(float(frame.y_scale))}, text=""))
    for px, py in points:
        out.append(_el("circle", {
            "class": "scatter-point",
            "cx": _fmt(frame.x(px)), "cy": _fmt(frame.y(py)), "r": "2.5",
            "fill": GRID,
        }))
    # full regression line across the padded x-range
    out.append(_el("line", {
        "class": "regression-line",
        "x1": _fmt(frame.x(frame.x0)), "y1": _fmt(frame.y(y_mean + slope * (frame.x0 - x_mean))),
        "x2": _fmt(frame.x(frame.x1)), "y2": _fmt(frame.y(y_mean + slope * (frame.x1 - x_mean))),
        "stroke": GRID, "stroke-width": "1", "stroke-dasharray": "4 3",
    }))
    # triangle: horizontal leg = difference, hypotenuse = weight, vertical leg = contribution
    out.append(_el("line", {
        "class": "triangle-base",
        "data-value": repr(float(x_today - x_mean)),
        "x1": _fmt(frame.x(x_mean)), "y1": _fmt(frame.y(y_mean)),
        "x2": _fmt(frame.x(x_today)), "y2": _fmt(frame.y(y_mean)),
        "stroke": LIGHT_TEAL, "stroke-width": "2.5",
    }))
    out.append(_el("line", {
        "class": "triangle-hypotenuse",
        "data-value": repr(float(slope)),
        "x1": _fmt(frame.x(x_mean)), "y1": _fmt(frame.y(y_mean)),
        "x2": _fmt(frame.x(x_today)), "y2": _fmt(frame.y(y_today_line)),
        "stroke": DEEP_TEAL, "stroke-width": "2.5",
    }))
    out.append(_el("line", {
        "class": "contribution-leg",
        "data-value": repr(float(contribution)),
        "x1": _fmt(frame.x(x_today)), "y1": _fmt(frame.y(y_mean)),
        "x2": _fmt(frame.x(x_today)), "y2": _fmt(frame.y(y_today_line)),
        "stroke": _contribution_color(contribution), "stroke-width": "2.5",
    }))
    out.append(_text(frame.x(frame.x0), spec.height - 12, f"{frame.x0:.3g}", size=10))
    out.append(_text(frame.x(frame.x1), spec.height - 12, f"{frame.x1:.3g}", anchor="end", size=10))
    return "".join(out)


def _render_timeseries(spec: ChartSpec) -> str:
    label = spec.data["label"]
    dates = spec.data["dates"]
    values = spec.data["values"]
    window = spec.data["window"]
    if len(dates) != len(values):
        raise InvalidSpec("timeseries: dates and values differ in length")
    arr = np.asarray([math.nan if v is None else v for v in values], dtype=float)
    ma = moving_average(arr, window=window)
    observed = arr[np.isfinite(arr)]
    if observed.size == 0:
        raise InvalidSpec("timeseries: no observed values")
    frame = _Frame((0, max(len(values) - 1, 1)), _pad_range(observed),
                   (56, 40, spec.width - 16, spec.height - 36))

    def polyline(series: np.ndarray, color: str, cls: str, dash: str | None = None) -> str:
        chunks: list[list[str]] = [[]]
        for i, v in enumerate(series):
            if math.isfinite(v):
                chunks[-1].append(f"{_fmt(frame.x(i))},{_fmt(frame.y(v))}")
            elif chunks[-1]:
                chunks.append([])
        parts = []
        for chunk in chunks:
            if len(chunk) < 2:
                continue
            attrs = {"class": cls, "points": " ".join(chunk),
                     "fill": "none", "stroke": color, "stroke-width": "1.5"}
            if dash:
                attrs["stroke-dasharray"] = dash
            parts.append(_el("polyline", attrs))
        return "".join(parts)

    out = [_text(16, 22, label, size=14)]
    out.append(polyline(arr, DEEP_TEAL, "series-line"))
    out.append(polyline(ma, LIGHT_TEAL, "ma-line", dash="5 3"))
    if dates:
        out.append(_text(56, spec.height - 12, dates[0], size=10))
        out.append(_text(spec.width - 16, spec.height - 12, dates[-1], anchor="end", size=10))
    out.append(_text(50, frame.y(frame.y1) + 4, f"{frame.y1:.3g}", anchor="end", size=10))
    out.append(_text(50, frame.y(frame.y0) + 4, f"{frame.y0:.3g}", anchor="end", size=10))
    return "".join(out)


def _render_scatter(spec: ChartSpec) -> str:
    xs = spec.data["x"]
    ys = spec.data["y"]
    r = spec.data["r"]
    slope = spec.data["slope"]
    intercept = spec.data["intercept"]
    if len(xs) != len(ys) or not xs:
        raise InvalidSpec("scatter: x and y must be equal-length and non-empty")
    frame = _Frame(_pad_range(xs), _pad_range(ys), (56, 56, spec.width - 16, spec.height - 36))

    out = [_text(16, 22, f"{spec.data['x_label']} vs {spec.data['y_label']}", size=14)]
    # correlation bar: centered, signed length proportional to r
    bar_mid = spec.width / 2
    bar_half = (spec.width / 2 - 60)
    out.append(_el("line", {
        "x1": _fmt(bar_mid - bar_half), "y1": "34", "x2": _fmt(bar_mid + bar_half), "y2": "34",
        "stroke": GRID, "stroke-width": "1",
    }))
    r_w = abs(r) * bar_half
    out.append(_el("rect", {
        "class": "r-bar", "data-r": repr(float(r)),
        "x": _fmt(bar_mid if r >= 0 else bar_mid - r_w), "y": "29",
        "width": _fmt(r_w), "height": "10", "fill": DEEP_TEAL,
    }))
    out.append(_text(bar_mid + bar_half + 6, 38, f"r={r:.2f}", size=10))
    for px, py in zip(xs, ys):
        out.append(_el("circle", {
            "class": "scatter-point",
            "cx": _fmt(frame.x(px)), "cy": _fmt(frame.y(py)), "r": "2.5",
            "fill": DEEP_TEAL,
        }))
    out.append(_el("line", {
        "class": "regression-line",
        "x1": _fmt(frame.x(frame.x0)), "y1": _fmt(frame.y(intercept + slope * frame.x0)),
        "x2": _fmt(frame.x(frame.x1)), "y2": _fmt(frame.y(intercept + slope * frame.x1)),
        "stroke": INK, "stroke-width": "1.5",
    }))
    out.append(_text(frame.x(frame.x0), spec.height - 12, f"{frame.x0:.3g}", size=10))
    out.append(_text(frame.x(frame.x1), spec.height - 12, f"{frame.x1:.3g}", anchor="end", size=10))
    return "".join(out)
