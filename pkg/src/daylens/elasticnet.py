"""Sample-weighted elastic-net regression via cyclic coordinate descent.

The objective is

    (1 / (2 * sum_i s_i)) * sum_i s_i * (y_i - x_i . w)^2
        + alpha * rho * ||w||_1 + alpha * (1 - rho) / 2 * ||w||_2^2

which reduces to the usual 1/(2 n) form when all sample weights are 1.
Features and target are assumed standardized, so there is no intercept;
means are re-added at display time through the standardizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelNotFitted, OutOfRange, TooFewRows
from .featurize import Standardizer

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is optional, pure python works
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap

DECAY_OFFSET = 30.0
DECAY_SCALE = 13.2869
DECAY_LEVEL = 14.7498
DECAY_EXPONENT = 0.0101585


def decayed_weight(age: float) -> float:
    """Training weight of a row that is `age` days older than the newest row.

    Exponential decay anchored near 1 at age 0; the outer max keeps weights
    from ever going negative once the curve crosses zero (after roughly 80
    years, so it only matters for very long histories).
    """
    return max(DECAY_LEVEL - DECAY_SCALE * (age + DECAY_OFFSET) ** DECAY_EXPONENT, 0.0)


def sample_weights(n_rows: int) -> np.ndarray:
    """Decay weights for n_rows in row order (oldest first, newest weight ~1)."""
    if n_rows < 1:
        raise OutOfRange("sample_weights needs n_rows >= 1")
    ages = np.arange(n_rows - 1, -1, -1, dtype=float)
    return np.maximum(DECAY_LEVEL - DECAY_SCALE * (ages + DECAY_OFFSET) ** DECAY_EXPONENT, 0.0)


def soft_threshold(z: float, gamma: float) -> float:
    """sign(z) * max(|z| - gamma, 0); the proximal step of the L1 term."""
    if gamma < 0:
        raise OutOfRange("gamma must be >= 0")
    if z > gamma:
        return z - gamma
    if z < -gamma:
        return z + gamma
    return 0.0


def objective(X, y, w, sample_weight=None, alpha: float = 0.0, l1_ratio: float = 1.0) -> float:
    """Value of the weighted elastic-net objective at w."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    sw = np.ones(len(y)) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    r = y - X @ w
    quad = 0.5 * float(sw @ (r * r)) / float(sw.sum())
    return (
        quad
        + alpha * l1_ratio * float(np.abs(w).sum())
        + 0.5 * alpha * (1.0 - l1_ratio) * float(w @ w)
    )


@dataclass
class LinearModel:
    """Fitted elastic-net model in standardized feature space."""

    feature_names: list[str]
    weights: np.ndarray
    alpha: float
    l1_ratio: float
    residual_std: float | None = None
    standardizer: Standardizer | None = None
    target_name: str | None = None
    converged: bool = True
    n_cycles: int = 0
    objective_history: list[float] | None = None

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return X @ self.weights

    def nonzero(self) -> list[tuple[str, float]]:
        """(name, weight) for selected features, sorted by |weight| descending."""
        pairs = [
            (name, float(w))
            for name, w in zip(self.feature_names, self.weights)
            if w != 0.0
        ]
        pairs.sort(key=lambda p: (-abs(p[1]), p[0]))
        return pairs

    def to_dict(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "weights": [float(w) for w in self.weights],
            "alpha": float(self.alpha),
            "l1_ratio": float(self.l1_ratio),
            "residual_std": None if self.residual_std is None else float(self.residual_std),
            "target_name": self.target_name,
            "standardizer": None if self.standardizer is None else self.standardizer.to_dict(),
            "converged": bool(self.converged),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearModel":
        s = d.get("standardizer")
        return cls(
            feature_names=list(d["feature_names"]),
            weights=np.asarray(d["weights"], dtype=float),
            alpha=float(d["alpha"]),
            l1_ratio=float(d["l1_ratio"]),
            residual_std=d.get("residual_std"),
            standardizer=None if s is None else Standardizer.from_dict(s),
            target_name=d.get("target_name"),
            converged=bool(d.get("converged", True)),
        )


def fit(
    X,
    y,
    sample_weight=None,
    alpha: float = 0.0,
    l1_ratio: float = 1.0,
    tol: float = 1e-7,
    max_cycles: int = 10_000,
    w0=None,
    track_objective: bool = False,
    feature_names: list[str] | None = None,
) -> LinearModel:
    """Minimize the weighted elastic-net objective by coordinate descent.

    Each coordinate update is the exact 1-D minimizer (a soft-threshold with
    the denominator augmented by the L2 term), so the objective never
    increases. Gram-matrix bookkeeping makes a full cycle O(p^2) after the
    O(n p^2) setup, and once the support stabilizes only active coordinates
    are swept. Converged when no coordinate moves more than tol in a full
    cycle; if the cycle cap is hit first, the best iterate is returned with
    converged=False.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise OutOfRange(f"X {X.shape} does not match y {y.shape}")
    if alpha < 0 or not 0.0 <= l1_ratio <= 1.0:
        raise OutOfRange("need alpha >= 0 and l1_ratio in [0, 1]")
    n, p = X.shape
    sw = np.ones(n) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    if sw.shape != (n,) or np.any(sw < 0):
        raise OutOfRange("sample weights must be non-negative, one per row")
    total = float(sw.sum())
    if total <= 0:
        raise OutOfRange("sample weights sum to zero")

    q = sw / total
    gram = X.T @ (X * q[:, None])
    corr = X.T @ (q * y)
    yy = float(q @ (y * y))
    diag = gram.diagonal().copy()
    l1 = alpha * l1_ratio
    l2 = alpha * (1.0 - l1_ratio)

    w = np.zeros(p) if w0 is None else np.asarray(w0, dtype=float).copy()
    gw = gram @ w
    history: list[float] | None = [] if track_objective else None

    def current_objective() -> float:
        return (
            0.5 * (yy - 2.0 * float(w @ corr) + float(w @ gw))
            + l1 * float(np.abs(w).sum())
            + 0.5 * l2 * float(w @ w)
        )

    def sweep(indices) -> float:
        nonlocal gw
        biggest = 0.0
        for j in indices:
            denom = diag[j] + l2
            if denom <= 0.0:
                continue
            zj = corr[j] - gw[j] + diag[j] * w[j]
            wj = soft_threshold(zj, l1) / denom
            delta = wj - w[j]
            if delta != 0.0:
                gw += delta * gram[:, j]
                w[j] = wj
                if abs(delta) > biggest:
                    biggest = abs(delta)
        return biggest

    cycles = 0
    converged = False
    everything = range(p)
    while cycles < max_cycles:
        moved = sweep(everything)
        cycles += 1
        gw = gram @ w  # refresh accumulated rounding once per full cycle
        if history is not None:
            history.append(current_objective())
        if moved < tol:
            converged = True
            break
        active = np.flatnonzero(w != 0.0)
        if 0 < active.size < p:
            while cycles < max_cycles:
                moved = sweep(active)
                cycles += 1
                if history is not None:
                    history.append(current_objective())
                if moved < tol:
                    break

    return LinearModel(
        feature_names=list(feature_names) if feature_names else [f"x{j}" for j in range(p)],
        weights=w,
        alpha=alpha,
        l1_ratio=l1_ratio,
        converged=converged,
        n_cycles=cycles,
        objective_history=history,
    )


def kkt_violation(X, y, w, sample_weight=None, alpha: float = 0.0, l1_ratio: float = 1.0) -> float:
    """Worst violation of the subgradient optimality conditions at w.

    For w_j != 0 this is |grad_j + l2*w_j + l1*sign(w_j)|; for w_j = 0 it is
    the excess of |grad_j| over l1. Zero (up to solver tolerance) at an exact
    minimizer.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    sw = np.ones(len(y)) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    r = y - X @ w
    grad = -(X.T @ (sw * r)) / float(sw.sum())
    l1 = alpha * l1_ratio
    l2 = alpha * (1.0 - l1_ratio)
    worst = 0.0
    for j in range(len(w)):
        if w[j] != 0.0:
            v = abs(grad[j] + l2 * w[j] + l1 * math.copysign(1.0, w[j]))
        else:
            v = max(abs(grad[j]) - l1, 0.0)
        worst = max(worst, v)
    return worst


@dataclass
class SplitSpec:
    """Chronological train/test partition: oldest rows train, newest test."""

    train: np.ndarray
    test: np.ndarray
    train_fraction: float


def time_series_split(n_rows: int, train_fraction: float) -> SplitSpec:
    """First ceil(fraction * n) rows train, the rest test, never shuffled.

    The train side is capped at n-1 rows so the test side is never empty.
    """
    if not 0.0 < train_fraction < 1.0:
        raise OutOfRange(f"train_fraction must be in (0, 1), got {train_fraction}")
    if n_rows < 5:
        raise TooFewRows(f"time_series_split needs >= 5 rows, got {n_rows}")
    n_train = min(math.ceil(train_fraction * n_rows), n_rows - 1)
    return SplitSpec(
        train=np.arange(n_train),
        test=np.arange(n_train, n_rows),
        train_fraction=train_fraction,
    )


def expanding_folds(n_rows: int, folds: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Expanding-window CV pairs: each fold trains on everything before its
    validation block, and the blocks tile the end of the range."""
    if folds < 2:
        raise OutOfRange("folds must be >= 2")
    val_size = n_rows // (folds + 1)
    if val_size < 1:
        raise TooFewRows(f"{n_rows} rows cannot support {folds} expanding folds")
    pairs = []
    for i in range(folds):
        val_start = n_rows - (folds - i) * val_size
        val_end = val_start + val_size
        pairs.append((np.arange(val_start), np.arange(val_start, val_end)))
    return pairs


@dataclass
class CvCell:
    alpha: float
    l1_ratio: float
    mean_val_mse: float


@dataclass
class CvResult:
    alpha: float
    l1_ratio: float
    model: LinearModel
    residual_std: float
    table: list[CvCell] = field(default_factory=list)


def cv_grid_search(
    X_train,
    y_train,
    alpha_grid,
    rho_grid,
    folds: int = 5,
    weight_fn=sample_weights,
    tol: float = 1e-7,
    max_cycles: int = 10_000,
    feature_names: list[str] | None = None,
) -> CvResult:
    """Pick (alpha, rho) by expanding-window CV, refit on all training rows.

    Within each fold the alpha path is walked from large to small with warm
    starts. Ties in mean validation MSE break toward larger alpha, then
    larger rho (the more strongly selecting model). The residual scale for
    prediction intervals is the population std of the winning cell's pooled
    validation residuals. weight_fn(n) supplies per-window sample weights
    with age 0 anchored at that window's newest row; pass None for uniform.
    """
    X = np.asarray(X_train, dtype=float)
    y = np.asarray(y_train, dtype=float)
    alphas = sorted(set(float(a) for a in alpha_grid), reverse=True)
    rhos = sorted(set(float(r) for r in rho_grid))
    if not alphas or not rhos:
        raise OutOfRange("alpha and rho grids must be non-empty")
    pairs = expanding_folds(len(y), folds)

    sq_err: dict[tuple[float, float], float] = {}
    count: dict[tuple[float, float], int] = {}
    residuals: dict[tuple[float, float], list[np.ndarray]] = {}
    for train_idx, val_idx in pairs:
        Xf, yf = X[train_idx], y[train_idx]
        sw = weight_fn(len(train_idx)) if weight_fn is not None else None
        for rho in rhos:
            warm = None
            for a in alphas:
                model = fit(
                    Xf, yf, sw, alpha=a, l1_ratio=rho,
                    tol=tol, max_cycles=max_cycles, w0=warm,
                )
                warm = model.weights
                res = y[val_idx] - X[val_idx] @ model.weights
                key = (a, rho)
                sq_err[key] = sq_err.get(key, 0.0) + float(res @ res)
                count[key] = count.get(key, 0) + len(val_idx)
                residuals.setdefault(key, []).append(res)

    table = [
        CvCell(alpha=a, l1_ratio=rho, mean_val_mse=sq_err[(a, rho)] / count[(a, rho)])
        for rho in rhos
        for a in alphas
    ]
    best = min(table, key=lambda c: (c.mean_val_mse, -c.alpha, -c.l1_ratio))
    pooled = np.concatenate(residuals[(best.alpha, best.l1_ratio)])
    residual_std = float(pooled.std())

    sw_full = weight_fn(len(y)) if weight_fn is not None else None
    final = fit(
        X, y, sw_full, alpha=best.alpha, l1_ratio=best.l1_ratio,
        tol=tol, max_cycles=max_cycles, feature_names=feature_names,
    )
    final.residual_std = residual_std
    return CvResult(
        alpha=best.alpha,
        l1_ratio=best.l1_ratio,
        model=final,
        residual_std=residual_std,
        table=table,
    )


@dataclass
class PredictionInterval:
    y_std: float
    half_width_std: float
    y_original: float
    half_width_original: float


def predict_interval(
    model: LinearModel, x_row, clip: tuple[float, float] | None = None
) -> PredictionInterval:
    """Point prediction with a homoscedastic 95% interval.

    The half-width is 1.96 * residual_std in standardized units; the original
    scale re-applies the target's training mean and std. When clip is given
    (e.g. a 1..9 mood scale) the displayed original-scale value is clamped
    into it.
    """
    if model.residual_std is None:
        raise ModelNotFitted("residual_std is not set; run cross-validation first")
    if model.standardizer is None or model.target_name is None:
        raise ModelNotFitted("model carries no standardizer for the target scale")
    x = np.asarray(x_row, dtype=float)
    y_std = float(x @ model.weights)
    half_std = 1.96 * float(model.residual_std)
    t_mean = model.standardizer.mean_of(model.target_name)
    t_std = model.standardizer.std_of(model.target_name)
    y_orig = y_std * t_std + t_mean
    if clip is not None:
        y_orig = min(max(y_orig, clip[0]), clip[1])
    return PredictionInterval(
        y_std=y_std,
        half_width_std=half_std,
        y_original=y_orig,
        half_width_original=half_std * t_std,
    )


def evaluate(model: LinearModel, X_test, y_test) -> tuple[float, float]:
    """(standardized test MSE, explained variance = 1 - MSE)."""
    X = np.asarray(X_test, dtype=float)
    y = np.asarray(y_test, dtype=float)
    if y.size < 1:
        raise TooFewRows("evaluate needs at least one test row")
    r = y - X @ model.weights
    mse = float(r @ r) / y.size
    return mse, 1.0 - mse
