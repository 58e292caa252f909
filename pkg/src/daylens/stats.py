"""Correlation report with FDR control, PACF lag selection, PCA diagnostic."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConstantInput,
    ConvergenceFailure,
    LengthMismatch,
    OutOfRange,
    TooShort,
    ValidationError,
)
from .featurize import DailyMatrix

SIGNIFICANCE = 0.05


def pearson_r(x, y) -> float:
    """Pearson product-moment correlation coefficient, clamped to [-1, 1]."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"shapes {x.shape} and {y.shape}")
    n = x.size
    if n < 3:
        raise TooShort("pearson_r needs n >= 3")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = math.sqrt(float(dx @ dx))
    sy = math.sqrt(float(dy @ dy))
    if sx == 0.0 or sy == 0.0:
        raise ConstantInput("pearson_r is undefined for a constant input")
    r = float(dx @ dy) / (sx * sy)
    return max(-1.0, min(1.0, r))


def pearson_p(r: float, n: int) -> float:
    """Two-sided p-value of a Pearson coefficient under the null r = 0.

    Uses t = r * sqrt((n-2)/(1-r^2)) with n-2 degrees of freedom; the t tail
    is evaluated through the regularized incomplete beta function. For |r| = 1
    the statistic degenerates and 0.0 is returned.
    """
    if n < 3:
        raise TooShort("pearson_p needs n >= 3")
    if not -1.0 <= r <= 1.0:
        raise OutOfRange(f"r must be in [-1, 1], got {r}")
    if abs(r) == 1.0:
        return 0.0
    dof = n - 2
    t2 = r * r * dof / (1.0 - r * r)
    # two-sided: P(|T| >= t) = I_{dof/(dof+t^2)}(dof/2, 1/2)
    return regularized_incomplete_beta(dof / 2.0, 0.5, dof / (dof + t2))


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) via the standard continued-fraction expansion.

    The fraction is evaluated with the modified Lentz scheme to an absolute
    tolerance of 1e-12; the symmetric form is used for x past the mean so the
    fraction always converges quickly.
    """
    if a <= 0.0 or b <= 0.0:
        raise OutOfRange("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise OutOfRange(f"x must be in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cont_frac(a, b, x) / a
    return 1.0 - front * _beta_cont_frac(b, a, 1.0 - x) / b


def _beta_cont_frac(a: float, b: float, x: float, tol: float = 1e-14, max_iter: int = 300) -> float:
    tiny = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < tol:
            return h
    raise ConvergenceFailure("incomplete beta continued fraction did not converge")


def bh_adjust(pvals) -> np.ndarray:
    """Benjamini-Hochberg adjusted p-values in the input order.

    Sorted ascending, p_adj(i) = min over j >= i of m*p_(j)/j, clipped to 1,
    then mapped back. Significance downstream is p_adj < 0.05.
    """
    p = np.asarray(pvals, dtype=float)
    if p.ndim != 1:
        raise OutOfRange("bh_adjust expects a 1-D list of p-values")
    if p.size == 0:
        return p.copy()
    if np.any((p < 0.0) | (p > 1.0)) or not np.all(np.isfinite(p)):
        raise OutOfRange("p-values must lie in [0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    scaled = p[order] * m / np.arange(1, m + 1)
    for i in range(m - 2, -1, -1):
        if scaled[i] > scaled[i + 1]:
            scaled[i] = scaled[i + 1]
    np.minimum(scaled, 1.0, out=scaled)
    adjusted = np.empty(m)
    adjusted[order] = scaled
    return adjusted


@dataclass
class CorrelationRow:
    feature: str
    r: float
    p_raw: float
    p_adj: float
    significant: bool
    n: int


@dataclass
class CorrelationReport:
    """Feature-vs-target correlations plus the full pairwise r-matrix."""

    rows: list[CorrelationRow]
    matrix_names: list[str]
    r_matrix: np.ndarray | None = None

    def significant_features(self) -> list[str]:
        return [row.feature for row in self.rows if row.significant]


def correlation_report(
    matrix: DailyMatrix,
    target: str | None = None,
    include_matrix: bool = True,
    significance: float = SIGNIFICANCE,
) -> CorrelationReport:
    """Correlate every feature with the target and BH-correct the family.

    Each pair uses its pairwise-complete rows (both cells observed), so the
    report does not depend on imputation. Features that are constant on the
    shared rows, or share fewer than 3 rows with the target, are excluded
    from the testing family and reported with NaN statistics at the end.
    Rows are sorted by adjusted p ascending.
    """
    target = target or matrix.target_name
    tj = matrix.index_of(target)
    tested: list[tuple[str, float, float, int]] = []
    degenerate: list[tuple[str, int]] = []
    for j, f in enumerate(matrix.features):
        if j == tj:
            continue
        shared = matrix.mask[:, j] & matrix.mask[:, tj]
        n = int(shared.sum())
        if n < 3:
            degenerate.append((f.name, n))
            continue
        try:
            r = pearson_r(matrix.values[shared, j], matrix.values[shared, tj])
        except ConstantInput:
            degenerate.append((f.name, n))
            continue
        tested.append((f.name, r, pearson_p(r, n), n))

    adjusted = bh_adjust([p for _, _, p, _ in tested])
    rows = [
        CorrelationRow(
            feature=name,
            r=r,
            p_raw=p,
            p_adj=float(p_adj),
            significant=bool(p_adj < significance),
            n=n,
        )
        for (name, r, p, n), p_adj in zip(tested, adjusted)
    ]
    rows.sort(key=lambda row: (row.p_adj, row.p_raw, row.feature))
    rows += [
        CorrelationRow(feature=name, r=math.nan, p_raw=math.nan,
                       p_adj=math.nan, significant=False, n=n)
        for name, n in sorted(degenerate)
    ]

    r_matrix = None
    if include_matrix:
        r_matrix = _pairwise_r(matrix)
    return CorrelationReport(rows=rows, matrix_names=matrix.names, r_matrix=r_matrix)


def _pairwise_r(matrix: DailyMatrix) -> np.ndarray:
    p = len(matrix.features)
    out = np.full((p, p), np.nan)
    np.fill_diagonal(out, 1.0)
    for j in range(p):
        for k in range(j + 1, p):
            shared = matrix.mask[:, j] & matrix.mask[:, k]
            if shared.sum() < 3:
                continue
            try:
                r = pearson_r(matrix.values[shared, j], matrix.values[shared, k])
            except ConstantInput:
                continue
            out[j, k] = out[k, j] = r
    return out


@dataclass
class PacfResult:
    coefficients: list[float]  # phi_kk for k = 1..max_lag
    band: float  # 1.96 / sqrt(n)
    selected_k: int


def pacf(series, max_lag: int) -> PacfResult:
    """Partial autocorrelation via the Durbin-Levinson recursion.

    phi_11 equals the lag-1 autocorrelation exactly. If the recursion
    degenerates (prediction error reaches zero) the remaining coefficients
    are NaN, which the lag selector treats as insignificant.
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    if max_lag < 1:
        raise OutOfRange("max_lag must be >= 1")
    if n <= max_lag + 1:
        raise TooShort(f"pacf needs n > max_lag + 1, got n={n}")
    dx = x - x.mean()
    c0 = float(dx @ dx) / n
    if c0 == 0.0:
        raise ConstantInput("pacf of a constant series")
    rho = np.empty(max_lag + 1)
    rho[0] = 1.0
    for k in range(1, max_lag + 1):
        rho[k] = float(dx[k:] @ dx[:-k]) / n / c0

    phi_kk = np.full(max_lag, np.nan)
    prev = np.zeros(max_lag + 1)
    phi_kk[0] = rho[1]
    prev[1] = rho[1]
    for k in range(2, max_lag + 1):
        num = rho[k] - float(prev[1:k] @ rho[k - 1:0:-1])
        den = 1.0 - float(prev[1:k] @ rho[1:k])
        if den <= 1e-12:
            break
        phi = num / den
        phi_kk[k - 1] = phi
        cur = prev.copy()
        cur[k] = phi
        cur[1:k] = prev[1:k] - phi * prev[k - 1:0:-1]
        prev = cur

    band = 1.96 / math.sqrt(n)
    result = PacfResult(coefficients=[float(v) for v in phi_kk], band=band, selected_k=1)
    result.selected_k = select_lag_count(result)
    return result


def select_lag_count(result: PacfResult) -> int:
    """Lags to keep: everything before the first insignificant PACF value.

    NaN coefficients count as insignificant. At least one lag is always kept
    (yesterday is always a predictor).
    """
    k = len(result.coefficients)
    for i, phi in enumerate(result.coefficients):
        if math.isnan(phi) or abs(phi) < result.band:
            k = i
            break
    return max(1, k)


def jacobi_eigenvalues(
    matrix: np.ndarray, tol: float = 1e-10, max_sweeps: int = 100
) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps rotate away each off-diagonal entry in turn until the off-diagonal
    Frobenius norm falls below tol. Returns eigenvalues sorted descending.
    """
    a = np.array(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError("jacobi_eigenvalues expects a square matrix")
    if not np.allclose(a, a.T, atol=1e-12):
        raise ValidationError("jacobi_eigenvalues expects a symmetric matrix")
    p = a.shape[0]
    if p == 1:
        return a.diagonal().copy()

    def off_norm(m: np.ndarray) -> float:
        return math.sqrt(float(np.sum(m * m)) - float(np.sum(m.diagonal() ** 2)))

    for _ in range(max_sweeps):
        if off_norm(a) <= tol:
            break
        for i in range(p - 1):
            for j in range(i + 1, p):
                if a[i, j] == 0.0:
                    continue
                theta = (a[j, j] - a[i, i]) / (2.0 * a[i, j])
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rot = np.array([[c, s], [-s, c]])
                a[[i, j], :] = rot.T @ a[[i, j], :]
                a[:, [i, j]] = a[:, [i, j]] @ rot
                a[i, j] = a[j, i] = 0.0  # rotation zeroes this pair exactly
    else:
        if off_norm(a) > tol:
            raise ConvergenceFailure("Jacobi sweeps exhausted before convergence")
    eigs = np.sort(a.diagonal())[::-1]
    return eigs.copy()


def pca_explained(data: np.ndarray) -> np.ndarray:
    """Explained-variance ratios of the columns' principal components.

    Eigenvalues come from the population covariance matrix via Jacobi
    rotations; tiny negative values from rounding are clipped to zero and
    the ratios are normalized to sum to 1.
    """
    x = np.asarray(data, dtype=float)
    if x.ndim != 2 or x.shape[1] < 2:
        raise ValidationError("pca_explained needs a 2-D array with >= 2 columns")
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / x.shape[0]
    eigs = jacobi_eigenvalues(cov)
    eigs = np.clip(eigs, 0.0, None)
    total = float(eigs.sum())
    if total == 0.0:
        raise ConstantInput("pca_explained of all-constant columns")
    return eigs / total
