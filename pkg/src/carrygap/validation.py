"""Out-of-sample and robustness diagnostics for the carry-gap regressions."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .carry_gap_panel import BUCKETS
from .econometrics import (DEFAULT_MAX_LAG, STAR_LEVELS, RegressionFit, RegressorRow, design_matrix,
                           hac_covariance, ols_fit, spec_columns)

DEFAULT_SCAN_GRID = (126, 189, 252, 315, 378, 441, 504, 567, 630)
HEADLINE_LOOKBACK = 504


def _usable(rows: Sequence[RegressorRow], names: Sequence[str]) -> list[RegressorRow]:
    return [r for r in rows if all(math.isfinite(r.value(c)) for c in names if c != "spx_dummy")]


def _r2(y: np.ndarray, pred: np.ndarray, center: float | None = None) -> float:
    center = y.mean() if center is None else center
    sst = float(((y - center) ** 2).sum())
    sse = float(((y - pred) ** 2).sum())
    if sst == 0:
        return 1.0 if sse == 0 else -math.inf
    return 1.0 - sse / sst


def _corr(a: np.ndarray, b: np.ndarray) -> float:
    if a.size < 2 or a.std() == 0 or b.std() == 0:
        return math.nan
    return float(np.corrcoef(a, b)[0, 1])


@dataclass(frozen=True)
class FoldResult:
    holdout_year: int
    n_obs: int
    oos_r2: float
    rmse_bp: float
    mae_bp: float
    fitted_actual_corr: float
    coefficients: dict[str, float] = field(default_factory=dict)


@dataclass
class LoyoReport:
    spec: str
    scope: str
    folds: list[FoldResult]
    mean_r2: float
    median_r2: float
    pooled_r2: float
    years_positive: int
    mean_rmse_bp: float
    fold_sst: str = "holdout_mean"
    pooled_sst: str = "pooled_mean"

    def to_dict(self) -> dict:
        return asdict(self)


def loyo(rows: Sequence[RegressorRow], spec: str = "baseline", scope: str = "separate", *,
         fold_sst: str = "holdout_mean", pooled_sst: str = "pooled_mean") -> LoyoReport:
    """Leave-one-calendar-year-out validation.

    Fold R^2 centers the holdout SST on the holdout year's own mean
    (``fold_sst="training_mean"`` uses the training-sample mean instead).
    Pooled R^2 compares all holdout residuals against the pooled holdout mean
    (``pooled_sst="per_year_mean"`` centers each year on its own mean).
    """
    names = spec_columns(spec, scope)
    rows = _usable(rows, names)
    if scope == "separate" and len({r.market for r in rows}) > 1:
        raise ValueError("separate scope expects one market")
    X, y, _ = design_matrix(rows, names)
    years = np.array([r.quote_date.year for r in rows])
    uniq = np.unique(years)
    if uniq.size < 3:
        raise ValueError(f"LOYO needs at least 3 distinct years, got {uniq.size}")
    folds, ys, preds, centers = [], [], [], []
    for year in uniq:
        hold = years == year
        train = ~hold
        fit = ols_fit(X[train], y[train], names)
        pred = X[hold] @ fit.coefficients
        yh = y[hold]
        resid = yh - pred
        center = yh.mean() if fold_sst == "holdout_mean" else y[train].mean()
        folds.append(FoldResult(int(year), int(hold.sum()), _r2(yh, pred, center),
                                math.sqrt(float(np.mean(resid ** 2))), float(np.mean(np.abs(resid))),
                                _corr(yh, pred), dict(zip(names, map(float, fit.coefficients)))))
        ys.append(yh)
        preds.append(pred)
        centers.append(np.full(yh.size, yh.mean()))
    y_all, p_all = np.concatenate(ys), np.concatenate(preds)
    if pooled_sst == "pooled_mean":
        pooled = _r2(y_all, p_all)
    else:
        c = np.concatenate(centers)
        pooled = 1.0 - float(((y_all - p_all) ** 2).sum()) / float(((y_all - c) ** 2).sum())
    r2s = np.array([f.oos_r2 for f in folds])
    return LoyoReport(spec, scope, folds, float(r2s.mean()), float(np.median(r2s)), pooled,
                      int((r2s > 0).sum()), float(np.mean([f.rmse_bp for f in folds])),
                      fold_sst, pooled_sst)


@dataclass(frozen=True)
class ScanPoint:
    market: str
    n: int
    n_obs: int
    in_sample_r2: float
    loyo_pooled_r2: float
    baseline_in_sample_r2: float


@dataclass
class HorizonScanReport:
    points: list[ScanPoint]

    def markets(self) -> list[str]:
        return sorted({p.market for p in self.points})

    def for_market(self, market: str) -> list[ScanPoint]:
        return [p for p in self.points if p.market == market]

    def argmax(self, market: str, metric: str = "loyo_pooled_r2") -> int:
        pts = self.for_market(market)
        return max(pts, key=lambda p: getattr(p, metric)).n

    def at(self, market: str, n: int = HEADLINE_LOOKBACK) -> ScanPoint | None:
        return next((p for p in self.for_market(market) if p.n == n), None)

    def to_dict(self) -> dict:
        out = {"points": [asdict(p) for p in self.points], "markets": {}}
        for m in self.markets():
            at = self.at(m)
            out["markets"][m] = {"argmax_loyo_pooled_r2": self.argmax(m),
                                 "argmax_in_sample_r2": self.argmax(m, "in_sample_r2"),
                                 "at_504": asdict(at) if at else None}
        return out


def horizon_scan(rows_builder: Callable[[int], Sequence[RegressorRow]],
                 n_grid: Sequence[int] = DEFAULT_SCAN_GRID) -> HorizonScanReport:
    """Refit the extended spec for each drift lookback ``n``, per market.

    The baseline in-sample R^2 is computed on the same rows as the extended fit,
    so the two are directly comparable at every ``n``.
    """
    grid = list(n_grid)
    if not grid:
        raise ValueError("n_grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("n_grid must be strictly increasing")
    base_names = spec_columns("baseline")
    ext_names = spec_columns("extended")
    points = []
    for n in grid:
        rows = rows_builder(n)
        for market in sorted({r.market for r in rows}):
            sub = _usable([r for r in rows if r.market == market], ext_names)
            try:
                X, y, _ = design_matrix(sub, ext_names)
                ext = ols_fit(X, y, ext_names)
                Xb, _, _ = design_matrix(sub, base_names)
                base = ols_fit(Xb, y, base_names)
                report = loyo(sub, "extended")
            except (ValueError, np.linalg.LinAlgError) as exc:
                raise type(exc)(f"horizon scan failed at n={n} ({market}): {exc}") from exc
            points.append(ScanPoint(market, n, len(sub), ext.r2, report.pooled_r2, base.r2))
    return HorizonScanReport(points)


@dataclass
class SignStabilityReport:
    spec: str
    n_folds: int
    table: dict[str, dict[str, int]]

    def to_dict(self) -> dict:
        return asdict(self)


def sign_stability(rows: Sequence[RegressorRow], spec: str = "extended", scope: str = "separate",
                   max_lag: int = DEFAULT_MAX_LAG) -> SignStabilityReport:
    """Count coefficient signs and HAC significance across LOYO training fits."""
    names = spec_columns(spec, scope)
    rows = _usable(rows, names)
    X, y, dates = design_matrix(rows, names)
    years = np.array([r.quote_date.year for r in rows])
    uniq = np.unique(years)
    if uniq.size < 3:
        raise ValueError(f"need at least 3 distinct years, got {uniq.size}")
    table = {nm: {"positive": 0, "negative": 0, "sig_1pct": 0, "sig_5pct": 0, "sig_10pct": 0}
             for nm in names}
    for year in uniq:
        train = years != year
        fit = ols_fit(X[train], y[train], names, dates[train])
        fit.cov = hac_covariance(X[train], fit.residuals, dates[train], max_lag)
        for nm, b, t in zip(names, fit.coefficients, fit.t_stats):
            entry = table[nm]
            entry["positive" if b > 0 else "negative"] += int(b != 0)
            for (crit, _), key in zip(STAR_LEVELS, ("sig_1pct", "sig_5pct", "sig_10pct")):
                entry[key] += int(bool(abs(t) >= crit))
    return SignStabilityReport(spec, int(uniq.size), table)


def bucket_diagnostics(rows: Sequence[RegressorRow], baseline: RegressionFit,
                       extended: RegressionFit) -> list[dict]:
    """Within-bucket R^2 and RMSE of full-sample fitted values, extended minus baseline.

    Uses only rows both fits can predict; empty buckets are omitted.
    """
    rows = _usable(rows, extended.names)
    y = np.array([r.cg_bp for r in rows])
    pb, pe = baseline.predict(rows), extended.predict(rows)
    labels = np.array([r.bucket for r in rows])
    out = []
    for b in BUCKETS:
        m = labels == b
        if not m.any():
            continue
        rb, re = _r2(y[m], pb[m]), _r2(y[m], pe[m])
        eb = math.sqrt(float(np.mean((y[m] - pb[m]) ** 2)))
        ee = math.sqrt(float(np.mean((y[m] - pe[m]) ** 2)))
        out.append({"bucket": b, "n_obs": int(m.sum()), "r2_baseline": rb, "r2_extended": re,
                    "delta_r2": re - rb, "rmse_baseline": eb, "rmse_extended": ee, "delta_rmse": ee - eb})
    return out


@dataclass(frozen=True)
class Hurdle:
    exact: float
    linear: float

    @property
    def difference(self) -> float:
        return self.exact - self.linear


def hurdle(f_forward: float, tau_years: float, cg_bp_fitted: float) -> Hurdle:
    """Price-space hurdle F [exp(tau cg) - 1] and its first-order approximation."""
    if not (f_forward > 0 and tau_years > 0):
        raise ValueError("forward and tau must be positive")
    cg = cg_bp_fitted / 1e4
    return Hurdle(f_forward * math.expm1(tau_years * cg), f_forward * tau_years * cg)


def drift_sensitivity(psi: float, ois_1y_pct: float, tau_years: float) -> float:
    """Carry-gap response (bp) to a one-percentage-point rise in the drift proxy."""
    return psi * ois_1y_pct * tau_years
