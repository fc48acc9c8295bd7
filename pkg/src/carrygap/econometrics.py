"""Baseline and drift-extended carry-gap regressions with date-based HAC inference."""
from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .carry_gap_panel import maturity_bucket

REGRESSOR_COLUMNS = ["market", "quote_date", "tau_years", "cg_bp", "gbm_sigma_1y", "gbm_sigma_10y",
                     "gbm_mu_1y", "ba_over_tau", "nfci"]

SPECS = {
    "baseline": ("intercept", "gbm_sigma_1y", "gbm_sigma_10y", "ba_over_tau", "nfci"),
    "extended": ("intercept", "gbm_sigma_1y", "gbm_sigma_10y", "gbm_mu_1y", "ba_over_tau", "nfci"),
}
SCOPES = ("separate", "pooled_common")
DEFAULT_MAX_LAG = 21

# two-sided normal critical values
STAR_LEVELS = ((2.5758293035489004, "***"), (1.959963984540054, "**"), (1.6448536269514722, "*"))


class RankDeficiencyError(np.linalg.LinAlgError):
    def __init__(self, columns: Sequence[str]):
        self.columns = list(columns)
        super().__init__(f"design matrix is rank deficient; collinear column(s): {', '.join(self.columns)}")


@dataclass(frozen=True)
class RegressorRow:
    market: str
    quote_date: dt.date
    tau_years: float
    cg_bp: float
    gbm_sigma_1y: float
    gbm_sigma_10y: float
    gbm_mu_1y: float  # nan inside the drift-proxy warm-up
    ba_over_tau: float
    nfci: float

    @property
    def bucket(self) -> str:
        return maturity_bucket(self.tau_years)

    def value(self, name: str) -> float:
        return 1.0 if name == "intercept" else getattr(self, name)


@dataclass
class RegressionFit:
    names: list[str]
    coefficients: np.ndarray
    r2: float
    adj_r2: float
    rmse: float
    mae: float
    n_obs: int
    n_dates: int
    spec: str = "baseline"
    scope: str = "separate"
    markets: tuple[str, ...] = ()
    max_lag: int | None = None
    cov: np.ndarray | None = field(default=None, repr=False)
    residuals: np.ndarray | None = field(default=None, repr=False)
    n_dropped: int = 0

    @property
    def hac_se(self) -> np.ndarray:
        if self.cov is None:
            raise ValueError("fit carries no covariance; use run_spec or attach hac_covariance")
        return np.sqrt(np.clip(np.diag(self.cov), 0.0, None))

    @property
    def t_stats(self) -> np.ndarray:
        se = self.hac_se
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(se > 0, self.coefficients / se, np.nan)

    def coef(self, name: str) -> float:
        return float(self.coefficients[self.names.index(name)])

    def se(self, name: str) -> float:
        return float(self.hac_se[self.names.index(name)])

    def predict(self, rows: Sequence[RegressorRow]) -> np.ndarray:
        X, _, _ = design_matrix(rows, self.names)
        return X @ self.coefficients

    def to_dict(self) -> dict:
        table = []
        ses = self.hac_se if self.cov is not None else [math.nan] * len(self.names)
        ts = self.t_stats if self.cov is not None else [math.nan] * len(self.names)
        for name, b, s, t in zip(self.names, self.coefficients, ses, ts):
            table.append({"name": name, "estimate": float(b), "hac_se": float(s), "t": float(t),
                          "stars": significance_stars(float(t))})
        return {
            "spec": self.spec, "scope": self.scope, "markets": list(self.markets),
            "max_lag": self.max_lag, "coefficients": table,
            "metrics": {"r2": self.r2, "adj_r2": self.adj_r2, "rmse": self.rmse, "mae": self.mae},
            "n_obs": self.n_obs, "n_dates": self.n_dates, "n_dropped": self.n_dropped,
        }


def significance_stars(t: float) -> str:
    if not math.isfinite(t):
        return ""
    return next((s for crit, s in STAR_LEVELS if abs(t) >= crit), "")


def spec_columns(spec: str, scope: str = "separate") -> list[str]:
    if spec not in SPECS:
        raise ValueError(f"unknown spec {spec!r}")
    if scope not in SCOPES:
        raise ValueError(f"unknown market scope {scope!r}")
    cols = list(SPECS[spec])
    if scope == "pooled_common":
        cols.append("spx_dummy")
    return cols


def design_matrix(rows: Sequence[RegressorRow], names: Sequence[str]):
    """Return ``(X, y, dates)``; ``spx_dummy`` is 1 for SPX rows."""
    X = np.empty((len(rows), len(names)))
    for j, name in enumerate(names):
        if name == "spx_dummy":
            X[:, j] = [1.0 if r.market == "SPX" else 0.0 for r in rows]
        else:
            X[:, j] = [r.value(name) for r in rows]
    y = np.array([r.cg_bp for r in rows], dtype=float)
    dates = np.array([r.quote_date.toordinal() for r in rows], dtype=np.int64)
    return X, y, dates


def collinear_columns(X: np.ndarray, names: Sequence[str]) -> list[str]:
    """Columns that add no rank when appended left to right."""
    norms = np.linalg.norm(X, axis=0)
    scaled = X / np.where(norms > 0, norms, 1.0)
    kept: list[int] = []
    bad = []
    for j in range(X.shape[1]):
        if norms[j] == 0 or np.linalg.matrix_rank(scaled[:, kept + [j]]) <= len(kept):
            bad.append(names[j])
        else:
            kept.append(j)
    return bad


def ols_fit(X: np.ndarray, y: np.ndarray, names: Sequence[str] | None = None,
            dates: np.ndarray | None = None) -> RegressionFit:
    """Least squares with plain fit metrics (no inference attached)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, k = X.shape
    names = list(names) if names is not None else [f"x{j}" for j in range(k)]
    if n <= k:
        raise ValueError(f"need more observations than regressors (n={n}, k={k})")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise ValueError("design contains non-finite values")
    bad = collinear_columns(X, names)
    if bad:
        raise RankDeficiencyError(bad)
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    sse = float(resid @ resid)
    sst = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - sse / sst if sst > 0 else (1.0 if sse == 0 else 0.0)
    adj = 1.0 - (1.0 - r2) * (n - 1) / (n - k)
    n_dates = int(np.unique(dates).size) if dates is not None else n
    return RegressionFit(names, beta, r2, adj, math.sqrt(sse / n), float(np.mean(np.abs(resid))),
                         n, n_dates, residuals=resid)


def date_scores(X: np.ndarray, resid: np.ndarray, dates: np.ndarray, aggregate: str = "sum") -> np.ndarray:
    """Date-level score matrix (n_dates x k), rows in ascending date order.

    ``aggregate="sum"`` adds the scores x_i e_i within each date. ``"mean"``
    averages them and rescales by the mean cell count per date, weighting dates
    equally; both coincide when every date has the same number of cells.
    """
    scores = X * resid[:, None]
    uniq, inv = np.unique(dates, return_inverse=True)
    summed = np.zeros((uniq.size, X.shape[1]))
    np.add.at(summed, inv, scores)
    if aggregate == "sum":
        return summed
    if aggregate == "mean":
        counts = np.bincount(inv, minlength=uniq.size).astype(float)
        return summed / counts[:, None] * (counts.sum() / uniq.size)
    raise ValueError(f"unknown aggregate {aggregate!r}")


def long_run_covariance(S: np.ndarray, max_lag: int) -> np.ndarray:
    """Bartlett-weighted sum of score autocovariances, lags in observed-date steps."""
    omega = S.T @ S
    for lag in range(1, min(max_lag, S.shape[0] - 1) + 1):
        w = 1.0 - lag / (max_lag + 1.0)
        gamma = S[lag:].T @ S[:-lag]
        omega += w * (gamma + gamma.T)
    return omega


def hac_covariance(X: np.ndarray, resid: np.ndarray, dates: np.ndarray,
                   max_lag: int = DEFAULT_MAX_LAG, aggregate: str = "sum") -> np.ndarray:
    """Sandwich (X'X)^-1 Omega (X'X)^-1 with date-clustered Newey-West Omega.

    With ``max_lag=0`` this is the cluster-by-date robust covariance; with one
    observation per date it is textbook Newey-West.
    """
    if max_lag < 0:
        raise ValueError("max_lag must be >= 0")
    if np.unique(dates).size < 2:
        raise ValueError("HAC covariance needs at least two distinct dates")
    S = date_scores(np.asarray(X, float), np.asarray(resid, float), np.asarray(dates), aggregate)
    bread = np.linalg.inv(X.T @ X)
    cov = bread @ long_run_covariance(S, max_lag) @ bread
    return 0.5 * (cov + cov.T)


def run_spec(rows: Sequence[RegressorRow], spec: str = "baseline", scope: str = "separate",
             max_lag: int = DEFAULT_MAX_LAG, aggregate: str = "sum") -> RegressionFit:
    """Fit one specification with HAC(max_lag) inference.

    Rows missing a column the specification needs (the drift term during warm-up) are
    dropped and counted in ``n_dropped``. ``scope="separate"`` expects a single
    market; ``"pooled_common"`` adds an SPX dummy.
    """
    names = spec_columns(spec, scope)
    markets = tuple(sorted({r.market for r in rows}))
    if scope == "separate" and len(markets) > 1:
        raise ValueError(f"separate scope expects one market, got {markets}; use fit_by_market")
    usable = [r for r in rows if all(math.isfinite(r.value(c)) for c in names if c != "spx_dummy")]
    X, y, dates = design_matrix(usable, names)
    fit = ols_fit(X, y, names, dates)
    fit.cov = hac_covariance(X, fit.residuals, dates, max_lag, aggregate)
    fit.spec, fit.scope, fit.markets, fit.max_lag = spec, scope, markets, max_lag
    fit.n_dropped = len(rows) - len(usable)
    return fit


def fit_by_market(rows: Sequence[RegressorRow], spec: str = "baseline",
                  max_lag: int = DEFAULT_MAX_LAG) -> dict[str, RegressionFit]:
    out = {}
    for market in sorted({r.market for r in rows}):
        out[market] = run_spec([r for r in rows if r.market == market], spec, "separate", max_lag)
    return out


def write_regressors(path, rows: Iterable[RegressorRow]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REGRESSOR_COLUMNS)
        for r in rows:
            w.writerow([r.market, r.quote_date.isoformat(), repr(float(r.tau_years)), repr(float(r.cg_bp)),
                        repr(float(r.gbm_sigma_1y)), repr(float(r.gbm_sigma_10y)), repr(float(r.gbm_mu_1y)),
                        repr(float(r.ba_over_tau)), repr(float(r.nfci))])


def load_regressors(path) -> list[RegressorRow]:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != REGRESSOR_COLUMNS:
            raise ValueError(f"{path}: expected header {','.join(REGRESSOR_COLUMNS)!r}")
        return [RegressorRow(r["market"], dt.date.fromisoformat(r["quote_date"]),
                             *(float(r[c]) for c in REGRESSOR_COLUMNS[2:]))
                for r in reader]
