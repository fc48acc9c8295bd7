"""Support-capital closed forms and the empirical GBM path-risk regressors."""
from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .carry_gap_panel import CarryGapObservation
from .econometrics import RegressorRow
from .market_data import DailyMarketRow

TRADING_DAYS = 252
DEFAULT_LOOKBACK = 504


@dataclass(frozen=True)
class SupportCapitalParams:
    sigma: float
    mu: float
    q: int
    tau: float

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if self.q not in (1, -1):
            raise ValueError("q must be +1 or -1")
        if not self.tau > 0:
            raise ValueError("tau must be positive")


def expected_support_capital(sigma: float, u: float) -> float:
    """E[running shortfall] of a zero-drift Brownian P&L: sigma sqrt(2u/pi)."""
    if sigma < 0 or u < 0:
        raise ValueError("sigma and u must be non-negative")
    return sigma * math.sqrt(2.0 * u / math.pi)


def average_burden(sigma: float, tau: float) -> float:
    """Support capital averaged over [0, tau]: (2/3) sigma sqrt(2 tau/pi)."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if not tau > 0:
        raise ValueError("tau must be positive")
    return 2.0 / 3.0 * sigma * math.sqrt(2.0 * tau / math.pi)


def drift_adjusted_burden(p: SupportCapitalParams) -> float:
    """First-order drift correction to the average burden: minus q mu tau / 4."""
    if p.sigma == 0:
        if p.mu != 0:
            raise ValueError("drift expansion is invalid at sigma = 0")
        return 0.0
    return average_burden(p.sigma, p.tau) - p.q * p.mu * p.tau / 4.0


def gbm_sigma_term(ois_pct: float, vol_pct: float, tau: float) -> float:
    """Diffusion burden in bp/year: 1e4 (OIS/100) (2/3) (Vol/100) sqrt(2 tau/pi)."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    return 1e4 * (ois_pct / 100.0) * (2.0 / 3.0) * (vol_pct / 100.0) * math.sqrt(2.0 * tau / math.pi)


def gbm_mu_term(ois_1y_pct: float, mu_ann: float, tau: float) -> float:
    """Drift burden in bp/year: 1e4 (OIS1Y/100) mu_ann tau."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    return 1e4 * (ois_1y_pct / 100.0) * mu_ann * tau


@dataclass(frozen=True)
class DriftProxySeries:
    market: str
    dates: tuple[dt.date, ...]
    mu_ann: tuple[float, ...]
    lookback_n: int

    def as_dict(self) -> dict[dt.date, float]:
        return dict(zip(self.dates, self.mu_ann))


def rolling_slopes(values: np.ndarray, n: int) -> np.ndarray:
    """Prior-only OLS slope on the index 0..n-1.

    ``out[i]`` uses ``values[i-n:i]`` and is nan for ``i < n``.
    """
    values = np.asarray(values, dtype=float)
    out = np.full(values.size, np.nan)
    if values.size <= n:
        return out
    ell = np.arange(n, dtype=float)
    w = (ell - ell.mean()) / ((ell - ell.mean()) ** 2).sum()
    windows = sliding_window_view(values[:-1], n)  # windows[j] = values[j:j+n]
    out[n:] = windows @ w
    return out


def rolling_drift_proxy(dates: Sequence[dt.date], log_tr: Sequence[float], n: int = DEFAULT_LOOKBACK,
                        market: str = "") -> DriftProxySeries:
    """Annualized rolling slope of log TR, computed strictly from dates before t.

    Dates with fewer than ``n`` prior observations are omitted (no backfill).
    """
    if n < 2:
        raise ValueError("lookback n must be at least 2")
    dates = list(dates)
    if any(b <= a for a, b in zip(dates, dates[1:])):
        raise ValueError("dates must be strictly increasing")
    slopes = rolling_slopes(np.asarray(log_tr, dtype=float), n)
    keep = [i for i in range(len(dates)) if not math.isnan(slopes[i])]
    return DriftProxySeries(market, tuple(dates[i] for i in keep),
                            tuple(float(TRADING_DAYS * slopes[i]) for i in keep), n)


def drift_proxies(daily: Iterable[DailyMarketRow], n: int = DEFAULT_LOOKBACK) -> dict[str, DriftProxySeries]:
    """One proxy series per market from the daily total-return index."""
    by_market: dict[str, list[DailyMarketRow]] = {}
    for r in daily:
        by_market.setdefault(r.market, []).append(r)
    out = {}
    for market, rows in sorted(by_market.items()):
        rows.sort(key=lambda r: r.date)
        out[market] = rolling_drift_proxy([r.date for r in rows], [math.log(r.tr_index) for r in rows],
                                          n, market)
    return out


def build_regressors(panel: Iterable[CarryGapObservation], daily: Iterable[DailyMarketRow],
                     proxy: Mapping[str, DriftProxySeries] | None = None, require_drift: bool = False
                     ) -> tuple[list[RegressorRow], list[tuple[tuple, str]]]:
    """Join panel cells with same-date market data and the drift proxy.

    Cells without daily data are dropped. Cells without a proxy value keep
    ``gbm_mu_1y = nan`` (usable by the baseline spec) unless ``require_drift``.
    """
    day = {(r.market, r.date): r for r in daily}
    mu = {m: s.as_dict() for m, s in (proxy or {}).items()}
    rows, audit = [], []
    for o in panel:
        key = (o.market, o.quote_date, o.expiry)
        d = day.get((o.market, o.quote_date))
        if d is None:
            audit.append((key, "no daily market row"))
            continue
        mu_hat = mu.get(o.market, {}).get(o.quote_date)
        if mu_hat is None:
            audit.append((key, "no drift proxy (warm-up)"))
            if require_drift:
                continue
            drift = math.nan
        else:
            drift = gbm_mu_term(d.ois_1y_pct, mu_hat, o.tau_years)
        rows.append(RegressorRow(
            o.market, o.quote_date, o.tau_years, o.cg_bp,
            gbm_sigma_term(d.ois_1y_pct, d.vol_pct, o.tau_years),
            gbm_sigma_term(d.ois_10y_pct, d.vol_pct, o.tau_years),
            drift, o.ba_over_tau, d.nfci))
    return rows, audit
