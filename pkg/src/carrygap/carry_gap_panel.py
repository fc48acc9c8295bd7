"""Carry-gap panel: OIS vs option-implied discount wedge per maturity cell."""
from __future__ import annotations

import bisect
import csv
import datetime as dt
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .implied_discount import CellEstimate
from .market_data import DailyMarketRow
from .ois_curve import CurveError, OisCurve, discount_factor

PANEL_COLUMNS = ["market", "quote_date", "expiry", "tau_years", "cg_bp", "ba_over_tau", "bucket"]
DAILY_SERIES_COLUMNS = ["date", "market", "cg_bp_median"]

# Left-closed month boundaries; anything under 2 months falls in the first bucket.
BUCKET_EDGES_MONTHS = (2, 3, 5, 7, 10, 14, 21)
BUCKETS = ("1-2m", "2-3m", "3-5m", "5-7m", "7-10m", "10-14m", "14-21m", "21m+")


@dataclass(frozen=True)
class CarryGapObservation:
    market: str
    quote_date: dt.date
    expiry: dt.date
    tau_years: float
    cg: float
    ba_over_tau: float
    bucket: str
    d_ois: float = math.nan
    b_hat: float = math.nan
    f_hat: float = math.nan

    @property
    def cg_bp(self) -> float:
        return 1e4 * self.cg


def maturity_bucket(tau_years: float) -> str:
    return BUCKETS[bisect.bisect_right(BUCKET_EDGES_MONTHS, tau_years * 12.0)]


def carry_gap(d_ois: float, b_hat: float, tau_years: float) -> float:
    """Annualized log wedge (1/tau) log(D_ois / B_hat), decimal per year."""
    if not (d_ois > 0 and b_hat > 0 and tau_years > 0):
        raise ValueError("carry_gap inputs must be positive")
    return math.log(d_ois / b_hat) / tau_years


def build_panel(estimates: Iterable[CellEstimate], curves: Mapping[dt.date, OisCurve]
                ) -> tuple[list[CarryGapObservation], list[tuple[tuple, str]]]:
    panel, audit = [], []
    for e in estimates:
        key = (e.market, e.quote_date, e.expiry)
        curve = curves.get(e.quote_date)
        if curve is None:
            audit.append((key, "no OIS curve"))
            continue
        try:
            d = discount_factor(curve, e.tau_years)
        except CurveError as exc:
            audit.append((key, f"OIS curve: {exc}"))
            continue
        panel.append(CarryGapObservation(
            e.market, e.quote_date, e.expiry, e.tau_years, carry_gap(d, e.b_hat, e.tau_years),
            e.ba_median / e.tau_years, maturity_bucket(e.tau_years), d, e.b_hat, e.f_hat))
    return panel, audit


def daily_median(panel: Iterable[CarryGapObservation], market: str,
                 bucket: str | None = None) -> list[tuple[dt.date, float]]:
    """Per-date median cg_bp across maturity cells (mean of the middle two when even)."""
    by_date: dict[dt.date, list[float]] = defaultdict(list)
    for o in panel:
        if o.market == market and (bucket is None or o.bucket == bucket):
            by_date[o.quote_date].append(o.cg_bp)
    return [(day, float(np.median(by_date[day]))) for day in sorted(by_date)]


def _zscore(x: np.ndarray) -> np.ndarray:
    sd = x.std()
    return (x - x.mean()) / sd if sd > 0 else np.zeros_like(x)


def cumulative_accrual_zscore(panel: Iterable[CarryGapObservation], daily: Iterable[DailyMarketRow],
                              market: str, bucket: str = "5-7m"):
    """Z-scored cumulated daily-median carry gap alongside z-scored log TR.

    Only dates present in both the bucket series and the daily file are used.
    Standardization uses the population standard deviation.
    Returns ``(dates, z_cum_cg, z_log_tr)``.
    """
    series = daily_median(panel, market, bucket)
    if not series:
        raise ValueError(f"no {market} observations in bucket {bucket}")
    tr = {r.date: r.tr_index for r in daily if r.market == market}
    series = [(d, v) for d, v in series if d in tr]
    dates = [d for d, _ in series]
    cum = np.cumsum([v for _, v in series])
    log_tr = np.log([tr[d] for d in dates])
    return dates, _zscore(cum), _zscore(log_tr)


def write_panel(path, panel: Iterable[CarryGapObservation]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PANEL_COLUMNS)
        for o in panel:
            w.writerow([o.market, o.quote_date.isoformat(), o.expiry.isoformat(), repr(float(o.tau_years)),
                        repr(float(o.cg_bp)), repr(float(o.ba_over_tau)), o.bucket])


def load_panel(path) -> list[CarryGapObservation]:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != PANEL_COLUMNS:
            raise ValueError(f"{path}: expected header {','.join(PANEL_COLUMNS)!r}")
        return [CarryGapObservation(r["market"], dt.date.fromisoformat(r["quote_date"]),
                                    dt.date.fromisoformat(r["expiry"]), float(r["tau_years"]),
                                    float(r["cg_bp"]) / 1e4, float(r["ba_over_tau"]), r["bucket"])
                for r in reader]


def write_daily_series(path, rows: Iterable[tuple[dt.date, str, float]]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DAILY_SERIES_COLUMNS)
        for day, market, value in rows:
            w.writerow([day.isoformat(), market, repr(float(value))])
