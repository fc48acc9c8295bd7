"""End-to-end wiring: quotes -> cells -> implied discount factors -> carry-gap panel -> regressors."""
from __future__ import annotations

import datetime as dt
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .carry_gap_panel import CarryGapObservation, build_panel
from .econometrics import RegressorRow
from .implied_discount import CellEstimate, estimate_all
from .market_data import DailyMarketRow, FilterConfig, OptionQuote, group_by_market, pair_and_filter
from .ois_curve import build_curves
from .path_risk import DEFAULT_LOOKBACK, build_regressors, drift_proxies


@dataclass
class PipelineResult:
    estimates: list[CellEstimate]
    panel: list[CarryGapObservation]
    filter_audit: Counter
    exclusions: list[tuple[tuple, str]] = field(default_factory=list)


def estimate_panel(quotes: Iterable[OptionQuote], ois_quotes: dict[dt.date, Sequence[tuple[float, float]]],
                   filters: FilterConfig = FilterConfig(), *, method: str = "ols",
                   convention: str = "continuous") -> PipelineResult:
    """Run pairing, cell estimation and the OIS comparison for every market present."""
    audit: Counter = Counter()
    estimates: list[CellEstimate] = []
    exclusions: list[tuple[tuple, str]] = []
    for market, mq in sorted(group_by_market(quotes).items()):
        cells, a = pair_and_filter(mq, filters)
        audit.update(a)
        est, bad = estimate_all(cells, method=method, min_strikes=filters.min_strikes_per_cell)
        estimates.extend(est)
        exclusions.extend(bad)
    curves, failed = build_curves(ois_quotes, convention)
    exclusions.extend(((None, day, None), f"OIS curve construction failed: {why}") for day, why in failed)
    panel, missing = build_panel(estimates, curves)
    exclusions.extend(missing)
    return PipelineResult(estimates, panel, audit, exclusions)


def regressor_rows(panel: Sequence[CarryGapObservation], daily: Sequence[DailyMarketRow],
                   lookback: int = DEFAULT_LOOKBACK) -> list[RegressorRow]:
    rows, _ = build_regressors(panel, daily, drift_proxies(daily, lookback))
    return rows


def rows_builder(panel: Sequence[CarryGapObservation], daily: Sequence[DailyMarketRow]):
    """Closure over a fixed panel that rebuilds the regressors for a given lookback."""
    def build(n: int) -> list[RegressorRow]:
        return regressor_rows(panel, daily, n)
    return build
