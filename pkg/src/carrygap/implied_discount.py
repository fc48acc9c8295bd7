"""Joint recovery of the implied discount factor and forward from put-call parity.

Within a (market, date, expiry) cell parity gives C - P = B (F - K), so the
synthetic forward is linear in strike with slope -B and intercept B F.
"""
from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .market_data import PairedQuote

ESTIMATE_COLUMNS = ["market", "quote_date", "expiry", "tau_years", "b_hat", "f_hat",
                    "n_strikes", "resid_rmse", "ba_median"]

DAYS_PER_YEAR = 365.25
DEFAULT_B_BAND = (0.5, 1.5)


class CellError(ValueError):
    """A cell that cannot be identified; ``reason`` goes into the exclusion audit."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


@dataclass(frozen=True)
class CellEstimate:
    market: str
    quote_date: dt.date
    expiry: dt.date
    tau_years: float
    b_hat: float
    f_hat: float
    n_strikes: int
    resid_rmse: float
    ba_median: float


def year_fraction(start: dt.date, end: dt.date) -> float:
    """ACT/365.25 on calendar days."""
    return (end - start).days / DAYS_PER_YEAR


def _ols_line(k: np.ndarray, g: np.ndarray) -> tuple[float, float]:
    kc = k - k.mean()
    slope = float(kc @ (g - g.mean()) / (kc @ kc))
    return float(g.mean() - slope * k.mean()), slope


def _theil_sen_line(k: np.ndarray, g: np.ndarray) -> tuple[float, float]:
    i, j = np.triu_indices(k.size, 1)
    dk = k[j] - k[i]
    ok = dk != 0
    slope = float(np.median((g[j] - g[i])[ok] / dk[ok]))
    return float(np.median(g - slope * k)), slope


_FITTERS = {"ols": _ols_line, "theil_sen": _theil_sen_line}


def estimate_cell(pairs: Sequence[PairedQuote], tau_years: float | None = None, *,
                  method: str = "ols", min_strikes: int = 2,
                  b_band: tuple[float, float] | None = DEFAULT_B_BAND) -> CellEstimate:
    """Regress synthetic forwards on strikes across one cell.

    ``b_hat`` is minus the slope and ``f_hat`` the intercept divided by
    ``b_hat``. Raises :class:`CellError` when the strike cross-section is
    degenerate, the slope has the wrong sign, or ``b_hat`` leaves ``b_band``.
    """
    if len(pairs) < min_strikes:
        raise CellError("too few strikes")
    first = pairs[0]
    key = (first.market, first.quote_date, first.expiry)
    if any((p.market, p.quote_date, p.expiry) != key for p in pairs):
        raise ValueError("pairs span more than one cell")
    if tau_years is None:
        tau_years = year_fraction(first.quote_date, first.expiry)
    k = np.array([p.strike for p in pairs], dtype=float)
    g = np.array([p.synthetic_forward for p in pairs], dtype=float)
    if np.ptp(k) == 0:
        raise CellError("degenerate strikes")
    intercept, slope = _FITTERS[method](k, g)
    b_hat = -slope
    if not b_hat > 0:
        raise CellError("parity slope sign")
    if b_band is not None and not b_band[0] < b_hat < b_band[1]:
        raise CellError("discount factor out of band")
    f_hat = intercept / b_hat
    if not f_hat > 0:
        raise CellError("non-positive forward")
    resid = g - (intercept + slope * k)
    ba = np.median([p.call_spread + p.put_spread for p in pairs])
    return CellEstimate(first.market, first.quote_date, first.expiry, float(tau_years),
                        b_hat, f_hat, len(pairs), math.sqrt(float(np.mean(resid ** 2))), float(ba))


def estimate_all(cells: Mapping[tuple, Sequence[PairedQuote]], **kwargs
                 ) -> tuple[list[CellEstimate], list[tuple[tuple, str]]]:
    """Estimate every cell in key order; failures become ``(cell_key, reason)`` audit rows."""
    estimates, audit = [], []
    for key in sorted(cells):
        try:
            estimates.append(estimate_cell(cells[key], **kwargs))
        except CellError as exc:
            audit.append((key, exc.reason))
    return estimates, audit


def write_estimates(path, estimates: Iterable[CellEstimate]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ESTIMATE_COLUMNS)
        for e in estimates:
            w.writerow([e.market, e.quote_date.isoformat(), e.expiry.isoformat(), repr(float(e.tau_years)),
                        repr(float(e.b_hat)), repr(float(e.f_hat)), e.n_strikes, repr(float(e.resid_rmse)), repr(float(e.ba_median))])


def load_estimates(path) -> list[CellEstimate]:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ESTIMATE_COLUMNS:
            raise ValueError(f"{path}: expected header {','.join(ESTIMATE_COLUMNS)!r}")
        return [CellEstimate(r["market"], dt.date.fromisoformat(r["quote_date"]),
                             dt.date.fromisoformat(r["expiry"]), float(r["tau_years"]),
                             float(r["b_hat"]), float(r["f_hat"]), int(r["n_strikes"]),
                             float(r["resid_rmse"]), float(r["ba_median"]))
                for r in reader]
