"""Daily OIS discount curves: pillar bootstrap and log-linear evaluation."""
from __future__ import annotations

import csv
import datetime as dt
import math
import warnings
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

OIS_COLUMNS = ["date", "tenor_years", "rate_pct"]

# Extrapolation past the last pillar is allowed up to this multiple of its tenor.
EXTRAPOLATION_LIMIT = 1.1

# rate (decimal), tenor (years) -> discount factor
CONVENTIONS: dict[str, Callable[[float, float], float]] = {
    "continuous": lambda r, t: math.exp(-r * t),
    "simple": lambda r, t: 1.0 / (1.0 + r * t),
    "annual": lambda r, t: (1.0 + r) ** (-t),
}


class CurveError(ValueError):
    pass


class NegativeForwardWarning(UserWarning):
    """Discount factors rise with tenor somewhere on the curve."""


@dataclass(frozen=True)
class OisCurve:
    curve_date: dt.date
    tenors: tuple[float, ...]
    discount_factors: tuple[float, ...]

    def __post_init__(self):
        if len(self.tenors) != len(self.discount_factors) or not self.tenors:
            raise CurveError("curve needs at least one pillar")
        if any(b <= a for a, b in zip(self.tenors, self.tenors[1:])) or self.tenors[0] <= 0:
            raise CurveError("pillar tenors must be positive and strictly increasing")
        if any(not (d > 0 and math.isfinite(d)) for d in self.discount_factors):
            raise CurveError("discount factors must be positive and finite")
        if not self.is_monotone:
            warnings.warn("OIS curve with negative forward rates: monotonicity waived",
                          NegativeForwardWarning, stacklevel=3)

    @property
    def is_monotone(self) -> bool:
        dfs = (1.0, *self.discount_factors)
        return all(b <= a for a, b in zip(dfs, dfs[1:]))

    @property
    def pillars(self) -> list[tuple[float, float]]:
        return list(zip(self.tenors, self.discount_factors))

    @property
    def max_tenor(self) -> float:
        return self.tenors[-1]

    def __call__(self, tau_years: float) -> float:
        return discount_factor(self, tau_years)


def bootstrap_curve(curve_date: dt.date, quotes: Sequence[tuple[float, float]],
                    convention: str = "continuous") -> OisCurve:
    """Pillar discount factors from (tenor_years, zero rate in percent) quotes.

    Inputs are read as zero rates under ``convention``; with the default
    continuous compounding DF = exp(-r * tenor).
    """
    if not quotes:
        raise CurveError(f"{curve_date}: no OIS quotes")
    try:
        to_df = CONVENTIONS[convention]
    except KeyError:
        raise CurveError(f"unknown rate convention {convention!r}") from None
    tenors = [float(t) for t, _ in quotes]
    if len(set(tenors)) != len(tenors):
        raise CurveError(f"{curve_date}: duplicate tenors")
    if any(not (t > 0 and math.isfinite(t)) for t in tenors):
        raise CurveError(f"{curve_date}: tenors must be positive")
    if any(not math.isfinite(float(r)) for _, r in quotes):
        raise CurveError(f"{curve_date}: non-finite rate")
    pillars = sorted((float(t), to_df(float(r) / 100.0, float(t))) for t, r in quotes)
    return OisCurve(curve_date, tuple(t for t, _ in pillars), tuple(d for _, d in pillars))


def discount_factor(curve: OisCurve, tau_years: float) -> float:
    """Log-linear interpolation in (tenor, log DF), anchored at DF(0) = 1."""
    tau = float(tau_years)
    if not tau > 0:
        raise CurveError(f"tau must be positive, got {tau}")
    if tau > curve.max_tenor * EXTRAPOLATION_LIMIT:
        raise CurveError(f"tau={tau:.4f}y beyond curve range ({curve.max_tenor}y x {EXTRAPOLATION_LIMIT})")
    ts = (0.0, *curve.tenors)
    logs = (0.0, *(math.log(d) for d in curve.discount_factors))
    # index of the segment [ts[i-1], ts[i]] containing tau; the last segment extends
    i = next((k for k in range(1, len(ts)) if tau <= ts[k]), len(ts) - 1)
    if tau == ts[i]:
        return curve.discount_factors[i - 1]
    t0, t1 = ts[i - 1], ts[i]
    w = (tau - t0) / (t1 - t0)
    return math.exp(logs[i - 1] + w * (logs[i] - logs[i - 1]))


def zero_rate(curve: OisCurve, tau_years: float) -> float:
    """Continuously-compounded zero rate (decimal) at tau."""
    return -math.log(discount_factor(curve, tau_years)) / tau_years


def load_ois(path) -> dict[dt.date, list[tuple[float, float]]]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    quotes: dict[dt.date, list[tuple[float, float]]] = defaultdict(list)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [h.strip() for h in reader.fieldnames] != OIS_COLUMNS:
            raise ValueError(f"{path}: expected header {','.join(OIS_COLUMNS)!r}")
        for i, rec in enumerate(reader, start=1):
            try:
                quotes[dt.date.fromisoformat(rec["date"].strip())].append(
                    (float(rec["tenor_years"]), float(rec["rate_pct"])))
            except (TypeError, ValueError, AttributeError) as exc:
                raise ValueError(f"{path}: row {i}: {exc}") from None
    return dict(sorted(quotes.items()))


def write_ois(path, quotes: dict[dt.date, Iterable[tuple[float, float]]]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(OIS_COLUMNS)
        for day in sorted(quotes):
            for tenor, rate in quotes[day]:
                w.writerow([day.isoformat(), repr(float(tenor)), repr(float(rate))])


def build_curves(quotes: dict[dt.date, Sequence[tuple[float, float]]], convention: str = "continuous"
                 ) -> tuple[dict[dt.date, OisCurve], list[tuple[dt.date, str]]]:
    """Bootstrap every date; dates whose construction fails go to the audit list."""
    curves, failed = {}, []
    for day in sorted(quotes):
        try:
            curves[day] = bootstrap_curve(day, quotes[day], convention)
        except CurveError as exc:
            failed.append((day, str(exc)))
    return curves, failed
