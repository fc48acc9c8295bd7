"""Option-quote and daily-market ingestion, call/put pairing and sample filters."""
from __future__ import annotations

import csv
import datetime as dt
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

MARKETS = ("SPX", "RUT")
RIGHTS = ("C", "P")

QUOTE_COLUMNS = ["market", "quote_date", "expiry", "strike", "right", "bid", "ask", "quote_time"]
DAILY_COLUMNS = ["date", "market", "tr_index", "vol_pct", "ois_1y_pct", "ois_10y_pct", "nfci"]
REJECT_COLUMNS = ["row", "reason"]


class SchemaError(ValueError):
    """Header of an input CSV does not match the documented layout."""


@dataclass(frozen=True)
class OptionQuote:
    market: str
    quote_date: dt.date
    expiry: dt.date
    strike: float
    right: str
    bid: float
    ask: float
    quote_time: int  # minutes after midnight

    @property
    def mid(self) -> float:
        return 0.5 * (self.bid + self.ask)

    @property
    def spread(self) -> float:
        return self.ask - self.bid


@dataclass(frozen=True)
class PairedQuote:
    market: str
    quote_date: dt.date
    expiry: dt.date
    strike: float
    call_mid: float
    put_mid: float
    call_spread: float
    put_spread: float

    @property
    def synthetic_forward(self) -> float:
        return self.call_mid - self.put_mid


@dataclass(frozen=True)
class DailyMarketRow:
    date: dt.date
    market: str
    tr_index: float
    vol_pct: float
    ois_1y_pct: float
    ois_10y_pct: float
    nfci: float

    def __post_init__(self):
        if not self.tr_index > 0:
            raise ValueError(f"tr_index must be positive, got {self.tr_index}")
        if not self.vol_pct >= 0:
            raise ValueError(f"vol_pct must be non-negative, got {self.vol_pct}")


@dataclass(frozen=True)
class FilterConfig:
    """Quote filters; the defaults are artifact choices, not published thresholds."""

    min_mid: float = 0.05
    max_rel_spread: float = 0.50
    min_strikes_per_cell: int = 5
    snapshot_time: int = 15 * 60 + 45

    def __post_init__(self):
        if self.min_strikes_per_cell < 2:
            raise ValueError("min_strikes_per_cell must be at least 2")
        if self.min_mid < 0 or self.max_rel_spread <= 0:
            raise ValueError("min_mid must be >= 0 and max_rel_spread > 0")
        if not 0 <= self.snapshot_time < 24 * 60:
            raise ValueError("snapshot_time must be minutes in [0, 1440)")


@dataclass(frozen=True)
class Reject:
    row: int
    reason: str


def parse_time(text: str) -> int:
    """'HH:MM' -> minutes after midnight."""
    hh, mm = text.strip().split(":")[:2]
    minutes = int(hh) * 60 + int(mm)
    if not 0 <= minutes < 24 * 60:
        raise ValueError(f"time out of range: {text!r}")
    return minutes


def format_time(minutes: int) -> str:
    return f"{minutes // 60:02d}:{minutes % 60:02d}"


def _check_header(header: list[str] | None, expected: list[str], path) -> None:
    if header is None or [h.strip() for h in header] != expected:
        raise SchemaError(f"{path}: expected header {','.join(expected)!r}, got {header!r}")


def _parse_quote(rec: dict, market: str) -> OptionQuote:
    """Raise ValueError with a short reason for anything malformed."""
    if rec["market"].strip() != market:
        raise ValueError(f"market mismatch ({rec['market'].strip()})")
    right = rec["right"].strip().upper()
    right = {"CALL": "C", "PUT": "P"}.get(right, right)
    if right not in RIGHTS:
        raise ValueError(f"bad right {rec['right']!r}")
    try:
        quote_date = dt.date.fromisoformat(rec["quote_date"].strip())
        expiry = dt.date.fromisoformat(rec["expiry"].strip())
    except ValueError:
        raise ValueError("bad date") from None
    values = {}
    for name in ("strike", "bid", "ask"):
        try:
            values[name] = float(rec[name])
        except (TypeError, ValueError):
            raise ValueError(f"non-numeric {name}") from None
    try:
        quote_time = parse_time(rec["quote_time"])
    except (AttributeError, ValueError):
        raise ValueError("bad quote_time") from None
    if values["strike"] <= 0:
        raise ValueError("non-positive strike")
    if values["bid"] < 0:
        raise ValueError("negative bid")
    if values["ask"] < values["bid"]:
        raise ValueError("crossed quote")
    if expiry <= quote_date:
        raise ValueError("expiry not after quote_date")
    return OptionQuote(market, quote_date, expiry, values["strike"], right,
                       values["bid"], values["ask"], quote_time)


def load_quotes(path, market: str) -> tuple[list[OptionQuote], list[Reject]]:
    """Read an option-quote CSV.

    Malformed rows never abort the load; they come back as ``Reject(row, reason)``
    where ``row`` is the 1-based data-row number (header excluded).
    """
    if market not in MARKETS:
        raise ValueError(f"unknown market {market!r}")
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    quotes, rejects = [], []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        _check_header(reader.fieldnames, QUOTE_COLUMNS, path)
        for i, rec in enumerate(reader, start=1):
            if None in rec or any(v is None for v in rec.values()):
                rejects.append(Reject(i, "wrong field count"))
                continue
            try:
                quotes.append(_parse_quote(rec, market))
            except ValueError as exc:
                rejects.append(Reject(i, str(exc)))
    return quotes, rejects


def write_quotes(path, quotes: Iterable[OptionQuote]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(QUOTE_COLUMNS)
        for q in quotes:
            w.writerow([q.market, q.quote_date.isoformat(), q.expiry.isoformat(), repr(float(q.strike)),
                        q.right, repr(float(q.bid)), repr(float(q.ask)), format_time(q.quote_time)])


def write_rejects(path, rejects: Iterable[Reject]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REJECT_COLUMNS)
        for r in rejects:
            w.writerow([r.row, r.reason])


def load_daily(path) -> list[DailyMarketRow]:
    """Daily market CSV; unlike quotes, any bad row is a hard error."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    rows = []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        _check_header(reader.fieldnames, DAILY_COLUMNS, path)
        for i, rec in enumerate(reader, start=1):
            try:
                rows.append(DailyMarketRow(
                    date=dt.date.fromisoformat(rec["date"].strip()),
                    market=rec["market"].strip(),
                    tr_index=float(rec["tr_index"]),
                    vol_pct=float(rec["vol_pct"]),
                    ois_1y_pct=float(rec["ois_1y_pct"]),
                    ois_10y_pct=float(rec["ois_10y_pct"]),
                    nfci=float(rec["nfci"]),
                ))
            except (TypeError, ValueError, AttributeError) as exc:
                raise ValueError(f"{path}: row {i}: {exc}") from None
    return rows


def write_daily(path, rows: Iterable[DailyMarketRow]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DAILY_COLUMNS)
        for r in rows:
            w.writerow([r.date.isoformat(), r.market, repr(float(r.tr_index)), repr(float(r.vol_pct)),
                        repr(float(r.ois_1y_pct)), repr(float(r.ois_10y_pct)), repr(float(r.nfci))])


def daily_index(rows: Iterable[DailyMarketRow]) -> dict[tuple[str, dt.date], DailyMarketRow]:
    return {(r.market, r.date): r for r in rows}


CellKey = tuple  # (market, quote_date, expiry)


def _snapshot(quotes: list[OptionQuote], snapshot_time: int, audit: Counter) -> list[OptionQuote]:
    """One quote per contract per day: latest minute at or before the snapshot.

    Equal minutes resolve to the later row in input order.
    """
    best: dict[tuple, tuple[int, int, OptionQuote]] = {}
    for pos, q in enumerate(quotes):
        if q.quote_time > snapshot_time:
            audit["after snapshot"] += 1
            continue
        key = (q.market, q.quote_date, q.expiry, q.strike, q.right)
        rank = (q.quote_time, pos)
        prev = best.get(key)
        if prev is None:
            best[key] = (*rank, q)
        else:
            audit["superseded"] += 1
            if rank > prev[:2]:
                best[key] = (*rank, q)
    return [v[2] for v in best.values()]


def pair_and_filter(quotes: Iterable[OptionQuote], cfg: FilterConfig = FilterConfig()
                    ) -> tuple[dict[CellKey, list[PairedQuote]], Counter]:
    """Build strike-matched call/put pairs per (market, date, expiry) cell.

    Returns the surviving cells (pairs sorted by strike) and a Counter with one
    entry per filter reason plus ``"kept"``; every input quote lands in exactly
    one bucket.
    """
    quotes = list(quotes)
    audit: Counter = Counter()
    snap = _snapshot(quotes, cfg.snapshot_time, audit)

    legs: dict[tuple, dict[str, OptionQuote]] = defaultdict(dict)
    for q in snap:
        if q.mid < cfg.min_mid:
            audit["low price"] += 1
        elif q.spread / q.mid > cfg.max_rel_spread:
            audit["wide spread"] += 1
        else:
            legs[(q.market, q.quote_date, q.expiry, q.strike)][q.right] = q

    cells: dict[CellKey, list[PairedQuote]] = defaultdict(list)
    for (market, qdate, expiry, strike), pair in legs.items():
        if len(pair) != 2:
            audit["unpaired"] += 1
            continue
        c, p = pair["C"], pair["P"]
        cells[(market, qdate, expiry)].append(
            PairedQuote(market, qdate, expiry, strike, c.mid, p.mid, c.spread, p.spread))

    out = {}
    for key in sorted(cells):
        pairs = sorted(cells[key], key=lambda p: p.strike)
        if len(pairs) < cfg.min_strikes_per_cell:
            audit["too few strikes"] += 2 * len(pairs)
        else:
            out[key] = pairs
            audit["kept"] += 2 * len(pairs)
    return out, audit


def group_by_market(quotes: Iterable[OptionQuote]) -> Mapping[str, list[OptionQuote]]:
    groups: dict[str, list[OptionQuote]] = defaultdict(list)
    for q in quotes:
        groups[q.market].append(q)
    return groups
