"""Synthetic markets with a known carry gap, and Monte Carlo for the support-capital closed forms."""
from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numba
import numpy as np
from scipy.special import ndtr

from .implied_discount import year_fraction
from .market_data import DailyMarketRow, OptionQuote, write_daily, write_quotes
from .ois_curve import bootstrap_curve, discount_factor, write_ois
from .path_risk import (SupportCapitalParams, average_burden, drift_adjusted_burden, gbm_mu_term,
                        gbm_sigma_term, rolling_slopes, TRADING_DAYS)

TRUTH_COLUMNS = ["quote_date", "expiry", "b_true", "f_true", "cg_true_bp"]

MC_BLOCK = 4096  # antithetic pairs per independently seeded block


# ---------------------------------------------------------------------------
# Monte Carlo: time-averaged running maximum of a drifted Brownian shortfall
# ---------------------------------------------------------------------------

@numba.njit(cache=True)
def _running_max_kernel(z, e, drift, vol, bridge_var, bridge, out, out_zero):
    """Per antithetic pair: trapezoid sum of the running max over the step grid.

    With ``bridge`` the maximum inside each step is drawn exactly from the
    Brownian bridge between its endpoints (e is Exp(1)); otherwise only grid
    points count. ``out_zero`` receives the same statistic with zero drift on
    the same draws (for a control variate).
    """
    n_paths, n_steps = z.shape
    for i in range(n_paths):
        acc = 0.0
        acc0 = 0.0
        for sgn in (1.0, -1.0):
            x = 0.0
            x0 = 0.0
            run = 0.0
            run0 = 0.0
            tot = 0.0
            tot0 = 0.0
            for k in range(n_steps):
                dw = sgn * vol * z[i, k]
                x1 = x + drift + dw
                y1 = x0 + dw
                if bridge:
                    d = x1 - x
                    m = 0.5 * (x + x1 + math.sqrt(d * d + bridge_var * e[i, k]))
                    m0 = 0.5 * (x0 + y1 + math.sqrt(dw * dw + bridge_var * e[i, k]))
                else:
                    m = x1
                    m0 = y1
                if m > run:
                    run = m
                if m0 > run0:
                    run0 = m0
                tot += run
                tot0 += run0
                x = x1
                x0 = y1
            acc += tot - 0.5 * run
            acc0 += tot0 - 0.5 * run0
        out[i] = 0.5 * acc
        out_zero[i] = 0.5 * acc0


@dataclass(frozen=True)
class MCResult:
    estimate: float
    std_error: float
    n_paths: int
    n_steps: int
    control_variate: bool = False

    def z_score(self, target: float) -> float:
        return (self.estimate - target) / self.std_error if self.std_error > 0 else \
            (0.0 if self.estimate == target else math.inf)


def mc_running_max(sigma: float, mu: float = 0.0, q: int = 1, horizon: float = 1.0,
                   n_paths: int = 100_000, n_steps: int | None = None, seed: int | Sequence[int] = 0, *,
                   steps_per_year: int = 2000, bridge: bool = True, control_variate: bool = False
                   ) -> MCResult:
    """Monte Carlo of the life-averaged support capital E[(1/tau) int_0^tau l_u du].

    Simulates sup_{s<=u}(-q mu s - sigma B_s) on a uniform grid with antithetic
    pairs. Blocks of ``MC_BLOCK`` pairs are seeded from ``seed`` by position, so
    the result does not depend on how blocks are scheduled.

    ``control_variate`` subtracts the zero-drift statistic on the same draws and
    adds back its closed form; it only reduces variance when ``mu != 0``.
    """
    if sigma < 0 or horizon <= 0:
        raise ValueError("need sigma >= 0 and horizon > 0")
    if q not in (1, -1):
        raise ValueError("q must be +1 or -1")
    if n_steps is None:
        n_steps = max(1, int(round(steps_per_year * horizon)))
    if n_paths < 1000:
        raise ValueError("n_paths must be at least 1000")
    if n_steps < 100 * horizon:
        raise ValueError("need at least 100 steps per unit horizon")
    dt_ = horizon / n_steps
    n_pairs = (n_paths + 1) // 2
    n_blocks = -(-n_pairs // MC_BLOCK)
    vals = np.empty(n_pairs)
    vals0 = np.empty(n_pairs)
    for b, child in enumerate(np.random.SeedSequence(seed).spawn(n_blocks)):
        lo, hi = b * MC_BLOCK, min((b + 1) * MC_BLOCK, n_pairs)
        rng = np.random.default_rng(child)
        z = rng.standard_normal((hi - lo, n_steps))
        e = rng.standard_exponential((hi - lo, n_steps)) if bridge else np.zeros((1, 1))
        _running_max_kernel(z, e, -q * mu * dt_, sigma * math.sqrt(dt_), 2.0 * sigma ** 2 * dt_,
                            bridge, vals[lo:hi], vals0[lo:hi])
    scale = dt_ / horizon
    vals *= scale
    use_cv = control_variate and sigma > 0
    if use_cv:
        vals = vals - vals0 * scale + average_burden(sigma, horizon)
    se = float(vals.std(ddof=1) / math.sqrt(n_pairs)) if n_pairs > 1 else math.nan
    return MCResult(float(vals.mean()), se, 2 * n_pairs, n_steps, use_cv)


def mc_verification_table(n_paths: int = 100_000, steps_per_year: int = 2000, seed: int = 0,
                          sigmas=(0.1, 0.2, 0.4), horizons=(0.25, 1.0)) -> list[dict]:
    """Closed form vs Monte Carlo, one row per check.

    Zero-drift rows pass within 3 standard errors. The drift rows report the
    remainder of the first-order expansion (control-variate MC at sigma=0.2,
    tau=1, q=+1); the final row passes when halving mu cuts it at least 3x.
    """
    rows = []
    case = 0
    for sigma in sigmas:
        for tau in horizons:
            res = mc_running_max(sigma, 0.0, 1, tau, n_paths, seed=(seed, case), steps_per_year=steps_per_year)
            target = average_burden(sigma, tau)
            z = res.z_score(target)
            rows.append({"check": f"zero drift sigma={sigma} tau={tau}", "target": target,
                         "estimate": res.estimate, "std_error": res.std_error, "z": z, "pass": abs(z) <= 3})
            case += 1
    resid = {}
    for mu in (0.10, 0.05):
        res = mc_running_max(0.2, mu, 1, 1.0, n_paths, seed=(seed, case), steps_per_year=steps_per_year,
                             control_variate=True)
        target = drift_adjusted_burden(SupportCapitalParams(0.2, mu, 1, 1.0))
        resid[mu] = res.estimate - target
        rows.append({"check": f"drift mu={mu} first-order remainder", "target": target,
                     "estimate": res.estimate, "std_error": res.std_error, "z": res.z_score(target),
                     "pass": resid[mu] > 0})
        case += 1
    ratio = resid[0.10] / resid[0.05] if resid[0.05] != 0 else math.inf
    rows.append({"check": "remainder ratio mu=0.10 / mu=0.05", "target": 3.0, "estimate": ratio,
                 "std_error": math.nan, "z": math.nan, "pass": ratio >= 3.0})
    return rows


# ---------------------------------------------------------------------------
# Synthetic option markets
# ---------------------------------------------------------------------------

def black_scholes(forward, strike, tau, vol, discount):
    """European call and put under a lognormal forward, discounted by ``discount``."""
    forward, strike = np.asarray(forward, float), np.asarray(strike, float)
    sd = vol * np.sqrt(tau)
    d1 = (np.log(forward / strike) + 0.5 * sd ** 2) / sd
    d2 = d1 - sd
    call = discount * (forward * ndtr(d1) - strike * ndtr(d2))
    put = discount * (strike * ndtr(-d2) - forward * ndtr(-d1))
    return call, put


@dataclass(frozen=True)
class CarryGapModel:
    """Imposed carry gap (bp) linear in the path-risk regressors."""

    alpha: float = 0.0
    phi_1y: float = 0.0
    phi_10y: float = 0.0
    psi: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0
    noise_bp: float = 0.0
    drift_lookback: int = 504


@dataclass
class SyntheticMarketConfig:
    seed: int = 0
    market: str = "SPX"
    n_years: int = 2
    start_year: int = 2016
    warmup_days: int = 0
    spot0: float = 4000.0
    drift_true: float = 0.07
    vol_true: float = 0.20
    vol_index_vol: float = 0.0  # log-vol OU shock size for the reported vol index
    ois_1y_pct: float = 2.0
    ois_10y_pct: float = 2.5
    rate_vol_pct: float = 0.0  # annualized OU shock size of each OIS rate, in percent
    nfci_level: float = -0.4
    nfci_vol: float = 0.0
    cg_true_bp: float = 25.0
    cg_model: CarryGapModel | None = None
    expiry_months: tuple[float, ...] = (1.5, 2.5, 4.0, 6.0, 8.5, 12.0, 17.0, 24.0)
    strike_grid: tuple[float, ...] = tuple(np.round(np.linspace(-0.10, 0.10, 21), 4))
    half_spread: float = 0.0
    spread_jitter: float = 0.0  # cell half-spread = half_spread * (1 + U(-j, j))
    mid_noise_sd: float = 0.0
    ois_tenors: tuple[float, ...] = (1 / 12, 0.25, 0.5, 1.0, 2.0, 3.0, 5.0, 10.0)
    snapshot_time: int = 15 * 60 + 45

    def validate(self, min_strikes: int = 5) -> None:
        if self.vol_true <= 0:
            raise ValueError("vol_true must be positive")
        if len(self.strike_grid) < min_strikes:
            raise ValueError(f"strike_grid needs at least {min_strikes} entries")
        if self.n_years < 1 or not self.expiry_months:
            raise ValueError("need n_years >= 1 and at least one expiry")
        if self.half_spread < 0 or self.mid_noise_sd < 0 or not 0 <= self.spread_jitter < 1:
            raise ValueError("spread/noise settings out of range")
        if max(self.expiry_months) / 12 > max(self.ois_tenors) * 1.1:
            raise ValueError("expiries extend past the OIS curve")
        if self.cg_model is not None and self.cg_model.psi != 0 \
                and self.warmup_days < self.cg_model.drift_lookback:
            raise ValueError("warmup_days must cover the drift lookback when psi != 0")


@dataclass(frozen=True)
class TruthRow:
    market: str
    quote_date: dt.date
    expiry: dt.date
    b_true: float
    f_true: float
    cg_true_bp: float


@dataclass
class SyntheticMarket:
    config: SyntheticMarketConfig
    quotes: list[OptionQuote]
    daily: list[DailyMarketRow]
    ois: dict[dt.date, list[tuple[float, float]]]
    truth: list[TruthRow] = field(default_factory=list)

    def write(self, out_dir) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"quotes": out / "quotes.csv", "daily": out / "daily.csv",
                 "ois": out / "ois.csv", "truth": out / "truth.csv"}
        write_quotes(paths["quotes"], self.quotes)
        write_daily(paths["daily"], self.daily)
        write_ois(paths["ois"], self.ois)
        write_truth(paths["truth"], self.truth)
        return paths


def write_truth(path, rows: Sequence[TruthRow]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRUTH_COLUMNS)
        for t in rows:
            w.writerow([t.quote_date.isoformat(), t.expiry.isoformat(), repr(float(t.b_true)),
                        repr(float(t.f_true)), repr(float(t.cg_true_bp))])


def business_days(start: dt.date, end: dt.date) -> list[dt.date]:
    days = np.arange(np.datetime64(start, "D"), np.datetime64(end, "D") + 1)
    return [d.astype(dt.date) for d in days[np.is_busday(days)]]


def _ou(rng, n, level, shock, kappa=0.5):
    """Daily OU path in level units; ``shock`` is the annualized shock size."""
    x = np.empty(n)
    x[0] = level
    h = 1.0 / TRADING_DAYS
    eps = rng.standard_normal(n)
    for t in range(1, n):
        x[t] = x[t - 1] + kappa * (level - x[t - 1]) * h + shock * math.sqrt(h) * eps[t]
    return x


def _ois_quotes(r1: float, r10: float, tenors: Sequence[float]) -> list[tuple[float, float]]:
    """Zero rates flat at the 1y level below 1y, linear to the 10y level beyond."""
    return [(t, r1 if t <= 1 else r1 + (r10 - r1) * (t - 1) / 9) for t in tenors]


def generate_market(cfg: SyntheticMarketConfig) -> SyntheticMarket:
    """Simulate an index, its rate/vol/NFCI environment and the parity-consistent option chain.

    Each cell is priced with F = S / D_ois and B = D_ois exp(-cg tau), so the
    option-implied discount factor sits exactly ``cg`` below the OIS curve.
    """
    cfg.validate()
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(7)]
    path_rng, rate_rng, vol_rng, nfci_rng, spread_rng, noise_rng, cg_rng = streams

    first = dt.date(cfg.start_year, 1, 1)
    last = dt.date(cfg.start_year + cfg.n_years - 1, 12, 31)
    sample = business_days(first, last)
    warm = business_days(first - dt.timedelta(days=cfg.warmup_days * 2 + 10), first - dt.timedelta(days=1))
    warm = warm[len(warm) - cfg.warmup_days:] if cfg.warmup_days else []
    days = warm + sample
    n = len(days)

    h = 1.0 / TRADING_DAYS
    rets = (cfg.drift_true - 0.5 * cfg.vol_true ** 2) * h \
        + cfg.vol_true * math.sqrt(h) * path_rng.standard_normal(n)
    rets[0] = 0.0
    log_tr = math.log(cfg.spot0) + np.cumsum(rets)
    tr = np.exp(log_tr)
    r1 = _ou(rate_rng, n, cfg.ois_1y_pct, cfg.rate_vol_pct)
    r10 = _ou(rate_rng, n, cfg.ois_10y_pct, cfg.rate_vol_pct)
    vol_idx = 100 * cfg.vol_true * np.exp(_ou(vol_rng, n, 0.0, cfg.vol_index_vol, kappa=4.0))
    nfci = _ou(nfci_rng, n, cfg.nfci_level, cfg.nfci_vol)

    daily = [DailyMarketRow(d, cfg.market, float(tr[i]), float(vol_idx[i]), float(r1[i]),
                            float(r10[i]), float(nfci[i])) for i, d in enumerate(days)]

    model = cfg.cg_model
    mu_hat = None
    if model is not None and model.psi != 0:
        mu_hat = TRADING_DAYS * rolling_slopes(log_tr, model.drift_lookback)

    offsets = np.asarray(cfg.strike_grid, float)
    quotes: list[OptionQuote] = []
    truth: list[TruthRow] = []
    ois: dict[dt.date, list[tuple[float, float]]] = {}
    for i in range(len(warm), n):
        day = days[i]
        ois[day] = _ois_quotes(float(r1[i]), float(r10[i]), cfg.ois_tenors)
        curve = bootstrap_curve(day, ois[day])
        spot = float(tr[i])
        for months in cfg.expiry_months:
            expiry = day + dt.timedelta(days=int(round(months / 12 * 365.25)))
            tau = year_fraction(day, expiry)
            d_ois = discount_factor(curve, tau)
            half = cfg.half_spread * (1 + cfg.spread_jitter * spread_rng.uniform(-1, 1))
            if model is None:
                cg_bp = cfg.cg_true_bp
            else:
                drift_term = gbm_mu_term(r1[i], mu_hat[i], tau) if mu_hat is not None else 0.0
                cg_bp = (model.alpha
                         + model.phi_1y * gbm_sigma_term(r1[i], vol_idx[i], tau)
                         + model.phi_10y * gbm_sigma_term(r10[i], vol_idx[i], tau)
                         + model.psi * drift_term
                         + model.beta * 4 * half / tau
                         + model.gamma * nfci[i]
                         + model.noise_bp * cg_rng.standard_normal())
            b_true = d_ois * math.exp(-cg_bp / 1e4 * tau)
            f_true = spot / d_ois
            strikes = np.round(f_true * (1 + offsets))
            call, put = black_scholes(f_true, strikes, tau, vol_idx[i] / 100, b_true)
            if cfg.mid_noise_sd > 0:
                call = call + cfg.mid_noise_sd * noise_rng.standard_normal(call.size)
                put = put + cfg.mid_noise_sd * noise_rng.standard_normal(put.size)
            for k, c, p in zip(strikes, call, put):
                for right, mid in (("C", c), ("P", p)):
                    bid = max(float(mid) - half, 0.0)
                    quotes.append(OptionQuote(cfg.market, day, expiry, float(k), right, bid,
                                              max(float(mid) + half, bid), cfg.snapshot_time))
            truth.append(TruthRow(cfg.market, day, expiry, b_true, f_true, cg_bp))
    return SyntheticMarket(cfg, quotes, daily, ois, truth)
