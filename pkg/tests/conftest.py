import datetime as dt
import warnings

import pytest

from carrygap.market_data import OptionQuote, PairedQuote
from carrygap.ois_curve import NegativeForwardWarning
from carrygap.synthetic_lab import CarryGapModel, SyntheticMarketConfig

D0 = dt.date(2020, 3, 2)
EXP = dt.date(2020, 9, 1)


@pytest.fixture(autouse=True)
def _quiet_curves():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NegativeForwardWarning)
        yield


def quote(strike, right, bid, ask, *, market="SPX", day=D0, expiry=EXP, minute=15 * 60 + 45):
    return OptionQuote(market, day, expiry, float(strike), right, float(bid), float(ask), minute)


def parity_pairs(b=0.98, f=4000.0, strikes=(3800, 3900, 4000, 4100, 4200), noise=None, spread=0.2):
    """Pairs whose synthetic forward is exactly b (f - K), plus optional per-strike noise."""
    out = []
    for i, k in enumerate(strikes):
        g = b * (f - k) + (noise[i] if noise is not None else 0.0)
        put = 50.0
        out.append(PairedQuote("SPX", D0, EXP, float(k), put + g, put, spread, spread))
    return out


def regression_config(seed=11, psi=0.119, lookback=504, noise_bp=3.0, n_years=10, **kw):
    """10-year synthetic market whose carry gap follows the extended specification."""
    model = CarryGapModel(alpha=25.0, phi_1y=-0.5, phi_10y=0.4, psi=psi, beta=0.2, gamma=-20.0,
                          noise_bp=noise_bp, drift_lookback=lookback)
    base = dict(seed=seed, n_years=n_years, warmup_days=640, cg_model=model, rate_vol_pct=1.0,
                nfci_vol=0.5, vol_index_vol=1.0, half_spread=0.25, spread_jitter=0.5,
                strike_grid=(-0.1, -0.05, 0.0, 0.05, 0.1))
    base.update(kw)
    return SyntheticMarketConfig(**base)


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, title: str, ok: bool, detail: str) -> None:
    """Log one acceptance verdict; the lines are echoed in the terminal summary."""
    line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
