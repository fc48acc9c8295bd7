import datetime as dt
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from carrygap.carry_gap_panel import CarryGapObservation
from carrygap.market_data import DailyMarketRow
from carrygap.path_risk import (SupportCapitalParams, average_burden, build_regressors, drift_adjusted_burden,
                                drift_proxies, expected_support_capital, gbm_mu_term, gbm_sigma_term,
                                rolling_drift_proxy, rolling_slopes)
from carrygap.synthetic_lab import business_days

DAY = dt.date(2020, 1, 2)


def brute_slope(y):
    """Slope of y on 0..n-1 from the textbook covariance ratio."""
    n = len(y)
    xm = (n - 1) / 2
    ym = sum(y) / n
    return sum((i - xm) * (v - ym) for i, v in enumerate(y)) / sum((i - xm) ** 2 for i in range(n))


def test_closed_forms():
    assert expected_support_capital(0.2, 1.0) == pytest.approx(0.159576912160573, rel=1e-14)
    assert expected_support_capital(0.3, 0.0) == 0.0
    assert average_burden(0.3, 0.25) == pytest.approx(0.0797884560802865, rel=1e-14)
    assert average_burden(0.2, 1.0) == pytest.approx(0.106384608107049, rel=1e-14)
    p = SupportCapitalParams(sigma=0.2, mu=0.1, q=1, tau=1.0)
    assert drift_adjusted_burden(p) == pytest.approx(0.0813846081070487, rel=1e-14)
    assert drift_adjusted_burden(SupportCapitalParams(0.2, 0.1, -1, 1.0)) == pytest.approx(0.131384608107049)
    assert drift_adjusted_burden(SupportCapitalParams(0.0, 0.0, 1, 1.0)) == 0.0
    with pytest.raises(ValueError):
        drift_adjusted_burden(SupportCapitalParams(0.0, 0.1, 1, 1.0))
    with pytest.raises(ValueError):
        SupportCapitalParams(0.2, 0.0, 2, 1.0)
    with pytest.raises(ValueError):
        average_burden(0.2, 0.0)


def test_gbm_terms():
    assert gbm_sigma_term(4.0, 20.0, 0.5) == pytest.approx(30.0901111225470, rel=1e-13)
    assert gbm_sigma_term(0.0, 20.0, 0.5) == 0.0
    assert gbm_mu_term(2.0, 0.1, 0.5) == pytest.approx(10.0)
    assert gbm_mu_term(2.0, -0.1, 0.5) == pytest.approx(-10.0)


@given(st.floats(0, 10), st.floats(1, 80), st.floats(0.02, 3), st.floats(0.1, 10))
def test_sigma_term_scaling(ois, vol, tau, k):
    base = gbm_sigma_term(ois, vol, tau)
    assert gbm_sigma_term(k * ois, vol, tau) == pytest.approx(k * base, rel=1e-12, abs=1e-300)
    assert gbm_sigma_term(ois, k * vol, tau) == pytest.approx(k * base, rel=1e-12, abs=1e-300)
    assert gbm_sigma_term(ois, vol, k * tau) == pytest.approx(math.sqrt(k) * base, rel=1e-12, abs=1e-300)


def test_rolling_slopes_exact_on_linear_series():
    a, c, n = 4.2, 3e-4, 10
    y = a + c * np.arange(50)
    out = rolling_slopes(y, n)
    assert np.isnan(out[:n]).all()
    assert np.abs(out[n:] - c).max() < 1e-12


def test_rolling_proxy_annualizes_and_omits_warmup():
    days = business_days(DAY, DAY + dt.timedelta(days=60))
    log_tr = 8.0 + 0.0004 * np.arange(len(days))
    s = rolling_drift_proxy(days, log_tr, n=20, market="SPX")
    assert s.dates[0] == days[20] and len(s.dates) == len(days) - 20
    assert max(abs(m - 252 * 0.0004) for m in s.mu_ann) < 1e-12
    with pytest.raises(ValueError):
        rolling_drift_proxy(days[::-1], log_tr, n=20)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 30), st.integers(0, 2**32 - 1))
def test_rolling_slopes_match_brute_force(n, seed):
    y = np.cumsum(np.random.default_rng(seed).normal(0, 0.01, n + 25))
    out = rolling_slopes(y, n)
    for t in range(n, y.size):
        assert out[t] == pytest.approx(brute_slope(list(y[t - n:t])), rel=1e-9, abs=1e-13)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 30), st.integers(0, 2**32 - 1), st.data())
def test_no_look_ahead(n, seed, data):
    rng = np.random.default_rng(seed)
    y = np.cumsum(rng.normal(0, 0.01, n + 25))
    t = data.draw(st.integers(n, y.size - 1))
    z = y.copy()
    z[t:] += rng.normal(0, 1.0, y.size - t)
    assert rolling_slopes(z, n)[t] == rolling_slopes(y, n)[t]


def _rows(days, market="SPX"):
    tr = 1000 * np.exp(0.0003 * np.arange(len(days)))
    return [DailyMarketRow(d, market, float(v), 20.0, 2.0, 2.5, 0.1) for d, v in zip(days, tr)]


def test_build_regressors_warmup_and_join():
    days = business_days(DAY, DAY + dt.timedelta(days=40))
    daily = _rows(days)
    proxy = drift_proxies(daily, n=10)
    exp = DAY + dt.timedelta(days=400)
    panel = [CarryGapObservation("SPX", d, exp, 0.5, 0.002, 0.99, 0.8) for d in days]
    panel.append(CarryGapObservation("RUT", days[-1], exp, 0.5, 0.002, 0.99, 0.8))
    rows, audit = build_regressors(panel, daily, proxy)
    assert len(rows) == len(days)
    assert sum(math.isnan(r.gbm_mu_1y) for r in rows) == 10
    reasons = [a[1] for a in audit]
    assert reasons.count("no daily market row") == 1 and reasons.count("no drift proxy (warm-up)") == 10
    late = rows[-1]
    assert late.gbm_mu_1y == pytest.approx(1e4 * 0.02 * 252 * 0.0003 * 0.5, rel=1e-9)
    assert late.gbm_sigma_1y == pytest.approx(gbm_sigma_term(2.0, 20.0, 0.5))
    assert late.gbm_sigma_10y == pytest.approx(gbm_sigma_term(2.5, 20.0, 0.5))
    assert late.cg_bp == pytest.approx(20.0) and late.nfci == 0.1
    strict, _ = build_regressors(panel, daily, proxy, require_drift=True)
    assert len(strict) == len(days) - 10
