import datetime as dt
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from carrygap.carry_gap_panel import (BUCKETS, CarryGapObservation, build_panel, carry_gap,
                                      cumulative_accrual_zscore, daily_median, load_panel, maturity_bucket,
                                      write_panel)
from carrygap.implied_discount import CellEstimate
from carrygap.market_data import DailyMarketRow
from carrygap.ois_curve import bootstrap_curve, discount_factor
from carrygap.pipeline import estimate_panel
from carrygap.synthetic_lab import SyntheticMarketConfig, generate_market

DAY = dt.date(2022, 5, 2)


def obs(cg_bp, day=DAY, tau=0.5, market="SPX", bucket=None):
    return CarryGapObservation(market, day, day + dt.timedelta(days=int(tau * 365.25)), tau, cg_bp / 1e4,
                               1.0, bucket or maturity_bucket(tau))


def test_carry_gap_values():
    assert carry_gap(0.98, 0.98, 0.5) == 0.0
    # 2 ln(0.99/0.98), evaluated at 30 digits
    assert carry_gap(0.99, 0.98, 0.5) == pytest.approx(0.0203047429280360144, rel=1e-13)
    assert 1e4 * carry_gap(0.99, 0.98, 0.5) == pytest.approx(203.047429, abs=1e-6)
    with pytest.raises(ValueError):
        carry_gap(0.99, 0.0, 0.5)


@given(st.floats(0.5, 1.0), st.floats(0.5, 1.0), st.floats(0.02, 3.0), st.floats(0.1, 10.0))
def test_ratio_invariance_and_reconstruction(d, b, tau, k):
    cg = carry_gap(d, b, tau)
    assert carry_gap(k * d, k * b, tau) == pytest.approx(cg, rel=1e-9, abs=1e-12)
    assert d * math.exp(-cg * tau) == pytest.approx(b, rel=1e-12)


def test_buckets():
    assert maturity_bucket(1 / 12) == "1-2m"
    assert maturity_bucket(2 / 12) == "2-3m"
    assert maturity_bucket(6.9 / 12) == "5-7m"
    assert maturity_bucket(7 / 12) == "7-10m"
    assert maturity_bucket(2.0) == "21m+"
    assert maturity_bucket(0.5 / 12) == "1-2m"
    assert len(BUCKETS) == 8


def estimate(day, tau, b):
    return CellEstimate("SPX", day, day + dt.timedelta(days=round(tau * 365.25)), tau, b, 4000.0, 5, 0.0, 0.4)


def test_build_panel_and_missing_curve():
    curve = bootstrap_curve(DAY, [(0.25, 2.0), (1.0, 2.5)])
    est = [estimate(DAY, 0.5, 0.985), estimate(DAY, 0.75, 0.98)]
    panel, audit = build_panel(est, {DAY: curve})
    assert len(panel) == 2 and audit == []
    o = panel[0]
    assert o.cg == pytest.approx(math.log(discount_factor(curve, 0.5) / 0.985) / 0.5, rel=1e-14)
    assert o.cg_bp == 1e4 * o.cg
    assert o.ba_over_tau == pytest.approx(0.8)
    assert o.d_ois * math.exp(-o.cg * o.tau_years) == pytest.approx(0.985, rel=1e-12)
    other = DAY + dt.timedelta(days=1)
    panel, audit = build_panel([estimate(other, 0.5, 0.98)], {DAY: curve})
    assert panel == [] and audit[0][1] == "no OIS curve"


def test_imposed_wedge_round_trip():
    m = generate_market(SyntheticMarketConfig(seed=4, n_years=1, cg_true_bp=25.0, half_spread=0.05,
                                              expiry_months=(2.0, 5.0, 11.0)))
    res = estimate_panel(m.quotes, m.ois)
    assert len(res.panel) == len(m.truth)
    assert max(abs(o.cg_bp - 25.0) for o in res.panel) < 1.0


def test_daily_median():
    other = DAY + dt.timedelta(days=1)
    panel = [obs(10), obs(20), obs(90), obs(5, day=other), obs(10, market="RUT")]
    assert daily_median(panel, "SPX") == [(DAY, 20.0), (other, 5.0)]
    even = [obs(v) for v in (40, 10, 30, 20)]
    assert daily_median(even, "SPX") == [(DAY, 25.0)]


@given(st.lists(st.floats(-100, 100), min_size=3, max_size=15).filter(lambda v: len(v) % 2 == 1),
       st.randoms(use_true_random=False), st.floats(200, 1e4))
def test_median_order_invariant_and_outlier_robust(values, rnd, outlier):
    panel = [obs(v) for v in values]
    med = daily_median(panel, "SPX")
    shuffled = list(panel)
    rnd.shuffle(shuffled)
    assert daily_median(shuffled, "SPX") == med
    top = int(np.argmax(values))
    panel[top] = obs(outlier)
    assert daily_median(panel, "SPX")[0][1] == pytest.approx(med[0][1])


def _daily(days, tr):
    return [DailyMarketRow(d, "SPX", t, 20.0, 2.0, 2.5, 0.0) for d, t in zip(days, tr)]


def test_cumulative_accrual_constant_series():
    days = [DAY + dt.timedelta(days=i) for i in range(20)]
    panel = [obs(12.0, day=d) for d in days]
    dates, zc, zt = cumulative_accrual_zscore(panel, _daily(days, np.exp(np.arange(20) * 0.01)), "SPX", "5-7m")
    assert dates == days
    assert np.allclose(np.diff(zc), np.diff(zc)[0])
    assert zc.mean() == pytest.approx(0, abs=1e-12) and zc.std() == pytest.approx(1, abs=1e-12)
    # cumulated constant and log of an exponential are both linear in time
    assert np.corrcoef(zc, zt)[0, 1] == pytest.approx(1.0, abs=1e-12)


def test_cumulative_accrual_matches_direct_recomputation():
    rng = np.random.default_rng(3)
    days = [DAY + dt.timedelta(days=i) for i in range(60)]
    values = rng.normal(20, 5, size=(60, 3))
    panel = [obs(v, day=d) for d, row in zip(days, values) for v in row]
    tr = 4000 * np.exp(np.cumsum(rng.normal(0.0005, 0.01, 60)))
    _, zc, zt = cumulative_accrual_zscore(panel, _daily(days, tr), "SPX", "5-7m")
    # column by column, as a spreadsheet would
    med = [sorted(r)[1] for r in values]
    cum, total = [], 0.0
    for v in med:
        total += v
        cum.append(total)
    mean = sum(cum) / len(cum)
    sd = math.sqrt(sum((c - mean) ** 2 for c in cum) / len(cum))
    logs = [math.log(t) for t in tr]
    lm = sum(logs) / len(logs)
    ls = math.sqrt(sum((x - lm) ** 2 for x in logs) / len(logs))
    expected_corr = sum((c - mean) / sd * (x - lm) / ls for c, x in zip(cum, logs)) / len(cum)
    assert np.corrcoef(zc, zt)[0, 1] == pytest.approx(expected_corr, rel=1e-10)
    with pytest.raises(ValueError):
        cumulative_accrual_zscore(panel, _daily(days, tr), "SPX", "21m+")


def test_panel_csv_round_trip(tmp_path):
    panel = [obs(12.5), obs(-3.25, tau=1.9)]
    write_panel(tmp_path / "p.csv", panel)
    loaded = load_panel(tmp_path / "p.csv")
    assert [o.cg_bp for o in loaded] == pytest.approx([12.5, -3.25], rel=1e-15)
    assert [o.bucket for o in loaded] == [o.bucket for o in panel]
