import datetime as dt
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from carrygap.econometrics import (RankDeficiencyError, RegressorRow, date_scores, fit_by_market,
                                   hac_covariance, load_regressors, long_run_covariance, ols_fit, run_spec,
                                   significance_stars, write_regressors)

DAY = dt.date(2019, 1, 2)


def random_problem(seed, n_dates=40, per_date=3, k=4):
    rng = np.random.default_rng(seed)
    n = n_dates * per_date
    X = np.column_stack([np.ones(n), rng.normal(size=(n, k - 1))])
    dates = np.repeat(np.arange(n_dates), per_date)
    y = X @ rng.normal(size=k) + rng.normal(size=n) + 0.5 * rng.normal(size=n_dates)[dates]
    return X, y, dates


def brute_force_hac(X, e, dates, L):
    """Explicit double sum over date pairs with Bartlett weights."""
    uniq = sorted(set(dates.tolist()))
    pos = {d: i for i, d in enumerate(uniq)}
    k = X.shape[1]
    S = [[0.0] * k for _ in uniq]
    for i in range(len(e)):
        for j in range(k):
            S[pos[dates[i]]][j] += X[i, j] * e[i]
    omega = np.zeros((k, k))
    for a in range(len(uniq)):
        for b in range(len(uniq)):
            lag = abs(a - b)
            if lag <= L:
                omega += (1 - lag / (L + 1)) * np.outer(S[a], S[b])
    bread = np.linalg.inv(X.T @ X)
    return bread @ omega @ bread


def test_ols_matches_normal_equations():
    X, y, dates = random_problem(1)
    fit = ols_fit(X, y, dates=dates)
    assert np.allclose(fit.coefficients, np.linalg.solve(X.T @ X, X.T @ y), rtol=1e-10, atol=1e-12)
    e = y - X @ fit.coefficients
    assert fit.r2 == pytest.approx(1 - e @ e / ((y - y.mean()) ** 2).sum())
    n, k = X.shape
    assert fit.adj_r2 == pytest.approx(1 - (1 - fit.r2) * (n - 1) / (n - k))
    assert fit.rmse == pytest.approx(math.sqrt(e @ e / n)) and fit.n_dates == 40


@pytest.mark.parametrize("L", [0, 1, 5, 21])
def test_hac_matches_brute_force(L):
    X, y, dates = random_problem(2, n_dates=30)
    fit = ols_fit(X, y)
    got = hac_covariance(X, fit.residuals, dates, max_lag=L)
    assert np.allclose(got, brute_force_hac(X, fit.residuals, dates, L), rtol=1e-10, atol=1e-14)


def test_hac_zero_with_iid_scores_is_close_to_white():
    rng = np.random.default_rng(5)
    n = 4000
    X = np.column_stack([np.ones(n), rng.normal(size=n)])
    y = X @ [1.0, 2.0] + rng.normal(size=n)
    fit = ols_fit(X, y)
    hac = np.sqrt(np.diag(hac_covariance(X, fit.residuals, np.arange(n), 0)))
    classical = np.sqrt(np.diag(fit.residuals @ fit.residuals / (n - 2) * np.linalg.inv(X.T @ X)))
    assert np.allclose(hac, classical, rtol=0.1)


def test_exact_fit_has_zero_se():
    X, _, dates = random_problem(3)
    y = X @ [1.0, -2.0, 0.5, 3.0]
    fit = ols_fit(X, y)
    cov = hac_covariance(X, fit.residuals, dates, 21)
    assert np.abs(cov).max() < 1e-20 and fit.r2 == pytest.approx(1.0)


def test_mean_aggregate_equals_sum_on_balanced_panel():
    X, y, dates = random_problem(4)
    e = ols_fit(X, y).residuals
    assert np.allclose(date_scores(X, e, dates, "mean"), date_scores(X, e, dates, "sum"))
    with pytest.raises(ValueError):
        date_scores(X, e, dates, "median")


def test_errors():
    X, y, dates = random_problem(6)
    with pytest.raises(ValueError):
        hac_covariance(X, y, np.zeros_like(dates), 5)
    with pytest.raises(ValueError):
        hac_covariance(X, y, dates, -1)
    with pytest.raises(ValueError):
        ols_fit(X[:3], y[:3])


def test_significance_stars():
    assert significance_stars(2.6) == "***" and significance_stars(-2.0) == "**"
    assert significance_stars(1.7) == "*" and significance_stars(1.0) == "" and significance_stars(math.nan) == ""


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 100), st.integers(0, 10))
def test_rescaling_and_order_invariance(seed, c, L):
    X, y, dates = random_problem(seed, n_dates=15, per_date=2, k=3)
    fit = ols_fit(X, y)
    cov = hac_covariance(X, fit.residuals, dates, L)
    Xs = X.copy()
    Xs[:, 1] *= c
    fit_s = ols_fit(Xs, y)
    cov_s = hac_covariance(Xs, fit_s.residuals, dates, L)
    assert fit_s.coefficients[1] * c == pytest.approx(fit.coefficients[1], rel=1e-8)
    assert math.sqrt(cov_s[1, 1]) * c == pytest.approx(math.sqrt(cov[1, 1]), rel=1e-7)
    perm = np.random.default_rng(seed).permutation(len(y))
    fit_p = ols_fit(X[perm], y[perm])
    cov_p = hac_covariance(X[perm], fit_p.residuals, dates[perm], L)
    assert np.allclose(cov_p, cov, rtol=1e-8, atol=1e-14)
    # Bartlett-weighted long-run covariance is positive semi-definite
    S = date_scores(X, fit.residuals, dates)
    assert np.linalg.eigvalsh(long_run_covariance(S, L)).min() > -1e-10 * np.abs(S).max() ** 2


def rows_from(X, y, dates, market="SPX", mu_nan=()):
    out = []
    for i, (x, v, d) in enumerate(zip(X, y, dates)):
        mu = math.nan if i in mu_nan else x[3]
        out.append(RegressorRow(market, DAY + dt.timedelta(days=int(d)), 0.5, float(v), x[1], x[2], mu, x[4], x[5]))
    return out


def design(seed, n_dates=60, per_date=2):
    rng = np.random.default_rng(seed)
    n = n_dates * per_date
    X = np.column_stack([np.ones(n), rng.normal(size=(n, 5))])
    dates = np.repeat(np.arange(n_dates), per_date)
    y = X @ [10.0, 1.0, -1.0, 0.5, 2.0, -3.0] + 0.1 * rng.normal(size=n)
    return X, y, dates


def test_run_spec_extended_and_warmup_drop():
    X, y, dates = design(7)
    rows = rows_from(X, y, dates, mu_nan=set(range(10)))
    ext = run_spec(rows, "extended")
    assert ext.names == ["intercept", "gbm_sigma_1y", "gbm_sigma_10y", "gbm_mu_1y", "ba_over_tau", "nfci"]
    assert ext.n_obs == len(rows) - 10 and ext.n_dropped == 10
    assert ext.coef("gbm_mu_1y") == pytest.approx(0.5, abs=0.05)
    base = run_spec(rows, "baseline")
    assert len(base.names) == 5 and base.n_obs == len(rows)
    d = ext.to_dict()
    assert [c["name"] for c in d["coefficients"]] == ext.names and d["n_dropped"] == 10


def test_rank_deficiency_names_column():
    X, y, dates = design(8)
    X[:, 3] = 2.0 * X[:, 1]
    with pytest.raises(RankDeficiencyError) as info:
        run_spec(rows_from(X, y, dates), "extended")
    assert info.value.columns == ["gbm_mu_1y"]


def test_pooled_dummy_and_separate_scope():
    X, y, dates = design(9)
    rows = rows_from(X, y, dates, "SPX") + rows_from(X, y, dates, "RUT")
    pooled = run_spec(rows, "extended", "pooled_common")
    assert pooled.coef("spx_dummy") == pytest.approx(0.0, abs=1e-10)
    assert pooled.n_dates == 60
    with pytest.raises(ValueError):
        run_spec(rows, "extended", "separate")
    fits = fit_by_market(rows, "extended")
    assert sorted(fits) == ["RUT", "SPX"]
    assert np.allclose(fits["RUT"].coefficients, fits["SPX"].coefficients)


def test_regressor_csv_round_trip(tmp_path):
    X, y, dates = design(10, n_dates=5)
    rows = rows_from(X, y, dates, mu_nan={0})
    write_regressors(tmp_path / "r.csv", rows)
    loaded = load_regressors(tmp_path / "r.csv")
    assert math.isnan(loaded[0].gbm_mu_1y)
    assert loaded[1:] == rows[1:]
