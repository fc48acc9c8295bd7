"""Scan the drift-proxy lookback on a market whose drift term uses a known lookback.

    python3 scripts/horizon_scan_demo.py --true-lookback 400 --out scan.svg
"""
import argparse

from carrygap.pipeline import estimate_panel, rows_builder
from carrygap.reporting import plot_horizon_scan
from carrygap.synthetic_lab import CarryGapModel, SyntheticMarketConfig, generate_market
from carrygap.validation import DEFAULT_SCAN_GRID, horizon_scan


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--true-lookback", type=int, default=400)
    ap.add_argument("--years", type=int, default=10)
    ap.add_argument("--seed", type=int, default=3)
    ap.add_argument("--out", help="optional SVG path for the scan plot")
    args = ap.parse_args()
    model = CarryGapModel(alpha=25.0, phi_1y=-0.5, phi_10y=0.4, psi=0.119, beta=0.2, gamma=-20.0,
                          noise_bp=3.0, drift_lookback=args.true_lookback)
    cfg = SyntheticMarketConfig(seed=args.seed, n_years=args.years, warmup_days=max(DEFAULT_SCAN_GRID) + 10,
                                cg_model=model, rate_vol_pct=1.0, nfci_vol=0.5, vol_index_vol=1.0,
                                half_spread=0.25, spread_jitter=0.5, expiry_months=(2.0, 6.0, 12.0),
                                strike_grid=(-0.1, -0.05, 0.0, 0.05, 0.1))
    market = generate_market(cfg)
    panel = estimate_panel(market.quotes, market.ois).panel
    report = horizon_scan(rows_builder(panel, market.daily))
    print(f"{'n':>5}{'in-sample R2':>14}{'baseline R2':>13}{'LOYO pooled R2':>16}")
    for p in report.points:
        print(f"{p.n:>5}{p.in_sample_r2:>14.4f}{p.baseline_in_sample_r2:>13.4f}{p.loyo_pooled_r2:>16.4f}")
    print(f"LOYO argmax: n = {report.argmax(cfg.market)} (true lookback {args.true_lookback})")
    if args.out:
        plot_horizon_scan(args.out, report.points, report.markets())


if __name__ == "__main__":
    main()
