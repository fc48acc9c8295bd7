"""Batch driver: ``carrygap <subcommand> [--config run.yaml] [overrides]``.

Stages read and write CSV/JSON files in the output directory, so they can be
run one at a time and re-run idempotently:

    simulate -> ingest -> estimate -> panel -> regress -> loyo / scan / buckets / hurdle -> report

``mc-verify`` is independent of the data stages.
Exit codes: 0 ok, 1 usage/config error, 2 data error, 3 validation failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import datetime as dt
import logging
import sys
from collections import Counter
from pathlib import Path

import numpy as np

from . import reporting
from .carry_gap_panel import daily_median, load_panel, write_daily_series, write_panel
from .config import ConfigError, RunConfig, load_config
from .econometrics import RankDeficiencyError, RegressionFit, load_regressors, run_spec, write_regressors
from .implied_discount import CellError, estimate_all, load_estimates, write_estimates
from .market_data import SchemaError, load_daily, load_quotes, pair_and_filter, write_rejects
from .ois_curve import build_curves, load_ois
from .carry_gap_panel import build_panel
from .path_risk import build_regressors, drift_proxies
from .pipeline import rows_builder
from .synthetic_lab import generate_market, mc_verification_table
from .validation import bucket_diagnostics, horizon_scan, hurdle, loyo, sign_stability

log = logging.getLogger("carrygap")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_VALIDATION = 0, 1, 2, 3


class StageError(RuntimeError):
    """A stage input is missing; the message names the subcommand that produces it."""


class ValidationFailure(RuntimeError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# stage helpers
# ---------------------------------------------------------------------------

class Run:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.out = Path(cfg.out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.hash = cfg.config_hash()

    @property
    def data_dir(self) -> Path:
        return self.out / "data"

    def path(self, name: str) -> Path:
        return self.out / name

    def need(self, name: str, producer: str) -> Path:
        p = self.path(name)
        if not p.exists():
            raise StageError(f"{p} not found; run `carrygap {producer}` first")
        return p

    def input_path(self, kind: str) -> Path:
        explicit = getattr(self.cfg, kind)
        if explicit:
            return Path(explicit)
        p = self.data_dir / f"{kind}.csv"
        if not p.exists():
            raise StageError(f"no {kind} input configured and {p} missing; "
                             f"set `{kind}:` in the config or run `carrygap simulate` first")
        return p

    def quote_paths(self) -> dict[str, Path]:
        if self.cfg.quotes:
            return {m: Path(p) for m, p in sorted(self.cfg.quotes.items())}
        p = self.data_dir / "quotes.csv"
        if not p.exists():
            raise StageError(f"no quotes configured and {p} missing; run `carrygap simulate` first")
        return {self.cfg.synthetic_config().market if self.cfg.synthetic else "SPX": p}

    def json(self, name: str, payload: dict) -> Path:
        return reporting.write_json(self.path(name), payload, self.hash)

    def labels(self, rows) -> dict[str, list]:
        if self.cfg.scope == "pooled_common":
            return {"pooled": list(rows)}
        out: dict[str, list] = {}
        for r in rows:
            out.setdefault(r.market, []).append(r)
        return dict(sorted(out.items()))

    def regressors(self):
        return load_regressors(self.need("regressors.csv", "regress"))


def _audit_rows(entries) -> list[dict]:
    out = []
    for key, reason in entries:
        market, qdate, expiry = key
        out.append({"market": market or "", "quote_date": qdate, "expiry": expiry or "", "reason": reason})
    return out


AUDIT_COLUMNS = ["market", "quote_date", "expiry", "reason"]


def cmd_simulate(run: Run, args) -> None:
    if run.cfg.synthetic is None:
        raise ConfigError("`simulate` needs a `synthetic:` section in the config")
    market = generate_market(run.cfg.synthetic_config())
    paths = market.write(run.data_dir)
    run.json("simulate.json", {"n_quotes": len(market.quotes), "n_daily": len(market.daily),
                               "n_ois_dates": len(market.ois), "n_cells": len(market.truth),
                               "files": {k: str(v.relative_to(run.out)) for k, v in paths.items()}})
    log.info("simulated %d quotes into %s", len(market.quotes), run.data_dir)


def _load_all_quotes(run: Run):
    loaded = {}
    for market, path in run.quote_paths().items():
        loaded[market] = load_quotes(path, market)
    return loaded


def cmd_ingest(run: Run, args) -> None:
    filters = run.cfg.filter_config()
    summary = {}
    for market, (quotes, rejects) in _load_all_quotes(run).items():
        write_rejects(run.path(f"rejects_{market}.csv"), rejects)
        _, audit = pair_and_filter(quotes, filters)
        summary[market] = {"n_quotes": len(quotes), "n_rejected": len(rejects),
                           "filter_audit": dict(sorted(audit.items()))}
    load_daily(run.input_path("daily"))
    load_ois(run.input_path("ois"))
    run.json("ingest.json", {"markets": summary})


def cmd_estimate(run: Run, args) -> None:
    filters = run.cfg.filter_config()
    estimates, exclusions, audit = [], [], Counter()
    for market, (quotes, _) in _load_all_quotes(run).items():
        cells, a = pair_and_filter(quotes, filters)
        audit.update(a)
        est, bad = estimate_all(cells, method=run.cfg.estimator, min_strikes=filters.min_strikes_per_cell)
        estimates += est
        exclusions += bad
    write_estimates(run.path("estimates.csv"), estimates)
    reporting.write_table(run.path("cell_exclusions.csv"), _audit_rows(exclusions), AUDIT_COLUMNS)
    run.json("estimate.json", {"n_cells": len(estimates), "n_excluded": len(exclusions),
                               "filter_audit": dict(sorted(audit.items()))})


def cmd_panel(run: Run, args) -> None:
    estimates = load_estimates(run.need("estimates.csv", "estimate"))
    curves, failed = build_curves(load_ois(run.input_path("ois")), run.cfg.curve_convention)
    panel, missing = build_panel(estimates, curves)
    write_panel(run.path("panel.csv"), panel)
    audit = [((None, d, None), f"OIS curve construction failed: {why}") for d, why in failed] + missing
    reporting.write_table(run.path("panel_exclusions.csv"), _audit_rows(audit), AUDIT_COLUMNS)
    series = [(d, m, v) for m in sorted({o.market for o in panel}) for d, v in daily_median(panel, m)]
    write_daily_series(run.path("daily_median.csv"), series)


def _build_rows(run: Run, lookback: int | None = None):
    panel = load_panel(run.need("panel.csv", "panel"))
    daily = load_daily(run.input_path("daily"))
    rows, audit = build_regressors(panel, daily, drift_proxies(daily, lookback or run.cfg.lookback))
    return panel, daily, rows, audit


def _fits(run: Run, rows) -> dict[tuple[str, str], RegressionFit]:
    fits = {}
    for spec in run.cfg.specs:
        for label, sub in run.labels(rows).items():
            fits[spec, label] = run_spec(sub, spec, run.cfg.scope, run.cfg.max_lag)
    return fits


def cmd_regress(run: Run, args) -> None:
    _, _, rows, audit = _build_rows(run)
    write_regressors(run.path("regressors.csv"), rows)
    reporting.write_table(run.path("regressor_audit.csv"), _audit_rows(audit), AUDIT_COLUMNS)
    table = []
    for (spec, label), fit in _fits(run, rows).items():
        d = fit.to_dict()
        run.json(f"fit_{spec}_{label}.json", d)
        table.append({"spec": spec, "label": label, **d["metrics"], "n_obs": fit.n_obs, "n_dates": fit.n_dates})
    reporting.write_table(run.path("fits.csv"), table)


def cmd_loyo(run: Run, args) -> None:
    rows = run.regressors()
    summary, fold_rows = [], []
    for spec in run.cfg.specs:
        for label, sub in run.labels(rows).items():
            rep = loyo(sub, spec, run.cfg.scope, fold_sst=run.cfg.fold_sst, pooled_sst=run.cfg.pooled_sst)
            run.json(f"loyo_{spec}_{label}.json", rep.to_dict())
            signs = sign_stability(sub, spec, run.cfg.scope, run.cfg.max_lag)
            run.json(f"signs_{spec}_{label}.json", signs.to_dict())
            summary.append({"spec": spec, "label": label, "mean_r2": rep.mean_r2, "median_r2": rep.median_r2,
                            "pooled_r2": rep.pooled_r2, "years_positive": rep.years_positive,
                            "n_folds": len(rep.folds), "mean_rmse_bp": rep.mean_rmse_bp})
            for f in rep.folds:
                fold_rows.append({"spec": spec, "label": label, "holdout_year": f.holdout_year,
                                  "n_obs": f.n_obs, "oos_r2": f.oos_r2, "rmse_bp": f.rmse_bp,
                                  "mae_bp": f.mae_bp, "fitted_actual_corr": f.fitted_actual_corr})
    reporting.write_table(run.path("loyo_summary.csv"), summary)
    reporting.write_table(run.path("loyo_folds.csv"), fold_rows)


def cmd_scan(run: Run, args) -> None:
    panel = load_panel(run.need("panel.csv", "panel"))
    daily = load_daily(run.input_path("daily"))
    report = horizon_scan(rows_builder(panel, daily), run.cfg.scan_grid)
    run.json("scan.json", report.to_dict())
    reporting.write_table(run.path("scan.csv"), [dataclasses.asdict(p) for p in report.points])
    if not args.no_plots:
        reporting.plot_horizon_scan(run.path("scan.svg"), report.points, report.markets())


def cmd_buckets(run: Run, args) -> None:
    rows = run.regressors()
    out = []
    for label, sub in run.labels(rows).items():
        base = run_spec(sub, "baseline", run.cfg.scope, run.cfg.max_lag)
        ext = run_spec(sub, "extended", run.cfg.scope, run.cfg.max_lag)
        out += [{"label": label, **r} for r in bucket_diagnostics(sub, base, ext)]
    reporting.write_table(run.path("buckets.csv"), out)


def cmd_hurdle(run: Run, args) -> None:
    if args.forward is not None:
        if args.tau is None or args.cg_bp is None:
            raise ConfigError("--forward needs --tau and --cg-bp")
        h = hurdle(args.forward, args.tau, args.cg_bp)
        print(f"hurdle={h.exact!r} linear={h.linear!r} difference={h.difference!r}")
        return
    rows = run.regressors()
    forwards = {(e.market, e.quote_date, e.tau_years): e.f_hat
                for e in load_estimates(run.need("estimates.csv", "estimate"))}
    out = []
    for label, sub in run.labels(rows).items():
        fit = run_spec(sub, "extended", run.cfg.scope, run.cfg.max_lag)
        usable = [r for r in sub if np.isfinite(r.gbm_mu_1y)]
        for r, cg_hat in zip(usable, fit.predict(usable)):
            f = forwards.get((r.market, r.quote_date, r.tau_years))
            if f is None:
                continue
            h = hurdle(f, r.tau_years, float(cg_hat))
            out.append({"market": r.market, "quote_date": r.quote_date, "tau_years": r.tau_years,
                        "f_hat": f, "cg_bp_fitted": float(cg_hat), "hurdle": h.exact,
                        "hurdle_linear": h.linear, "difference": h.difference})
    reporting.write_table(run.path("hurdle.csv"), out)


def cmd_mc_verify(run: Run, args) -> None:
    rows = mc_verification_table(n_paths=args.paths, steps_per_year=args.steps_per_year, seed=run.cfg.seed)
    reporting.write_table(run.path("mc_verify.csv"), rows)
    run.json("mc_verify.json", {"rows": rows, "all_pass": all(r["pass"] for r in rows)})
    for r in rows:
        print(f"{r['check']:<34} {r['target']:>10.6f} {r['estimate']:>10.6f} "
              f"{r['std_error']:>9.2e}  {'PASS' if r['pass'] else 'FAIL'}")
    if not all(r["pass"] for r in rows):
        raise ValidationFailure("Monte Carlo verification failed")


def cmd_report(run: Run, args) -> None:
    rows = run.regressors()
    config = run.cfg.as_dict()
    config.pop("out_dir")  # reports must not depend on where they are written
    doc: dict = {"config": config, "in_sample": {}, "loyo": {}, "sign_stability": {}}
    for spec in run.cfg.specs:
        for label in run.labels(rows):
            key = f"{spec}_{label}"
            doc["in_sample"][key] = _read_payload(run.need(f"fit_{key}.json", "regress"))
            for section, prefix in (("loyo", "loyo"), ("sign_stability", "signs")):
                p = run.path(f"{prefix}_{key}.json")
                if p.exists():
                    doc[section][key] = _read_payload(p)
    for name in ("scan", "mc_verify", "estimate", "ingest"):
        p = run.path(f"{name}.json")
        if p.exists():
            doc[name] = _read_payload(p)
    if run.path("buckets.csv").exists():
        doc["buckets"] = run.path("buckets.csv").name
    run.json("report.json", doc)
    if not args.no_plots and doc["loyo"]:
        from .validation import LoyoReport, FoldResult
        reports = {}
        for key, payload in doc["loyo"].items():
            folds = [FoldResult(**{k: v for k, v in f.items()}) for f in payload["folds"]]
            reports[key] = LoyoReport(**{**payload, "folds": folds})
        reporting.plot_loyo_years(run.path("loyo_years.svg"), reports)


def _read_payload(path) -> dict:
    doc = reporting.read_json(path)
    doc.pop("meta", None)
    return doc


COMMANDS = {
    "simulate": (cmd_simulate, "generate a synthetic market into <out>/data"),
    "ingest": (cmd_ingest, "parse inputs, write rejects and filter audit"),
    "estimate": (cmd_estimate, "recover implied discount factors per cell"),
    "panel": (cmd_panel, "build the carry-gap panel against OIS"),
    "regress": (cmd_regress, "build regressors and fit the specifications"),
    "loyo": (cmd_loyo, "leave-one-year-out validation and sign stability"),
    "scan": (cmd_scan, "drift-lookback horizon scan"),
    "buckets": (cmd_buckets, "maturity-bucket diagnostics"),
    "hurdle": (cmd_hurdle, "price-space hurdle (single value or per fitted cell)"),
    "mc-verify": (cmd_mc_verify, "Monte Carlo check of the support-capital closed forms"),
    "report": (cmd_report, "assemble report.json and figures from stage outputs"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="carrygap", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, help_) in COMMANDS.items():
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="YAML run config")
        p.add_argument("--out-dir")
        p.add_argument("--seed", type=int)
        p.add_argument("--max-lag", type=int)
        p.add_argument("--lookback", type=int)
        p.add_argument("--scope", choices=["separate", "pooled_common"])
        p.add_argument("--spec", action="append", choices=["baseline", "extended"], dest="specs")
        p.add_argument("--no-plots", action="store_true")
        if name == "hurdle":
            p.add_argument("--forward", type=float)
            p.add_argument("--tau", type=float)
            p.add_argument("--cg-bp", type=float)
        if name == "mc-verify":
            p.add_argument("--paths", type=int, default=100_000)
            p.add_argument("--steps-per-year", type=int, default=2000)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {"out_dir": args.out_dir, "seed": args.seed, "max_lag": args.max_lag,
                 "lookback": args.lookback, "scope": args.scope, "specs": args.specs}
    try:
        run = Run(load_config(args.config, overrides))
        COMMANDS[args.command][0](run, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationFailure as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (StageError, SchemaError, FileNotFoundError, RankDeficiencyError, CellError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
