"""Deterministic JSON/CSV writers and SVG figures for the batch reports."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__


def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "isoformat"):
        return obj.isoformat()
    if hasattr(obj, "item"):  # numpy scalar
        return _clean(obj.item())
    return obj


def write_json(path, payload: dict, config_hash: str) -> Path:
    """JSON with an embedded ``meta`` block; non-finite floats become null."""
    doc = {"meta": {"artifact_version": __version__, "config_hash": config_hash}, **_clean(payload)}
    path = Path(path)
    path.write_text(json.dumps(doc, indent=2, allow_nan=False) + "\n")
    return path


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


def write_table(path, rows: Sequence[dict], columns: Sequence[str] | None = None) -> Path:
    path = Path(path)
    columns = list(columns or (rows[0].keys() if rows else []))
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c)) for c in columns])
    return path


def _fmt(v):
    if isinstance(v, float):
        return repr(float(v)) if math.isfinite(v) else ""
    if hasattr(v, "isoformat"):
        return v.isoformat()
    return "" if v is None else v


def _figure():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    plt.rcParams["svg.hashsalt"] = "carrygap"
    return plt


def _save(fig, plt, path) -> Path:
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return Path(path)


def plot_horizon_scan(path, points: Iterable, markets: Sequence[str]) -> Path:
    """In-sample and LOYO pooled R^2 against the drift lookback, one panel per market."""
    plt = _figure()
    points = list(points)
    fig, axes = plt.subplots(1, len(markets), figsize=(5 * len(markets), 3.5), squeeze=False)
    for ax, market in zip(axes[0], markets):
        pts = [p for p in points if p.market == market]
        ns = [p.n for p in pts]
        ax.plot(ns, [p.in_sample_r2 for p in pts], marker="o", label="in-sample")
        ax.plot(ns, [p.loyo_pooled_r2 for p in pts], marker="s", label="LOYO pooled")
        ax.axvline(504, color="grey", lw=0.8, ls="--")
        ax.set_title(market)
        ax.set_xlabel("lookback n (trading days)")
        ax.set_ylabel("R$^2$")
        ax.legend(fontsize=8)
    return _save(fig, plt, path)


def plot_loyo_years(path, reports: dict) -> Path:
    """Year-by-year out-of-sample R^2 bars, baseline vs extended."""
    plt = _figure()
    fig, ax = plt.subplots(figsize=(8, 3.5))
    labels = sorted(reports)
    width = 0.8 / max(len(labels), 1)
    for j, label in enumerate(labels):
        folds = reports[label].folds
        xs = [f.holdout_year + (j - (len(labels) - 1) / 2) * width for f in folds]
        ax.bar(xs, [f.oos_r2 for f in folds], width=width, label=label)
    ax.axhline(0, color="black", lw=0.6)
    ax.set_xlabel("holdout year")
    ax.set_ylabel("OOS R$^2$")
    ax.legend(fontsize=8)
    return _save(fig, plt, path)
