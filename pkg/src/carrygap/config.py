"""Run configuration for the batch CLI (YAML file + flag overrides)."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .market_data import FilterConfig, format_time, parse_time
from .synthetic_lab import CarryGapModel, SyntheticMarketConfig
from .validation import DEFAULT_SCAN_GRID

OUT_DIR_ENV = "CARRYGAP_OUT_DIR"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    quotes: dict[str, str] = field(default_factory=dict)  # market -> CSV path
    daily: str | None = None
    ois: str | None = None
    synthetic: dict | None = None
    filters: dict = field(default_factory=dict)
    estimator: str = "ols"
    curve_convention: str = "continuous"
    specs: tuple[str, ...] = ("baseline", "extended")
    scope: str = "separate"
    max_lag: int = 21
    lookback: int = 504
    scan_grid: tuple[int, ...] = DEFAULT_SCAN_GRID
    fold_sst: str = "holdout_mean"
    pooled_sst: str = "pooled_mean"
    out_dir: str = "carrygap_out"
    seed: int = 0

    def filter_config(self) -> FilterConfig:
        kw = dict(self.filters)
        if isinstance(kw.get("snapshot_time"), str):
            kw["snapshot_time"] = parse_time(kw["snapshot_time"])
        try:
            return FilterConfig(**kw)
        except TypeError as exc:
            raise ConfigError(f"bad filters section: {exc}") from None

    def synthetic_config(self) -> SyntheticMarketConfig:
        kw = dict(self.synthetic or {})
        model = kw.pop("cg_model", None)
        kw.setdefault("seed", self.seed)
        for key in ("expiry_months", "strike_grid", "ois_tenors"):
            if key in kw:
                kw[key] = tuple(kw[key])
        try:
            if model is not None:
                kw["cg_model"] = CarryGapModel(**model)
            if isinstance(kw.get("snapshot_time"), str):
                kw["snapshot_time"] = parse_time(kw["snapshot_time"])
            return SyntheticMarketConfig(**kw)
        except TypeError as exc:
            raise ConfigError(f"bad synthetic section: {exc}") from None

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["specs"], d["scan_grid"] = list(self.specs), list(self.scan_grid)
        return d

    def config_hash(self) -> str:
        """Hash of everything that affects results (the output location is excluded)."""
        d = self.as_dict()
        d.pop("out_dir")
        blob = json.dumps(d, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def validate(self) -> None:
        for spec in self.specs:
            if spec not in ("baseline", "extended"):
                raise ConfigError(f"unknown spec {spec!r}")
        if self.scope not in ("separate", "pooled_common"):
            raise ConfigError(f"unknown scope {self.scope!r}")
        if self.max_lag < 0 or self.lookback < 2:
            raise ConfigError("max_lag must be >= 0 and lookback >= 2")
        if self.estimator not in ("ols", "theil_sen"):
            raise ConfigError(f"unknown estimator {self.estimator!r}")
        for market, path in self.quotes.items():
            if market not in ("SPX", "RUT"):
                raise ConfigError(f"unknown market {market!r}")
            if not Path(path).exists():
                raise ConfigError(f"quotes file for {market} not found: {path}")
        for name in ("daily", "ois"):
            path = getattr(self, name)
            if path is not None and not Path(path).exists():
                raise ConfigError(f"{name} file not found: {path}")
        self.filter_config()
        if self.synthetic is not None:
            self.synthetic_config().validate()


def load_config(path: str | None, overrides: dict | None = None) -> RunConfig:
    """Read YAML, apply the env output-dir override, then flag overrides (flags win)."""
    data: dict = {}
    if path:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {path}")
        data = yaml.safe_load(p.read_text()) or {}
        if not isinstance(data, dict):
            raise ConfigError("config file must contain a mapping")
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    if os.environ.get(OUT_DIR_ENV):
        data["out_dir"] = os.environ[OUT_DIR_ENV]
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    for key in ("specs", "scan_grid"):
        if key in data:
            data[key] = tuple(data[key])
    if isinstance(data.get("filters", {}).get("snapshot_time"), int):
        data["filters"]["snapshot_time"] = format_time(data["filters"]["snapshot_time"])
    cfg = RunConfig(**data)
    cfg.validate()
    return cfg
