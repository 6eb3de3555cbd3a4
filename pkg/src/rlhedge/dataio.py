"""Option-slice files, outcome files, synthetic chain generation, manifests.

All exchange formats are CSV with a leading ``schema_version`` column so
fixtures stay diff-able; floats are written with ``repr`` (shortest
round-trip), which makes every read/write loop exact.

Synthetic-world conventions: every calendar day is a trading day, one price
step per day with dt = 1/365; expiries sit at fixed day offsets so maturity
buckets are exercised deterministically.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from datetime import date as Date, timedelta
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import config as config_mod
from .calibration import OptionSlice, SliceQuote
from .errors import DataError, ParameterError
from .marketsim import GbmParams, simulate_path
from .pricers import (BsParams, ForwardQuote, HestonParams, JumpDiffusionParams,
                      ModelParams, OptionContract, model_prices_strikes)

SCHEMA_VERSION = 1
SYNTH_DT = 1.0 / 365.0  # synthetic world: every calendar day trades

SLICE_COLUMNS = ["schema_version", "date", "expiry_date", "strike", "mid_price",
                 "forward", "discount", "underlying_close"]
OUTCOME_COLUMNS = ["schema_version", "date", "asset", "model", "bucket",
                   "target_moneyness", "pnl_net", "tc_total", "xi",
                   "n_rebalances", "status"]

TAU_DAYS_MIN = 3
TAU_DAYS_MAX = 70


@dataclass
class IngestStats:
    n_rows: int = 0
    n_filtered_tenor: int = 0


@dataclass(frozen=True)
class OutcomeRow:
    date: str
    asset: str
    model: str
    bucket: int
    target_moneyness: float
    pnl_net: float
    tc_total: float
    xi: float
    n_rebalances: int
    status: str


def _fmt(value: float) -> str:
    return repr(float(value))


# ---------------------------------------------------------------------------
# Slice files
# ---------------------------------------------------------------------------

def write_slices(path, rows: List[dict]):
    """rows: dicts with the SLICE_COLUMNS fields (schema_version added here)."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(SLICE_COLUMNS)
        for row in rows:
            writer.writerow([
                SCHEMA_VERSION, row["date"], row["expiry_date"],
                _fmt(row["strike"]), _fmt(row["mid_price"]), _fmt(row["forward"]),
                _fmt(row["discount"]), _fmt(row["underlying_close"]),
            ])


def ingest_with_stats(path) -> Tuple[List[OptionSlice], IngestStats]:
    """Parse, validate and group a slice CSV into per-date slices.

    Malformed rows raise DataError with their line numbers; contracts outside
    the 3..70 calendar-day window are silently filtered and counted.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"slice file not found: {path}")
    stats = IngestStats()
    by_date: Dict[Date, list] = {}
    errors = []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if header != SLICE_COLUMNS:
            raise DataError(f"{path}: bad header {header!r}")
        for line_no, row in enumerate(reader, start=2):
            try:
                if len(row) != len(SLICE_COLUMNS):
                    raise ValueError(f"expected {len(SLICE_COLUMNS)} fields")
                if int(row[0]) != SCHEMA_VERSION:
                    raise ValueError(f"unsupported schema_version {row[0]}")
                day = Date.fromisoformat(row[1])
                expiry = Date.fromisoformat(row[2])
                strike = float(row[3])
                mid = float(row[4])
                forward = float(row[5])
                discount = float(row[6])
                close = float(row[7])
                if strike <= 0.0:
                    raise ValueError("strike must be > 0")
                if mid < 0.0:
                    raise ValueError("mid_price must be >= 0")
                if not 0.0 < discount <= 1.0:
                    raise ValueError("discount must be in (0, 1]")
                if forward <= 0.0:
                    raise ValueError("forward must be > 0")
                if close <= 0.0:
                    raise ValueError("underlying_close must be > 0")
            except ValueError as exc:
                errors.append(f"line {line_no}: {exc}")
                continue
            stats.n_rows += 1
            tau_days = (expiry - day).days
            if not TAU_DAYS_MIN <= tau_days <= TAU_DAYS_MAX:
                stats.n_filtered_tenor += 1
                continue
            quote = SliceQuote(
                contract=OptionContract(strike=strike, expiry_steps=tau_days,
                                        tau_years=tau_days / 365.0),
                mid_price=mid,
                forward_quote=ForwardQuote(forward, discount),
            )
            by_date.setdefault(day, []).append((expiry, strike, close, quote))
    if errors:
        raise DataError(f"{path}: " + "; ".join(errors))
    if not by_date:
        raise DataError(f"{path}: no usable rows")
    slices = []
    closes = {}
    for day in sorted(by_date):
        entries = sorted(by_date[day], key=lambda e: (e[0], e[1]))
        closes[day] = entries[0][2]
        slices.append(OptionSlice(date=day, quotes=[e[3] for e in entries]))
    return slices, stats


def ingest(path) -> List[OptionSlice]:
    return ingest_with_stats(path)[0]


def underlying_series(path) -> Dict[Date, float]:
    """date -> underlying_close for every date in the slice file."""
    series = {}
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        for row in reader:
            series[Date.fromisoformat(row["date"])] = float(row["underlying_close"])
    return series


# ---------------------------------------------------------------------------
# Synthetic chains
# ---------------------------------------------------------------------------

def _synthetic_model(kind: str, model_cfg: dict) -> ModelParams:
    if kind == "gbm":
        return BsParams(sigma=model_cfg["sigma"])
    if kind == "jd":
        return JumpDiffusionParams(
            sigma=model_cfg["sigma"], jump_intensity=model_cfg["jump_intensity"],
            jump_mean_log=model_cfg["jump_mean_log"], jump_std_log=model_cfg["jump_std_log"])
    if kind == "heston":
        return HestonParams(v0=model_cfg["v0"], kappa=model_cfg["kappa"],
                            theta=model_cfg["theta"], xi=model_cfg["xi"],
                            rho=model_cfg["rho"])
    raise ParameterError(f"unknown synthetic kind {kind!r}")


def generate_synthetic(kind: str, model_cfg: dict, n_days: int,
                       expiry_days: List[int], moneyness_grid: List[float],
                       noise_bp: float, gbm: GbmParams, start_date: str,
                       seed: int):
    """Daily synthetic chains priced by the chosen model.

    The underlying follows a GBM path (one step per calendar day); each day
    carries one chain per expiry offset with strikes at fixed moneyness of
    the forward.  Returns (slice rows, sidecar dict); noise_bp applies
    uniform relative noise to mids.
    """
    if n_days < 1:
        raise DataError("n_days must be >= 1")
    model = _synthetic_model(kind, model_cfg)
    start = Date.fromisoformat(start_date)
    horizon = n_days + max(expiry_days)
    path_params = GbmParams(mu=gbm.mu, sigma=gbm.sigma, r=gbm.r, s0=gbm.s0,
                            horizon_steps=horizon, dt=SYNTH_DT)
    closes = simulate_path(path_params, seed).prices
    noise_rng = np.random.default_rng([seed, 0x5E])
    rows = []
    for d in range(n_days):
        day = start + timedelta(days=d)
        spot = float(closes[d])
        for offset in expiry_days:
            tau = offset / 365.0
            forward = spot * math.exp(gbm.r * tau)
            discount = math.exp(-gbm.r * tau)
            strikes = forward * np.asarray(moneyness_grid, dtype=float)
            mids = model_prices_strikes(model, ForwardQuote(forward, discount),
                                        strikes, tau)
            if noise_bp > 0.0:
                mids = mids * (1.0 + noise_bp * 1e-4 *
                               noise_rng.uniform(-1.0, 1.0, size=mids.size))
            expiry = day + timedelta(days=offset)
            for strike, mid in zip(strikes, mids):
                rows.append({
                    "date": day.isoformat(), "expiry_date": expiry.isoformat(),
                    "strike": float(strike), "mid_price": float(mid),
                    "forward": forward, "discount": discount,
                    "underlying_close": spot,
                })
    sidecar = {
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "model": dict(model_cfg),
        "gbm": {"mu": gbm.mu, "sigma": gbm.sigma, "r": gbm.r, "s0": gbm.s0},
        "n_days": n_days,
        "expiry_days": list(expiry_days),
        "moneyness_grid": [float(m) for m in moneyness_grid],
        "noise_bp": noise_bp,
        "start_date": start_date,
        "seed": seed,
    }
    return rows, sidecar


# ---------------------------------------------------------------------------
# Outcome files
# ---------------------------------------------------------------------------

def write_outcomes(path, rows: List[OutcomeRow]):
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(OUTCOME_COLUMNS)
        for row in rows:
            writer.writerow([
                SCHEMA_VERSION, row.date, row.asset, row.model, row.bucket,
                _fmt(row.target_moneyness), _fmt(row.pnl_net), _fmt(row.tc_total),
                _fmt(row.xi), row.n_rebalances, row.status,
            ])


def read_outcomes(path) -> List[OutcomeRow]:
    """Parse an outcome CSV, validating the xi = pnl_net + tc_total identity."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"outcome file not found: {path}")
    rows = []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames != OUTCOME_COLUMNS:
            raise DataError(f"{path}: bad header {reader.fieldnames!r}")
        for line_no, record in enumerate(reader, start=2):
            row = OutcomeRow(
                date=record["date"], asset=record["asset"], model=record["model"],
                bucket=int(record["bucket"]),
                target_moneyness=float(record["target_moneyness"]),
                pnl_net=float(record["pnl_net"]), tc_total=float(record["tc_total"]),
                xi=float(record["xi"]), n_rebalances=int(record["n_rebalances"]),
                status=record["status"],
            )
            if row.status == "ok" and row.xi != row.pnl_net + row.tc_total:
                raise DataError(f"{path} line {line_no}: xi != pnl_net + tc_total")
            rows.append(row)
    if not rows:
        raise DataError(f"{path}: no rows")
    return rows


# ---------------------------------------------------------------------------
# Manifests
# ---------------------------------------------------------------------------

def write_manifest(out_dir, command: str, cfg: Optional[dict], argv: List[str],
                   outputs: List[str]):
    """Reproducibility record: config hash, seeds, versions, no timestamps."""
    from . import __version__
    from .kernels import BACKEND

    manifest = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "argv": list(argv),
        "config": cfg,
        "config_sha256": config_mod.config_hash(cfg) if cfg is not None else None,
        "seed": cfg["seed"] if cfg is not None else None,
        "package_version": __version__,
        "kernel_backend": BACKEND,
        "outputs": sorted(outputs),
    }
    path = Path(out_dir) / f"manifest_{command}.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    return path
