"""Run configuration: JSON file with fixed sections, unknown keys rejected.

``rlhedge config-reference`` emits DEFAULTS, which documents every key and
its default.  All randomness in a run derives from the root ``seed`` plus
the documented per-stage offsets below.
"""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

from .errors import DataError

SCHEMA_VERSION = 1

# per-stage sub-seed offsets from the root seed
SEED_OFFSET_TRAIN_QLBS = 0
SEED_OFFSET_TRAIN_RLOP = 1
SEED_OFFSET_GENERATE = 2
SEED_OFFSET_SIMULATE = 3

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "seed": 20240102,
    "output_dir": "out",
    "asset": "SYN",
    "gbm": {
        "mu": 0.04,
        "sigma": 0.2,
        "r": 0.04,
        "s0": 1.0,
        "horizon_steps": 28,
        "dt": 1.0 / 365.0,
    },
    "qlbs": {
        "strike": 1.0,
        "lambda_risk": 0.1,
        "epsilon_tc": 0.0,
        "batch_paths": 128,
    },
    "rlop": {
        "strike": 1.0,
        "epsilon_tc": 0.0,
        "penalty_kind": "abs",
        "premium_mode": "learned",
        "fixed_w0": 0.0,
        "batch_paths": 128,
    },
    "train": {
        "episodes_per_batch": 128,
        "n_batches": 1500,
        "lr_policy": 3e-3,
        "lr_value": 1e-2,
        "eval_paths": 10000,
        "convergence_window": 200,
        "convergence_tol": 1e-3,
        "hidden_width": 32,
        "n_blocks": 3,
    },
    "backtest": {
        "cost_rate": 0.0,
        "checkpoint_qlbs": None,
        "checkpoint_rlop": None,
        "calibration_restarts": 8,
    },
    "buckets": {
        "centers": [14, 28, 56],
        "bounds": {"14": [3, 20], "28": [21, 41], "56": [42, 70]},
    },
    "moneyness_targets": [1.0, 1.03],
    "generate": {
        "kind": "gbm",
        "n_days": 30,
        "expiry_days": [14, 28, 56],
        "moneyness_grid": [0.92, 0.96, 0.98, 1.0, 1.02, 1.04, 1.08],
        "noise_bp": 0.0,
        "start_date": "2024-01-02",
        "model": {"sigma": 0.2},
    },
}


def _merge(defaults: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(defaults)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in defaults:
            raise DataError(f"unknown config key: {where}")
        # "model" and "bounds" hold free-form mappings, not fixed sections
        if isinstance(defaults[key], dict) and key not in ("model", "bounds"):
            if not isinstance(value, dict):
                raise DataError(f"config key {where} must be a section")
            out[key] = _merge(defaults[key], value, where)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path) -> dict:
    """Read a JSON config, merge over DEFAULTS, reject unknown keys."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise DataError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise DataError("config root must be a JSON object")
    cfg = _merge(DEFAULTS, raw)
    if cfg["schema_version"] != SCHEMA_VERSION:
        raise DataError(f"unsupported config schema_version {cfg['schema_version']}")
    return cfg


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical_json(cfg).encode("utf-8")).hexdigest()
