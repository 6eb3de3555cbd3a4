"""Per-day least-squares calibration of the parametric pricers.

Each trading day's cross-section is fit independently by minimizing the
unweighted sum of squared price errors with bounded Nelder-Mead, restarted
from a fixed low-discrepancy start set (the R_d additive recurrence of the
plastic constant, mapped into the parameter box below).  Deterministic:
identical slices give bit-identical results.

Parameter boxes (documented, generous):
    BS      sigma in [1e-4, 5]
    JD      adds jump_intensity in [0, 10], jump_mean_log in [-1, 1],
            jump_std_log in [1e-4, 2]
    Heston  v0, theta in [1e-6, 4], kappa in [1e-3, 20], xi in [1e-4, 5],
            rho in [-0.999, 0.999]

The Feller condition is not enforced; pricing failures inside the search
(NumericError from the quadrature's pathological corners) are treated as an
infinite objective so the search simply avoids them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date as Date
from typing import List, Optional

import numpy as np
from scipy.optimize import minimize

from .errors import CalibrationFailedError, InsufficientDataError, NumericError, ParameterError
from .pricers import (BsParams, ForwardQuote, HestonParams, JumpDiffusionParams,
                      ModelParams, OptionContract, model_prices_strikes)

MODEL_BS = "bs"
MODEL_JD = "jd"
MODEL_HESTON = "heston"

BOUNDS = {
    MODEL_BS: [(1e-4, 5.0)],
    MODEL_JD: [(1e-4, 5.0), (0.0, 10.0), (-1.0, 1.0), (1e-4, 2.0)],
    MODEL_HESTON: [(1e-6, 4.0), (1e-3, 20.0), (1e-6, 4.0), (1e-4, 5.0), (-0.999, 0.999)],
}

_MIN_QUOTES = {MODEL_BS: 1, MODEL_JD: 4, MODEL_HESTON: 5}
N_RESTARTS = 8
_EARLY_EXIT_OBJECTIVE = 1e-11
_NM_MAXITER_PER_DIM = 250

# maturity buckets: centers with documented day boundaries
BUCKET_BOUNDS = {14: (3, 20), 28: (21, 41), 56: (42, 70)}

# transaction-cost deltas use the spot convention throughout
DELTA_CONVENTION = "spot"


@dataclass(frozen=True)
class SliceQuote:
    contract: OptionContract
    mid_price: float
    forward_quote: ForwardQuote


@dataclass(frozen=True)
class OptionSlice:
    date: Date
    quotes: List[SliceQuote]


@dataclass(frozen=True)
class CalibrationResult:
    model: ModelParams
    objective: float
    n_quotes: int
    converged: bool
    iterations: int


def bucket_assign(tau_days: int, bounds: Optional[dict] = None) -> Optional[int]:
    """Bucket center for a maturity in days; None signals a filtered contract."""
    for center, (lo, hi) in (bounds or BUCKET_BOUNDS).items():
        if lo <= tau_days <= hi:
            return center
    return None


def low_discrepancy_starts(dim: int, count: int) -> np.ndarray:
    """R_d sequence in [0, 1]^dim: x_k = frac(1/2 + k alpha), alpha from the
    plastic-constant generalization of the golden ratio."""
    phi = 2.0
    for _ in range(40):
        phi = (1.0 + phi) ** (1.0 / (dim + 1.0))
    alpha = np.array([phi ** -(j + 1) for j in range(dim)])
    k = np.arange(1, count + 1)[:, np.newaxis]
    return np.mod(0.5 + k * alpha, 1.0)


def _make_params(kind: str, vec: np.ndarray) -> ModelParams:
    if kind == MODEL_BS:
        return BsParams(sigma=vec[0])
    if kind == MODEL_JD:
        return JumpDiffusionParams(sigma=vec[0], jump_intensity=vec[1],
                                   jump_mean_log=vec[2], jump_std_log=vec[3])
    if kind == MODEL_HESTON:
        return HestonParams(v0=vec[0], kappa=vec[1], theta=vec[2], xi=vec[3], rho=vec[4])
    raise ParameterError(f"unknown model kind {kind!r}")


def params_vector(model: ModelParams) -> np.ndarray:
    if isinstance(model, BsParams):
        return np.array([model.sigma])
    if isinstance(model, JumpDiffusionParams):
        return np.array([model.sigma, model.jump_intensity,
                         model.jump_mean_log, model.jump_std_log])
    if isinstance(model, HestonParams):
        return np.array([model.v0, model.kappa, model.theta, model.xi, model.rho])
    raise ParameterError(f"unknown model params {type(model).__name__}")


def _group_by_expiry(option_slice: OptionSlice):
    """Group quotes into (ForwardQuote, tau, strikes, mids) per expiry."""
    groups = {}
    for quote in option_slice.quotes:
        key = (quote.contract.tau_years, quote.forward_quote.forward,
               quote.forward_quote.discount)
        groups.setdefault(key, []).append(quote)
    out = []
    for (tau, forward, discount), quotes in sorted(groups.items()):
        strikes = np.array([q.contract.strike for q in quotes])
        mids = np.array([q.mid_price for q in quotes])
        out.append((ForwardQuote(forward, discount), tau, strikes, mids))
    return out


def slice_objective(option_slice: OptionSlice, model: ModelParams) -> float:
    """Sum of squared price errors over the slice."""
    total = 0.0
    for fq, tau, strikes, mids in _group_by_expiry(option_slice):
        prices = model_prices_strikes(model, fq, strikes, tau)
        total += float(np.sum((prices - mids) ** 2))
    return total


def calibrate(option_slice: OptionSlice, model_kind: str,
              n_restarts: int = N_RESTARTS) -> CalibrationResult:
    """Fit one model to one day's cross-section; see module docstring."""
    if model_kind not in BOUNDS:
        raise ParameterError(f"unknown model kind {model_kind!r}")
    n_quotes = len(option_slice.quotes)
    if n_quotes < _MIN_QUOTES[model_kind]:
        raise InsufficientDataError(
            f"{model_kind} needs >= {_MIN_QUOTES[model_kind]} quotes, got {n_quotes}")

    bounds = BOUNDS[model_kind]
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    groups = _group_by_expiry(option_slice)

    def objective(vec, fast=True):
        try:
            model = _make_params(model_kind, np.clip(vec, lo, hi))
            total = 0.0
            for fq, tau, strikes, mids in groups:
                prices = model_prices_strikes(model, fq, strikes, tau, fast=fast)
                total += float(np.sum((prices - mids) ** 2))
            return total if math.isfinite(total) else math.inf
        except NumericError:
            return math.inf

    starts = lo + low_discrepancy_starts(len(bounds), n_restarts) * (hi - lo)
    best_vec, best_obj, total_iter, any_success = None, math.inf, 0, False
    adaptive = len(bounds) > 2
    for start in starts:
        res = minimize(objective, start, method="Nelder-Mead", bounds=bounds,
                       options={"maxiter": _NM_MAXITER_PER_DIM * len(bounds),
                                "xatol": 1e-8, "fatol": 1e-12, "adaptive": adaptive})
        total_iter += res.nit
        if math.isfinite(res.fun) and res.fun < best_obj:
            best_obj, best_vec = float(res.fun), np.clip(res.x, lo, hi)
            any_success = True
        if best_obj < _EARLY_EXIT_OBJECTIVE:
            break
    if not any_success:
        raise CalibrationFailedError(f"all {n_restarts} restarts failed for {model_kind}")

    # polish: tight Nelder-Mead from the incumbent only (rebuilt simplex)
    res = minimize(objective, best_vec, method="Nelder-Mead", bounds=bounds,
                   options={"maxiter": 2 * _NM_MAXITER_PER_DIM * len(bounds),
                            "xatol": 1e-12, "fatol": 1e-17, "adaptive": adaptive})
    total_iter += res.nit
    if math.isfinite(res.fun) and res.fun <= best_obj:
        best_obj, best_vec = float(res.fun), np.clip(res.x, lo, hi)

    final_obj = objective(best_vec, fast=False)
    if not math.isfinite(final_obj):
        raise CalibrationFailedError(f"best {model_kind} fit does not price cleanly")
    initial_best = min(objective(start) for start in starts)
    return CalibrationResult(
        model=_make_params(model_kind, best_vec),
        objective=final_obj,
        n_quotes=n_quotes,
        converged=bool(final_obj <= initial_best),
        iterations=total_iter,
    )
