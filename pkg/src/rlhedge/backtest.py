"""Daily delta-hedging of a short call along a realized path, with costs.

The cash account starts at the option premium, accrues at e^{r dt} between
rebalances, and pays c |delta_t - delta_{t-}| S_t on every trade including
the initial hedge at t0.  At maturity the stock leg is marked to market with
no closing trade, so no terminal liquidation cost is charged.  Outcomes
decompose as

    pnl_net = W_T - (S_T - K)^+        (after-cost outcome)
    tc_total = sum of costs as paid    (>= 0)
    xi = pnl_net + tc_total            (before-cost replication component)

where xi is stored as that exact sum, so the identity is bitwise.

Delta sources are callables ``f(t_index, n_steps, spot) -> delta`` built
from calibrated parametric models or RL checkpoints.  Parametric forwards
along the path use F_t = S_t e^{r tau}; RL sources feed the policy the
normalized state of its training dynamics at strike-scaled spot S_t / K and
t_norm = t / n_steps (remaining days aligned with remaining steps, and
fractional t_norm when counts differ).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import neuralpolicy
from .calibration import OptionSlice, bucket_assign
from .errors import DataError, ParameterError
from .pricers import (ForwardQuote, ModelParams, OptionContract, model_delta)

STATUS_OK = "ok"
STATUS_FAILED = "failed"

DeltaSource = Callable[[int, int, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class HedgePlan:
    delta_source: DeltaSource
    cost_rate: float
    premium: float
    label: str = ""

    def __post_init__(self):
        if self.cost_rate < 0.0:
            raise ParameterError("cost_rate must be >= 0")
        if self.premium < 0.0:
            raise ParameterError("premium must be >= 0")


@dataclass(frozen=True)
class HedgeOutcome:
    pnl_net: float
    tc_total: float
    xi: float
    path_id: str
    n_rebalances: int
    status: str = STATUS_OK


def make_parametric_delta_source(params: ModelParams, strike: float, r: float,
                                 dt: float) -> DeltaSource:
    """Spot deltas under a calibrated model, forwards implied by flat r."""

    def source(t_index: int, n_steps: int, spot: np.ndarray) -> np.ndarray:
        spot = np.atleast_1d(np.asarray(spot, dtype=float))
        tau = (n_steps - t_index) * dt
        contract = OptionContract(strike=strike, expiry_steps=n_steps - t_index,
                                  tau_years=tau)
        out = np.empty_like(spot)
        for i, s in enumerate(spot):
            fq = ForwardQuote(s * math.exp(r * tau), math.exp(-r * tau))
            out[i] = model_delta(params, fq, contract, s)
        return out

    return source


def make_bs_delta_source(sigma: float, strike: float, r: float, dt: float) -> DeltaSource:
    """Vectorized Black-Scholes spot delta N(d1) with forwards S e^{r tau}."""
    from scipy.special import ndtr

    def source(t_index: int, n_steps: int, spot: np.ndarray) -> np.ndarray:
        spot = np.atleast_1d(np.asarray(spot, dtype=float))
        tau = (n_steps - t_index) * dt
        v = sigma * math.sqrt(tau)
        if v <= 0.0:
            return np.where(spot * math.exp(r * tau) > strike, 1.0, 0.0)
        d1 = (np.log(spot / strike) + (r + 0.5 * sigma ** 2) * tau) / v
        return ndtr(d1)

    return source


def make_rl_delta_source(checkpoint, strike: float) -> DeltaSource:
    """Policy-mean deltas from a trained checkpoint (QLBS or RLOP)."""
    meta = checkpoint.meta
    mu_train = float(meta["mu"])
    sigma_train = float(meta["sigma"])
    dt_train = float(meta["dt"])
    is_rlop = checkpoint.policy_spec.input_dim == 3

    def source(t_index: int, n_steps: int, spot: np.ndarray) -> np.ndarray:
        spot = np.atleast_1d(np.asarray(spot, dtype=float))
        t_norm = t_index / n_steps
        elapsed = t_norm * float(meta["horizon_steps"]) * dt_train
        x = -(mu_train - 0.5 * sigma_train ** 2) * elapsed + np.log(spot / strike)
        states = np.empty((spot.size, 3 if is_rlop else 2))
        states[:, 0] = t_norm
        states[:, 1] = x
        if is_rlop:
            states[:, 2] = 1.0  # full-horizon maturity head
        mu, _, _, _ = neuralpolicy.policy_outputs(
            checkpoint.policy_spec, checkpoint.policy_params, states)
        return mu

    return source


def run_hedge_batch(plan: HedgePlan, prices: np.ndarray, contract: OptionContract,
                    r: float, dt: float):
    """Vectorized daily hedging over a batch of paths.

    prices: (B, n+1) with n = contract.expiry_steps daily closes.  Returns
    (pnl_net, tc_total, xi, n_rebalances) arrays; see module docstring for
    the accounting.
    """
    prices = np.atleast_2d(np.asarray(prices, dtype=float))
    n_steps = contract.expiry_steps
    if prices.shape[1] < n_steps + 1:
        raise DataError(
            f"path has {prices.shape[1] - 1} steps, contract needs {n_steps}")
    prices = prices[:, :n_steps + 1]
    growth = math.exp(r * dt)
    c = plan.cost_rate

    delta_prev = np.zeros(prices.shape[0])
    cash = np.full(prices.shape[0], plan.premium)
    tc_total = np.zeros(prices.shape[0])
    for t in range(n_steps):
        if t > 0:
            cash *= growth
        delta = np.asarray(plan.delta_source(t, n_steps, prices[:, t]), dtype=float)
        if not np.all(np.isfinite(delta)):
            raise DataError("delta source produced non-finite values")
        trade_cost = c * np.abs(delta - delta_prev) * prices[:, t]
        cash -= (delta - delta_prev) * prices[:, t] + trade_cost
        tc_total += trade_cost
        delta_prev = delta
    w_terminal = cash * growth + delta_prev * prices[:, n_steps]
    payoff = np.maximum(prices[:, n_steps] - contract.strike, 0.0)
    pnl_net = w_terminal - payoff
    xi = pnl_net + tc_total
    return pnl_net, tc_total, xi, np.full(prices.shape[0], n_steps, dtype=int)


def run_hedge(plan: HedgePlan, prices: np.ndarray, contract: OptionContract,
              r: float, dt: float, path_id: str = "") -> HedgeOutcome:
    """Single-path hedge; failures are recorded, not raised."""
    try:
        pnl, tc, xi, n_reb = run_hedge_batch(plan, np.atleast_2d(prices),
                                             contract, r, dt)
    except DataError:
        raise
    except Exception:
        return HedgeOutcome(pnl_net=math.nan, tc_total=math.nan, xi=math.nan,
                            path_id=path_id, n_rebalances=0, status=STATUS_FAILED)
    return HedgeOutcome(pnl_net=float(pnl[0]), tc_total=float(tc[0]),
                        xi=float(xi[0]), path_id=path_id,
                        n_rebalances=int(n_reb[0]), status=STATUS_OK)


def select_contract(option_slice: OptionSlice, target_moneyness: float,
                    bucket: int, bucket_bounds: Optional[dict] = None):
    """Closest-moneyness quote within the bucket; ties break to lower strike."""
    best = None
    for quote in option_slice.quotes:
        tau_days = int(round(quote.contract.tau_years * 365.0))
        if bucket_assign(tau_days, bucket_bounds) != bucket:
            continue
        gap = abs(quote.contract.strike / quote.forward_quote.forward - target_moneyness)
        key = (gap, quote.contract.strike)
        if best is None or key < best[0]:
            best = (key, quote)
    if best is None:
        raise DataError(f"no contract in bucket {bucket} on {option_slice.date}")
    return best[1]
