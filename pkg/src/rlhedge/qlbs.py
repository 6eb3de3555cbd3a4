"""Backward value-based hedging MDP with transaction costs.

The portfolio panel is built backward from the pinned terminal payoff
through the self-financing relation

    Pi_t = gamma (Pi_{t+1} - u_t (S_{t+1} - e^{r dt} S_t) + TC_{t+1}),

with gamma = e^{-r dt}, TC_{t+1} = eps |u_{t+1} - u_t| S_{t+1} and the
terminal position unwound (u_T = 0), so the final rebalance cost is charged
inside the recursion.

Values use the maturity discount d(t) = 1 - t/T on the portfolio term plus a
risk penalty of lambda times the discounted sum of cross-sectional standard
deviations of Pi.  The penalty is attributed per path as

    s_hat_tau(p) = (Pi_tau(p) - m_tau)^2 * B / ((B-1) * sd_tau),

whose batch mean equals sd_tau exactly, so batch-mean values match the
cross-sectional definition while rewards remain per-path telescoping
differences R_{t+1} = v_t - v_{t+1} (and carry a dispersion signal the
policy gradient can act on).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels, marketsim, neuralpolicy
from .errors import InsufficientDataError, NumericError, ParameterError
from .marketsim import GbmParams, NormalizedState
from .pricers import OptionContract
from .trainer import BatchResult

_SD_FLOOR = 1e-300


@dataclass(frozen=True)
class QlbsConfig:
    gbm: GbmParams
    contract: OptionContract
    lambda_risk: float = 0.0
    epsilon_tc: float = 0.0
    batch_paths: int = 256

    def __post_init__(self):
        if self.lambda_risk < 0.0 or self.epsilon_tc < 0.0:
            raise ParameterError("lambda_risk and epsilon_tc must be >= 0")
        if self.contract.expiry_steps != self.gbm.horizon_steps:
            raise ParameterError("contract.expiry_steps must equal gbm.horizon_steps")
        if self.batch_paths < 2:
            raise ParameterError("batch_paths must be >= 2")


@dataclass(frozen=True)
class PortfolioPanel:
    """pi: (B, T+1) portfolio values; hedges: (B, T); cash: (B, T+1)."""

    pi: np.ndarray
    hedges: np.ndarray
    cash: np.ndarray


@dataclass(frozen=True)
class ValueEstimate:
    """v: (B, T+1) per-path value estimates; rewards: (B, T) telescoping."""

    v: np.ndarray
    rewards: np.ndarray


def tc_cost(delta_u, s, epsilon_tc):
    """Proportional rebalancing cost eps * |delta_u| * S."""
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0.0):
        raise ParameterError("price must be > 0")
    out = epsilon_tc * np.abs(np.asarray(delta_u, dtype=float)) * s
    return out if out.shape else float(out)


def backward_portfolio(cfg: QlbsConfig, prices: np.ndarray, hedges: np.ndarray) -> PortfolioPanel:
    """Backward panel from the pinned payoff; see module docstring."""
    prices = np.ascontiguousarray(np.atleast_2d(prices), dtype=float)
    hedges = np.ascontiguousarray(np.atleast_2d(hedges), dtype=float)
    t_steps = cfg.gbm.horizon_steps
    if prices.shape[1] != t_steps + 1 or hedges.shape[1] != t_steps:
        raise ParameterError("prices must be (B, T+1) and hedges (B, T)")
    if not np.all(np.isfinite(hedges)):
        raise NumericError("non-finite hedges")
    payoff = np.maximum(prices[:, -1] - cfg.contract.strike, 0.0)
    pi = kernels.qlbs_backward_panel(prices, hedges, cfg.gbm.r, cfg.gbm.dt,
                                     cfg.epsilon_tc, payoff)
    if not np.all(np.isfinite(pi)):
        raise NumericError("non-finite portfolio values")
    u_full = np.concatenate([hedges, np.zeros((hedges.shape[0], 1))], axis=1)
    cash = pi - u_full * prices
    return PortfolioPanel(pi=pi, hedges=hedges, cash=cash)


def value_and_rewards(cfg: QlbsConfig, panel: PortfolioPanel) -> ValueEstimate:
    """Per-path values and telescoping rewards; see module docstring."""
    pi = panel.pi
    n_paths, t_plus_1 = pi.shape
    t_steps = t_plus_1 - 1
    if n_paths < 2:
        raise InsufficientDataError("need >= 2 paths for the variance penalty")
    gamma = math.exp(-cfg.gbm.r * cfg.gbm.dt)
    mean = pi.mean(axis=0)
    sd = pi.std(axis=0, ddof=1)
    dev2 = (pi - mean) ** 2
    scale = np.where(sd > _SD_FLOOR, n_paths / ((n_paths - 1) * np.maximum(sd, _SD_FLOOR)), 0.0)
    s_hat = dev2 * scale  # batch mean over paths equals sd exactly
    pen = np.empty_like(pi)
    pen[:, t_steps] = s_hat[:, t_steps]
    for t in range(t_steps - 1, -1, -1):
        pen[:, t] = s_hat[:, t] + gamma * pen[:, t + 1]
    d_mat = 1.0 - np.arange(t_plus_1) / t_steps
    v = -d_mat * pi - cfg.lambda_risk * pen
    rewards = v[:, :-1] - v[:, 1:]
    return ValueEstimate(v=v, rewards=rewards)


def replay_forward(cfg: QlbsConfig, prices: np.ndarray, hedges: np.ndarray,
                   pi0: np.ndarray) -> np.ndarray:
    """Forward self-financing replay from Pi_0 under the same TC convention.

    Audits the backward construction: with the unwind row u_T = 0 appended,
    composing the one-step forward identity reproduces the terminal payoff.
    """
    growth = math.exp(cfg.gbm.r * cfg.gbm.dt)
    t_steps = hedges.shape[1]
    u_full = np.concatenate([hedges, np.zeros((hedges.shape[0], 1))], axis=1)
    pi = np.asarray(pi0, dtype=float).copy()
    for t in range(t_steps):
        tc = tc_cost(u_full[:, t + 1] - u_full[:, t], prices[:, t + 1], cfg.epsilon_tc)
        pi = u_full[:, t] * prices[:, t + 1] + growth * (pi - u_full[:, t] * prices[:, t]) - tc
    return pi


class QlbsEnv:
    """Trainer-facing environment: exogenous states, batched rollouts."""

    def __init__(self, cfg: QlbsConfig):
        self.cfg = cfg
        self.state_dim = 2
        self.n_extra = 0
        self.extra_params = np.zeros(0)
        t_steps = cfg.gbm.horizon_steps
        self._t_grid = np.arange(t_steps)
        self._t_norm = self._t_grid / t_steps

    def build_batch(self, seed_base: int, n_paths: int):
        cfg = self.cfg
        prices = marketsim.simulate_batch(cfg.gbm, seed_base, n_paths)
        t_steps = cfg.gbm.horizon_steps
        x = marketsim.normalize_prices(cfg.gbm, prices[:, :-1], self._t_grid[np.newaxis, :])
        states = np.empty((n_paths * t_steps, 2))
        states[:, 0] = np.broadcast_to(self._t_norm, (n_paths, t_steps)).ravel()
        states[:, 1] = x.ravel()
        return states, {"prices": prices, "n_paths": n_paths}

    def evaluate_actions(self, actions: np.ndarray, meta) -> BatchResult:
        cfg = self.cfg
        prices = meta["prices"]
        n_paths = meta["n_paths"]
        hedges = actions.reshape(n_paths, cfg.gbm.horizon_steps)
        panel = backward_portfolio(cfg, prices, hedges)
        est = value_and_rewards(cfg, panel)
        returns = (est.v[:, :-1] - est.v[:, -1:]).ravel()
        v0 = est.v[:, 0]
        price = -float(v0.mean())
        se = float(v0.std(ddof=1) / math.sqrt(n_paths))
        return BatchResult(returns=returns, price=price, price_se=se,
                           mean_return=float(est.rewards.sum(axis=1).mean()))


def policy_delta(handle, t_norm: float, x: float) -> float:
    """Policy mean at (t/T, x), read as the hedge in shares."""
    states = np.array([[t_norm, x]])
    mu, _, _, _ = neuralpolicy.policy_outputs(handle.policy_spec, handle.policy_params, states)
    return float(mu[0])


def qlbs_delta(handle, state: NormalizedState) -> float:
    t_steps = int(handle.meta["horizon_steps"])
    return policy_delta(handle, state.t / t_steps, state.x)


def qlbs_price(cfg: QlbsConfig, handle, eval_paths: int = 10_000, seed: int = 0):
    """(-V_0, standard error) on a fresh batch under the mean policy."""
    env = QlbsEnv(cfg)
    states, meta = env.build_batch(seed, eval_paths)
    mu, _, _, _ = neuralpolicy.policy_outputs(handle.policy_spec, handle.policy_params, states)
    result = env.evaluate_actions(mu, meta)
    return result.price, result.price_se
