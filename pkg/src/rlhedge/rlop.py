"""Forward replication-learning MDP over an ensemble of stacked maturities.

Along each simulated path, one portfolio per expiry i = 1..T is managed
under the forward self-financing identity

    Pi_{t+1} = u_t S_{t+1} + e^{r dt}(Pi_t - u_t S_t) - TC,

with TC = eps |u_{t+1} - u_t| S_{t+1} charged on interior rebalances only
(no initial-trade or maturity-unwind charge; the terminal position is marked
to market, matching the backtest).  Each maturity earns a single terminal
reward H((S_i - K)^+, Pi_i^{(i)}) with H the absolute- or squared-error
penalty, so rewards are <= 0 with equality only at exact replication.

The policy sees (t/T, x_t, i/T): conditioning on maturity lets one network
serve the whole ensemble.  Initial wealths w0^(i) are trainable: the reward
is pathwise differentiable in w0 through d Pi_i / d w0_i = e^{r i dt}, and
the full-horizon entry w0^(T) is the reported price.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels, marketsim, neuralpolicy
from .errors import NumericError, ParameterError
from .marketsim import GbmParams
from .trainer import BatchResult

PENALTY_ABS = "abs"
PENALTY_SQUARED = "squared"
PREMIUM_LEARNED = "learned"
PREMIUM_FIXED = "fixed"


@dataclass(frozen=True)
class RlopConfig:
    gbm: GbmParams
    strike: float
    epsilon_tc: float = 0.0
    penalty_kind: str = PENALTY_ABS
    premium_mode: str = PREMIUM_LEARNED
    fixed_w0: float = 0.0
    batch_paths: int = 256

    def __post_init__(self):
        if self.strike <= 0.0:
            raise ParameterError("strike must be > 0")
        if self.epsilon_tc < 0.0:
            raise ParameterError("epsilon_tc must be >= 0")
        if self.penalty_kind not in (PENALTY_ABS, PENALTY_SQUARED):
            raise ParameterError(f"unknown penalty {self.penalty_kind!r}")
        if self.premium_mode not in (PREMIUM_LEARNED, PREMIUM_FIXED):
            raise ParameterError(f"unknown premium mode {self.premium_mode!r}")
        if self.batch_paths < 1:
            raise ParameterError("batch_paths must be >= 1")


@dataclass(frozen=True)
class StackedPortfolio:
    """pi: (B, T, T+1) with pi[b, i-1, t] = Pi_t^{(i)}, frozen for t > i."""

    pi: np.ndarray
    hedges: np.ndarray


def forward_step(pi_t, u_t, u_next, s_t, s_next, r, dt, epsilon_tc):
    """One forward self-financing step (exact arithmetic of the identity)."""
    if np.any(np.asarray(s_t) <= 0.0) or np.any(np.asarray(s_next) <= 0.0):
        raise ParameterError("prices must be > 0")
    tc = epsilon_tc * np.abs(np.asarray(u_next) - np.asarray(u_t)) * s_next
    return u_t * s_next + np.exp(r * dt) * (pi_t - u_t * s_t) - tc


def penalty(kind: str, payoff, pi):
    """H(h, Pi): 0 at exact replication, negative otherwise."""
    err = np.abs(np.asarray(payoff, dtype=float) - np.asarray(pi, dtype=float))
    out = -err if kind == PENALTY_ABS else -err * err
    return out if out.shape else float(out)


def rollout_stacked(cfg: RlopConfig, prices: np.ndarray, hedges: np.ndarray,
                    w0: np.ndarray):
    """Build all stacked panels and terminal rewards.

    prices: (B, T+1); hedges: (B, T, T) with [b, i-1, t] = u_t^{(i)} (t >= i
    ignored); w0: (T,).  Returns (StackedPortfolio, rewards (B, T)).
    """
    prices = np.ascontiguousarray(np.atleast_2d(prices), dtype=float)
    t_steps = cfg.gbm.horizon_steps
    if prices.shape[1] != t_steps + 1 or hedges.shape[1:] != (t_steps, t_steps):
        raise ParameterError("prices must be (B, T+1) and hedges (B, T, T)")
    if not (np.all(np.isfinite(hedges)) and np.all(np.isfinite(w0))):
        raise NumericError("non-finite hedges or initial wealth")
    pi = kernels.rlop_forward_panels(prices, np.ascontiguousarray(hedges, dtype=float),
                                     np.ascontiguousarray(w0, dtype=float),
                                     cfg.gbm.r, cfg.gbm.dt, cfg.epsilon_tc)
    if not np.all(np.isfinite(pi)):
        raise NumericError("non-finite portfolio values")
    maturities = np.arange(1, t_steps + 1)
    payoff = np.maximum(prices[:, maturities] - cfg.strike, 0.0)  # (B, T)
    pi_at_maturity = pi[:, np.arange(t_steps), maturities]
    rewards = penalty(cfg.penalty_kind, payoff, pi_at_maturity)
    return StackedPortfolio(pi=pi, hedges=hedges), rewards


class RlopEnv:
    """Trainer-facing environment over the stacked-maturity ensemble."""

    def __init__(self, cfg: RlopConfig):
        self.cfg = cfg
        self.state_dim = 3
        t_steps = cfg.gbm.horizon_steps
        if cfg.premium_mode == PREMIUM_LEARNED:
            self.n_extra = t_steps
            self.extra_params = np.zeros(t_steps)
        else:
            self.n_extra = 0
            self.extra_params = np.full(t_steps, cfg.fixed_w0)
        # flattened (i, t) pairs, t < i, ordered by maturity then time
        pairs = [(i, t) for i in range(1, t_steps + 1) for t in range(i)]
        self._pair_i = np.array([i for i, _ in pairs])
        self._pair_t = np.array([t for _, t in pairs])
        self.n_pairs = len(pairs)

    @property
    def w0(self) -> np.ndarray:
        return self.extra_params

    def build_batch(self, seed_base: int, n_paths: int):
        cfg = self.cfg
        t_steps = cfg.gbm.horizon_steps
        prices = marketsim.simulate_batch(cfg.gbm, seed_base, n_paths)
        x = marketsim.normalize_prices(cfg.gbm, prices[:, self._pair_t], self._pair_t)
        states = np.empty((n_paths * self.n_pairs, 3))
        states[:, 0] = np.broadcast_to(self._pair_t / t_steps, (n_paths, self.n_pairs)).ravel()
        states[:, 1] = x.ravel()
        states[:, 2] = np.broadcast_to(self._pair_i / t_steps, (n_paths, self.n_pairs)).ravel()
        return states, {"prices": prices, "n_paths": n_paths}

    def _dense_hedges(self, actions: np.ndarray, n_paths: int) -> np.ndarray:
        t_steps = self.cfg.gbm.horizon_steps
        hedges = np.zeros((n_paths, t_steps, t_steps))
        flat = actions.reshape(n_paths, self.n_pairs)
        hedges[:, self._pair_i - 1, self._pair_t] = flat
        return hedges

    def evaluate_actions(self, actions: np.ndarray, meta) -> BatchResult:
        cfg = self.cfg
        prices = meta["prices"]
        n_paths = meta["n_paths"]
        t_steps = cfg.gbm.horizon_steps
        hedges = self._dense_hedges(actions, n_paths)
        stacked, rewards = rollout_stacked(cfg, prices, hedges, self.extra_params)
        # each (i, t) action's return is its maturity's terminal reward
        returns = rewards[:, self._pair_i - 1].ravel()

        maturities = np.arange(1, t_steps + 1)
        payoff = np.maximum(prices[:, maturities] - cfg.strike, 0.0)
        pi_at_mat = stacked.pi[:, np.arange(t_steps), maturities]
        residual = payoff - pi_at_mat  # replication shortfall per maturity
        growth = np.exp(cfg.gbm.r * cfg.gbm.dt * maturities)
        extra_grad = None
        if self.n_extra:
            if cfg.penalty_kind == PENALTY_ABS:
                d_reward_d_pi = np.sign(residual)
            else:
                d_reward_d_pi = 2.0 * residual
            extra_grad = d_reward_d_pi.mean(axis=0) * growth

        # break-even premium estimate for the full-horizon head: the w0 that
        # would have replicated exactly on each path, given these hedges
        w_be = self.extra_params[-1] + residual[:, -1] / growth[-1]
        price = float(self.extra_params[-1])
        se = float(w_be.std(ddof=1) / math.sqrt(n_paths)) if n_paths > 1 else 0.0
        return BatchResult(returns=returns, price=price, price_se=se,
                           mean_return=float(rewards.mean()),
                           extra_grad=extra_grad)


def rlop_delta(handle, t_norm: float, x: float, maturity_norm: float = 1.0) -> float:
    """Policy mean at (t/T, x, i/T); the backtest consumes the i = T head."""
    states = np.array([[t_norm, x, maturity_norm]])
    mu, _, _, _ = neuralpolicy.policy_outputs(handle.policy_spec, handle.policy_params, states)
    return float(mu[0])


def rlop_price(cfg: RlopConfig, handle, eval_paths: int = 10_000, seed: int = 0):
    """(learned w0 for i = T, break-even-premium standard error)."""
    env = RlopEnv(cfg)
    env.extra_params = np.asarray(handle.extra_params, dtype=float).copy()
    states, meta = env.build_batch(seed, eval_paths)
    mu, _, _, _ = neuralpolicy.policy_outputs(handle.policy_spec, handle.policy_params, states)
    result = env.evaluate_actions(mu, meta)
    return result.price, result.price_se


def rlop_price_bisection(cfg: RlopConfig, probe_fn, lo: float, hi: float,
                         tolerance: float, max_iter: int = 24) -> float:
    """Smallest w0 whose probe penalty is above -tolerance, by bisection.

    ``probe_fn(w0) -> penalty`` should fine-tune/evaluate a policy under
    PREMIUM_FIXED with the probe w0 and return a criterion monotone in w0,
    e.g. the mean terminal shortfall -E[(h - Pi_T)^+] (the raw abs penalty
    is not monotone: excess capital cannot be discarded under
    self-financing, so overshooting also scores badly).  Alternative premium
    extraction to the default learned mode.
    """
    if not probe_fn(hi) >= -tolerance:
        raise ParameterError("upper bracket does not achieve the tolerance")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if probe_fn(mid) >= -tolerance:
            hi = mid
        else:
            lo = mid
    return hi
