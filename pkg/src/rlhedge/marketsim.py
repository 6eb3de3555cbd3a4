"""Geometric Brownian motion simulation and the normalized RL state.

Stepping is exact log-normal,

    S_{t+1} = S_t * exp((mu - sigma^2/2) dt + sigma sqrt(dt) Z_t),

so sigma=0 degenerates to the deterministic exponential and martingale
identities hold without discretization bias.

RNG convention: one numpy PCG64 stream per path (``np.random.default_rng``),
seeded with the path's own integer seed.  Batch helpers use consecutive seeds
``seed_base + path_index`` so parallel rollouts are reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

TRADING_DT = 1.0 / 252.0  # default step: one trading day, in years


@dataclass(frozen=True)
class GbmParams:
    """Market dynamics: drift/vol/rate per year, initial price, time grid."""

    mu: float
    sigma: float
    r: float
    s0: float
    horizon_steps: int
    dt: float = TRADING_DT

    def __post_init__(self):
        if self.sigma < 0.0:
            raise ParameterError(f"sigma must be >= 0, got {self.sigma}")
        if self.s0 <= 0.0:
            raise ParameterError(f"s0 must be > 0, got {self.s0}")
        if self.dt <= 0.0:
            raise ParameterError(f"dt must be > 0, got {self.dt}")
        if self.horizon_steps < 1:
            raise ParameterError(f"horizon_steps must be >= 1, got {self.horizon_steps}")

    @property
    def horizon_years(self) -> float:
        return self.horizon_steps * self.dt


@dataclass(frozen=True)
class PricePath:
    """A simulated path: prices[0..T] with the seed that generated it."""

    prices: np.ndarray
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "prices", np.asarray(self.prices, dtype=float))
        if np.any(self.prices <= 0.0):
            raise ParameterError("all path prices must be strictly positive")


@dataclass(frozen=True)
class NormalizedState:
    """RL input state: step index t and drift-normalized log price x."""

    t: int
    x: float


def _log_increments(params: GbmParams, z: np.ndarray) -> np.ndarray:
    drift = (params.mu - 0.5 * params.sigma ** 2) * params.dt
    return drift + params.sigma * math.sqrt(params.dt) * z


def simulate_path(params: GbmParams, seed: int) -> PricePath:
    """Simulate one GBM path of ``horizon_steps`` exact log-normal steps."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(params.horizon_steps)
    prices = np.empty(params.horizon_steps + 1)
    prices[0] = params.s0
    prices[1:] = params.s0 * np.exp(np.cumsum(_log_increments(params, z)))
    return PricePath(prices=prices, seed=seed)


def simulate_batch(params: GbmParams, seed_base: int, n_paths: int) -> np.ndarray:
    """Simulate ``n_paths`` paths with seeds ``seed_base + i``.

    Returns an (n_paths, horizon_steps+1) array; row i is bit-identical to
    ``simulate_path(params, seed_base + i).prices``.
    """
    if n_paths < 1:
        raise ParameterError(f"n_paths must be >= 1, got {n_paths}")
    t_steps = params.horizon_steps
    z = np.empty((n_paths, t_steps))
    for i in range(n_paths):
        z[i] = np.random.default_rng(seed_base + i).standard_normal(t_steps)
    prices = np.empty((n_paths, t_steps + 1))
    prices[:, 0] = params.s0
    prices[:, 1:] = params.s0 * np.exp(np.cumsum(_log_increments(params, z), axis=1))
    return prices


def simulate_terminal(params: GbmParams, seed_base: int, n_paths: int) -> np.ndarray:
    """Terminal prices S_T for seeds ``seed_base + i`` without storing paths.

    Consumes the per-path RNG stream exactly like ``simulate_path``, so the
    result matches ``simulate_path(...).prices[-1]`` seed by seed.
    """
    t_steps = params.horizon_steps
    drift = (params.mu - 0.5 * params.sigma ** 2) * params.dt
    vol = params.sigma * math.sqrt(params.dt)
    out = np.empty(n_paths)
    for i in range(n_paths):
        z = np.random.default_rng(seed_base + i).standard_normal(t_steps)
        out[i] = params.s0 * math.exp(np.sum(drift + vol * z))
    return out


def normalize(params: GbmParams, path: PricePath, t: int) -> NormalizedState:
    """Normalized state (t, x) with x = -(mu - sigma^2/2) t dt + ln S_t."""
    if not 0 <= t <= params.horizon_steps:
        raise IndexError(f"t={t} outside [0, {params.horizon_steps}]")
    x = -(params.mu - 0.5 * params.sigma ** 2) * (t * params.dt) + math.log(path.prices[t])
    return NormalizedState(t=t, x=x)


def normalize_prices(params: GbmParams, prices: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Vectorized x for arrays of prices S_t and matching step indices t."""
    prices = np.asarray(prices, dtype=float)
    t = np.asarray(t)
    return -(params.mu - 0.5 * params.sigma ** 2) * (t * params.dt) + np.log(prices)


def transition_density(params: GbmParams, s_from, s_to):
    """One-step log-normal transition density rho(s_from -> s_to).

    ln S_{t+1} | S_t  ~  N(ln s_from + (mu - sigma^2/2) dt, sigma^2 dt).
    Requires sigma > 0 (the sigma=0 transition is a point mass, not a density).
    """
    if params.sigma <= 0.0:
        raise ParameterError("transition_density requires sigma > 0")
    s_from = np.asarray(s_from, dtype=float)
    s_to = np.asarray(s_to, dtype=float)
    if np.any(s_from <= 0.0) or np.any(s_to <= 0.0):
        raise ParameterError("prices must be strictly positive")
    var = params.sigma ** 2 * params.dt
    mean = np.log(s_from) + (params.mu - 0.5 * params.sigma ** 2) * params.dt
    z = (np.log(s_to) - mean) ** 2 / (2.0 * var)
    dens = np.exp(-z) / (s_to * math.sqrt(2.0 * math.pi * var))
    return dens if dens.shape else float(dens)
