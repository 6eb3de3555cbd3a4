import math

import numpy as np
import pytest

from rlhedge.errors import ParameterError
from rlhedge.marketsim import (GbmParams, PricePath, normalize, normalize_prices,
                               simulate_batch, simulate_path, simulate_terminal,
                               transition_density)


def test_sigma_zero_is_deterministic_exponential():
    params = GbmParams(mu=0.1, sigma=0.0, r=0.0, s0=100.0, horizon_steps=1, dt=1.0)
    path = simulate_path(params, seed=123)
    np.testing.assert_allclose(path.prices, [100.0, 100.0 * math.exp(0.1)], rtol=0, atol=0)


def test_fixed_seed_is_bit_identical():
    params = GbmParams(mu=0.0, sigma=0.2, r=0.0, s0=1.0, horizon_steps=42, dt=1 / 252)
    a = simulate_path(params, seed=7)
    b = simulate_path(params, seed=7)
    assert np.array_equal(a.prices, b.prices)


def test_batch_matches_per_path_seeds():
    params = GbmParams(mu=0.05, sigma=0.3, r=0.02, s0=50.0, horizon_steps=12, dt=1 / 252)
    batch = simulate_batch(params, seed_base=100, n_paths=5)
    for i in range(5):
        assert np.array_equal(batch[i], simulate_path(params, 100 + i).prices)
        assert simulate_terminal(params, 100 + i, 1)[0] == batch[i, -1]


def test_terminal_mean_matches_closed_form():
    # E S_T = s0 exp(mu T), checked over 1e6 seeds within 3 standard errors
    params = GbmParams(mu=0.05, sigma=0.2, r=0.0, s0=100.0, horizon_steps=252, dt=1 / 252)
    s_t = simulate_terminal(params, seed_base=0, n_paths=10 ** 6)
    target = 100.0 * math.exp(0.05)
    se = s_t.std(ddof=1) / math.sqrt(s_t.size)
    assert abs(s_t.mean() - target) < 3.0 * se


def test_martingale_under_risk_neutral_drift():
    params = GbmParams(mu=0.03, sigma=0.25, r=0.03, s0=100.0, horizon_steps=16, dt=1 / 252)
    s_t = simulate_terminal(params, seed_base=50, n_paths=10 ** 5)
    disc = math.exp(-params.r * params.horizon_years) * s_t
    se = disc.std(ddof=1) / math.sqrt(disc.size)
    assert abs(disc.mean() - 100.0) < 3.0 * se


def test_log_return_moments():
    # pooled one-step log returns: mean (mu - s^2/2) dt, var s^2 dt, 3 SE at 1e6
    params = GbmParams(mu=0.08, sigma=0.2, r=0.0, s0=1.0, horizon_steps=4, dt=1 / 252)
    prices = simulate_batch(params, seed_base=0, n_paths=250_000)
    rets = np.diff(np.log(prices), axis=1).ravel()
    n = rets.size
    mean_target = (params.mu - 0.5 * params.sigma ** 2) * params.dt
    var_target = params.sigma ** 2 * params.dt
    se_mean = rets.std(ddof=1) / math.sqrt(n)
    assert abs(rets.mean() - mean_target) < 3.0 * se_mean
    sample_var = rets.var(ddof=1)
    se_var = sample_var * math.sqrt(2.0 / (n - 1))
    assert abs(sample_var - var_target) < 3.0 * se_var


def test_normalize_examples():
    params = GbmParams(mu=0.1, sigma=0.2, r=0.0, s0=1.0, horizon_steps=4, dt=1 / 252)
    path = PricePath(prices=np.array([1.0, 1.1, 0.9, 1.2, math.e]), seed=0)
    assert normalize(params, path, 0).x == 0.0
    path_e = PricePath(prices=np.array([math.e, 1.0, 1.0, 1.0, 1.0]), seed=0)
    assert normalize(params, path_e, 0).x == 1.0
    # mu = sigma^2/2 kills the drift correction: x = ln S_t at any t
    flat = GbmParams(mu=0.02, sigma=0.2, r=0.0, s0=1.0, horizon_steps=4, dt=1 / 252)
    state = normalize(flat, path, 3)
    assert state.x == pytest.approx(math.log(1.2), abs=1e-15)


def test_normalize_invariant_matches_definition():
    params = GbmParams(mu=0.07, sigma=0.3, r=0.01, s0=2.0, horizon_steps=10, dt=1 / 252)
    path = simulate_path(params, seed=5)
    for t in (0, 3, 10):
        state = normalize(params, path, t)
        expected = -(params.mu - 0.5 * params.sigma ** 2) * t * params.dt \
            + math.log(path.prices[t])
        assert abs(state.x - expected) <= 1e-12 * max(1.0, abs(expected))


def test_normalize_depends_only_on_t_and_price():
    params = GbmParams(mu=0.07, sigma=0.3, r=0.01, s0=2.0, horizon_steps=10, dt=1 / 252)
    a = simulate_path(params, seed=5)
    prices = a.prices.copy()
    prices[4:] *= 1.7  # future prices differ, S_3 identical
    b = PricePath(prices=prices, seed=6)
    assert normalize(params, a, 3) == normalize(params, b, 3)


def test_normalize_range_check():
    params = GbmParams(mu=0.0, sigma=0.2, r=0.0, s0=1.0, horizon_steps=4, dt=1 / 252)
    path = simulate_path(params, seed=1)
    with pytest.raises(IndexError):
        normalize(params, path, 5)


def test_transition_density_normalizes():
    params = GbmParams(mu=0.05, sigma=0.2, r=0.0, s0=100.0, horizon_steps=1, dt=1 / 12)
    grid = np.linspace(40.0, 260.0, 200_001)
    dens = transition_density(params, 100.0, grid)
    integral = np.trapezoid(dens, grid)
    assert abs(integral - 1.0) < 1e-6


def test_transition_density_mode():
    params = GbmParams(mu=0.05, sigma=0.2, r=0.0, s0=100.0, horizon_steps=1, dt=1 / 12)
    mode = 100.0 * math.exp((params.mu - 1.5 * params.sigma ** 2) * params.dt)
    grid = mode * (1.0 + np.linspace(-1e-4, 1e-4, 2001))
    dens = transition_density(params, 100.0, grid)
    numeric_mode = grid[np.argmax(dens)]
    assert abs(numeric_mode - mode) / mode < 1e-8


def test_transition_density_concentrates_at_small_vol():
    params = GbmParams(mu=0.05, sigma=0.001, r=0.0, s0=100.0, horizon_steps=1, dt=1.0)
    center = 100.0 * math.exp(params.mu * params.dt)
    grid = np.linspace(0.99 * center, 1.01 * center, 50_001)
    dens = transition_density(params, 100.0, grid)
    mass = np.trapezoid(dens, grid)
    assert mass > 0.999


def test_parameter_validation():
    with pytest.raises(ParameterError):
        GbmParams(mu=0.0, sigma=-0.1, r=0.0, s0=1.0, horizon_steps=1, dt=1.0)
    with pytest.raises(ParameterError):
        GbmParams(mu=0.0, sigma=0.1, r=0.0, s0=0.0, horizon_steps=1, dt=1.0)
    with pytest.raises(ParameterError):
        GbmParams(mu=0.0, sigma=0.1, r=0.0, s0=1.0, horizon_steps=0, dt=1.0)
    params = GbmParams(mu=0.0, sigma=0.0, r=0.0, s0=1.0, horizon_steps=1, dt=1.0)
    with pytest.raises(ParameterError):
        transition_density(params, 100.0, 100.0)


def test_normalize_prices_vectorized_matches_scalar():
    params = GbmParams(mu=0.07, sigma=0.3, r=0.01, s0=2.0, horizon_steps=6, dt=1 / 252)
    path = simulate_path(params, seed=9)
    t = np.arange(7)
    xs = normalize_prices(params, path.prices, t)
    for ti in t:
        assert xs[ti] == pytest.approx(normalize(params, path, int(ti)).x, abs=1e-15)
