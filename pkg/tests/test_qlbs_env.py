import math

import numpy as np
import pytest

from rlhedge.errors import InsufficientDataError, ParameterError
from rlhedge.marketsim import GbmParams, simulate_batch
from rlhedge.pricers import OptionContract
from rlhedge.qlbs import (QlbsConfig, QlbsEnv, backward_portfolio, qlbs_delta,
                          qlbs_price, replay_forward, tc_cost, value_and_rewards)
from rlhedge.trainer import Checkpoint
from rlhedge.neuralpolicy import GAUSSIAN_POLICY, SCALAR_VALUE, NetSpec, n_params


def _config(mu=0.0, sigma=0.2, r=0.0, s0=100.0, steps=6, dt=1 / 252,
            lambda_risk=0.0, epsilon_tc=0.0, strike=100.0):
    gbm = GbmParams(mu=mu, sigma=sigma, r=r, s0=s0, horizon_steps=steps, dt=dt)
    contract = OptionContract(strike=strike, expiry_steps=steps, tau_years=steps * dt)
    return QlbsConfig(gbm=gbm, contract=contract, lambda_risk=lambda_risk,
                      epsilon_tc=epsilon_tc)


class TestTcCost:
    def test_zero_trade_is_free(self):
        assert tc_cost(0.0, 123.0, 0.01) == 0.0

    def test_direct_formula(self):
        assert tc_cost(1.0, 100.0, 0.001) == pytest.approx(0.1)

    def test_symmetric_in_trade_sign(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            d = rng.normal()
            assert tc_cost(d, 77.0, 0.002) == tc_cost(-d, 77.0, 0.002)

    def test_price_must_be_positive(self):
        with pytest.raises(ParameterError):
            tc_cost(1.0, 0.0, 0.001)


class TestBackwardPortfolio:
    def test_zero_hedge_zero_rate_carries_payoff_back(self):
        cfg = _config(sigma=0.2, r=0.0, steps=5)
        prices = simulate_batch(cfg.gbm, 0, 8)
        panel = backward_portfolio(cfg, prices, np.zeros((8, 5)))
        payoff = np.maximum(prices[:, -1] - 100.0, 0.0)
        for t in range(6):
            np.testing.assert_array_equal(panel.pi[:, t], payoff)

    def test_single_step_hand_case(self):
        cfg = _config(steps=1, dt=1.0, sigma=0.2)
        panel = backward_portfolio(cfg, np.array([[100.0, 110.0]]), np.array([[1.0]]))
        assert panel.pi[0, 1] == 10.0
        assert panel.pi[0, 0] == 0.0

    def test_sigma_zero_discounting(self):
        cfg = _config(mu=0.0, sigma=0.0, r=0.05, s0=120.0, steps=4, strike=100.0)
        prices = simulate_batch(cfg.gbm, 0, 2)
        panel = backward_portfolio(cfg, prices, np.zeros((2, 4)))
        payoff = prices[:, -1] - 100.0
        expected = math.exp(-0.05 * 4 / 252) * payoff
        np.testing.assert_allclose(panel.pi[:, 0], expected, rtol=1e-14)

    def test_terminal_pin_exact_and_cash_identity(self):
        cfg = _config(sigma=0.3, r=0.02, epsilon_tc=0.002, steps=8)
        prices = simulate_batch(cfg.gbm, 3, 16)
        hedges = np.random.default_rng(4).normal(0.5, 0.3, size=(16, 8))
        panel = backward_portfolio(cfg, prices, hedges)
        np.testing.assert_array_equal(panel.pi[:, -1],
                                      np.maximum(prices[:, -1] - 100.0, 0.0))
        u_full = np.concatenate([hedges, np.zeros((16, 1))], axis=1)
        recon = u_full * prices + panel.cash
        np.testing.assert_allclose(recon, panel.pi, rtol=1e-10)

    def test_forward_replay_reproduces_terminal(self):
        cfg = _config(sigma=0.3, r=0.03, epsilon_tc=0.001, steps=10)
        prices = simulate_batch(cfg.gbm, 11, 32)
        hedges = np.random.default_rng(12).normal(0.4, 0.5, size=(32, 10))
        panel = backward_portfolio(cfg, prices, hedges)
        pi_terminal = replay_forward(cfg, prices, hedges, panel.pi[:, 0])
        np.testing.assert_allclose(pi_terminal, panel.pi[:, -1],
                                   rtol=1e-8, atol=1e-12)


class TestValueAndRewards:
    def test_deterministic_degenerate_case(self):
        # sigma = 0, lambda = 0, r = 0: v_t = -(1 - t/T) h, R = -h/T
        cfg = _config(mu=0.0, sigma=0.0, s0=120.0, steps=4, strike=100.0)
        prices = simulate_batch(cfg.gbm, 0, 3)
        panel = backward_portfolio(cfg, prices, np.zeros((3, 4)))
        est = value_and_rewards(cfg, panel)
        h = 20.0
        np.testing.assert_allclose(est.v, -np.outer(np.ones(3), 1 - np.arange(5) / 4) * h,
                                   atol=1e-12)
        np.testing.assert_allclose(est.rewards, -h / 4, atol=1e-12)

    def test_lambda_zero_value_is_mean_portfolio(self):
        cfg = _config(sigma=0.2, steps=6)
        prices = simulate_batch(cfg.gbm, 7, 64)
        panel = backward_portfolio(cfg, prices, np.zeros((64, 6)))
        est = value_and_rewards(cfg, panel)
        assert est.v[:, 0].mean() == pytest.approx(-panel.pi[:, 0].mean(), rel=1e-12)

    def test_penalty_increases_negative_value_on_frozen_panel(self):
        cfg0 = _config(sigma=0.2, steps=6, lambda_risk=0.0)
        cfg1 = _config(sigma=0.2, steps=6, lambda_risk=0.1)
        prices = simulate_batch(cfg0.gbm, 7, 64)
        hedges = np.random.default_rng(1).normal(0.5, 0.2, (64, 6))
        panel = backward_portfolio(cfg0, prices, hedges)
        v0_no_pen = value_and_rewards(cfg0, panel).v[:, 0].mean()
        v0_pen = value_and_rewards(cfg1, panel).v[:, 0].mean()
        assert -v0_pen >= -v0_no_pen

    def test_batch_mean_penalty_attribution_equals_sd(self):
        # per-path penalty shares average exactly to the cross-sectional sd,
        # so mean v_t = -d(t) mean(Pi_t) - lambda sum_{tau>=t} sd_tau (r = 0)
        cfg = _config(sigma=0.25, steps=5, lambda_risk=1.0)
        prices = simulate_batch(cfg.gbm, 19, 128)
        panel = backward_portfolio(cfg, prices,
                                   np.random.default_rng(2).normal(0.3, 0.4, (128, 5)))
        est = value_and_rewards(cfg, panel)
        sd = panel.pi.std(axis=0, ddof=1)
        d = 1 - np.arange(6) / 5
        sd_tail = sd[::-1].cumsum()[::-1]
        np.testing.assert_allclose(est.v.mean(axis=0),
                                   -d * panel.pi.mean(axis=0) - sd_tail, rtol=1e-10)

    def test_telescoping_rewards(self):
        cfg = _config(sigma=0.3, r=0.04, lambda_risk=0.2, epsilon_tc=0.001, steps=9)
        prices = simulate_batch(cfg.gbm, 23, 50)
        hedges = np.random.default_rng(3).normal(0.5, 0.5, (50, 9))
        panel = backward_portfolio(cfg, prices, hedges)
        est = value_and_rewards(cfg, panel)
        for t in range(9):
            recon = est.rewards[:, t:].sum(axis=1) + est.v[:, -1]
            np.testing.assert_allclose(recon, est.v[:, t], atol=1e-8)

    def test_epsilon_monotonicity_with_fixed_turnover(self):
        hedges = np.random.default_rng(5).normal(0.5, 0.5, (40, 6))
        values = []
        for eps in (0.0, 0.001, 0.005):
            cfg = _config(sigma=0.2, steps=6, epsilon_tc=eps)
            prices = simulate_batch(cfg.gbm, 31, 40)
            panel = backward_portfolio(cfg, prices, hedges)
            values.append(-value_and_rewards(cfg, panel).v[:, 0].mean())
        assert values[0] <= values[1] <= values[2]

    def test_too_few_paths_rejected(self):
        cfg = _config(steps=3)
        prices = simulate_batch(cfg.gbm, 0, 1)
        panel = backward_portfolio(cfg, prices, np.zeros((1, 3)))
        with pytest.raises(InsufficientDataError):
            value_and_rewards(cfg, panel)


def _zero_checkpoint(input_dim=2, meta=None):
    policy_spec = NetSpec(input_dim=input_dim, hidden_width=8, n_blocks=1,
                          head=GAUSSIAN_POLICY)
    value_spec = NetSpec(input_dim=input_dim, hidden_width=8, n_blocks=1,
                         head=SCALAR_VALUE)
    return Checkpoint(policy_spec=policy_spec,
                      policy_params=np.zeros(n_params(policy_spec)),
                      value_spec=value_spec,
                      value_params=np.zeros(n_params(value_spec)),
                      extra_params=np.zeros(0),
                      meta=meta or {"horizon_steps": 6})


def test_qlbs_price_deterministic_case():
    cfg = _config(mu=0.0, sigma=0.0, r=0.0, s0=120.0, steps=6, strike=100.0)
    price, se = qlbs_price(cfg, _zero_checkpoint(), eval_paths=64, seed=0)
    assert price == pytest.approx(20.0, abs=1e-12)
    assert se == pytest.approx(0.0, abs=1e-12)


def test_qlbs_delta_zero_policy_is_zero_everywhere():
    from rlhedge.marketsim import NormalizedState
    ckpt = _zero_checkpoint()
    for t in (0, 3, 6):
        assert qlbs_delta(ckpt, NormalizedState(t=t, x=0.3)) == 0.0


def test_config_validation():
    gbm = GbmParams(mu=0.0, sigma=0.2, r=0.0, s0=1.0, horizon_steps=4, dt=1 / 252)
    contract = OptionContract(strike=1.0, expiry_steps=5, tau_years=5 / 252)
    with pytest.raises(ParameterError):
        QlbsConfig(gbm=gbm, contract=contract)
