import math

import numpy as np
import pytest

from rlhedge.errors import NumericError, TrainingFailedError
from rlhedge.marketsim import GbmParams
from rlhedge.neuralpolicy import (GAUSSIAN_POLICY, SCALAR_VALUE, NetSpec,
                                  gaussian_logpdf_grad, init_params, n_params,
                                  policy_outputs)
from rlhedge.pricers import OptionContract
from rlhedge.qlbs import QlbsConfig, QlbsEnv
from rlhedge.trainer import (BatchResult, Checkpoint, TrainConfig, evaluate,
                             load_checkpoint, save_checkpoint, train)


class BanditEnv:
    """1-step sanity env: reward = -(a - 3)^2, constant state."""

    state_dim = 2
    n_extra = 0

    def __init__(self):
        self.extra_params = np.zeros(0)

    def build_batch(self, seed_base, n_paths):
        return np.zeros((n_paths, 2)), {"n": n_paths}

    def evaluate_actions(self, actions, meta):
        rewards = -(actions - 3.0) ** 2
        return BatchResult(returns=rewards, price=float(rewards.mean()),
                           price_se=float(rewards.std(ddof=1) / math.sqrt(meta["n"])),
                           mean_return=float(rewards.mean()))


class ExplodingEnv(BanditEnv):
    def evaluate_actions(self, actions, meta):
        raise NumericError("boom")


def _specs(width=16, blocks=2):
    return (NetSpec(input_dim=2, hidden_width=width, n_blocks=blocks, head=GAUSSIAN_POLICY),
            NetSpec(input_dim=2, hidden_width=width, n_blocks=blocks, head=SCALAR_VALUE))


def _bandit_cfg(n_batches=2000, seed=7):
    return TrainConfig(episodes_per_batch=64, n_batches=n_batches, lr_policy=1e-2,
                       lr_value=5e-2, seed=seed, eval_paths=256,
                       convergence_window=10 ** 6)


@pytest.fixture(scope="module")
def trained_bandit():
    env = BanditEnv()
    policy_spec, value_spec = _specs()
    report, ckpt = train(env, policy_spec, value_spec, _bandit_cfg())
    return env, policy_spec, value_spec, report, ckpt


def test_bandit_policy_converges_to_argmax(trained_bandit):
    _, policy_spec, _, report, ckpt = trained_bandit
    mu, _, _, _ = policy_outputs(policy_spec, ckpt.policy_params, np.zeros((1, 2)))
    assert abs(mu[0] - 3.0) < 0.1
    assert len(report.mean_return) <= 2000


def test_advantage_centering_after_warmup(trained_bandit):
    # after the baseline has tracked, batch-mean advantage sits near zero
    env, policy_spec, value_spec, _, ckpt = trained_bandit
    states, meta = env.build_batch(0, 4096)
    mu, sigma, _, _ = policy_outputs(policy_spec, ckpt.policy_params, states)
    rng = np.random.default_rng(123)
    actions = mu + sigma * rng.standard_normal(mu.shape[0])
    result = env.evaluate_actions(actions, meta)
    from rlhedge.neuralpolicy import forward
    v_pred = forward(value_spec, ckpt.value_params, states)[0][:, 0]
    adv = result.returns - v_pred
    se = adv.std(ddof=1) / math.sqrt(adv.size)
    assert abs(adv.mean()) < 3.0 * se + 1e-3


def test_score_function_estimator_is_unbiased():
    # E[(r - b) d log pi / d mu] equals d/d mu E[r] = -2 (mu - 3)
    mu, sigma, baseline = 1.0, 0.5, -2.0
    rng = np.random.default_rng(17)
    actions = mu + sigma * rng.standard_normal(100_000)
    rewards = -(actions - 3.0) ** 2
    _, d_mu, _ = gaussian_logpdf_grad(mu, sigma, actions)
    samples = (rewards - baseline) * d_mu
    se = samples.std(ddof=1) / math.sqrt(samples.size)
    assert abs(samples.mean() - (-2.0 * (mu - 3.0))) < 3.0 * se


def test_fixed_seed_reproduces_report_bit_for_bit():
    policy_spec, value_spec = _specs(width=8, blocks=1)
    cfg = _bandit_cfg(n_batches=40, seed=99)
    r1, c1 = train(BanditEnv(), policy_spec, value_spec, cfg)
    r2, c2 = train(BanditEnv(), policy_spec, value_spec, cfg)
    np.testing.assert_array_equal(r1.mean_return, r2.mean_return)
    np.testing.assert_array_equal(r1.price, r2.price)
    np.testing.assert_array_equal(r1.grad_norm_policy, r2.grad_norm_policy)
    assert np.array_equal(c1.policy_params, c2.policy_params)
    assert r1.checkpoint_id == r2.checkpoint_id


def _flat_qlbs_env(steps=4):
    # sigma = 0, lambda = 0, eps = 0: deterministic, flat objective
    gbm = GbmParams(mu=0.0, sigma=0.0, r=0.0, s0=1.2, horizon_steps=steps, dt=1 / 252)
    contract = OptionContract(strike=1.0, expiry_steps=steps, tau_years=steps / 252)
    return QlbsEnv(QlbsConfig(gbm=gbm, contract=contract))


def test_flat_deterministic_env_returns_constant_and_gradient_dies():
    env = _flat_qlbs_env()
    policy_spec = NetSpec(input_dim=2, hidden_width=8, n_blocks=1, head=GAUSSIAN_POLICY)
    value_spec = NetSpec(input_dim=2, hidden_width=8, n_blocks=1, head=SCALAR_VALUE)
    cfg = TrainConfig(episodes_per_batch=16, n_batches=300, lr_policy=1e-3,
                      lr_value=1e-2, seed=3, convergence_window=10 ** 6)
    report, _ = train(env, policy_spec, value_spec, cfg)
    assert np.ptp(report.mean_return) < 1e-12  # returns constant
    assert report.grad_norm_policy[-50:].mean() < 0.1 * report.grad_norm_policy[:20].mean()


def test_training_failed_after_too_many_skips():
    policy_spec, value_spec = _specs(width=8, blocks=1)
    cfg = _bandit_cfg(n_batches=20, seed=1)
    with pytest.raises(TrainingFailedError):
        train(ExplodingEnv(), policy_spec, value_spec, cfg)


def test_training_log_is_written(tmp_path):
    policy_spec, value_spec = _specs(width=8, blocks=1)
    cfg = _bandit_cfg(n_batches=5, seed=2)
    log = tmp_path / "log.jsonl"
    train(BanditEnv(), policy_spec, value_spec, cfg, log_path=log)
    import json
    lines = [json.loads(line) for line in log.read_text().splitlines()]
    assert len(lines) == 5
    assert {"batch", "mean_return", "baseline_loss", "price", "price_se",
            "grad_norm_policy", "grad_norm_value"} <= set(lines[0])


class TestEvaluate:
    def test_same_seed_identical(self, trained_bandit):
        env, _, _, _, ckpt = trained_bandit
        a = evaluate(env, ckpt, eval_paths=500, seed=42)
        b = evaluate(env, ckpt, eval_paths=500, seed=42)
        assert a == b

    def test_se_scales_like_inverse_sqrt_n(self):
        # CLT check on a stochastic env
        gbm = GbmParams(mu=0.0, sigma=0.2, r=0.0, s0=1.0, horizon_steps=4, dt=1 / 252)
        contract = OptionContract(strike=1.0, expiry_steps=4, tau_years=4 / 252)
        env = QlbsEnv(QlbsConfig(gbm=gbm, contract=contract))
        policy_spec = NetSpec(input_dim=2, hidden_width=8, n_blocks=1,
                              head=GAUSSIAN_POLICY)
        value_spec = NetSpec(input_dim=2, hidden_width=8, n_blocks=1,
                             head=SCALAR_VALUE)
        ckpt = Checkpoint(policy_spec=policy_spec,
                          policy_params=np.zeros(n_params(policy_spec)),
                          value_spec=value_spec,
                          value_params=np.zeros(n_params(value_spec)),
                          extra_params=np.zeros(0), meta={})
        _, se_small = evaluate(env, ckpt, eval_paths=4000, seed=0)
        _, se_large = evaluate(env, ckpt, eval_paths=16000, seed=0)
        assert abs(se_small / se_large - 2.0) < 0.4  # halved within 20%

    def test_deterministic_env_has_zero_se(self):
        env = _flat_qlbs_env()
        policy_spec = NetSpec(input_dim=2, hidden_width=8, n_blocks=1,
                              head=GAUSSIAN_POLICY)
        value_spec = NetSpec(input_dim=2, hidden_width=8, n_blocks=1,
                             head=SCALAR_VALUE)
        ckpt = Checkpoint(policy_spec=policy_spec,
                          policy_params=init_params(policy_spec, 0),
                          value_spec=value_spec,
                          value_params=init_params(value_spec, 1),
                          extra_params=np.zeros(0), meta={})
        price, se = evaluate(env, ckpt, eval_paths=64, seed=0)
        assert se == 0.0
        assert price == pytest.approx(0.2, abs=1e-12)


def test_checkpoint_round_trip_reproduces_price(tmp_path, trained_bandit):
    env, _, _, _, ckpt = trained_bandit
    path = tmp_path / "ckpt.npz"
    save_checkpoint(path, ckpt)
    loaded = load_checkpoint(path)
    assert loaded.checkpoint_id == ckpt.checkpoint_id
    assert evaluate(env, loaded, 500, seed=9) == evaluate(env, ckpt, 500, seed=9)
