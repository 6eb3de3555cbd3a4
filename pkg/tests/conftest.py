import math
import pathlib
import sys

import numpy as np
import pytest

sys.path.insert(0, str(pathlib.Path(__file__).parent))

from rlhedge.marketsim import GbmParams
from rlhedge.neuralpolicy import GAUSSIAN_POLICY, SCALAR_VALUE, NetSpec
from rlhedge.pricers import OptionContract
from rlhedge.qlbs import QlbsConfig, QlbsEnv
from rlhedge.rlop import RlopConfig, RlopEnv
from rlhedge.trainer import TrainConfig, train

# Figure setup shared by training tests: T = 2 months, K = 1, r = 4%, mu = r,
# discretized as 14 steps (exact log-normal stepping is unbiased in the step
# count; 14 keeps the stacked RLOP ensemble desk-scale).
FIG_TAU = 1.0 / 6.0
FIG_STEPS = 14
FIG_DT = FIG_TAU / FIG_STEPS
FIG_RATE = 0.04


def fig_gbm(sigma: float) -> GbmParams:
    return GbmParams(mu=FIG_RATE, sigma=sigma, r=FIG_RATE, s0=1.0,
                     horizon_steps=FIG_STEPS, dt=FIG_DT)


def fig_contract() -> OptionContract:
    return OptionContract(strike=1.0, expiry_steps=FIG_STEPS, tau_years=FIG_TAU)


def _net_specs(input_dim):
    return (NetSpec(input_dim=input_dim, hidden_width=32, n_blocks=3, head=GAUSSIAN_POLICY),
            NetSpec(input_dim=input_dim, hidden_width=32, n_blocks=3, head=SCALAR_VALUE))


def train_qlbs(sigma, lambda_risk, epsilon_tc, seed, n_batches=1200,
               episodes=256, lr_policy=3e-3, lr_value=1e-2):
    cfg = QlbsConfig(gbm=fig_gbm(sigma), contract=fig_contract(),
                     lambda_risk=lambda_risk, epsilon_tc=epsilon_tc,
                     batch_paths=episodes)
    env = QlbsEnv(cfg)
    policy_spec, value_spec = _net_specs(2)
    tcfg = TrainConfig(episodes_per_batch=episodes, n_batches=n_batches,
                       lr_policy=lr_policy, lr_value=lr_value, seed=seed,
                       convergence_window=250, convergence_tol=5e-4)
    report, ckpt = train(env, policy_spec, value_spec, tcfg,
                         meta={"method": "qlbs", "mu": FIG_RATE, "sigma": sigma,
                               "r": FIG_RATE, "s0": 1.0, "dt": FIG_DT,
                               "horizon_steps": FIG_STEPS, "strike": 1.0})
    return cfg, report, ckpt


def train_rlop(sigma, epsilon_tc, seed, n_batches=1200, episodes=128,
               lr_policy=3e-3, lr_value=1e-2):
    cfg = RlopConfig(gbm=fig_gbm(sigma), strike=1.0, epsilon_tc=epsilon_tc,
                     batch_paths=episodes)
    env = RlopEnv(cfg)
    policy_spec, value_spec = _net_specs(3)
    tcfg = TrainConfig(episodes_per_batch=episodes, n_batches=n_batches,
                       lr_policy=lr_policy, lr_value=lr_value, seed=seed,
                       convergence_window=250, convergence_tol=5e-4)
    report, ckpt = train(env, policy_spec, value_spec, tcfg,
                         meta={"method": "rlop", "mu": FIG_RATE, "sigma": sigma,
                               "r": FIG_RATE, "s0": 1.0, "dt": FIG_DT,
                               "horizon_steps": FIG_STEPS, "strike": 1.0})
    return cfg, env, report, ckpt


@pytest.fixture(scope="session")
def qlbs_frictionless_trained():
    """lambda = 0.5, eps = 0, sigma = 0.2: the delta-learning fixture."""
    return train_qlbs(sigma=0.2, lambda_risk=0.5, epsilon_tc=0.0, seed=2024)


@pytest.fixture(scope="session")
def rlop_frictionless_trained():
    """eps = 0, sigma = 0.2: the replication-learning fixture."""
    return train_rlop(sigma=0.2, epsilon_tc=0.0, seed=2024)
