import json
import math
import pathlib

import numpy as np
import pytest

from oracles import central_fd, mc_lognormal_call, mc_merton_call
from rlhedge.errors import NoSolutionError, ParameterError
from rlhedge.pricers import (BsParams, ForwardQuote, HestonParams,
                             JumpDiffusionParams, OptionContract, black76_delta,
                             black76_price, heston_price, implied_vol,
                             merton_price, model_delta, model_price,
                             model_prices_strikes)

ATM = OptionContract(strike=100.0, expiry_steps=252, tau_years=1.0)
UNIT_Q = ForwardQuote(forward=100.0, discount=1.0)


class TestBlack76:
    def test_zero_vol_intrinsic(self):
        assert black76_price(ForwardQuote(110.0, 1.0), ATM, 0.0) == 10.0

    def test_zero_strike_limit(self):
        contract = OptionContract(strike=1e-12, expiry_steps=252, tau_years=1.0)
        assert black76_price(ForwardQuote(100.0, 0.9), contract, 0.3) == pytest.approx(90.0, abs=1e-9)

    def test_atm_against_mc(self):
        price = black76_price(UNIT_Q, ATM, 0.2)
        mc, se = mc_lognormal_call(100.0, 100.0, 1.0, 0.2, 1.0, 10 ** 7, seed=11)
        assert abs(price - mc) < 3.0 * se

    def test_negative_vol_rejected(self):
        with pytest.raises(ParameterError):
            black76_price(UNIT_Q, ATM, -0.1)


class TestBlack76Delta:
    def test_deep_itm_saturates(self):
        q = ForwardQuote(1000.0, 0.95)
        c = OptionContract(strike=1.0, expiry_steps=252, tau_years=1.0)
        delta = black76_delta(q, c, 0.2, spot=990.0)
        assert abs(delta - 0.95 * 1000.0 / 990.0) < 1e-9

    def test_deep_otm_vanishes(self):
        q = ForwardQuote(1.0, 1.0)
        c = OptionContract(strike=1000.0, expiry_steps=252, tau_years=1.0)
        assert abs(black76_delta(q, c, 0.2, spot=1.0)) < 1e-9

    def test_matches_finite_difference(self):
        spot = 104.0
        carry = UNIT_Q.forward / spot

        def price_of_spot(s):
            return black76_price(ForwardQuote(s * carry, UNIT_Q.discount), ATM, 0.2)

        fd = central_fd(price_of_spot, spot, 1e-4 * spot)
        delta = black76_delta(UNIT_Q, ATM, 0.2, spot)
        assert abs(delta - fd) / abs(fd) < 1e-6


class TestMerton:
    def test_lambda_zero_equals_black76_exactly(self):
        jd = JumpDiffusionParams(sigma=0.2, jump_intensity=0.0,
                                 jump_mean_log=-0.1, jump_std_log=0.15)
        assert merton_price(UNIT_Q, ATM, jd) == black76_price(UNIT_Q, ATM, 0.2)

    def test_degenerate_jumps_equal_black76(self):
        jd = JumpDiffusionParams(sigma=0.2, jump_intensity=0.5,
                                 jump_mean_log=0.0, jump_std_log=0.0)
        assert merton_price(UNIT_Q, ATM, jd) == pytest.approx(
            black76_price(UNIT_Q, ATM, 0.2), abs=1e-10)

    def test_against_jump_mc(self):
        jd = JumpDiffusionParams(sigma=0.2, jump_intensity=0.5,
                                 jump_mean_log=-0.1, jump_std_log=0.15)
        contract = OptionContract(strike=100.0, expiry_steps=126, tau_years=0.5)
        price = merton_price(UNIT_Q, contract, jd)
        mc, se = mc_merton_call(100.0, 100.0, 0.5, 0.2, 0.5, -0.1, 0.15, 1.0,
                                10 ** 7, seed=23)
        assert abs(price - mc) < 3.0 * se


def _load_heston_oracle():
    path = pathlib.Path(__file__).parent / "data" / "heston_oracle.json"
    return json.loads(path.read_text())


class TestHeston:
    def test_xi_to_zero_reduces_to_black76(self):
        p = HestonParams(v0=0.04, kappa=1.5, theta=0.04, xi=1e-4, rho=0.0)
        assert abs(heston_price(UNIT_Q, ATM, p) - black76_price(UNIT_Q, ATM, 0.2)) < 1e-6

    def test_xi_exactly_zero(self):
        p = HestonParams(v0=0.04, kappa=1.5, theta=0.04, xi=0.0, rho=0.0)
        assert abs(heston_price(UNIT_Q, ATM, p) - black76_price(UNIT_Q, ATM, 0.2)) < 1e-10

    def test_large_kappa_pins_variance_at_theta(self):
        p = HestonParams(v0=0.04, kappa=1000.0, theta=0.04, xi=0.5, rho=0.0)
        assert abs(heston_price(UNIT_Q, ATM, p) - black76_price(UNIT_Q, ATM, 0.2)) < 1e-4

    def test_standard_point_against_frozen_mc(self):
        record = _load_heston_oracle()[0]
        p = HestonParams(v0=record["v0"], kappa=record["kappa"], theta=record["theta"],
                         xi=record["xi"], rho=record["rho"])
        q = ForwardQuote(record["forward"], record["discount"])
        c = OptionContract(strike=record["forward"] * record["moneyness"],
                           expiry_steps=252, tau_years=record["tau"])
        assert abs(heston_price(q, c, p) - record["value"]) < 3.0 * record["se"]


class TestImpliedVol:
    def test_round_trip(self):
        price = black76_price(UNIT_Q, ATM, 0.2)
        assert abs(implied_vol(UNIT_Q, ATM, price) - 0.2) < 1e-8

    def test_self_consistent_fixture(self):
        # the pricer pins the fixture value first, then inverts it
        fixture = black76_price(UNIT_Q, ATM, 0.2)
        assert fixture == pytest.approx(7.9656, abs=5e-5)
        assert implied_vol(UNIT_Q, ATM, 7.9656) == pytest.approx(0.2, abs=1e-5)

    def test_intrinsic_limit(self):
        # sigma -> 0 as price -> intrinsic+ (the ITM decay is only logarithmic)
        q = ForwardQuote(110.0, 1.0)
        intrinsic = 10.0
        vols = [implied_vol(q, ATM, intrinsic + eps)
                for eps in (1e-3, 1e-5, 1e-7, 1e-12)]
        assert all(a > b for a, b in zip(vols, vols[1:]))
        assert vols[-1] < 0.015

    def test_out_of_band_rejected(self):
        q = ForwardQuote(110.0, 1.0)
        for bad in (9.0, 10.0, 110.0, 120.0):
            with pytest.raises(NoSolutionError):
                implied_vol(q, ATM, bad)


class TestModelDelta:
    def test_jd_lambda_zero_equals_black76_delta(self):
        jd = JumpDiffusionParams(sigma=0.2, jump_intensity=0.0,
                                 jump_mean_log=0.0, jump_std_log=0.1)
        assert model_delta(jd, UNIT_Q, ATM, 97.0) == black76_delta(UNIT_Q, ATM, 0.2, 97.0)

    def test_heston_xi_small_matches_black76_delta(self):
        p = HestonParams(v0=0.04, kappa=1.5, theta=0.04, xi=1e-4, rho=0.0)
        assert abs(model_delta(p, UNIT_Q, ATM, 101.0)
                   - black76_delta(UNIT_Q, ATM, 0.2, 101.0)) < 1e-5

    @pytest.mark.parametrize("params", [
        BsParams(sigma=0.25),
        JumpDiffusionParams(sigma=0.15, jump_intensity=0.8, jump_mean_log=-0.05,
                            jump_std_log=0.1),
        HestonParams(v0=0.04, kappa=1.5, theta=0.06, xi=0.5, rho=-0.6),
    ])
    def test_every_branch_matches_fd_of_its_own_price(self, params):
        spot = 102.0
        carry = UNIT_Q.forward / spot

        def price_of_spot(s):
            return model_price(params, ForwardQuote(s * carry, UNIT_Q.discount), ATM)

        fd = central_fd(price_of_spot, spot, 1e-4 * spot)
        delta = model_delta(params, UNIT_Q, ATM, spot)
        assert abs(delta - fd) / abs(fd) < 1e-5


class TestInvariants:
    def test_parity_surrogate_increasing_and_convex_in_strike(self):
        strikes = np.linspace(60.0, 150.0, 31)
        q = ForwardQuote(100.0, 0.97)
        prices = model_prices_strikes(BsParams(0.2), q, strikes, 1.0)
        surrogate = prices + q.discount * strikes
        assert np.all(np.diff(surrogate) > 0.0)
        butterfly = prices[:-2] - 2.0 * prices[1:-1] + prices[2:]
        assert np.all(butterfly >= -1e-10)

    @pytest.mark.parametrize("kind", ["bs", "jd", "heston"])
    def test_vega_positive_on_grid(self, kind):
        contract = OptionContract(strike=100.0, expiry_steps=63, tau_years=0.25)
        values = []
        for scale in np.linspace(0.6, 1.4, 5):
            if kind == "bs":
                params = BsParams(sigma=0.2 * scale)
            elif kind == "jd":
                params = JumpDiffusionParams(sigma=0.2 * scale, jump_intensity=0.5,
                                             jump_mean_log=-0.05, jump_std_log=0.1)
            else:
                params = HestonParams(v0=0.04 * scale ** 2, kappa=1.5,
                                      theta=0.04 * scale ** 2, xi=0.4, rho=-0.5)
            values.append(model_price(params, UNIT_Q, contract))
        assert np.all(np.diff(values) > 0.0)

    def test_implied_vol_identity_on_random_grid(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            sigma = rng.uniform(0.05, 0.9)
            tau = rng.uniform(0.02, 1.5)
            strike = 100.0 * rng.uniform(0.7, 1.4)
            discount = rng.uniform(0.9, 1.0)
            q = ForwardQuote(100.0, discount)
            c = OptionContract(strike=strike, expiry_steps=21, tau_years=tau)
            price = black76_price(q, c, sigma)
            assert abs(implied_vol(q, c, price) - sigma) < 1e-8
