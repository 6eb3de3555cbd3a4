"""European call pricers: Black-76, Merton jump-diffusion, Heston.

All pricers work in forward terms: a quote supplies the forward F and the
discount factor DF, and carry never appears explicitly (the dataset
convention).  Deltas are spot deltas, differentiating the price in the spot
while holding the carry ratio F/spot fixed.

Normal CDF uses the complementary-error-function route (|error| < 1e-15),
so pricing accuracy dominates every downstream tolerance.

Heston evaluation: the trap-stable C/D characteristic-function pieces are
used inside the single-integral (Lewis) representation

    C = DF * [ F - sqrt(F K)/pi * int_0^inf Re(e^{iuX} psi(u - i/2)) / (u^2 + 1/4) du ],

X = ln(F/K).  The integrand is regular at u=0 for every admissible parameter
set (including Feller-violating fits), which the two-probability form is not.
Quadrature is Gauss-Legendre, order 128 per panel of width 200, with the
domain extended by whole panels for short maturities; the result is accepted
only if doubling the order moves the price by less than ``_QUAD_TOL``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

from .errors import NoSolutionError, NumericError, ParameterError


@dataclass(frozen=True)
class OptionContract:
    """European call: strike, steps to expiry on the hedging grid, year fraction."""

    strike: float
    expiry_steps: int
    tau_years: float
    is_call: bool = True

    def __post_init__(self):
        if self.strike <= 0.0:
            raise ParameterError(f"strike must be > 0, got {self.strike}")
        if self.tau_years <= 0.0:
            raise ParameterError(f"tau_years must be > 0, got {self.tau_years}")
        if not self.is_call:
            raise ParameterError("only calls are supported")


@dataclass(frozen=True)
class ForwardQuote:
    forward: float
    discount: float

    def __post_init__(self):
        if self.forward <= 0.0:
            raise ParameterError(f"forward must be > 0, got {self.forward}")
        if not 0.0 < self.discount <= 1.0:
            raise ParameterError(f"discount must be in (0, 1], got {self.discount}")


@dataclass(frozen=True)
class BsParams:
    sigma: float

    def __post_init__(self):
        if self.sigma < 0.0:
            raise ParameterError(f"sigma must be >= 0, got {self.sigma}")


@dataclass(frozen=True)
class JumpDiffusionParams:
    """Merton lognormal jumps: intensity per year, jump mean/std in log space."""

    sigma: float
    jump_intensity: float
    jump_mean_log: float
    jump_std_log: float

    def __post_init__(self):
        if self.sigma < 0.0 or self.jump_std_log < 0.0 or self.jump_intensity < 0.0:
            raise ParameterError("sigma, jump_intensity and jump_std_log must be >= 0")


@dataclass(frozen=True)
class HestonParams:
    v0: float
    kappa: float
    theta: float
    xi: float
    rho: float

    def __post_init__(self):
        if self.v0 < 0.0 or self.theta < 0.0 or self.xi < 0.0:
            raise ParameterError("v0, theta, xi must be >= 0")
        if not -1.0 <= self.rho <= 1.0:
            raise ParameterError(f"rho must be in [-1, 1], got {self.rho}")


ModelParams = Union[BsParams, JumpDiffusionParams, HestonParams]


def norm_cdf(x):
    """Standard normal CDF via erfc; |error| < 1e-15 over the real line."""
    return ndtr(x)


# ---------------------------------------------------------------------------
# Black-76
# ---------------------------------------------------------------------------

def _black76_forward(forward, strike, tau, sigma):
    """Undiscounted Black-76 call value; vectorized over forward/strike."""
    forward = np.asarray(forward, dtype=float)
    strike = np.asarray(strike, dtype=float)
    v = sigma * math.sqrt(tau)
    if v <= 0.0:
        out = np.maximum(forward - strike, 0.0)
        return out if out.shape else float(out)
    d1 = np.log(forward / strike) / v + 0.5 * v
    d2 = d1 - v
    out = forward * ndtr(d1) - strike * ndtr(d2)
    return out if out.shape else float(out)


def black76_price(q: ForwardQuote, c: OptionContract, sigma: float) -> float:
    """Discounted Black-76 call price DF*(F N(d1) - K N(d2))."""
    if sigma < 0.0:
        raise ParameterError(f"sigma must be >= 0, got {sigma}")
    return q.discount * _black76_forward(q.forward, c.strike, c.tau_years, sigma)


def black76_delta(q: ForwardQuote, c: OptionContract, sigma: float, spot: float) -> float:
    """Spot delta DF * (F/spot) * N(d1), the F/spot carry ratio held fixed."""
    if sigma < 0.0:
        raise ParameterError(f"sigma must be >= 0, got {sigma}")
    if spot <= 0.0:
        raise ParameterError(f"spot must be > 0, got {spot}")
    carry = q.forward / spot
    v = sigma * math.sqrt(c.tau_years)
    if v <= 0.0:
        nd1 = 1.0 if q.forward > c.strike else (0.5 if q.forward == c.strike else 0.0)
    else:
        nd1 = float(ndtr(math.log(q.forward / c.strike) / v + 0.5 * v))
    return q.discount * carry * nd1


# ---------------------------------------------------------------------------
# Merton jump-diffusion
# ---------------------------------------------------------------------------

_MERTON_MIN_TERMS = 10
_MERTON_MAX_TERMS = 512
_MERTON_TAIL_REL = 1e-12


def _merton_terms(q: ForwardQuote, c: OptionContract, p: JumpDiffusionParams):
    """Yield (poisson weight, conditional forward, conditional sigma) terms.

    Conditioning on n jumps, S_T is lognormal with forward
    F_n = F exp(-lam tau kbar) (1+kbar)^n and total variance
    sigma^2 tau + n s^2, with kbar = exp(m + s^2/2) - 1 chosen so the
    weighted forwards recombine to F.
    """
    tau = c.tau_years
    lam_tau = p.jump_intensity * tau
    kbar = math.exp(p.jump_mean_log + 0.5 * p.jump_std_log ** 2) - 1.0
    log_w = -lam_tau
    n = 0
    while True:
        weight = math.exp(log_w)
        f_n = q.forward * math.exp(-lam_tau * kbar) * (1.0 + kbar) ** n
        sigma_n = math.sqrt(p.sigma ** 2 + n * p.jump_std_log ** 2 / tau)
        yield n, weight, f_n, sigma_n
        n += 1
        log_w += (math.log(lam_tau) if lam_tau > 0.0 else -math.inf) - math.log(n)


def _merton_sum(q, c, p, term_value):
    """Poisson-weighted series, truncated when the tail bound drops below 1e-12.

    Remaining terms are bounded by F * P(Poisson(lam2) > n) with lam2 the
    size-tilted jump rate, since each term is at most its conditional forward.
    """
    lam2 = p.jump_intensity * c.tau_years * math.exp(p.jump_mean_log + 0.5 * p.jump_std_log ** 2)
    total = 0.0
    w2 = math.exp(-lam2)  # P(N = n) under the size-tilted rate lam2
    w2_sum = w2
    for n, weight, f_n, sigma_n in _merton_terms(q, c, p):
        if n > 0:
            w2 *= lam2 / n
            w2_sum += w2
        total = total + weight * term_value(f_n, sigma_n)
        if n >= _MERTON_MIN_TERMS:
            tail = q.forward * max(0.0, 1.0 - w2_sum)
            floor = max(
                _MERTON_TAIL_REL * float(np.min(np.abs(np.atleast_1d(total)))),
                4e-16 * q.forward,  # fp floor of the sum itself
            )
            if tail <= floor:
                return total
        if n >= _MERTON_MAX_TERMS:
            raise NumericError(f"Merton series did not converge in {_MERTON_MAX_TERMS} terms")


def merton_price(q: ForwardQuote, c: OptionContract, p: JumpDiffusionParams) -> float:
    """Merton call: Poisson mixture of Black-76 prices over jump counts."""
    if p.jump_intensity == 0.0:
        return black76_price(q, c, p.sigma)
    return q.discount * _merton_sum(
        q, c, p, lambda f_n, s_n: _black76_forward(f_n, c.strike, c.tau_years, s_n)
    )


def merton_prices_strikes(q: ForwardQuote, strikes: np.ndarray, tau: float,
                          p: JumpDiffusionParams) -> np.ndarray:
    """Vectorized Merton prices for one expiry and an array of strikes."""
    strikes = np.asarray(strikes, dtype=float)
    c = OptionContract(strike=float(strikes[0]), expiry_steps=1, tau_years=tau)
    if p.jump_intensity == 0.0:
        return q.discount * _black76_forward(q.forward, strikes, tau, p.sigma)
    out = _merton_sum(q, c, p, lambda f_n, s_n: _black76_forward(f_n, strikes, tau, s_n))
    return q.discount * np.asarray(out)


def merton_delta(q: ForwardQuote, c: OptionContract, p: JumpDiffusionParams, spot: float) -> float:
    """Differentiated Merton series: spot delta with F/spot carry fixed."""
    if spot <= 0.0:
        raise ParameterError(f"spot must be > 0, got {spot}")
    if p.jump_intensity == 0.0:
        return black76_delta(q, c, p.sigma, spot)

    def nd1_term(f_n, s_n):
        v = s_n * math.sqrt(c.tau_years)
        if v <= 0.0:
            nd1 = 1.0 if f_n > c.strike else (0.5 if f_n == c.strike else 0.0)
        else:
            nd1 = float(ndtr(math.log(f_n / c.strike) / v + 0.5 * v))
        return f_n * nd1

    return q.discount / spot * _merton_sum(q, c, p, nd1_term)


# ---------------------------------------------------------------------------
# Heston
# ---------------------------------------------------------------------------

_QUAD_ORDER = 128
_FAST_ORDER = 64  # single-pass order for calibration search
_PANEL_WIDTH = 200.0
_MAX_PANELS = 96
_QUAD_TOL_REL = 1e-8

_gl_cache: dict = {}


def _gl_nodes(order: int):
    if order not in _gl_cache:
        x, w = np.polynomial.legendre.leggauss(order)
        _gl_cache[order] = (x, w)
    return _gl_cache[order]


def _log1p_complex(z: np.ndarray) -> np.ndarray:
    """log(1+z) for complex z, accurate for small |z|."""
    x, y = z.real, z.imag
    return 0.5 * np.log1p(2.0 * x + x * x + y * y) + 1j * np.arctan2(y, 1.0 + x)


def _heston_psi_half(u: np.ndarray, tau: float, p: HestonParams) -> np.ndarray:
    """CF of ln(S_T/F) evaluated at z = u - i/2 (the Lewis strip).

    Written so xi^2 cancels analytically: beta - d = -num / (beta + d) with
    num = xi^2 (u^2 + 1/4) real, which keeps xi -> 0 exact instead of a
    0/0 cancellation.
    """
    xi2 = p.xi * p.xi
    z = u - 0.5j
    beta = p.kappa - 1j * p.rho * p.xi * z
    num = xi2 * (u * u + 0.25)
    d = np.sqrt(beta * beta + num)
    beta_plus = beta + d
    beta_minus_over_xi2 = -(u * u + 0.25) / beta_plus  # (beta - d)/xi^2
    ce = np.where(num == 0.0, 0.0, -num / (beta_plus * beta_plus))  # trap ratio g
    edt = np.exp(-d * tau)
    dd = beta_minus_over_xi2 * (1.0 - edt) / (1.0 - ce * edt)
    if xi2 > 0.0:
        log_ratio = _log1p_complex(-ce * edt) - _log1p_complex(-ce)
        cc = p.kappa * p.theta * (beta_minus_over_xi2 * tau - 2.0 * log_ratio / xi2)
    else:
        # xi = 0 limit: log_ratio/xi^2 -> ctilde (1 - edt), deterministic variance
        ctilde = -(u * u + 0.25) / (beta_plus * beta_plus)
        cc = p.kappa * p.theta * (beta_minus_over_xi2 * tau - 2.0 * ctilde * (1.0 - edt))
    return np.exp(cc + dd * p.v0)


_TARGET_EXPONENT = 40.0  # integrate until |psi| ~ exp(-40)
_HEAD_PANEL = 4.0  # resolves the u = i/2 pole scale of 1/(u^2 + 1/4)


def _heston_edges(tau: float, p: HestonParams):
    """Panel edges adapted to the CF decay.

    |psi(u - i/2)| ~ exp(-a g(u)) with a = v0 + kappa theta tau; g grows like
    u^2 tau / 2 until the vol-of-vol regime takes over at u* = sqrt(1-rho^2)
    / (xi tau), then linearly with slope sqrt(1-rho^2)/xi.  The domain is
    sized so this exponent reaches ~40.  A short head panel keeps the 1/(u^2
    + 1/4) pole scale resolved; the rest uses panels capped at 200 so strike
    oscillation stays resolved.  _MAX_PANELS bounds the budget; the tail
    guard in the integrator decides whether a capped domain sufficed.
    """
    a = max(p.v0 + p.kappa * p.theta * tau, 1e-12)
    u_quad = math.sqrt(2.0 * _TARGET_EXPONENT / (a * tau))
    u_hi = u_quad
    if p.xi > 0.0:
        root_1m_rho2 = math.sqrt(max(1.0 - p.rho * p.rho, 1e-4))
        u_star = root_1m_rho2 / (p.xi * tau)
        exp_at_star = 0.5 * a * tau * u_star * u_star
        if exp_at_star < _TARGET_EXPONENT:
            u_hi = u_star + (_TARGET_EXPONENT - exp_at_star) * p.xi / (a * root_1m_rho2)
    vbar = max(p.v0, p.theta, 1e-3)
    width = min(8.0 / math.sqrt(vbar * tau), _PANEL_WIDTH)
    head = min(_HEAD_PANEL, 0.5 * width)
    n_body = int(math.ceil((u_hi - head) / width))
    n_body = max(2, min(_MAX_PANELS - 1, n_body))
    return [0.0, head] + [head + k * width for k in range(1, n_body + 1)]


def _heston_integral(x_moneyness: np.ndarray, tau: float, p: HestonParams,
                     order: int, edges):
    """int over the panel edges of Re(e^{iuX} psi(u-i/2)) / (u^2+1/4) per X."""
    nodes, weights = _gl_nodes(order)
    lo = np.asarray(edges[:-1])
    hi = np.asarray(edges[1:])
    half = 0.5 * (hi - lo)
    u = (lo[:, np.newaxis] + half[:, np.newaxis] * (nodes + 1.0)).ravel()
    w = (half[:, np.newaxis] * weights).ravel()
    psi = _heston_psi_half(u, tau, p)
    integ = w * psi / (u * u + 0.25)
    ux = np.outer(np.atleast_1d(x_moneyness), u)
    acc = np.cos(ux) @ integ.real - np.sin(ux) @ integ.imag
    # |psi| is decreasing, so the truncated mass is below |psi(u_hi)|/u_hi
    tail = float(np.abs(psi[-1])) / edges[-1]
    return acc, tail


def heston_prices_strikes(q: ForwardQuote, strikes, tau: float, p: HestonParams,
                          order: int = _QUAD_ORDER, check: bool = True) -> np.ndarray:
    """Heston call prices for one expiry across strikes.

    With check=True (the default) the quadrature is repeated at doubled order
    and disagreement raises NumericError.  check=False skips the doubled pass
    (calibration search uses it; the truncation tail guard still applies).
    """
    strikes = np.atleast_1d(np.asarray(strikes, dtype=float))
    if np.any(strikes <= 0.0):
        raise ParameterError("strikes must be > 0")
    veff = p.theta * tau + (p.v0 - p.theta) * (
        (1.0 - math.exp(-p.kappa * tau)) / p.kappa if p.kappa > 0.0 else tau
    )
    if veff < 1e-16:
        # variance path is (numerically) identically zero: forward is deterministic
        return q.discount * np.maximum(q.forward - strikes, 0.0)
    x = np.log(q.forward / strikes)
    edges = _heston_edges(tau, p)
    coef = q.discount * np.sqrt(q.forward * strikes) / math.pi
    tol = max(1e-10, _QUAD_TOL_REL * q.discount * q.forward)
    if check:
        base, _ = _heston_integral(x, tau, p, order, edges)
        fine, tail = _heston_integral(x, tau, p, 2 * order, edges)
        err = float(np.max(np.abs(coef * (fine - base))))
    else:
        fine, tail = _heston_integral(x, tau, p, _FAST_ORDER, edges)
        err = 0.0
    tail_err = float(np.max(coef)) * tail
    if not (np.isfinite(err) and np.all(np.isfinite(fine))) or err > tol or tail_err > tol:
        raise NumericError(
            f"Heston quadrature did not converge (order gap {err:.3e}, tail {tail_err:.3e})"
        )
    return q.discount * q.forward - coef * fine


def heston_price(q: ForwardQuote, c: OptionContract, p: HestonParams,
                 order: int = _QUAD_ORDER) -> float:
    """Semi-closed-form Heston call price (see module docstring for numerics)."""
    return float(heston_prices_strikes(q, c.strike, c.tau_years, p, order=order)[0])


_HESTON_DELTA_BUMP = 1e-4


def heston_delta(q: ForwardQuote, c: OptionContract, p: HestonParams, spot: float) -> float:
    """Central finite difference in spot (bump 1e-4 * spot), carry fixed."""
    if spot <= 0.0:
        raise ParameterError(f"spot must be > 0, got {spot}")
    h = _HESTON_DELTA_BUMP * spot
    carry = q.forward / spot
    up = heston_prices_strikes(ForwardQuote((spot + h) * carry, q.discount),
                               c.strike, c.tau_years, p)[0]
    dn = heston_prices_strikes(ForwardQuote((spot - h) * carry, q.discount),
                               c.strike, c.tau_years, p)[0]
    return float((up - dn) / (2.0 * h))


# ---------------------------------------------------------------------------
# Dispatch and implied vol
# ---------------------------------------------------------------------------

def model_price(p: ModelParams, q: ForwardQuote, c: OptionContract) -> float:
    if isinstance(p, BsParams):
        return black76_price(q, c, p.sigma)
    if isinstance(p, JumpDiffusionParams):
        return merton_price(q, c, p)
    if isinstance(p, HestonParams):
        return heston_price(q, c, p)
    raise ParameterError(f"unknown model params {type(p).__name__}")


def model_delta(p: ModelParams, q: ForwardQuote, c: OptionContract, spot: float) -> float:
    if isinstance(p, BsParams):
        return black76_delta(q, c, p.sigma, spot)
    if isinstance(p, JumpDiffusionParams):
        return merton_delta(q, c, p, spot)
    if isinstance(p, HestonParams):
        return heston_delta(q, c, p, spot)
    raise ParameterError(f"unknown model params {type(p).__name__}")


def model_prices_strikes(p: ModelParams, q: ForwardQuote, strikes, tau: float,
                         fast: bool = False) -> np.ndarray:
    """Vectorized one-expiry pricing used by calibration objectives."""
    strikes = np.atleast_1d(np.asarray(strikes, dtype=float))
    if isinstance(p, BsParams):
        return q.discount * _black76_forward(q.forward, strikes, tau, p.sigma)
    if isinstance(p, JumpDiffusionParams):
        return merton_prices_strikes(q, strikes, tau, p)
    if isinstance(p, HestonParams):
        return heston_prices_strikes(q, strikes, tau, p, check=not fast)
    raise ParameterError(f"unknown model params {type(p).__name__}")


_IV_MAX_SIGMA = 64.0


def implied_vol(q: ForwardQuote, c: OptionContract, price: float) -> float:
    """Invert Black-76 by bracketed root finding on the no-arbitrage band.

    Raises NoSolutionError outside (DF*(F-K)^+, DF*F); the bracket is expanded
    upward before Brent so convergence is guaranteed inside the band.
    """
    intrinsic = q.discount * max(q.forward - c.strike, 0.0)
    upper = q.discount * q.forward
    if not math.isfinite(price) or price <= intrinsic or price >= upper:
        raise NoSolutionError(
            f"price {price} outside the no-arbitrage band ({intrinsic}, {upper})"
        )

    def f(sigma):
        return black76_price(q, c, sigma) - price

    hi = 0.5
    while f(hi) < 0.0:
        hi *= 2.0
        if hi > _IV_MAX_SIGMA:
            raise NoSolutionError(f"no implied vol below {_IV_MAX_SIGMA}")
    return float(brentq(f, 0.0, hi, xtol=1e-14, rtol=8.9e-16, maxiter=200))
