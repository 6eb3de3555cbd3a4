"""Distributional summaries of hedge outcomes.

Tail metrics operate on shortfalls SF = max(0, -pnl), losses as positive
numbers.  The empirical quantile uses the ceiling order statistic: VaR_alpha
is the ascending-sorted SF value at 1-based index ceil((1-alpha) n), and
ES_alpha is the mean of all SF values >= VaR_alpha.  This convention is
fixed so every hand oracle is deterministic.

Aggregation is equal-day: every per-day list enters its summary unweighted,
and per-day statistics (IVRMSE) average one observation per date.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import InsufficientDataError, NoSolutionError
from .pricers import implied_vol

_Z95 = 1.959963984540054  # two-sided 95% normal quantile


@dataclass(frozen=True)
class TailReport:
    es_05: float
    es_10: float
    var_05: float
    var_10: float
    shortfall_prob: float
    n_days: int
    ecdf: List[Tuple[float, float]]


@dataclass(frozen=True)
class RiskCostPoint:
    mean_tc: float
    mean_tc_ci: Tuple[float, float]
    rmse_xi: float
    rmse_xi_ci: Tuple[float, float]


@dataclass(frozen=True)
class IvrmseDay:
    value: float  # units of 10^2 vol points
    n_used: int
    n_dropped: int


def shortfall(pnl: float) -> float:
    """Positive part of the loss."""
    return max(0.0, -pnl)


def es_alpha(outcomes: Sequence[float], alpha: float) -> Tuple[float, float]:
    """(VaR_alpha, ES_alpha) of shortfalls under the ceiling convention."""
    n = len(outcomes)
    if n < 1:
        raise InsufficientDataError("es_alpha needs at least one outcome")
    sf = np.sort(np.maximum(0.0, -np.asarray(outcomes, dtype=float)))
    # guard the ceiling against float noise like 0.8 * 5 = 4.0000000000000004
    idx = min(n, max(1, math.ceil((1.0 - alpha) * n - 1e-9)))
    var = float(sf[idx - 1])
    es = float(sf[sf >= var].mean())
    return var, es


def shortfall_prob(outcomes: Sequence[float]) -> float:
    """Fraction of strictly negative outcomes (zero is not a loss)."""
    arr = np.asarray(outcomes, dtype=float)
    if arr.size < 1:
        raise InsufficientDataError("shortfall_prob needs at least one outcome")
    return float(np.count_nonzero(arr < 0.0) / arr.size)


def ecdf(outcomes: Sequence[float]) -> List[Tuple[float, float]]:
    """Right-continuous ECDF as sorted (value, cumulative prob) pairs."""
    arr = np.asarray(outcomes, dtype=float)
    if arr.size < 1:
        raise InsufficientDataError("ecdf needs at least one outcome")
    values, counts = np.unique(arr, return_counts=True)
    cum = np.cumsum(counts) / arr.size
    return [(float(v), float(c)) for v, c in zip(values, cum)]


def tail_report(outcomes: Sequence[float]) -> TailReport:
    var_05, es_05 = es_alpha(outcomes, 0.05)
    var_10, es_10 = es_alpha(outcomes, 0.10)
    return TailReport(es_05=es_05, es_10=es_10, var_05=var_05, var_10=var_10,
                      shortfall_prob=shortfall_prob(outcomes),
                      n_days=len(outcomes), ecdf=ecdf(outcomes))


def rmse_xi(xi_values: Sequence[float], tc_values: Optional[Sequence[float]] = None
            ) -> RiskCostPoint:
    """Risk-cost map point: RMSE(xi) and mean TC, each with a 95% CI.

    The CI is a normal approximation on mean(xi^2), mapped to RMSE by taking
    square roots of the (clamped nonnegative) bounds.
    """
    xi_arr = np.asarray(xi_values, dtype=float)
    if xi_arr.size < 1:
        raise InsufficientDataError("rmse_xi needs at least one outcome")
    sq = xi_arr ** 2
    mean_sq = float(sq.mean())
    se_sq = float(sq.std(ddof=1) / math.sqrt(sq.size)) if sq.size > 1 else 0.0
    lo = max(0.0, mean_sq - _Z95 * se_sq)
    hi = mean_sq + _Z95 * se_sq
    rmse = math.sqrt(mean_sq)
    if tc_values is None:
        mean_tc, tc_ci = 0.0, (0.0, 0.0)
    else:
        tc_arr = np.asarray(tc_values, dtype=float)
        mean_tc = float(tc_arr.mean())
        se_tc = float(tc_arr.std(ddof=1) / math.sqrt(tc_arr.size)) if tc_arr.size > 1 else 0.0
        tc_ci = (mean_tc - _Z95 * se_tc, mean_tc + _Z95 * se_tc)
    return RiskCostPoint(mean_tc=mean_tc, mean_tc_ci=tc_ci,
                         rmse_xi=rmse, rmse_xi_ci=(math.sqrt(lo), math.sqrt(hi)))


def ivrmse_day(option_slice, model_prices: Sequence[float]) -> IvrmseDay:
    """Per-day IVRMSE: 100 * sqrt(mean (iv_model - iv_market)^2).

    Quotes whose market or model price is outside the Black-76 band are
    dropped pairwise and counted.
    """
    gaps = []
    dropped = 0
    for quote, model_price in zip(option_slice.quotes, model_prices):
        try:
            iv_market = implied_vol(quote.forward_quote, quote.contract, quote.mid_price)
            iv_model = implied_vol(quote.forward_quote, quote.contract, float(model_price))
        except NoSolutionError:
            dropped += 1
            continue
        gaps.append(iv_model - iv_market)
    if not gaps:
        raise InsufficientDataError("no invertible quotes in slice")
    return IvrmseDay(value=100.0 * float(np.sqrt(np.mean(np.square(gaps)))),
                     n_used=len(gaps), n_dropped=dropped)


def equal_day_mean(per_day_values: Sequence[float]) -> float:
    """Unweighted mean over days: each date contributes one observation."""
    arr = np.asarray(per_day_values, dtype=float)
    if arr.size < 1:
        raise InsufficientDataError("equal_day_mean needs at least one day")
    return float(arr.mean())


def scorecard(outcomes_by_model: Dict[str, Sequence[float]]) -> dict:
    """Best-in-column table: lowest ES_5%, ES_10% and shortfall probability.

    Exact ties are listed jointly as "A/B" in model-name order.
    """
    if not outcomes_by_model:
        raise InsufficientDataError("scorecard needs at least one model")
    columns = {
        "es_05": {m: es_alpha(v, 0.05)[1] for m, v in outcomes_by_model.items()},
        "es_10": {m: es_alpha(v, 0.10)[1] for m, v in outcomes_by_model.items()},
        "shortfall_prob": {m: shortfall_prob(v) for m, v in outcomes_by_model.items()},
    }
    out = {"n_days": {m: len(v) for m, v in outcomes_by_model.items()}}
    for column, values in columns.items():
        best = min(values.values())
        winners = sorted(m for m, v in values.items() if v == best)
        out[column] = {"winner": "/".join(winners), "value": best, "all": values}
    return out
