"""RL option pricing and hedging engine.

Two policy-gradient pricing environments (backward value-based and forward
replication-based), parametric benchmark pricers with per-day calibration,
a realized-path delta-hedging backtester with proportional costs, and a
distributional risk-metric suite, wired together by a CLI.
"""

__version__ = "0.1.0"
