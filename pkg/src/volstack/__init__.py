"""Stacked machine-learning volatility forecasting and market-risk backtesting."""

__version__ = "0.1.0"

from .market_data import (
    FeatureFrame,
    PriceSeries,
    RangeScaler,
    ReturnSeries,
    SplitSpec,
    VolSeries,
    adf_test,
    build_features,
    chronological_split,
    ks_two_sample,
    load_prices,
    log_returns,
    trailing_vol,
    true_realized_vol,
)
