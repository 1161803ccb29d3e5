"""Heston stochastic-volatility benchmark.

Calibration regresses the discretized variance dynamics on a squared
trailing-volatility proxy (mean-reversion rate and level from the OLS
line, vol-of-variance from the residual scale, driver correlation from
the paired shocks).  Forecasting runs an Euler scheme with full
truncation and averages sqrt(v) across paths, one day at a time.
"""

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .errors import NumericalError, ValidationError


@dataclass(frozen=True)
class PathSet:
    """Simulated variance and return paths (variances already truncated)."""

    variances: np.ndarray  # (n_paths, horizon + 1)
    returns: np.ndarray    # (n_paths, horizon)
    horizon: int

    def __post_init__(self):
        if self.variances.shape != (len(self.returns), self.horizon + 1):
            raise ValidationError("path matrices disagree with the horizon")
        if np.any(self.variances < 0):
            raise ValidationError("truncated variances must be non-negative")

    @property
    def n_paths(self):
        return len(self.returns)

    def horizon_returns(self):
        """Per-path compounded (summed log) return over the horizon."""
        return self.returns.sum(axis=1)


class HestonModel(BaseEstimator):
    """Mean-reverting variance with correlated return/variance drivers.

    Fitted attributes: drift ``mu_`` (per day), reversion rate ``theta_``,
    long-run variance ``upsilon_``, vol-of-variance ``delta_``, driver
    correlation ``rho_`` and the final proxy value ``v0_``.
    """

    def __init__(self, n_paths=20_000, random_state=None):
        self.n_paths = n_paths
        self.random_state = random_state

    def fit(self, returns, variance_proxy):
        """Calibrate on aligned daily returns and a variance proxy.

        ``variance_proxy[i]`` is the squared volatility proxy carrying the
        same date as ``returns[i]``; the innovation over (i, i+1) pairs
        with the return observed at i+1.
        """
        r = np.asarray(returns, dtype=float)
        v = np.asarray(variance_proxy, dtype=float)
        if len(r) != len(v):
            raise ValidationError("returns and variance proxy misaligned")
        if len(r) < 250:
            raise ValidationError(
                f"Heston calibration needs >= 250 observations, got {len(r)}")
        if np.any(v < 0):
            raise ValidationError("variance proxy must be non-negative")

        dv = np.diff(v)
        v_now = v[:-1]
        keep = v_now > 0
        if keep.sum() < 50:
            raise ValidationError("variance proxy is almost everywhere zero")
        design = np.column_stack([np.ones(keep.sum()), v_now[keep]])
        coef, *_ = np.linalg.lstsq(design, dv[keep], rcond=None)
        intercept, slope = coef
        theta = -slope
        if theta <= 0:
            raise NumericalError(
                "variance proxy shows no mean reversion (theta <= 0)")
        upsilon = intercept / theta
        if upsilon <= 0:
            raise NumericalError(
                "calibrated long-run variance is not positive")

        resid = dv[keep] - design @ coef
        eta = resid / np.sqrt(v_now[keep])
        delta = float(eta.std())
        mu = float(r.mean())
        z = (r[1:][keep] - mu) / np.sqrt(v_now[keep])
        if delta > 0 and z.std() > 0:
            rho = float(np.corrcoef(z, eta)[0, 1])
        else:
            rho = 0.0
        self.mu_ = mu
        self.theta_ = float(theta)
        self.upsilon_ = float(upsilon)
        self.delta_ = delta
        self.rho_ = float(np.clip(rho, -1.0, 1.0))
        self.v0_ = float(v[-1])
        return self

    # ------------------------------------------------------------ simulation

    def simulate(self, horizon_days, n_paths=None, rng=None, v0=None):
        """Euler full-truncation paths over the horizon (daily steps)."""
        check_is_fitted(self, "theta_")
        if horizon_days < 1:
            raise ValidationError("horizon must be at least one day")
        n_paths = self.n_paths if n_paths is None else n_paths
        if n_paths < 1:
            raise ValidationError("need at least one path")
        rng = np.random.default_rng(
            self.random_state if rng is None else rng) if not isinstance(
            rng, np.random.Generator) else rng
        v0 = self.v0_ if v0 is None else float(v0)
        theta, upsilon, delta, rho = (self.theta_, self.upsilon_,
                                      self.delta_, self.rho_)
        latent = np.full(n_paths, v0)
        variances = np.empty((n_paths, horizon_days + 1))
        returns = np.empty((n_paths, horizon_days))
        variances[:, 0] = np.maximum(latent, 0.0)
        root_1m_rho2 = math.sqrt(max(0.0, 1.0 - rho * rho))
        for t in range(horizon_days):
            eta = rng.standard_normal(n_paths)
            w = rng.standard_normal(n_paths)
            z = rho * eta + root_1m_rho2 * w
            pos = np.maximum(latent, 0.0)
            root = np.sqrt(pos)
            returns[:, t] = self.mu_ + root * z
            latent = latent + theta * (upsilon - pos) + delta * root * eta
            variances[:, t + 1] = np.maximum(latent, 0.0)
        return PathSet(variances, returns, horizon_days)

    def forecast(self, n_paths=None, rng=None, v0=None):
        """One-day volatility forecast: mean over paths of sqrt(v_1)."""
        paths = self.simulate(1, n_paths=n_paths, rng=rng, v0=v0)
        return float(np.sqrt(paths.variances[:, 1]).mean())

    def forecast_series(self, proxy_values, n_paths=None, rng=None):
        """Per-day forecasts, each seeded from the previous day's proxy.

        ``proxy_values[i]`` is the squared-volatility proxy already
        observed entering day i; returns one sigma forecast per entry.
        """
        check_is_fitted(self, "theta_")
        rng = np.random.default_rng(
            self.random_state if rng is None else rng) if not isinstance(
            rng, np.random.Generator) else rng
        return np.array([self.forecast(n_paths=n_paths, rng=rng, v0=v)
                         for v in np.asarray(proxy_values, dtype=float)])

    def mean_variance_curve(self, horizon_days, v0=None):
        """Exact mean of the discrete recursion:
        E[v_t] = upsilon + (v0 - upsilon) (1 - theta)^t."""
        check_is_fitted(self, "theta_")
        v0 = self.v0_ if v0 is None else float(v0)
        t = np.arange(horizon_days + 1)
        return self.upsilon_ + (v0 - self.upsilon_) * (1 - self.theta_) ** t
