"""VaR/CVaR construction and the four-backtest battery.

Parametric measures come from a zero-mean scaled Student-t whose standard
deviation is the horizon volatility forecast; the Heston route reads both
measures off its simulated horizon-return distribution.  Backtests:
Kupiec unconditional coverage, Christoffersen conditional coverage, and
the two Acerbi-Szekely expected-shortfall tests with simulated nulls.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import ValidationError

TEST_TAGS = ("kupiec", "christoffersen", "as1", "as2")


@dataclass(frozen=True)
class RiskSeries:
    """Per-period risk measures against the realized horizon return.

    ``var`` and ``cvar`` are positive loss magnitudes; ``realized`` is the
    horizon log-return that they are judged against.
    """

    dates: np.ndarray
    var: np.ndarray
    cvar: np.ndarray
    realized: np.ndarray
    alpha: float
    horizon: int

    def __post_init__(self):
        object.__setattr__(self, "dates", np.asarray(self.dates))
        for name in ("var", "cvar", "realized"):
            object.__setattr__(self, name,
                               np.asarray(getattr(self, name), dtype=float))
        n = len(self.dates)
        if not (len(self.var) == len(self.cvar) == len(self.realized) == n):
            raise ValidationError("risk series fields must share one length")
        if self.horizon < 1:
            raise ValidationError("horizon must be >= 1 day")
        if np.any(self.var <= 0) or np.any(self.cvar < self.var):
            raise ValidationError("need CVaR >= VaR > 0 on every period")

    def __len__(self):
        return len(self.dates)

    def hits(self):
        """Exceedance indicators I_t = 1 when realized + VaR < 0."""
        return (self.realized + self.var < 0).astype(int)


@dataclass(frozen=True)
class BacktestResult:
    test: str
    statistic: float
    p_value: float
    reject: bool
    flags: tuple = ()

    def __post_init__(self):
        if self.test not in TEST_TAGS:
            raise ValidationError(f"unknown test tag {self.test!r}")
        if np.isfinite(self.p_value) and not 0.0 <= self.p_value <= 1.0:
            raise ValidationError("p-value must lie in [0, 1]")


@dataclass(frozen=True)
class EmpiricalRisk:
    var: float
    cvar: float
    n_tail: int
    thin_tail: bool


def student_t_var_cvar(sigma_daily, nu, alpha, horizon_days=1):
    """Closed-form VaR/CVaR of the zero-mean scaled Student-t.

    The daily sigma scales to the horizon by sqrt(time); the t is scaled
    so its standard deviation equals that horizon sigma.
    """
    sigma_daily = np.asarray(sigma_daily, dtype=float)
    if np.any(sigma_daily <= 0):
        raise ValidationError("volatility forecast must be positive")
    if nu <= 2:
        raise ValidationError("Student-t needs nu > 2 for a finite variance")
    if not 0.5 < alpha < 1.0:
        raise ValidationError("confidence level must lie in (0.5, 1)")
    sigma_h = sigma_daily * math.sqrt(horizon_days)
    scale = sigma_h * math.sqrt((nu - 2.0) / nu)
    q = stats.t.ppf(1.0 - alpha, nu)
    var = -scale * q
    cvar = scale * (stats.t.pdf(q, nu) / (1.0 - alpha)) \
        * ((nu + q * q) / (nu - 1.0))
    return var, cvar


def heston_var_cvar(horizon_returns, alpha):
    """Empirical VaR/CVaR from simulated horizon returns."""
    r = np.asarray(horizon_returns, dtype=float)
    if r.ndim != 1 or len(r) < 1000:
        raise ValidationError("need >= 1000 simulated horizon returns")
    if not 0.5 < alpha < 1.0:
        raise ValidationError("confidence level must lie in (0.5, 1)")
    q = float(np.quantile(r, 1.0 - alpha))
    tail = r[r <= q]
    return EmpiricalRisk(var=-q, cvar=-float(tail.mean()), n_tail=len(tail),
                         thin_tail=len(tail) < 20)


def _xlogy(n, p):
    """n * log(p) with the 0 * log(0) = 0 convention."""
    if n == 0:
        return 0.0
    if p <= 0:
        return -np.inf
    return n * math.log(p)


def kupiec_test(hits, p):
    """Unconditional coverage LR against chi-square(1)."""
    hits = np.asarray(hits).astype(int)
    n = len(hits)
    if n < 1:
        raise ValidationError("empty hit sequence")
    x = int(hits.sum())
    ll_null = _xlogy(n - x, 1.0 - p) + _xlogy(x, p)
    ll_alt = _xlogy(n - x, 1.0 - x / n) + _xlogy(x, x / n)
    lr = max(0.0, -2.0 * (ll_null - ll_alt))
    p_value = float(stats.chi2.sf(lr, 1))
    return BacktestResult("kupiec", lr, p_value, p_value < 0.05)


def christoffersen_test(hits, p):
    """Conditional coverage LR (coverage + first-order independence)
    against chi-square(2); degenerate transition rows get add-half
    smoothing and a flag."""
    hits = np.asarray(hits).astype(int)
    if len(hits) < 2:
        raise ValidationError("need at least two periods for transitions")
    a, b = hits[:-1], hits[1:]
    n00 = float(np.sum((a == 0) & (b == 0)))
    n01 = float(np.sum((a == 0) & (b == 1)))
    n10 = float(np.sum((a == 1) & (b == 0)))
    n11 = float(np.sum((a == 1) & (b == 1)))
    flags = ()
    if (n00 + n01) == 0 or (n10 + n11) == 0:
        n00, n01, n10, n11 = n00 + 0.5, n01 + 0.5, n10 + 0.5, n11 + 0.5
        flags = ("smoothed_transitions",)
    p01 = n01 / (n00 + n01)
    p11 = n11 / (n10 + n11)
    pi = (n01 + n11) / (n00 + n01 + n10 + n11)
    ll_ind = (_xlogy(n00, 1 - p01) + _xlogy(n01, p01)
              + _xlogy(n10, 1 - p11) + _xlogy(n11, p11))
    ll_null = _xlogy(n00 + n10, 1 - pi) + _xlogy(n01 + n11, pi)
    lr_ind = max(0.0, -2.0 * (ll_null - ll_ind))
    lr_cc = kupiec_test(hits, p).statistic + lr_ind
    p_value = float(stats.chi2.sf(lr_cc, 2))
    return BacktestResult("christoffersen", lr_cc, p_value, p_value < 0.05, flags)


def _mc_p_value(simulated, observed):
    """One-sided Monte Carlo p-value (small statistics reject)."""
    simulated = np.asarray(simulated, dtype=float)
    return float((1.0 + np.sum(simulated <= observed))
                 / (1.0 + len(simulated)))


def as1_test(series, simulate_returns, n_sim=5000, rng=None):
    """Acerbi-Szekely conditional CVaR test.

    Z1 = mean over exceedance periods of r_t / CVaR_t, plus one; the null
    distribution comes from ``simulate_returns(n_sim, rng)`` drawing
    (n_sim, N) returns from each period's predictive distribution.
    Undefined (flagged) when the observed series has no exceedances.
    """
    rng = np.random.default_rng(rng) if not isinstance(
        rng, np.random.Generator) else rng
    hits = series.hits().astype(bool)
    if not hits.any():
        return BacktestResult("as1", np.nan, np.nan, False, ("no_exceedances",))
    z_obs = float(np.mean(series.realized[hits] / series.cvar[hits]) + 1.0)
    sims = np.asarray(simulate_returns(n_sim, rng), dtype=float)
    hit_m = sims + series.var[None, :] < 0
    counts = hit_m.sum(axis=1)
    valid = counts > 0
    ratio = np.where(hit_m, sims / series.cvar[None, :], 0.0)
    z_sim = ratio[valid].sum(axis=1) / counts[valid] + 1.0
    flags = () if valid.all() else ("dropped_empty_null_replicates",)
    p_value = _mc_p_value(z_sim, z_obs)
    return BacktestResult("as1", z_obs, p_value, p_value < 0.05, flags)


def as2_test(series, simulate_returns, n_sim=5000, rng=None):
    """Acerbi-Szekely unconditional CVaR test.

    Z2 = sum over all periods of r_t I_t / (N (1-alpha) CVaR_t), plus one;
    defined (value 1) even with zero exceedances.
    """
    rng = np.random.default_rng(rng) if not isinstance(
        rng, np.random.Generator) else rng
    n = len(series)
    denom = n * (1.0 - series.alpha)

    def z_stat(returns, hit_mask):
        contrib = np.where(hit_mask, returns / series.cvar, 0.0)
        return contrib.sum(axis=-1) / denom + 1.0

    z_obs = float(z_stat(series.realized, series.hits().astype(bool)))
    sims = np.asarray(simulate_returns(n_sim, rng), dtype=float)
    z_sim = z_stat(sims, sims + series.var[None, :] < 0)
    p_value = _mc_p_value(z_sim, z_obs)
    return BacktestResult("as2", z_obs, p_value, p_value < 0.05)


def student_t_sampler(sigma_daily, nu, horizon_days):
    """Predictive-return sampler for the scaled-t models (H0 of AS tests)."""
    sigma_h = np.asarray(sigma_daily, dtype=float) * math.sqrt(horizon_days)
    scale = sigma_h * math.sqrt((nu - 2.0) / nu)

    def draw(n_sim, rng):
        return rng.standard_t(nu, size=(n_sim, len(scale))) * scale[None, :]

    return draw


def empirical_sampler(return_pool):
    """Predictive sampler resampling stored simulated horizon returns
    (one pool per period, shaped (n_periods, pool_size))."""
    pool = np.asarray(return_pool, dtype=float)

    def draw(n_sim, rng):
        cols = rng.integers(0, pool.shape[1], size=(n_sim, pool.shape[0]))
        return pool[np.arange(pool.shape[0])[None, :], cols]

    return draw


def run_backtests(series, simulate_returns, n_sim=5000, rng=None):
    """All four tests on one risk series; returns them in canonical order."""
    rng = np.random.default_rng(rng) if not isinstance(
        rng, np.random.Generator) else rng
    p = 1.0 - series.alpha
    hits = series.hits()
    return [
        kupiec_test(hits, p),
        christoffersen_test(hits, p),
        as1_test(series, simulate_returns, n_sim, rng),
        as2_test(series, simulate_returns, n_sim, rng),
    ]


def fit_t_dof(standardized, floor=2.1, cap=200.0):
    """MLE degrees of freedom for a zero-mean scaled Student-t.

    ``standardized`` should be roughly unit-scale (returns divided by a
    volatility proxy); a free scale is profiled out so only the tail shape
    drives nu.
    """
    u = np.asarray(standardized, dtype=float)
    u = u[np.isfinite(u)]
    if len(u) < 50:
        raise ValidationError("need >= 50 standardized returns for nu")
    spread = float(u.std())
    if spread <= 0:
        raise ValidationError("degenerate standardized returns")

    def nll(theta):
        nu = floor + math.exp(min(theta[0], 20.0))
        scale = math.exp(theta[1])
        z = u / scale
        const = (math.lgamma((nu + 1) / 2) - math.lgamma(nu / 2)
                 - 0.5 * math.log(math.pi * (nu - 2)))
        ll = len(u) * (const - math.log(scale)) \
            - 0.5 * (nu + 1) * np.log1p(z * z / (nu - 2)).sum()
        return -ll

    from scipy import optimize
    res = optimize.minimize(nll, np.array([math.log(8.0 - floor),
                                           math.log(spread)]),
                            method="Nelder-Mead",
                            options={"xatol": 1e-6, "fatol": 1e-9,
                                     "maxiter": 2000})
    nu = floor + math.exp(min(res.x[0], 20.0))
    return float(min(nu, cap))


def horizon_realized_returns(returns, horizon_days, overlapping=True):
    """Forward horizon log-returns r_t + ... + r_{t+h-1}, stepping one day
    (overlapping) or h days (non-overlapping)."""
    r = np.asarray(returns, dtype=float)
    if horizon_days < 1 or len(r) < horizon_days:
        raise ValidationError("horizon exceeds the available returns")
    csum = np.concatenate([[0.0], np.cumsum(r)])
    out = csum[horizon_days:] - csum[:-horizon_days]
    starts = np.arange(0, len(out), 1 if overlapping else horizon_days)
    return out[starts], starts
