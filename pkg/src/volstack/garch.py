"""Student-t GARCH(1,1) and EGARCH(1,1) maximum likelihood.

Zero-mean return equation r_t = sigma_t * eps_t with unit-variance
standardized Student-t innovations.  Estimation runs Nelder-Mead on an
unconstrained reparameterization (log for positivity, logistic for the
stationarity simplex, nu floored at 2.1) from several jittered starts.
The fitted recursions can be unbundled into the per-date component sums
that the hybrid benchmark nets consume as extra inputs.
"""

import math

import numpy as np
from numba import njit
from scipy import optimize, special
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .errors import ConvergenceError, ValidationError

_NU_FLOOR = 2.1
_BIG = 1e100


def abs_moment_standardized_t(nu):
    """E|eps| for the unit-variance standardized Student-t."""
    if nu <= 2:
        raise ValidationError("degrees of freedom must exceed 2")
    return float(2.0 * math.sqrt(nu - 2.0)
                 * math.exp(special.gammaln((nu + 1.0) / 2.0)
                            - special.gammaln(nu / 2.0))
                 / (math.sqrt(math.pi) * (nu - 1.0)))


@njit(cache=True)
def _t_logconst(nu):
    return (math.lgamma((nu + 1.0) / 2.0) - math.lgamma(nu / 2.0)
            - 0.5 * math.log(math.pi * (nu - 2.0)))


@njit(cache=True)
def _garch_nll(r, omega, alpha, beta, nu, s2_init):
    n = r.shape[0]
    c = _t_logconst(nu)
    s2 = s2_init
    nll = 0.0
    for t in range(n):
        if t > 0:
            s2 = omega + alpha * r[t - 1] * r[t - 1] + beta * s2
        if not (s2 > 0.0) or not np.isfinite(s2):
            return _BIG
        z2 = r[t] * r[t] / s2
        nll -= (c - 0.5 * math.log(s2)
                - 0.5 * (nu + 1.0) * math.log(1.0 + z2 / (nu - 2.0)))
    if not np.isfinite(nll):
        return _BIG
    return nll


@njit(cache=True)
def _egarch_nll(r, omega, alpha, beta, gamma, nu, logs2_init, abs_moment):
    n = r.shape[0]
    c = _t_logconst(nu)
    logs2 = logs2_init
    nll = 0.0
    eps_prev = 0.0
    for t in range(n):
        if t > 0:
            logs2 = omega + alpha * logs2 + beta * eps_prev \
                + gamma * (abs(eps_prev) - abs_moment)
        if not np.isfinite(logs2) or logs2 > 200.0 or logs2 < -200.0:
            return _BIG
        s2 = math.exp(logs2)
        sigma = math.sqrt(s2)
        eps_prev = r[t] / sigma
        z2 = eps_prev * eps_prev
        nll -= (c - 0.5 * logs2
                - 0.5 * (nu + 1.0) * math.log(1.0 + z2 / (nu - 2.0)))
    if not np.isfinite(nll):
        return _BIG
    return nll


def _sigmoid(x):
    return 1.0 / (1.0 + math.exp(-x)) if x > -500 else 0.0


def _minimize_restarts(fun, start, jitter, restarts, random_state, max_iter):
    rng = np.random.default_rng(random_state)
    best = None
    converged = False
    for k in range(restarts):
        x0 = np.asarray(start, dtype=float)
        if k > 0:
            x0 = x0 + jitter * rng.standard_normal(len(x0))
        res = optimize.minimize(fun, x0, method="Nelder-Mead",
                                options={"maxiter": max_iter,
                                         "xatol": 1e-6, "fatol": 1e-9})
        converged = converged or bool(res.success)
        if best is None or res.fun < best.fun:
            best = res
    return best, converged


class StudentTGarch(BaseEstimator):
    """GARCH(1,1): sigma2_t = omega + alpha r_{t-1}^2 + beta sigma2_{t-1}.

    Covariance stationarity (alpha + beta < 1) and positivity are enforced
    through the optimizer's parameterization; nu is estimated jointly.
    """

    def __init__(self, restarts=5, random_state=None, max_iter=4000):
        self.restarts = restarts
        self.random_state = random_state
        self.max_iter = max_iter

    @staticmethod
    def _unpack(theta):
        log_omega, a, b, c = theta
        persistence = _sigmoid(a) * (1.0 - 1e-6)
        share = _sigmoid(b)
        return (math.exp(log_omega), share * persistence,
                (1.0 - share) * persistence, _NU_FLOOR + math.exp(c))

    def fit(self, returns):
        r = np.ascontiguousarray(returns, dtype=float)
        if len(r) < 250:
            raise ValidationError(f"GARCH fit needs >= 250 returns, got {len(r)}")
        var = float(r.var())
        if var <= 0:
            raise ValidationError("constant returns carry no volatility signal")
        s2_init = var

        def objective(theta):
            omega, alpha, beta, nu = self._unpack(theta)
            return _garch_nll(r, omega, alpha, beta, nu, s2_init)

        start = np.array([math.log(var * 0.10), math.log(0.9 / 0.1),
                          math.log(0.1 / 0.9), math.log(8.0 - _NU_FLOOR)])
        best, converged = _minimize_restarts(
            objective, start, 0.5, self.restarts, self.random_state,
            self.max_iter)
        omega, alpha, beta, nu = self._unpack(best.x)
        self.omega_, self.alpha_, self.beta_, self.nu_ = omega, alpha, beta, nu
        self.loglik_ = -float(best.fun)
        self.s2_init_ = s2_init
        self.n_obs_ = len(r)
        if not converged or best.fun >= _BIG:
            raise ConvergenceError(
                "GARCH likelihood optimization did not converge; best point "
                f"(omega={omega:.3g}, alpha={alpha:.3g}, beta={beta:.3g}, "
                f"nu={nu:.3g})", gap=float(best.fun))
        return self

    def filter(self, returns, s2_init=None):
        """One-step-ahead conditional variances under the fitted parameters."""
        check_is_fitted(self, "omega_")
        return garch_filter(returns, self.omega_, [self.alpha_], [self.beta_],
                            s2_init if s2_init is not None else self.s2_init_)

    def components(self, returns, s2_init=None):
        """Per-date (arch_term, garch_term) with omega + both = sigma2_t.

        Defined from the second date on (the first has no lagged return);
        returns (arch, garch) arrays of length len(returns) - 1.
        """
        check_is_fitted(self, "omega_")
        r = np.asarray(returns, dtype=float)
        s2 = self.filter(r, s2_init)
        arch = self.alpha_ * r[:-1] ** 2
        garch = self.beta_ * s2[:-1]
        return arch, garch


class StudentTEgarch(BaseEstimator):
    """EGARCH(1,1) on the log-variance:

    log sigma2_t = omega + alpha log sigma2_{t-1}
                   + beta eps_{t-1} + gamma (|eps_{t-1}| - E|eps|)

    following the convention that alpha carries persistence, beta the sign
    (leverage) term and gamma the magnitude term.
    """

    def __init__(self, restarts=5, random_state=None, max_iter=6000):
        self.restarts = restarts
        self.random_state = random_state
        self.max_iter = max_iter

    # |alpha| <= 0.999 keeps the log-variance strictly mean-reverting; the
    # unit-root boundary is a likelihood ridge on short windows and makes
    # the filter wander on spans longer than the estimation window
    _ALPHA_BOUND = 0.999

    @staticmethod
    def _unpack(theta):
        omega, a, beta, gamma, c = theta
        alpha = math.tanh(a) * StudentTEgarch._ALPHA_BOUND
        return omega, alpha, beta, gamma, _NU_FLOOR + math.exp(c)

    def fit(self, returns):
        r = np.ascontiguousarray(returns, dtype=float)
        if len(r) < 250:
            raise ValidationError(
                f"EGARCH fit needs >= 250 returns, got {len(r)}")
        var = float(r.var())
        if var <= 0:
            raise ValidationError("constant returns carry no volatility signal")
        logs2_init = math.log(var)

        def objective(theta):
            omega, alpha, beta, gamma, nu = self._unpack(theta)
            moment = abs_moment_standardized_t(nu)
            return _egarch_nll(r, omega, alpha, beta, gamma, nu,
                               logs2_init, moment)

        alpha0 = 0.95
        start = np.array([(1.0 - alpha0) * logs2_init, math.atanh(alpha0),
                          -0.05, 0.10, math.log(8.0 - _NU_FLOOR)])
        best, converged = _minimize_restarts(
            objective, start, 0.25, self.restarts, self.random_state,
            self.max_iter)
        omega, alpha, beta, gamma, nu = self._unpack(best.x)
        self.omega_, self.alpha_, self.beta_ = omega, alpha, beta
        self.gamma_, self.nu_ = gamma, nu
        self.abs_moment_ = abs_moment_standardized_t(nu)
        self.loglik_ = -float(best.fun)
        self.logs2_init_ = logs2_init
        self.n_obs_ = len(r)
        if not converged or best.fun >= _BIG:
            raise ConvergenceError(
                "EGARCH likelihood optimization did not converge; best point "
                f"(omega={omega:.3g}, alpha={alpha:.3g}, beta={beta:.3g}, "
                f"gamma={gamma:.3g}, nu={nu:.3g})", gap=float(best.fun))
        return self

    def filter(self, returns, logs2_init=None):
        """Conditional variances sigma2_t under the fitted parameters."""
        check_is_fitted(self, "omega_")
        return egarch_filter(
            returns, self.omega_, self.alpha_, self.beta_, self.gamma_,
            self.abs_moment_,
            logs2_init if logs2_init is not None else self.logs2_init_)

    def components(self, returns, logs2_init=None):
        """Per-date (persistence, sign, magnitude) terms with
        omega + all three = log sigma2_t; defined from the second date on."""
        check_is_fitted(self, "omega_")
        r = np.asarray(returns, dtype=float)
        s2 = self.filter(r, logs2_init)
        eps = r / np.sqrt(s2)
        persistence = self.alpha_ * np.log(s2[:-1])
        sign_term = self.beta_ * eps[:-1]
        magnitude = self.gamma_ * (np.abs(eps[:-1]) - self.abs_moment_)
        return persistence, sign_term, magnitude


def garch_filter(returns, omega, alphas, betas, s2_init):
    """Generic GARCH(p,q) variance recursion (lists of coefficients).

    sigma2_t = omega + sum_i alpha_i r_{t-i}^2 + sum_j beta_j sigma2_{t-j};
    missing history at the start is padded with s2_init and r_0-era terms.
    """
    r = np.asarray(returns, dtype=float)
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    betas = np.atleast_1d(np.asarray(betas, dtype=float))
    if omega <= 0 or np.any(alphas < 0) or np.any(betas < 0):
        raise ValidationError("need omega > 0 and non-negative alpha/beta")
    if s2_init <= 0:
        raise ValidationError("initial variance must be positive")
    n = len(r)
    s2 = np.empty(n)
    s2[0] = s2_init
    q, p = len(alphas), len(betas)
    for t in range(1, n):
        acc = omega
        for i in range(1, q + 1):
            acc += alphas[i - 1] * (r[t - i] ** 2 if t - i >= 0 else s2_init)
        for j in range(1, p + 1):
            acc += betas[j - 1] * (s2[t - j] if t - j >= 0 else s2_init)
        s2[t] = acc
    return s2


def egarch_filter(returns, omega, alpha, beta, gamma, abs_moment, logs2_init,
                  clamp=60.0):
    """EGARCH(1,1) variance recursion returning sigma2_t (not logs).

    The log-variance is clamped to +-``clamp`` so a near-unit-root fit
    stays finite when filtered beyond its estimation window.
    """
    r = np.asarray(returns, dtype=float)
    n = len(r)
    logs2 = np.empty(n)
    logs2[0] = min(max(logs2_init, -clamp), clamp)
    for t in range(1, n):
        eps_prev = r[t - 1] / math.sqrt(math.exp(logs2[t - 1]))
        nxt = omega + alpha * logs2[t - 1] + beta * eps_prev \
            + gamma * (abs(eps_prev) - abs_moment)
        logs2[t] = min(max(nxt, -clamp), clamp)
    return np.exp(logs2)


def standardized_t_draws(nu, size, rng):
    """Unit-variance Student-t innovations."""
    return rng.standard_t(nu, size=size) * math.sqrt((nu - 2.0) / nu)


def garch_simulate(omega, alpha, beta, nu, n, rng, burn=500):
    """Simulate a zero-mean Student-t GARCH(1,1) path (r, sigma2)."""
    rng = np.random.default_rng(rng) if not isinstance(
        rng, np.random.Generator) else rng
    total = n + burn
    eps = standardized_t_draws(nu, total, rng)
    s2 = np.empty(total)
    r = np.empty(total)
    s2[0] = omega / max(1.0 - alpha - beta, 1e-6)
    r[0] = math.sqrt(s2[0]) * eps[0]
    for t in range(1, total):
        s2[t] = omega + alpha * r[t - 1] ** 2 + beta * s2[t - 1]
        r[t] = math.sqrt(s2[t]) * eps[t]
    return r[burn:], s2[burn:]


def egarch_simulate(omega, alpha, beta, gamma, nu, n, rng, burn=500):
    """Simulate a zero-mean Student-t EGARCH(1,1) path (r, sigma2)."""
    rng = np.random.default_rng(rng) if not isinstance(
        rng, np.random.Generator) else rng
    moment = abs_moment_standardized_t(nu)
    total = n + burn
    eps = standardized_t_draws(nu, total, rng)
    logs2 = np.empty(total)
    r = np.empty(total)
    logs2[0] = omega / max(1.0 - alpha, 1e-6)
    r[0] = math.exp(0.5 * logs2[0]) * eps[0]
    for t in range(1, total):
        eps_prev = eps[t - 1]
        logs2[t] = omega + alpha * logs2[t - 1] + beta * eps_prev \
            + gamma * (abs(eps_prev) - moment)
        r[t] = math.exp(0.5 * logs2[t]) * eps[t]
    return r[burn:], np.exp(logs2[burn:])
