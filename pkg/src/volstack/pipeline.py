"""Orchestration: grid search under each tuning scheme, out-of-sample
method selection, stacked-model and benchmark assembly, forecasting and
backtesting.

The stacked model follows the 25/50/25 walk: first-level learners fit on
the first window, their forecasts join the 30 scaled lags as stacker
inputs on the middle window, and the last window scores the result.  All
benchmarks share the same split boundaries.
"""

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from . import base_learners, market_data, resampling, risk
from .ann import FeedForwardNet
from .errors import NumericalError, ValidationError, VolstackError
from .garch import StudentTEgarch, StudentTGarch
from .heston import HestonModel
from .market_data import FeatureFrame, SplitSpec, chronological_split

CANONICAL_METHODS = resampling.METHOD_ORDER  # mmse, cbb, sb, meb, hcv
LEARNER_ORDER = ("random_forest", "gradient_boosting", "svr", "ann")
BENCHMARK_TAGS = ("ann", "ann_garch", "ann_egarch", "heston")
SIGMA_FLOOR = 1e-8  # volatility forecasts are floored here before risk use


def derive_seed(*parts):
    """Stable 63-bit seed from a path of labels (reproducible across runs)."""
    text = "/".join(str(p) for p in parts)
    digest = hashlib.blake2b(text.encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little") >> 1


def rmse(pred, actual):
    pred = np.asarray(pred, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if pred.shape != actual.shape:
        raise ValidationError("prediction/actual layout mismatch")
    return float(np.sqrt(np.mean((pred - actual) ** 2)))


# --------------------------------------------------------------------- dataset

@dataclass(frozen=True)
class Dataset:
    """Price history unpacked into the series the pipeline consumes."""

    prices: market_data.PriceSeries
    returns: market_data.ReturnSeries
    vol: market_data.VolSeries
    trv: market_data.VolSeries
    frame: FeatureFrame  # unscaled lag frame over the full history
    vol_window: int
    lags: int

    @staticmethod
    def build(prices, vol_window=5, lags=30):
        returns = market_data.log_returns(prices)
        vol = market_data.trailing_vol(returns, vol_window)
        trv = market_data.true_realized_vol(returns, vol_window)
        frame = market_data.build_features(vol, trv, lags)
        return Dataset(prices, returns, vol, trv, frame, vol_window, lags)

    def frame_between(self, start, end):
        start = np.datetime64(start)
        end = np.datetime64(end)
        mask = (self.frame.dates >= start) & (self.frame.dates <= end)
        if not mask.any():
            raise ValidationError(f"no feature rows between {start} and {end}")
        return self.frame.rows(np.flatnonzero(mask))

    def vol_at(self, dates):
        pos = {d: i for i, d in enumerate(self.vol.dates)}
        try:
            idx = [pos[d] for d in np.asarray(dates, dtype="datetime64[D]")]
        except KeyError as exc:
            raise ValidationError(f"no volatility value dated {exc}") from exc
        return self.vol.values[np.asarray(idx)]

    def horizon_return_at(self, dates, horizon_days):
        """Realized forward log-return over [t, t+h-1] for each date."""
        pos = {d: i for i, d in enumerate(self.returns.dates)}
        out = np.empty(len(dates))
        csum = np.concatenate([[0.0], np.cumsum(self.returns.returns)])
        for k, d in enumerate(np.asarray(dates, dtype="datetime64[D]")):
            i = pos.get(d)
            if i is None or i + horizon_days > len(self.returns):
                raise ValidationError(
                    f"not enough forward returns at {d} for a "
                    f"{horizon_days}-day horizon")
            out[k] = csum[i + horizon_days] - csum[i]
        return out


# -------------------------------------------------------------------- learners

_FIXED_DEFAULTS = {
    "random_forest": {"n_trees": 500},
    "gradient_boosting": {"max_depth": 3},
    "svr": {"C": 1.0},
    "ann": {"epochs": 10_000},
}


class TargetRangeRegressor:
    """Fits the wrapped learner on a [0,1] min-max scaled target and maps
    predictions back; the epsilon tube of the SVR is then commensurate
    with the grid's Table-5-style values regardless of the TRV scale."""

    def __init__(self, inner):
        self.inner = inner

    def fit(self, X, y):
        y = np.asarray(y, dtype=float)
        self.y_min_ = float(y.min())
        self.y_max_ = float(y.max())
        if self.y_max_ <= self.y_min_:
            raise ValidationError("constant target cannot be range-scaled")
        span = self.y_max_ - self.y_min_
        self.inner.fit(X, (y - self.y_min_) / span)
        return self

    def predict(self, X):
        span = self.y_max_ - self.y_min_
        return self.inner.predict(X) * span + self.y_min_

    def __getattr__(self, name):
        return getattr(self.inner, name)


def make_estimator(tag, params, seed):
    """Instantiate a learner from tuned + fixed hyperparameters."""
    p = dict(params)
    if tag == "random_forest":
        return base_learners.RandomForest(
            n_trees=p.pop("n_trees", 500),
            n_split_vars=p.pop("n_split_vars"),
            min_leaf=p.pop("min_leaf"),
            random_state=seed, **p)
    if tag == "gradient_boosting":
        return base_learners.GradientBoosting(
            n_stages=p.pop("n_stages"),
            learning_rate=p.pop("learning_rate"),
            max_depth=p.pop("max_depth", 3),
            random_state=seed, **p)
    if tag == "svr":
        return TargetRangeRegressor(base_learners.SupportVectorRegression(
            gamma=p.pop("gamma"), epsilon=p.pop("epsilon"),
            C=p.pop("C", 1.0), **p))
    if tag == "ann":
        return FeedForwardNet(
            learning_rate=p.pop("learning_rate"), l2=p.pop("l2"),
            epochs=p.pop("epochs", 10_000), random_state=seed, **p)
    raise ValidationError(f"unknown learner tag {tag!r}")


@dataclass(frozen=True)
class GridSpec:
    """Per-learner hyperparameter grids (finite value lists)."""

    grids: dict

    def __post_init__(self):
        for tag, grid in self.grids.items():
            if tag not in LEARNER_ORDER:
                raise ValidationError(f"unknown learner {tag!r} in grid")
            if not grid or any(len(v) == 0 for v in grid.values()):
                raise ValidationError(f"empty grid for {tag!r}")

    def cells(self, tag):
        grid = self.grids[tag]
        names = sorted(grid)
        combos = []
        for values in product(*(grid[n] for n in names)):
            combos.append(dict(zip(names, values)))
        return combos


# ---------------------------------------------------------------- tuning plans

def calibrate_methods(method_tags, frame, replicates=50, hcv_k=5,
                      max_h=100):
    """Fill in data-driven method parameters for one tuning window:
    automatic cbb/sb block lengths and the hcv gap width."""
    methods = []
    needs_blocks = {"cbb", "sb"} & set(method_tags)
    cbb_len = sb_mean = None
    if needs_blocks:
        cbb_len, sb_mean = resampling.auto_block_length(frame.y)
    for tag in method_tags:
        if tag == "cbb":
            methods.append(resampling.ResampleMethod(
                "cbb", block_len=min(cbb_len, len(frame)),
                replicates=replicates))
        elif tag == "sb":
            methods.append(resampling.ResampleMethod(
                "sb", mean_block_len=sb_mean, replicates=replicates))
        elif tag == "meb":
            methods.append(resampling.ResampleMethod(
                "meb", replicates=replicates))
        elif tag == "hcv":
            # honor the 100-day cap and keep k folds geometrically feasible
            feasible = (len(frame) // hcv_k - 1) // 2
            cap = max(1, min(max_h, feasible))
            methods.append(resampling.ResampleMethod(
                "hcv", h=resampling.hcv_select_h(frame, cap), folds=hcv_k))
        elif tag == "mmse":
            methods.append(resampling.ResampleMethod("mmse"))
        else:
            raise ValidationError(f"unknown tuning method {tag!r}")
    return methods


def _build_plans(method, X, y, seed):
    """Materialize (train_X, train_y, val_X, val_y) tuples for one method.

    Plans are generated once per (method, window) and shared by every grid
    cell, so cells compete on identical resamples.
    """
    n = len(y)
    plans = []
    if method.tag == "mmse":
        plans.append((X, y, X, y))
        return plans
    if method.tag == "hcv":
        for train_idx, val_idx in resampling.hcv_folds(n, method.h,
                                                       method.folds):
            plans.append((X[train_idx], y[train_idx], X[val_idx], y[val_idx]))
        return plans
    root = np.random.SeedSequence(derive_seed(seed, "plans", method.tag))
    for child in root.spawn(method.replicates):
        rng = np.random.default_rng(child)
        if method.tag == "cbb":
            idx = resampling.cbb_sample(n, method.block_len, rng)
        elif method.tag == "sb":
            idx = resampling.sb_sample(n, method.mean_block_len, rng)
        else:  # meb resamples values, not indices
            cols = [resampling.meb_sample(X[:, j], rng)
                    for j in range(X.shape[1])]
            yr = resampling.meb_sample(y, rng)
            plans.append((np.column_stack(cols), yr, X, y))
            continue
        oob = resampling.oob_indices(n, idx)
        if len(oob) == 0:
            oob = np.arange(n)
        plans.append((X[idx], y[idx], X[oob], y[oob]))
    return plans


# --------------------------------------------------------------- tune_learner

@dataclass(frozen=True)
class MethodScore:
    method: str
    params: dict
    criterion: float
    oos_rmse: float
    failed_cells: int


@dataclass(frozen=True)
class TuningOutcome:
    learner: str
    scores: tuple
    chosen_method: str
    chosen_params: dict

    def score_for(self, method):
        for s in self.scores:
            if s.method == method:
                return s
        raise KeyError(method)


def _evaluate_cell(tag, cell, fixed, plans, seed_parts):
    errors = 0
    losses = []
    for k, (tx, ty, vx, vy) in enumerate(plans):
        try:
            est = make_estimator(tag, {**fixed, **cell},
                                 derive_seed(*seed_parts, k))
            est.fit(tx, ty)
            losses.append(float(np.mean((est.predict(vx) - vy) ** 2)))
        except VolstackError:
            errors += 1
    if errors or not losses:
        return math.inf, errors
    return float(np.mean(losses)), errors


def tune_learner(tag, grid, train_frame, oos_frame, methods, seed,
                 fixed_params=None, n_jobs=1):
    """Grid-search each tuning method on the training window, score each
    method's winner on the out-of-sample window, return everything plus
    the argmin (canonical method order breaks exact ties)."""
    fixed = {**_FIXED_DEFAULTS.get(tag, {}), **(fixed_params or {})}
    cells = grid.cells(tag)
    X, y = train_frame.X, train_frame.y
    scores = []
    for method in methods:
        plans = _build_plans(method, X, y, seed)
        jobs = [(ci, cell) for ci, cell in enumerate(cells)]

        def run(job, _method_tag=method.tag):
            ci, cell = job
            return _evaluate_cell(tag, cell, fixed, plans,
                                  (seed, tag, _method_tag, ci))

        if n_jobs > 1:
            with ThreadPoolExecutor(max_workers=n_jobs) as pool:
                results = list(pool.map(run, jobs))
        else:
            results = [run(job) for job in jobs]
        criteria = [r[0] for r in results]
        failed = sum(1 for c in criteria if not np.isfinite(c))
        best_ci = int(np.argmin(criteria))
        if not np.isfinite(criteria[best_ci]):
            scores.append(MethodScore(method.tag, {}, math.inf, math.inf,
                                      failed))
            continue
        best_cell = cells[best_ci]
        est = make_estimator(tag, {**fixed, **best_cell},
                             derive_seed(seed, tag, method.tag, "final"))
        est.fit(X, y)
        oos = rmse(est.predict(oos_frame.X), oos_frame.y)
        scores.append(MethodScore(method.tag, dict(best_cell),
                                  criteria[best_ci], oos, failed))
    if all(not np.isfinite(s.oos_rmse) for s in scores):
        raise NumericalError(f"every tuning cell failed for {tag!r}")
    order = {m: i for i, m in enumerate(CANONICAL_METHODS)}
    chosen = min(scores, key=lambda s: (s.oos_rmse, order[s.method]))
    return TuningOutcome(tag, tuple(scores), chosen.method,
                         {**fixed, **chosen.params})


# ------------------------------------------------------------- trained models

def _check_input_dim(net, expected, label):
    if net.n_features_in_ != expected:
        raise ValidationError(
            f"{label} must consume {expected} inputs, built {net.n_features_in_}")


@dataclass
class StackedModel:
    """RF + GB + SVR forecasts appended to the scaled lags, read by the net."""

    tag: str = field(default="stacked", init=False)
    rf: object = None
    gb: object = None
    svr: object = None
    stacker: object = None
    lag_scaler: object = None
    feed_scaler: object = None
    n_lags: int = 30
    nu: float = None

    def first_level_forecasts(self, frame):
        xs = self.lag_scaler.transform(frame.X)
        return np.column_stack([self.rf.predict(xs), self.gb.predict(xs),
                                self.svr.predict(xs)])

    def predict_frame(self, frame, dataset=None):
        xs = self.lag_scaler.transform(frame.X)
        feed = self.feed_scaler.transform(self.first_level_forecasts(frame))
        return self.stacker.predict(np.hstack([xs, feed]))


@dataclass
class BenchmarkAnn:
    """Plain net on the scaled lags, optionally joined by GARCH or EGARCH
    component columns (recomputed from returns at predict time)."""

    tag: str
    net: object = None
    lag_scaler: object = None
    comp_scaler: object = None
    garch: object = None
    nu: float = None

    def component_columns(self, frame, dataset):
        if self.garch is None:
            return None
        comps = self.garch.components(dataset.returns.returns)
        # component k is dated at the (k+1)-th return date
        pos = {d: i for i, d in enumerate(dataset.returns.dates[1:])}
        idx = np.array([pos[d] for d in frame.dates])
        return np.column_stack([c[idx] for c in comps])

    def predict_frame(self, frame, dataset=None):
        xs = self.lag_scaler.transform(frame.X)
        if self.garch is not None:
            if dataset is None:
                raise ValidationError(
                    f"{self.tag} needs the return history to build inputs")
            comps = self.comp_scaler.transform(
                self.component_columns(frame, dataset))
            xs = np.hstack([xs, comps])
        return self.net.predict(xs)


@dataclass
class HestonBenchmark:
    """Calibrated variance diffusion; forecasts are per-day Monte Carlo."""

    tag: str = field(default="heston", init=False)
    model: object = None
    n_paths: int = 20_000
    seed: int = 0

    def predict_frame(self, frame, dataset):
        v0 = dataset.vol_at(frame.dates) ** 2
        out = np.empty(len(frame))
        for k, v in enumerate(v0):
            rng = np.random.default_rng(
                derive_seed(self.seed, "heston-day", str(frame.dates[k])))
            out[k] = self.model.forecast(n_paths=self.n_paths, rng=rng, v0=v)
        return out

    def simulate_day(self, date, v0, horizon_days, n_paths=None):
        rng = np.random.default_rng(
            derive_seed(self.seed, "heston-horizon", str(date)))
        return self.model.simulate(horizon_days,
                                   n_paths=n_paths or self.n_paths,
                                   rng=rng, v0=v0)


# ------------------------------------------------------------------- training

def _fit_stacker_nu(dataset, train_frame):
    """nu via MLE on training-window returns standardized by V_t."""
    dates = train_frame.dates
    pos = {d: i for i, d in enumerate(dataset.returns.dates)}
    idx = np.array([pos[d] for d in dates if d in pos])
    vols = dataset.vol_at(dataset.returns.dates[idx])
    u = dataset.returns.returns[idx] / np.maximum(vols, SIGMA_FLOOR)
    return risk.fit_t_dof(u)


def _assert_chronology(first, middle, last):
    if not (first.dates[-1] < middle.dates[0]
            and middle.dates[-1] < last.dates[0]):
        raise ValidationError("split windows are not chronologically disjoint")


def _params_of(outcomes, tag):
    out = (outcomes or {}).get(tag)
    if out is None:
        raise ValidationError(f"no tuned hyperparameters for {tag!r}; "
                              "run tuning first or supply them explicitly")
    return dict(out.chosen_params if isinstance(out, TuningOutcome) else out)


def train_stacked(dataset, train_frame, outcomes, seed, split=SplitSpec(),
                  epochs=None):
    """Fit the two-level model on the 25/50/25 walk.

    ``outcomes`` maps learner tags (random_forest, gradient_boosting, svr,
    ann) to TuningOutcome objects or bare hyperparameter dicts.  Returns
    (model, info) where info carries the test RMSE and split boundaries.
    """
    first, middle, last = chronological_split(train_frame, split)
    _assert_chronology(first, middle, last)
    lag_scaler = market_data.fit_scale(first, np.arange(len(first)))

    model = StackedModel(n_lags=train_frame.n_features)
    model.lag_scaler = lag_scaler
    first_xs = lag_scaler.transform(first.X)
    model.rf = make_estimator("random_forest",
                              _params_of(outcomes, "random_forest"),
                              derive_seed(seed, "stack", "rf"))
    model.rf.fit(first_xs, first.y)
    model.gb = make_estimator("gradient_boosting",
                              _params_of(outcomes, "gradient_boosting"),
                              derive_seed(seed, "stack", "gb"))
    model.gb.fit(first_xs, first.y)
    model.svr = make_estimator("svr", _params_of(outcomes, "svr"),
                               derive_seed(seed, "stack", "svr"))
    model.svr.fit(first_xs, first.y)

    feed_mid = model.first_level_forecasts(middle)
    model.feed_scaler = market_data.RangeScaler(on_constant="passthrough").fit(
        feed_mid, columns=("rf_hat", "gb_hat", "svr_hat"))

    ann_params = _params_of(outcomes, "ann")
    if epochs is not None:
        ann_params["epochs"] = epochs
    stack_X = np.hstack([lag_scaler.transform(middle.X),
                         model.feed_scaler.transform(feed_mid)])
    model.stacker = make_estimator("ann", ann_params,
                                   derive_seed(seed, "stack", "ann"))
    model.stacker.fit(stack_X, middle.y)
    _check_input_dim(model.stacker, model.n_lags + 3, "stacker net")

    model.nu = _fit_stacker_nu(dataset, train_frame.rows(
        np.arange(len(first) + len(middle))))
    test_rmse = rmse(model.predict_frame(last), last.y)
    info = {
        "test_rmse": test_rmse,
        "boundaries": (str(first.dates[-1]), str(middle.dates[-1])),
        "sizes": (len(first), len(middle), len(last)),
        "nu": model.nu,
    }
    return model, info


def train_benchmark(tag, dataset, train_frame, outcomes, seed,
                    split=SplitSpec(), epochs=None, heston_paths=20_000):
    """Fit one benchmark on the same split boundaries as the stack.

    The net benchmarks reuse the stacker's tuned (learning rate, l2); the
    hybrid variants append the fitted GARCH/EGARCH component columns.
    """
    if tag not in BENCHMARK_TAGS:
        raise ValidationError(f"unknown benchmark {tag!r}")
    first, middle, last = chronological_split(train_frame, split)
    _assert_chronology(first, middle, last)

    # returns up to the end of the first-level window feed the filters
    cutoff = first.dates[-1]
    r_hist = dataset.returns.returns[dataset.returns.dates <= cutoff]

    if tag == "heston":
        common = np.isin(dataset.returns.dates, dataset.vol.dates) \
            & (dataset.returns.dates <= cutoff)
        proxy = dataset.vol_at(dataset.returns.dates[common]) ** 2
        heston = HestonModel(n_paths=heston_paths).fit(
            dataset.returns.returns[common], proxy)
        model = HestonBenchmark(model=heston, n_paths=heston_paths,
                                seed=derive_seed(seed, "heston"))
        info = {"test_rmse": rmse(model.predict_frame(last, dataset), last.y)}
        return model, info

    model = BenchmarkAnn(tag=tag)
    model.lag_scaler = market_data.fit_scale(first, np.arange(len(first)))
    xs_mid = model.lag_scaler.transform(middle.X)
    if tag == "ann_garch":
        model.garch = StudentTGarch(
            random_state=derive_seed(seed, "garch")).fit(r_hist)
        comp_names = ("arch_term", "garch_term")
    elif tag == "ann_egarch":
        model.garch = StudentTEgarch(
            random_state=derive_seed(seed, "egarch")).fit(r_hist)
        comp_names = ("log_persistence", "sign_term", "magnitude_term")
    if model.garch is not None:
        comp_mid = model.component_columns(middle, dataset)
        model.comp_scaler = market_data.RangeScaler(
            on_constant="passthrough").fit(comp_mid, columns=comp_names)
        xs_mid = np.hstack([xs_mid, model.comp_scaler.transform(comp_mid)])
        model.nu = model.garch.nu_
    else:
        model.nu = _fit_stacker_nu(dataset, train_frame.rows(
            np.arange(len(first) + len(middle))))

    ann_params = _params_of(outcomes, "ann")
    if epochs is not None:
        ann_params["epochs"] = epochs
    model.net = make_estimator("ann", ann_params,
                               derive_seed(seed, "bench", tag))
    model.net.fit(xs_mid, middle.y)
    expected = {"ann": train_frame.n_features,
                "ann_garch": train_frame.n_features + 2,
                "ann_egarch": train_frame.n_features + 3}[tag]
    _check_input_dim(model.net, expected, f"{tag} net")
    info = {"test_rmse": rmse(model.predict_frame(last, dataset), last.y),
            "nu": model.nu}
    return model, info


def persistence_rmse(frame):
    """Baseline: forecast TRV_t by the latest trailing volatility V_t."""
    return rmse(frame.X[:, 0], frame.y)


# ---------------------------------------------------------------- forecasting

def forecast_model(model, frame, dataset):
    """Per-date volatility forecasts, floored at a tiny positive level."""
    pred = np.asarray(model.predict_frame(frame, dataset), dtype=float)
    if not np.all(np.isfinite(pred)):
        raise NumericalError(f"{model.tag} produced non-finite forecasts")
    return np.maximum(pred, SIGMA_FLOOR)


def accuracy_table(models, frame, dataset):
    """RMSE per model on one evaluation frame (Table-6-shaped)."""
    table = {}
    for model in models:
        table[model.tag] = rmse(forecast_model(model, frame, dataset),
                                frame.y)
    return table


# ----------------------------------------------------------------- backtesting

def build_risk_series(model, frame, dataset, alpha=0.99, horizon_days=10,
                      overlapping=True, heston_pool=2000):
    """Per-period VaR/CVaR for one model over an evaluation frame.

    Returns (RiskSeries, sampler) where the sampler draws H0 returns from
    the model's own predictive distribution for the AS tests.
    """
    dates = frame.dates if overlapping else frame.dates[::horizon_days]
    eval_frame = frame if overlapping else frame.rows(
        np.arange(0, len(frame), horizon_days))
    realized = dataset.horizon_return_at(dates, horizon_days)

    if model.tag == "heston":
        n = len(dates)
        pool_size = min(heston_pool, model.n_paths)
        var = np.empty(n)
        cvar = np.empty(n)
        pools = np.empty((n, pool_size))
        v0 = dataset.vol_at(dates) ** 2
        for k in range(n):
            paths = model.simulate_day(dates[k], v0[k], horizon_days)
            horizon_returns = paths.horizon_returns()
            measure = risk.heston_var_cvar(horizon_returns, alpha)
            var[k], cvar[k] = measure.var, max(measure.cvar, measure.var)
            pools[k] = horizon_returns[:pool_size]
        sampler = risk.empirical_sampler(pools)
    else:
        sigma = forecast_model(model, eval_frame, dataset)
        var, cvar = risk.student_t_var_cvar(sigma, model.nu, alpha,
                                            horizon_days)
        sampler = risk.student_t_sampler(sigma, model.nu, horizon_days)
    series = risk.RiskSeries(dates, var, cvar, realized, alpha, horizon_days)
    return series, sampler


def backtest_model(model, frame, dataset, alpha=0.99, horizon_days=10,
                   overlapping=True, n_sim=5000, seed=0):
    """Risk series plus the four tests for one model (Table-7-shaped row)."""
    series, sampler = build_risk_series(model, frame, dataset, alpha,
                                        horizon_days, overlapping)
    rng = np.random.default_rng(derive_seed(seed, "backtest", model.tag))
    results = risk.run_backtests(series, sampler, n_sim=n_sim, rng=rng)
    return series, results
