"""Price ingestion, volatility features, scaling, splits, and diagnostics.

Daily adjusted closes come in as ``date,adj_close`` CSV.  From the log
returns we build two 5-day population standard deviations: the trailing
volatility V_t (returns observed before date t) and the forward-looking
target TRV_t (returns from date t onward).  Thirty lagged V's form the
predictor block, min-max scaled on the training window only.
"""

import csv
import datetime
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .errors import NumericalError, ParseError, ValidationError

CSV_HEADER = ("date", "adj_close")


def _as_dates(dates):
    arr = np.asarray(dates, dtype="datetime64[D]")
    if arr.ndim != 1:
        raise ValidationError("dates must be one-dimensional")
    return arr


@dataclass(frozen=True)
class PriceSeries:
    """Dated sequence of positive adjusted closes, strictly increasing dates."""

    dates: np.ndarray
    closes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dates", _as_dates(self.dates))
        object.__setattr__(self, "closes", np.asarray(self.closes, dtype=float))
        if self.dates.shape != self.closes.shape:
            raise ValidationError("dates and closes must have equal length")
        if len(self.dates) < 2:
            raise ValidationError("need at least two price observations")
        if np.any(np.diff(self.dates).astype(int) <= 0):
            raise ValidationError("dates must be strictly increasing")
        if not np.all(np.isfinite(self.closes)) or np.any(self.closes <= 0):
            raise ValidationError("closes must be finite and positive")

    def __len__(self):
        return len(self.dates)


@dataclass(frozen=True)
class ReturnSeries:
    """Daily log-returns; one fewer observation than the prices behind it."""

    dates: np.ndarray
    returns: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dates", _as_dates(self.dates))
        object.__setattr__(self, "returns", np.asarray(self.returns, dtype=float))
        if self.dates.shape != self.returns.shape:
            raise ValidationError("dates and returns must have equal length")
        if not np.all(np.isfinite(self.returns)):
            raise ValidationError("returns must be finite")

    def __len__(self):
        return len(self.dates)


@dataclass(frozen=True)
class VolSeries:
    """Dated non-negative daily-frequency volatilities."""

    dates: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dates", _as_dates(self.dates))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.dates.shape != self.values.shape:
            raise ValidationError("dates and values must have equal length")
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise ValidationError("volatilities must be finite and non-negative")

    def __len__(self):
        return len(self.dates)


@dataclass(frozen=True)
class SplitSpec:
    """Chronological split fractions; defaults to the 25/50/25 scheme."""

    fractions: tuple = (0.25, 0.50, 0.25)

    def __post_init__(self):
        f = tuple(float(x) for x in self.fractions)
        object.__setattr__(self, "fractions", f)
        if len(f) != 3 or any(x <= 0 for x in f):
            raise ValidationError("need three positive split fractions")
        if abs(sum(f) - 1.0) > 1e-9:
            raise ValidationError("split fractions must sum to 1")


@dataclass(frozen=True)
class FeatureFrame:
    """Per-date predictor rows and TRV target.

    ``X[:, j]`` holds the j-th column named in ``columns``; the first
    ``n_lags`` columns are V_t, V_{t-1}, ... and any extra model-derived
    columns follow.  ``scaler`` is attached once the predictors have been
    min-max scaled.
    """

    dates: np.ndarray
    X: np.ndarray
    y: np.ndarray
    columns: tuple
    scaler: "RangeScaler | None" = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "dates", _as_dates(self.dates))
        object.__setattr__(self, "X", np.asarray(self.X, dtype=float))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))
        object.__setattr__(self, "columns", tuple(self.columns))
        if self.X.ndim != 2:
            raise ValidationError("X must be a 2-d matrix")
        if len(self.dates) != self.X.shape[0] or len(self.y) != self.X.shape[0]:
            raise ValidationError("dates, X rows and y must have equal length")
        if self.X.shape[1] != len(self.columns):
            raise ValidationError("column names must match X width")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.y))):
            raise ValidationError("feature frame contains non-finite cells")

    def __len__(self):
        return len(self.dates)

    @property
    def n_features(self):
        return self.X.shape[1]

    def rows(self, index):
        """New frame restricted to the given row indices (order preserved)."""
        index = np.asarray(index)
        return FeatureFrame(self.dates[index], self.X[index], self.y[index],
                            self.columns, self.scaler)

    def with_columns(self, names, values):
        """Append extra predictor columns (values shaped (n_rows, k))."""
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.shape[0] != len(self):
            raise ValidationError("appended columns must match row count")
        return FeatureFrame(self.dates, np.hstack([self.X, values]), self.y,
                            self.columns + tuple(names), self.scaler)


def load_prices(path):
    """Parse a ``date,adj_close`` CSV into a date-sorted, deduplicated PriceSeries.

    Malformed rows raise :class:`ParseError` with the line number;
    non-positive prices raise :class:`ValidationError` naming the row.
    """
    dates, closes = [], []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if lineno == 1 and row[0].strip().lower() == "date":
                continue
            if len(row) < 2:
                raise ParseError("expected 'date,adj_close'", line=lineno)
            try:
                day = datetime.date.fromisoformat(row[0].strip())
                close = float(row[1])
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from exc
            if not math.isfinite(close) or close <= 0:
                raise ValidationError(
                    f"non-positive price {close!r} on row {lineno} ({day})")
            dates.append(day)
            closes.append(close)
    if len(dates) < 2:
        raise ValidationError(f"{path}: need at least two price rows")
    order = np.argsort(np.asarray(dates, dtype="datetime64[D]"), kind="stable")
    out_dates, out_closes, seen = [], [], set()
    for i in order:
        if dates[i] in seen:
            continue
        seen.add(dates[i])
        out_dates.append(dates[i])
        out_closes.append(closes[i])
    return PriceSeries(out_dates, out_closes)


def log_returns(prices):
    """r_t = ln(close_t / close_{t-1}), dated at the later close."""
    if len(prices) < 2:
        raise ValidationError("need at least two prices for returns")
    r = np.diff(np.log(prices.closes))
    return ReturnSeries(prices.dates[1:], r)


def _window_std(values, n):
    """Population standard deviation over every length-n window (vectorized)."""
    values = np.asarray(values, dtype=float)
    if n < 2:
        raise ValidationError("volatility window must be at least 2")
    if len(values) < n:
        raise ValidationError(f"need at least {n} returns, got {len(values)}")
    windows = np.lib.stride_tricks.sliding_window_view(values, n)
    centered = windows - windows.mean(axis=1, keepdims=True)
    return np.sqrt((centered ** 2).mean(axis=1))


def trailing_vol(returns, n=5):
    """V_t: population std of the n returns before date t (Eq.-9-style window)."""
    values = _window_std(returns.returns, n)
    # window k covers returns[k : k+n]; it is known entering date k+n
    return VolSeries(returns.dates[n:], values[:-1])


def true_realized_vol(returns, n=5):
    """TRV_t: population std of the n returns from date t onward (the target)."""
    values = _window_std(returns.returns, n)
    return VolSeries(returns.dates[: len(values)], values)


def build_features(vol, trv, lags=30):
    """Rows (V_t, V_{t-1}, ..., V_{t-lags+1}) with target TRV_t.

    Rows lacking a full lag history or a full forward target window are
    dropped.  Both series must share the underlying date grid.
    """
    if lags < 1:
        raise ValidationError("need at least one lag")
    if len(vol) and len(trv) and not np.isin(trv.dates, vol.dates).any():
        raise ValidationError("volatility and target dates are misaligned")
    vol_pos = {d: i for i, d in enumerate(vol.dates)}
    rows, dates, targets = [], [], []
    for k, date in enumerate(trv.dates):
        i = vol_pos.get(date)
        if i is None or i < lags - 1:
            continue
        window = vol.values[i - lags + 1: i + 1]
        rows.append(window[::-1])  # V_t first, oldest lag last
        dates.append(date)
        targets.append(trv.values[k])
    if not rows:
        raise ValidationError("no complete feature rows; series too short")
    columns = tuple(f"V_lag{j:02d}" for j in range(lags))
    return FeatureFrame(dates, np.vstack(rows), np.asarray(targets), columns)


class RangeScaler(BaseEstimator, TransformerMixin):
    """Min-max scaler fitted on a training window; later values are not clipped.

    Columns named in ``passthrough`` (matched against ``columns`` given to
    :meth:`fit`) are copied through untouched.  A constant column is an
    error by default; ``on_constant="passthrough"`` leaves it unscaled
    instead (used for derived columns that may legitimately degenerate).
    """

    def __init__(self, passthrough=(), on_constant="error"):
        self.passthrough = passthrough
        self.on_constant = on_constant

    def fit(self, X, y=None, columns=None):
        X = check_array(X, ensure_2d=True, dtype=float)
        if X.shape[0] < 1:
            raise ValidationError("cannot fit scaler on an empty window")
        names = tuple(columns) if columns is not None else tuple(
            str(j) for j in range(X.shape[1]))
        skip = set(self.passthrough)
        self.min_ = X.min(axis=0)
        self.max_ = X.max(axis=0)
        self.scale_mask_ = np.array([c not in skip for c in names])
        degenerate = (self.max_ <= self.min_) & self.scale_mask_
        if np.any(degenerate):
            if self.on_constant == "passthrough":
                self.scale_mask_ &= ~degenerate
            else:
                bad = [names[j] for j in np.flatnonzero(degenerate)]
                raise ValidationError(
                    f"constant column(s) cannot be scaled: {bad}")
        self.columns_ = names
        return self

    def transform(self, X):
        check_is_fitted(self, "min_")
        X = check_array(X, ensure_2d=True, dtype=float)
        out = X.copy()
        m = self.scale_mask_
        out[:, m] = (X[:, m] - self.min_[m]) / (self.max_[m] - self.min_[m])
        return out

    def inverse_transform(self, X):
        check_is_fitted(self, "min_")
        X = check_array(X, ensure_2d=True, dtype=float)
        out = X.copy()
        m = self.scale_mask_
        out[:, m] = X[:, m] * (self.max_[m] - self.min_[m]) + self.min_[m]
        return out


def fit_scale(frame, fit_rows):
    """Fit a RangeScaler on the given rows of the frame's predictors."""
    fit_rows = np.asarray(fit_rows)
    if fit_rows.size == 0:
        raise ValidationError("fit_rows must be non-empty")
    scaler = RangeScaler()
    scaler.fit(frame.X[fit_rows], columns=frame.columns)
    return scaler


def apply_scale(frame, scaler):
    """Frame with predictors mapped through the fitted scaler (unclipped)."""
    return FeatureFrame(frame.dates, scaler.transform(frame.X), frame.y,
                        frame.columns, scaler)


def chronological_split(frame, spec=SplitSpec()):
    """Contiguous chronological partition at floor(f1*n) and floor((f1+f2)*n)."""
    n = len(frame)
    if n < 12:
        raise ValidationError(f"need at least 12 rows to split, got {n}")
    f1, f2, _ = spec.fractions
    a = int(math.floor(f1 * n))
    b = int(math.floor((f1 + f2) * n))
    if a < 1 or b <= a or b >= n:
        raise ValidationError("split fractions leave an empty part")
    idx = np.arange(n)
    return frame.rows(idx[:a]), frame.rows(idx[a:b]), frame.rows(idx[b:])


def schwert_lag(n):
    """Deterministic ADF lag order floor(12 * (n/100)^(1/4))."""
    return int(math.floor(12.0 * (n / 100.0) ** 0.25))


def adf_test(series, lags=None):
    """Augmented Dickey-Fuller t-statistic (constant, no trend).

    Regresses dx_t on (1, x_{t-1}, dx_{t-1}, ..., dx_{t-lags}) and returns
    the t-statistic of the x_{t-1} coefficient together with the lag order
    used (Schwert rule by default).
    """
    x = np.asarray(series, dtype=float)
    n = len(x)
    if n < 25:
        raise ValidationError(f"ADF needs at least 25 observations, got {n}")
    k = schwert_lag(n) if lags is None else int(lags)
    k = max(0, min(k, n - 10))
    dx = np.diff(x)
    nobs = len(dx) - k
    rhs = [np.ones(nobs), x[k:-1]]
    for i in range(1, k + 1):
        rhs.append(dx[k - i: k - i + nobs])
    design = np.column_stack(rhs)
    target = dx[k:]
    coef, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
    if rank < design.shape[1]:
        raise NumericalError("singular ADF regression")
    resid = target - design @ coef
    dof = nobs - design.shape[1]
    if dof <= 0:
        raise ValidationError("too few observations for the chosen lag order")
    sigma2 = resid @ resid / dof
    xtx_inv = np.linalg.inv(design.T @ design)
    se = math.sqrt(sigma2 * xtx_inv[1, 1])
    return coef[1] / se, k


def ks_two_sample(a, b):
    """Two-sample Kolmogorov-Smirnov D and asymptotic p-value."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise ValidationError("KS test needs two non-empty samples")
    result = stats.ks_2samp(a, b, method="asymp")
    return float(result.statistic), float(min(1.0, result.pvalue))


def write_frame_csv(frame, path):
    """Export a frame as ``date,<columns...>,trv`` CSV."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("date",) + frame.columns + ("trv",))
        for i in range(len(frame)):
            writer.writerow([str(frame.dates[i])]
                            + [f"{v:.12g}" for v in frame.X[i]]
                            + [f"{frame.y[i]:.12g}"])


def read_frame_csv(path):
    """Inverse of :func:`write_frame_csv`."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[0] != "date" or header[-1] != "trv":
            raise ParseError("expected 'date,<columns>,trv' header", line=1)
        columns = tuple(header[1:-1])
        dates, rows, targets = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError("wrong number of fields", line=lineno)
            try:
                dates.append(datetime.date.fromisoformat(row[0]))
                rows.append([float(v) for v in row[1:-1]])
                targets.append(float(row[-1]))
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from exc
    if not rows:
        raise ValidationError(f"{path}: empty feature frame")
    return FeatureFrame(dates, np.asarray(rows), np.asarray(targets), columns)
