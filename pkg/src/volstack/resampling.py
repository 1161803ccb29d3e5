"""Resampling schemes for hyperparameter tuning on dependent data.

Five schemes: plain in-sample MSE minimization (mmse), circular block
bootstrap (cbb), stationary bootstrap (sb), maximum-entropy bootstrap
(meb), and h-block cross-validation (hcv).  Block lengths for cbb/sb come
from the Politis-White automatic selector with the Patton-Politis-White
correction.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

METHOD_ORDER = ("mmse", "cbb", "sb", "meb", "hcv")


def as_generator(rng):
    """Accept an int seed or a numpy Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


@dataclass(frozen=True)
class ResampleMethod:
    """Configuration of one tuning scheme.

    ``block_len`` applies to cbb, ``mean_block_len`` to sb, ``h`` and
    ``folds`` to hcv, ``replicates`` to the three bootstrap schemes.
    """

    tag: str
    block_len: int = 1
    mean_block_len: float = 1.0
    h: int = 1
    folds: int = 5
    replicates: int = 50

    def __post_init__(self):
        if self.tag not in METHOD_ORDER:
            raise ValidationError(f"unknown resample method {self.tag!r}")
        if self.block_len < 1 or self.mean_block_len < 1:
            raise ValidationError("block parameters must be >= 1")
        if not 0 <= self.h <= 100:
            raise ValidationError("hcv gap h must lie in [0, 100]")
        if self.replicates < 1:
            raise ValidationError("bootstrap replicates must be >= 1")


def _flat_top(x):
    """Trapezoidal flat-top lag window."""
    ax = np.abs(x)
    return np.where(ax <= 0.5, 1.0, np.where(ax <= 1.0, 2.0 * (1.0 - ax), 0.0))


def auto_block_length(series):
    """Politis-White automatic block lengths (cbb fixed, sb mean).

    Follows the corrected recipe of Patton, Politis and White: pick the
    smallest lag beyond which Kn consecutive autocorrelations are
    insignificant, build the flat-top-weighted long-run quantities, and
    plug into the optimal-length formulas for the circular and stationary
    bootstraps.
    """
    x = np.asarray(series, dtype=float)
    n = len(x)
    if n < 50:
        raise ValidationError(f"need at least 50 observations, got {n}")
    b_max = int(np.ceil(min(3.0 * np.sqrt(n), n / 3.0)))
    kn = int(max(5, np.ceil(np.sqrt(np.log10(n)))))
    m_max = int(np.ceil(np.sqrt(n))) + kn

    xc = x - x.mean()
    denom = xc @ xc
    if denom <= 0:
        raise ValidationError("constant series has no block structure")
    rho = np.array([xc[k:] @ xc[:-k] / denom for k in range(1, m_max + 1)])

    threshold = 2.0 * np.sqrt(np.log10(n) / n)
    significant = np.flatnonzero(np.abs(rho) > threshold) + 1
    if significant.size == 0:
        m_hat = 1
    else:
        m_hat = None
        insig = np.abs(rho) <= threshold
        for m in range(1, m_max - kn + 1):
            if insig[m: m + kn].all():
                m_hat = m
                break
        if m_hat is None:
            m_hat = int(significant.max())
    m = min(2 * m_hat, m_max)

    lags = np.arange(-m, m + 1)
    autocov = (denom / n) * np.concatenate(
        [rho[:m][::-1], [1.0], rho[:m]]) if m > 0 else np.array([denom / n])
    lam = _flat_top(lags / m) if m > 0 else np.ones(1)
    g_hat = float(np.sum(lam * np.abs(lags) * autocov))
    d_base = float(np.sum(lam * autocov)) ** 2
    d_cb = (4.0 / 3.0) * d_base
    d_sb = 2.0 * d_base
    if d_base <= 0:
        return 1, 1.0
    b_sb = (2.0 * g_hat ** 2 / d_sb) ** (1.0 / 3.0) * n ** (1.0 / 3.0)
    b_cb = (2.0 * g_hat ** 2 / d_cb) ** (1.0 / 3.0) * n ** (1.0 / 3.0)
    cbb_len = int(np.clip(round(b_cb), 1, b_max))
    sb_mean = float(np.clip(b_sb, 1.0, b_max))
    return cbb_len, sb_mean


def cbb_sample(n_rows, block_len, rng):
    """Circular block bootstrap indices: fixed-length wrapped blocks.

    Concatenates ceil(n/block_len) blocks of consecutive indices (mod n)
    with uniform random starts, truncated to n entries.
    """
    if block_len < 1:
        raise ValidationError("block length must be >= 1")
    if block_len > n_rows:
        raise ValidationError("block length exceeds sample size")
    rng = as_generator(rng)
    n_blocks = -(-n_rows // block_len)
    starts = rng.integers(0, n_rows, size=n_blocks)
    idx = (starts[:, None] + np.arange(block_len)) % n_rows
    return idx.ravel()[:n_rows]


def _sb_block_lengths(n_rows, mean_len, rng, total):
    """Geometric(1/mean_len) block lengths capped at n, summing past total."""
    lengths = []
    covered = 0
    p = 1.0 / mean_len
    while covered < total:
        length = min(int(rng.geometric(p)), n_rows)
        lengths.append(length)
        covered += length
    return lengths


def sb_sample(n_rows, mean_len, rng):
    """Stationary bootstrap indices: geometric-length wrapped blocks."""
    if mean_len < 1:
        raise ValidationError("mean block length must be >= 1")
    rng = as_generator(rng)
    pieces = []
    for length in _sb_block_lengths(n_rows, mean_len, rng, n_rows):
        start = int(rng.integers(0, n_rows))
        pieces.append((start + np.arange(length)) % n_rows)
    return np.concatenate(pieces)[:n_rows]


def meb_sample(series, rng):
    """Maximum-entropy bootstrap replicate of a series (Vinod-style).

    Sorts the series, builds a piecewise-uniform density whose quantile
    knots sit at probabilities (t+1/2)/n on the order statistics, attaches
    exponential tails carrying mass 1/(2n) each (which preserves the mean
    exactly for any common tail scale), draws n uniforms through the
    quantile function, and reorders the draws to the original ranks.
    """
    x = np.asarray(series, dtype=float)
    n = len(x)
    if n < 4:
        raise ValidationError("maximum-entropy bootstrap needs >= 4 points")
    if np.ptp(x) == 0:
        raise ValidationError("constant series has a degenerate ME density")
    rng = as_generator(rng)
    order = np.argsort(x, kind="stable")
    xs = x[order]

    diffs = np.abs(np.diff(x))
    k = int(0.10 * len(diffs))
    trimmed = np.sort(diffs)[k: len(diffs) - k if k else None]
    theta = float(trimmed.mean()) if trimmed.size else float(diffs.mean())
    if theta <= 0:
        theta = np.ptp(x) / n

    p = rng.uniform(size=n)
    knots_p = (np.arange(n) + 0.5) / n
    draws = np.interp(p, knots_p, xs)
    low = p < knots_p[0]
    high = p > knots_p[-1]
    draws[low] = xs[0] + theta * np.log(2.0 * n * p[low])
    draws[high] = xs[-1] - theta * np.log(2.0 * n * (1.0 - p[high]))

    out = np.empty(n)
    out[order] = np.sort(draws)
    return out


def hcv_select_h(frame, max_h=100):
    """Gap width for h-block CV: smallest h in [1, max_h] whose worst
    target/predictor lag-h cross-correlation is indistinguishable from zero.

    "Indistinguishable" means below the two-sigma independence band
    2/sqrt(n); if no h gets under the band, the argmin wins (first h on
    ties, since exact ties carry no information).
    """
    if len(frame) < 150:
        raise ValidationError("h selection needs at least 150 rows")
    y = frame.y - frame.y.mean()
    X = frame.X - frame.X.mean(axis=0)
    upper = min(max_h, len(frame) - 2)
    worst = np.empty(upper)
    for h in range(1, upper + 1):
        yt = y[h:]
        xt = X[:-h]
        num = yt @ xt
        scale = np.sqrt((yt @ yt) * np.einsum("ij,ij->j", xt, xt))
        with np.errstate(invalid="ignore", divide="ignore"):
            corr = np.where(scale > 0, num / scale, 0.0)
        worst[h - 1] = np.max(np.abs(corr))
    band = 2.0 / np.sqrt(len(frame))
    under = np.flatnonzero(worst < band)
    if under.size:
        return int(under[0]) + 1
    return int(np.argmin(worst)) + 1


def hcv_folds(n_rows, h, k=5):
    """k contiguous validation folds; training excludes the fold and h rows
    on each side of it.

    The 2h-row deletion budget is spent entirely on the inward side when a
    fold touches a boundary, so every training set has exactly
    n - fold_size - 2h rows and fold criteria stay comparable.
    """
    if h < 0 or k < 2:
        raise ValidationError("need h >= 0 and at least two folds")
    if n_rows <= k * (2 * h + 1):
        raise ValidationError(
            f"{n_rows} rows cannot support {k} folds with gap {h}")
    bounds = np.linspace(0, n_rows, k + 1).astype(int)
    folds = []
    everything = np.arange(n_rows)
    for i in range(k):
        start, stop = bounds[i], bounds[i + 1]
        left_cut = min(h, start)
        right_cut = min(h, n_rows - stop)
        rem = 2 * h - left_cut - right_cut
        grow = min(rem, start - left_cut)
        left_cut += grow
        right_cut += min(rem - grow, n_rows - stop - right_cut)
        val = everything[start:stop]
        train = np.concatenate([everything[: start - left_cut],
                                everything[stop + right_cut:]])
        folds.append((train, val))
    return folds


def oob_indices(n_rows, sample):
    """Original rows untouched by a bootstrap index sample."""
    mask = np.ones(n_rows, dtype=bool)
    mask[np.asarray(sample)] = False
    return np.flatnonzero(mask)
