import datetime
import math

import numpy as np
import pytest

from volstack.errors import ParseError, ValidationError
from volstack.market_data import (
    FeatureFrame,
    PriceSeries,
    RangeScaler,
    SplitSpec,
    adf_test,
    apply_scale,
    build_features,
    chronological_split,
    fit_scale,
    ks_two_sample,
    load_prices,
    log_returns,
    read_frame_csv,
    trailing_vol,
    true_realized_vol,
    write_frame_csv,
)


def daterange(n, start="2001-01-01"):
    d0 = np.datetime64(start)
    return d0 + np.arange(n)


def make_returns(values, start="2001-01-01"):
    from volstack.market_data import ReturnSeries
    return ReturnSeries(daterange(len(values), start), values)


# ---------------------------------------------------------------- load_prices

def test_load_prices_two_rows(tmp_path):
    p = tmp_path / "prices.csv"
    p.write_text("date,adj_close\n2020-01-01,100\n2020-01-02,110\n")
    series = load_prices(p)
    assert len(series) == 2
    assert series.closes.tolist() == [100.0, 110.0]


def test_load_prices_sorts_and_dedups(tmp_path):
    p = tmp_path / "prices.csv"
    p.write_text("date,adj_close\n"
                 "2020-01-03,130\n2020-01-01,100\n2020-01-02,110\n"
                 "2020-01-01,100\n")
    series = load_prices(p)
    assert len(series) == 3
    assert series.closes.tolist() == [100.0, 110.0, 130.0]


def test_load_prices_rejects_zero_close(tmp_path):
    p = tmp_path / "prices.csv"
    p.write_text("date,adj_close\n2020-01-01,100\n2020-01-02,0\n")
    with pytest.raises(ValidationError, match="row 3"):
        load_prices(p)


def test_load_prices_malformed_row_names_line(tmp_path):
    p = tmp_path / "prices.csv"
    p.write_text("date,adj_close\n2020-01-01,100\nnot-a-date,1\n")
    with pytest.raises(ParseError, match="line 3"):
        load_prices(p)


# ---------------------------------------------------------------- log_returns

def test_log_returns_identity_and_definition():
    series = PriceSeries(daterange(2), [100.0, 100.0])
    assert log_returns(series).returns[0] == 0.0
    series = PriceSeries(daterange(2), [100.0, 110.0])
    assert log_returns(series).returns[0] == pytest.approx(math.log(1.1))


def test_log_returns_matches_direct_formula():
    rng = np.random.default_rng(7)
    closes = np.exp(rng.normal(4.5, 0.1, size=10))
    series = PriceSeries(daterange(10), closes)
    got = log_returns(series).returns
    # independent oracle: plain python loop over the definition
    expected = [math.log(closes[i] / closes[i - 1]) for i in range(1, 10)]
    assert np.allclose(got, expected, rtol=0, atol=1e-15)


# ------------------------------------------------------------- trailing_vol

def test_trailing_vol_constant_returns_is_zero():
    r = make_returns([0.01] * 12)
    v = trailing_vol(r, n=5)
    assert np.all(v.values == 0.0)


def test_trailing_vol_hand_computed_window():
    # population std of (0.01, -0.01, 0.01, -0.01, 0.01):
    # mean = 0.002, squared deviations 3*(0.008)^2 + 2*(0.012)^2
    r = make_returns([0.01, -0.01, 0.01, -0.01, 0.01, 0.0])
    v = trailing_vol(r, n=5)
    expected = math.sqrt((3 * 0.008 ** 2 + 2 * 0.012 ** 2) / 5)
    assert v.values[0] == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(0.009797958971132712, rel=1e-12)


def test_trailing_vol_translation_invariant():
    rng = np.random.default_rng(3)
    base = rng.normal(0, 0.01, size=40)
    v0 = trailing_vol(make_returns(base), n=5).values
    v1 = trailing_vol(make_returns(base + 0.37), n=5).values
    assert np.allclose(v0, v1, atol=1e-12)


def test_trailing_vol_rejects_tiny_window():
    with pytest.raises(ValidationError):
        trailing_vol(make_returns([0.1, 0.2, 0.3]), n=1)


def test_trailing_vol_dates_follow_window():
    r = make_returns(np.linspace(-0.01, 0.01, 9))
    v = trailing_vol(r, n=5)
    # first V is dated at the sixth return: known after five observed returns
    assert v.dates[0] == r.dates[5]
    assert len(v) == len(r) - 5


# -------------------------------------------------------- true_realized_vol

def test_trv_constant_forward_returns_zero():
    r = make_returns([0.02] * 10)
    assert np.all(true_realized_vol(r, n=5).values == 0.0)


def test_trv_agrees_with_trailing_on_same_window():
    rng = np.random.default_rng(11)
    r = make_returns(rng.normal(0, 0.01, size=60))
    v = trailing_vol(r, n=5)
    trv = true_realized_vol(r, n=5)
    # both are the population std of returns[k : k+5]
    assert np.allclose(v.values, trv.values[: len(v)], atol=1e-15)
    assert trv.dates[0] == r.dates[0]


def test_trv_correlates_with_garch_sigma():
    # simulation oracle: on GARCH data the forward-vol target tracks sigma_t
    rng = np.random.default_rng(5)
    n = 2000
    omega, alpha, beta = 1e-6, 0.1, 0.85
    sig2 = np.empty(n)
    r = np.empty(n)
    sig2[0] = omega / (1 - alpha - beta)
    r[0] = math.sqrt(sig2[0]) * rng.standard_normal()
    for t in range(1, n):
        sig2[t] = omega + alpha * r[t - 1] ** 2 + beta * sig2[t - 1]
        r[t] = math.sqrt(sig2[t]) * rng.standard_normal()
    trv = true_realized_vol(make_returns(r), n=5)
    sigma = np.sqrt(sig2[: len(trv)])
    corr = np.corrcoef(trv.values, sigma)[0, 1]
    assert corr > 0


# ------------------------------------------------------------ build_features

def test_build_features_row_count_arithmetic():
    # 40 prices -> 39 returns -> 34 trailing vols -> exactly one complete row
    rng = np.random.default_rng(2)
    r = make_returns(rng.normal(0, 0.01, size=39))
    v = trailing_vol(r, n=5)
    trv = true_realized_vol(r, n=5)
    assert len(v) == 34
    frame = build_features(v, trv, lags=30)
    assert len(frame) == 1
    assert frame.n_features == 30


def test_build_features_lag_shift_identity():
    rng = np.random.default_rng(4)
    r = make_returns(rng.normal(0, 0.01, size=80))
    frame = build_features(trailing_vol(r), true_realized_vol(r), lags=30)
    assert len(frame) > 2
    # column j at row t equals column j+1 at row t+1
    assert np.allclose(frame.X[:-1, :-1], frame.X[1:, 1:], atol=1e-15)


def test_build_features_first_column_is_current_vol():
    rng = np.random.default_rng(9)
    r = make_returns(rng.normal(0, 0.01, size=80))
    v = trailing_vol(r)
    frame = build_features(v, true_realized_vol(r), lags=30)
    pos = {d: i for i, d in enumerate(v.dates)}
    for k in range(len(frame)):
        assert frame.X[k, 0] == v.values[pos[frame.dates[k]]]


def test_build_features_misaligned_dates_error():
    rng = np.random.default_rng(1)
    r1 = make_returns(rng.normal(0, 0.01, size=60), start="2001-01-01")
    r2 = make_returns(rng.normal(0, 0.01, size=60), start="2011-01-01")
    with pytest.raises(ValidationError, match="misaligned"):
        build_features(trailing_vol(r1), true_realized_vol(r2))


# -------------------------------------------------------------------- scaling

def test_scaler_definition_and_no_clipping():
    scaler = RangeScaler().fit(np.array([[0.0], [5.0], [10.0]]))
    got = scaler.transform(np.array([[0.0], [5.0], [10.0], [20.0]]))
    assert got[:, 0].tolist() == [0.0, 0.5, 1.0, 2.0]


def test_scaler_round_trip_identity():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(50, 7))
    scaler = RangeScaler().fit(X[:30])
    back = scaler.inverse_transform(scaler.transform(X))
    assert np.allclose(back, X, rtol=1e-12, atol=0)


def test_scaler_constant_column_error_names_column():
    X = np.column_stack([np.arange(5.0), np.full(5, 3.0)])
    with pytest.raises(ValidationError, match="c1"):
        RangeScaler().fit(X, columns=("c0", "c1"))


def test_fit_scale_apply_scale_on_frame():
    rng = np.random.default_rng(8)
    r = make_returns(rng.normal(0, 0.01, size=120))
    frame = build_features(trailing_vol(r), true_realized_vol(r), lags=30)
    scaler = fit_scale(frame, np.arange(len(frame) // 2))
    scaled = apply_scale(frame, scaler)
    half = scaled.X[: len(frame) // 2]
    assert half.min() >= 0.0 and half.max() <= 1.0
    assert np.allclose(scaled.y, frame.y)  # target stays in natural units


# ------------------------------------------------------- chronological_split

def test_split_100_rows():
    frame = _toy_frame(100)
    a, b, c = chronological_split(frame)
    assert (len(a), len(b), len(c)) == (25, 50, 25)


def test_split_101_rows_floor_convention():
    a, b, c = chronological_split(_toy_frame(101))
    assert (len(a), len(b), len(c)) == (25, 50, 26)


def test_split_parts_partition_frame():
    frame = _toy_frame(57)
    a, b, c = chronological_split(frame)
    joined = np.concatenate([a.dates, b.dates, c.dates])
    assert np.array_equal(joined, frame.dates)
    assert len(a) + len(b) + len(c) == len(frame)


def test_split_too_few_rows():
    with pytest.raises(ValidationError):
        chronological_split(_toy_frame(11))


def _toy_frame(n):
    rng = np.random.default_rng(n)
    return FeatureFrame(daterange(n), rng.normal(size=(n, 3)),
                        rng.normal(size=n), ("a", "b", "c"))


# ---------------------------------------------------------------------- adf

def test_adf_rejects_on_iid_noise():
    rng = np.random.default_rng(10)
    hits = 0
    trials = 40
    for _ in range(trials):
        stat, _ = adf_test(rng.standard_normal(500))
        hits += stat < -2.63
    assert hits / trials > 0.95


def test_adf_accepts_on_random_walk():
    rng = np.random.default_rng(12)
    hits = 0
    trials = 40
    for _ in range(trials):
        stat, _ = adf_test(np.cumsum(rng.standard_normal(500)))
        hits += stat > -2.63
    assert hits / trials > 0.7


def test_adf_power_on_ar1():
    # invariant: AR(1), |phi|<1, n=2000 rejects the unit root at 5%
    rng = np.random.default_rng(13)
    rejections = 0
    trials = 200
    for _ in range(trials):
        e = rng.standard_normal(2000)
        x = np.empty(2000)
        x[0] = e[0]
        for t in range(1, 2000):
            x[t] = 0.5 * x[t - 1] + e[t]
        stat, _ = adf_test(x)
        rejections += stat < -2.86
    assert rejections / trials >= 0.90


def test_adf_lag_order_is_schwert():
    rng = np.random.default_rng(14)
    _, lags = adf_test(rng.standard_normal(500))
    assert lags == int(12 * (500 / 100) ** 0.25)


# ----------------------------------------------------------------------- ks

def test_ks_identical_samples():
    a = np.arange(10.0)
    d, p = ks_two_sample(a, a.copy())
    assert d == 0.0
    assert p == pytest.approx(1.0)


def test_ks_separated_gaussians():
    rng = np.random.default_rng(15)
    _, p = ks_two_sample(rng.normal(0, 1, 200), rng.normal(5, 1, 200))
    assert p < 0.01


def test_ks_empty_input_error():
    with pytest.raises(ValidationError):
        ks_two_sample([], [1.0])


# ------------------------------------------------------------------ csv i/o

def test_frame_csv_round_trip(tmp_path):
    rng = np.random.default_rng(16)
    r = make_returns(rng.normal(0, 0.01, size=100))
    frame = build_features(trailing_vol(r), true_realized_vol(r), lags=30)
    path = tmp_path / "frame.csv"
    write_frame_csv(frame, path)
    back = read_frame_csv(path)
    assert back.columns == frame.columns
    assert np.array_equal(back.dates, frame.dates)
    assert np.allclose(back.X, frame.X, rtol=1e-10)
    assert np.allclose(back.y, frame.y, rtol=1e-10)


def test_frame_csv_header_layout(tmp_path):
    rng = np.random.default_rng(17)
    r = make_returns(rng.normal(0, 0.01, size=100))
    frame = build_features(trailing_vol(r), true_realized_vol(r), lags=30)
    path = tmp_path / "frame.csv"
    write_frame_csv(frame, path)
    header = path.read_text().splitlines()[0]
    assert header.startswith("date,V_lag00,")
    assert header.endswith("V_lag29,trv")


# ----------------------------------------------------------------- invariants

def test_price_series_validation():
    with pytest.raises(ValidationError):
        PriceSeries(daterange(2), [100.0, -1.0])
    with pytest.raises(ValidationError):
        PriceSeries([np.datetime64("2020-01-02"), np.datetime64("2020-01-01")],
                    [1.0, 2.0])


def test_split_spec_validation():
    with pytest.raises(ValidationError):
        SplitSpec((0.5, 0.5, 0.5))
