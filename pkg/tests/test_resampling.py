import numpy as np
import pytest
from scipy import stats

from volstack.errors import ValidationError
from volstack.market_data import FeatureFrame
from volstack.resampling import (
    ResampleMethod,
    _sb_block_lengths,
    as_generator,
    auto_block_length,
    cbb_sample,
    hcv_folds,
    hcv_select_h,
    meb_sample,
    oob_indices,
    sb_sample,
)


def ar1(phi, n, rng, sigma=1.0):
    e = rng.standard_normal(n) * sigma
    x = np.empty(n)
    x[0] = e[0]
    for t in range(1, n):
        x[t] = phi * x[t - 1] + e[t]
    return x


# ----------------------------------------------------------- auto block length

def test_auto_block_length_iid_is_short():
    rng = np.random.default_rng(0)
    cbb = [auto_block_length(rng.standard_normal(1000))[0] for _ in range(100)]
    assert np.median(cbb) <= 5


def test_auto_block_length_ar1_exceeds_iid():
    rng = np.random.default_rng(1)
    iid_cbb, iid_sb, ar_cbb, ar_sb = [], [], [], []
    for _ in range(60):
        c, s = auto_block_length(rng.standard_normal(1000))
        iid_cbb.append(c)
        iid_sb.append(s)
        c, s = auto_block_length(ar1(0.9, 1000, rng))
        ar_cbb.append(c)
        ar_sb.append(s)
    assert np.median(ar_cbb) > np.median(iid_cbb)
    assert np.median(ar_sb) > np.median(iid_sb)


def test_auto_block_length_too_short():
    with pytest.raises(ValidationError):
        auto_block_length(np.arange(20.0))


# ------------------------------------------------------------------------ cbb

def test_cbb_full_block_is_rotation():
    idx = cbb_sample(10, 10, as_generator(0))
    assert sorted(idx.tolist()) == list(range(10))
    diffs = np.diff(idx) % 10
    assert np.all(diffs == 1)


def test_cbb_block_one_is_iid():
    idx = cbb_sample(50, 1, as_generator(1))
    assert len(idx) == 50
    assert idx.min() >= 0 and idx.max() < 50


def test_cbb_runs_are_consecutive_mod_n():
    rng = as_generator(2)
    n, L = 97, 7
    idx = cbb_sample(n, L, rng)
    assert len(idx) == n
    for start in range(0, n - L + 1, L):
        run = idx[start: start + L]
        assert np.all(np.diff(run) % n == 1)


def test_cbb_rejects_bad_block():
    with pytest.raises(ValidationError):
        cbb_sample(10, 0, as_generator(0))
    with pytest.raises(ValidationError):
        cbb_sample(10, 11, as_generator(0))


# ------------------------------------------------------------------------- sb

def test_sb_long_mean_yields_single_rotation_mostly():
    rng = as_generator(3)
    n = 60
    single = 0
    trials = 200
    for _ in range(trials):
        idx = sb_sample(n, 10.0 * n, rng)
        single += np.all(np.diff(idx) % n == 1)
    # oracle: geometric tail P(first block covers n) = (1 - 1/(10n))^(n-1)
    assert single / trials > 0.8


def test_sb_mean_one_is_iid():
    idx = sb_sample(40, 1.0, as_generator(4))
    assert len(idx) == 40
    lengths = _sb_block_lengths(40, 1.0, as_generator(5), 10_000)
    assert set(lengths) == {1}


def test_sb_block_length_law_of_large_numbers():
    rng = as_generator(6)
    lengths = []
    while len(lengths) < 10_000:
        lengths.extend(_sb_block_lengths(10_000, 20.0, rng, 10_000))
    mean = np.mean(lengths[:10_000])
    assert abs(mean - 20.0) / 20.0 < 0.05


def test_sb_rejects_bad_mean():
    with pytest.raises(ValidationError):
        sb_sample(10, 0.5, as_generator(0))


def test_cbb1_and_sb1_are_distributionally_identical():
    # both degenerate to iid resampling: frequencies uniform (chi-square GOF)
    n = 50
    draws = 10_000
    for sampler in (lambda r: cbb_sample(n, 1, r), lambda r: sb_sample(n, 1.0, r)):
        rng = as_generator(7)
        all_idx = np.concatenate([sampler(rng) for _ in range(draws // n)])
        counts = np.bincount(all_idx, minlength=n)
        p = stats.chisquare(counts).pvalue
        assert p > 0.01


# ------------------------------------------------------------------------ meb

def test_meb_preserves_rank_order():
    rng = as_generator(8)
    x = rng.standard_normal(60)
    rep = meb_sample(x, rng)
    assert np.array_equal(np.argsort(rep, kind="stable"),
                          np.argsort(x, kind="stable"))


def test_meb_monotone_input_gives_monotone_replicate():
    x = np.linspace(0.0, 5.0, 30)
    rep = meb_sample(x, as_generator(9))
    assert np.all(np.diff(rep) >= 0)


def test_meb_mean_preservation_monte_carlo():
    rng = as_generator(10)
    x = np.concatenate([np.linspace(-2, 2, 40), [8.0, -5.0]])
    means = np.array([meb_sample(x, rng).mean() for _ in range(1000)])
    se = means.std(ddof=1) / np.sqrt(len(means))
    assert abs(means.mean() - x.mean()) < 3 * se


def test_meb_constant_series_error():
    with pytest.raises(ValidationError):
        meb_sample(np.full(10, 2.0), as_generator(0))


# ------------------------------------------------------------------------ hcv

def _noise_frame(n, k, seed):
    rng = np.random.default_rng(seed)
    dates = np.datetime64("2001-01-01") + np.arange(n)
    return FeatureFrame(dates, rng.standard_normal((n, k)),
                        rng.standard_normal(n),
                        tuple(f"c{j}" for j in range(k)))


def test_hcv_select_h_white_noise_small():
    hs = [hcv_select_h(_noise_frame(400, 5, seed)) for seed in range(9)]
    assert np.median(hs) <= 5


def test_hcv_select_h_bounded():
    for seed in range(3):
        assert 1 <= hcv_select_h(_noise_frame(200, 3, seed)) <= 100


def test_hcv_folds_separation_invariant():
    for train, val in hcv_folds(100, 5, 4):
        assert len(val) > 0
        gap = np.min(np.abs(train[:, None] - val[None, :]))
        assert gap >= 6  # separation > h


def test_hcv_folds_train_size_bound():
    for train, val in hcv_folds(100, 5, 4):
        assert len(train) <= 100 - 25 - 10


def test_hcv_folds_h0_is_blocked_kfold():
    folds = hcv_folds(100, 0, 4)
    for train, val in folds:
        assert len(train) + len(val) == 100
        assert np.array_equal(np.sort(np.concatenate([train, val])),
                              np.arange(100))


def test_hcv_folds_infeasible_geometry():
    with pytest.raises(ValidationError):
        hcv_folds(50, 5, 5)


# ----------------------------------------------------------------- invariants

def test_bootstrap_samples_have_n_in_range_elements():
    rng = as_generator(11)
    for sampler in (lambda: cbb_sample(83, 9, rng),
                    lambda: sb_sample(83, 7.5, rng)):
        for _ in range(20):
            idx = sampler()
            assert len(idx) == 83
            assert idx.min() >= 0 and idx.max() < 83


def test_seeded_samplers_are_reproducible():
    a = cbb_sample(60, 6, as_generator(42))
    b = cbb_sample(60, 6, as_generator(42))
    assert np.array_equal(a, b)
    a = sb_sample(60, 4.0, as_generator(42))
    b = sb_sample(60, 4.0, as_generator(42))
    assert np.array_equal(a, b)
    x = np.random.default_rng(1).standard_normal(40)
    assert np.array_equal(meb_sample(x, as_generator(3)),
                          meb_sample(x, as_generator(3)))


def test_oob_indices():
    oob = oob_indices(10, np.array([0, 0, 3, 7]))
    assert oob.tolist() == [1, 2, 4, 5, 6, 8, 9]


def test_resample_method_validation():
    with pytest.raises(ValidationError):
        ResampleMethod("bogus")
    with pytest.raises(ValidationError):
        ResampleMethod("cbb", block_len=0)
    with pytest.raises(ValidationError):
        ResampleMethod("hcv", h=200)
