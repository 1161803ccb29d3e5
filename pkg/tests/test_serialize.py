import numpy as np
import pytest

import test_pipeline as tp
from volstack.errors import ValidationError
from volstack.pipeline import train_benchmark, train_stacked
from volstack.serialize import load_model, save_model


@pytest.fixture(scope="module")
def dataset():
    return tp.synthetic_dataset()


@pytest.fixture(scope="module")
def train_frame(dataset):
    return dataset.frame.rows(np.arange(1000))


def test_stacked_round_trip(dataset, train_frame, tmp_path_factory):
    model, _ = train_stacked(dataset, train_frame, tp.SMALL_OUTCOMES, seed=21)
    path = tmp_path_factory.mktemp("m") / "stacked.json"
    save_model(model, path)
    back = load_model(path)
    probe = dataset.frame.rows(np.arange(1000, 1040))
    assert np.array_equal(model.predict_frame(probe),
                          back.predict_frame(probe))
    assert back.nu == model.nu
    assert back.stacker.n_features_in_ == 33


@pytest.mark.parametrize("tag", ["ann", "ann_garch", "ann_egarch"])
def test_benchmark_round_trip(dataset, train_frame, tmp_path_factory, tag):
    model, _ = train_benchmark(tag, dataset, train_frame, tp.SMALL_OUTCOMES,
                               seed=22)
    path = tmp_path_factory.mktemp("m") / f"{tag}.json"
    save_model(model, path)
    back = load_model(path)
    probe = dataset.frame.rows(np.arange(1000, 1040))
    assert np.array_equal(model.predict_frame(probe, dataset),
                          back.predict_frame(probe, dataset))


def test_heston_round_trip(dataset, train_frame, tmp_path_factory):
    model, _ = train_benchmark("heston", dataset, train_frame,
                               tp.SMALL_OUTCOMES, seed=23,
                               heston_paths=1200)
    path = tmp_path_factory.mktemp("m") / "heston.json"
    save_model(model, path)
    back = load_model(path)
    probe = dataset.frame.rows(np.arange(1000, 1005))
    assert np.array_equal(model.predict_frame(probe, dataset),
                          back.predict_frame(probe, dataset))


def test_artifact_header_is_checked(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"format": "something-else", "version": 1}')
    with pytest.raises(ValidationError):
        load_model(bad)
    wrong_version = tmp_path / "v.json"
    wrong_version.write_text('{"format": "volstack-model", "version": 99}')
    with pytest.raises(ValidationError):
        load_model(wrong_version)
