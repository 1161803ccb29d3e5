"""Versioned JSON artifacts for trained models.

Every trained object round-trips through a self-describing payload
(``kind`` plus constructor params plus fitted state); floats survive
exactly because JSON emits shortest-round-trip representations.
"""

import json

import numpy as np

from . import pipeline
from .ann import FeedForwardNet
from .base_learners import (
    GradientBoosting,
    RandomForest,
    RegressionTree,
    SupportVectorRegression,
)
from .errors import ValidationError
from .garch import StudentTEgarch, StudentTGarch
from .heston import HestonModel
from .market_data import RangeScaler

FORMAT = "volstack-model"
VERSION = 1


def _arr(a):
    a = np.asarray(a)
    return {"shape": list(a.shape), "dtype": str(a.dtype),
            "data": a.ravel().tolist()}


def _unarr(d):
    return np.asarray(d["data"], dtype=d["dtype"]).reshape(d["shape"])


def _encode_tree(tree):
    return {"kind": "tree", "params": tree.get_params(),
            "state": {k: _arr(getattr(tree, k + "_"))
                      for k in ("feature", "threshold", "left", "right",
                                "value", "count")}
            | {"n_features_in": tree.n_features_in_}}


def _decode_tree(payload):
    tree = RegressionTree(**payload["params"])
    for k in ("feature", "threshold", "left", "right", "value", "count"):
        setattr(tree, k + "_", _unarr(payload["state"][k]))
    tree.n_features_in_ = payload["state"]["n_features_in"]
    return tree


def _encode_scaler(s):
    return {"kind": "scaler", "params": s.get_params(),
            "state": {"min": _arr(s.min_), "max": _arr(s.max_),
                      "mask": _arr(s.scale_mask_),
                      "columns": list(s.columns_)}}


def _decode_scaler(payload):
    s = RangeScaler(**payload["params"])
    s.min_ = _unarr(payload["state"]["min"])
    s.max_ = _unarr(payload["state"]["max"])
    s.scale_mask_ = _unarr(payload["state"]["mask"]).astype(bool)
    s.columns_ = tuple(payload["state"]["columns"])
    return s


def encode(obj):
    """Recursive payload for any trained toolkit object."""
    if obj is None:
        return None
    if isinstance(obj, RegressionTree):
        return _encode_tree(obj)
    if isinstance(obj, RangeScaler):
        return _encode_scaler(obj)
    if isinstance(obj, RandomForest):
        return {"kind": "random_forest", "params": obj.get_params(),
                "state": {"trees": [_encode_tree(t) for t in obj.trees_],
                          "n_features_in": obj.n_features_in_,
                          "train_range": list(obj.train_range_)}}
    if isinstance(obj, GradientBoosting):
        return {"kind": "gradient_boosting", "params": obj.get_params(),
                "state": {"init_value": obj.init_value_,
                          "stages": [_encode_tree(t) for t in obj.stages_],
                          "n_features_in": obj.n_features_in_}}
    if isinstance(obj, SupportVectorRegression):
        return {"kind": "svr", "params": obj.get_params(),
                "state": {"bias": obj.bias_,
                          "dual_coef": _arr(obj.dual_coef_),
                          "support_vectors": _arr(obj.support_vectors_),
                          "dual_objective": obj.dual_objective_,
                          "kkt_gap": obj.kkt_gap_,
                          "n_features_in": obj.n_features_in_}}
    if isinstance(obj, pipeline.TargetRangeRegressor):
        return {"kind": "target_range", "inner": encode(obj.inner),
                "state": {"y_min": obj.y_min_, "y_max": obj.y_max_}}
    if isinstance(obj, FeedForwardNet):
        return {"kind": "ann", "params": obj.get_params(),
                "state": {"weights": [_arr(w) for w in obj.weights_],
                          "biases": [_arr(b) for b in obj.biases_],
                          "n_features_in": obj.n_features_in_}}
    if isinstance(obj, StudentTGarch):
        return {"kind": "garch", "params": obj.get_params(),
                "state": {k: getattr(obj, k + "_") for k in
                          ("omega", "alpha", "beta", "nu", "loglik",
                           "s2_init", "n_obs")}}
    if isinstance(obj, StudentTEgarch):
        return {"kind": "egarch", "params": obj.get_params(),
                "state": {k: getattr(obj, k + "_") for k in
                          ("omega", "alpha", "beta", "gamma", "nu",
                           "abs_moment", "loglik", "logs2_init", "n_obs")}}
    if isinstance(obj, HestonModel):
        return {"kind": "heston_core", "params": obj.get_params(),
                "state": {k: getattr(obj, k + "_") for k in
                          ("mu", "theta", "upsilon", "delta", "rho", "v0")}}
    if isinstance(obj, pipeline.StackedModel):
        return {"kind": "stacked",
                "parts": {"rf": encode(obj.rf), "gb": encode(obj.gb),
                          "svr": encode(obj.svr),
                          "stacker": encode(obj.stacker),
                          "lag_scaler": encode(obj.lag_scaler),
                          "feed_scaler": encode(obj.feed_scaler)},
                "state": {"n_lags": obj.n_lags, "nu": obj.nu}}
    if isinstance(obj, pipeline.BenchmarkAnn):
        return {"kind": "benchmark_ann", "tag": obj.tag,
                "parts": {"net": encode(obj.net),
                          "lag_scaler": encode(obj.lag_scaler),
                          "comp_scaler": encode(obj.comp_scaler),
                          "garch": encode(obj.garch)},
                "state": {"nu": obj.nu}}
    if isinstance(obj, pipeline.HestonBenchmark):
        return {"kind": "heston", "parts": {"model": encode(obj.model)},
                "state": {"n_paths": obj.n_paths, "seed": obj.seed}}
    raise ValidationError(f"cannot serialize {type(obj).__name__}")


def decode(payload):
    if payload is None:
        return None
    kind = payload["kind"]
    if kind == "tree":
        return _decode_tree(payload)
    if kind == "scaler":
        return _decode_scaler(payload)
    if kind == "random_forest":
        model = RandomForest(**payload["params"])
        model.trees_ = [_decode_tree(t) for t in payload["state"]["trees"]]
        model.n_features_in_ = payload["state"]["n_features_in"]
        model.train_range_ = tuple(payload["state"]["train_range"])
        return model
    if kind == "gradient_boosting":
        model = GradientBoosting(**payload["params"])
        model.init_value_ = payload["state"]["init_value"]
        model.stages_ = [_decode_tree(t) for t in payload["state"]["stages"]]
        model.n_features_in_ = payload["state"]["n_features_in"]
        return model
    if kind == "svr":
        model = SupportVectorRegression(**payload["params"])
        st = payload["state"]
        model.bias_ = st["bias"]
        model.dual_coef_ = _unarr(st["dual_coef"])
        model.support_vectors_ = _unarr(st["support_vectors"])
        model.dual_objective_ = st["dual_objective"]
        model.kkt_gap_ = st["kkt_gap"]
        model.n_features_in_ = st["n_features_in"]
        return model
    if kind == "target_range":
        model = pipeline.TargetRangeRegressor(decode(payload["inner"]))
        model.y_min_ = payload["state"]["y_min"]
        model.y_max_ = payload["state"]["y_max"]
        return model
    if kind == "ann":
        model = FeedForwardNet(**_tupled(payload["params"], "hidden"))
        st = payload["state"]
        model.weights_ = [_unarr(w) for w in st["weights"]]
        model.biases_ = [_unarr(b) for b in st["biases"]]
        model.n_features_in_ = st["n_features_in"]
        return model
    if kind in ("garch", "egarch"):
        cls = StudentTGarch if kind == "garch" else StudentTEgarch
        model = cls(**payload["params"])
        for k, v in payload["state"].items():
            setattr(model, k + "_", v)
        return model
    if kind == "heston_core":
        model = HestonModel(**payload["params"])
        for k, v in payload["state"].items():
            setattr(model, k + "_", v)
        return model
    if kind == "stacked":
        parts = {k: decode(v) for k, v in payload["parts"].items()}
        return pipeline.StackedModel(n_lags=payload["state"]["n_lags"],
                                     nu=payload["state"]["nu"], **parts)
    if kind == "benchmark_ann":
        parts = {k: decode(v) for k, v in payload["parts"].items()}
        return pipeline.BenchmarkAnn(tag=payload["tag"],
                                     nu=payload["state"]["nu"], **parts)
    if kind == "heston":
        return pipeline.HestonBenchmark(
            model=decode(payload["parts"]["model"]),
            n_paths=payload["state"]["n_paths"],
            seed=payload["state"]["seed"])
    raise ValidationError(f"unknown artifact kind {kind!r}")


def _tupled(params, *names):
    out = dict(params)
    for n in names:
        if n in out and isinstance(out[n], list):
            out[n] = tuple(out[n])
    return out


def save_model(model, path):
    payload = {"format": FORMAT, "version": VERSION, "model": encode(model)}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_model(path):
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != FORMAT:
        raise ValidationError(f"{path} is not a {FORMAT} artifact")
    if payload.get("version") != VERSION:
        raise ValidationError(
            f"artifact version {payload.get('version')} unsupported")
    return decode(payload["model"])
