"""Gradient boosting with depth-limited regression trees, squared-error loss."""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_X_y, check_array, check_is_fitted

from ..errors import NumericalError, ValidationError
from ._tree import RegressionTree


class GradientBoosting(BaseEstimator, RegressorMixin):
    """Stagewise residual fitting: stage 0 predicts mean(y), each later
    stage adds learning_rate times a shallow tree fit to the residuals."""

    def __init__(self, n_stages=1000, learning_rate=0.003, max_depth=3,
                 min_leaf=1, random_state=None):
        self.n_stages = n_stages
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        if self.n_stages < 1:
            raise ValidationError("need at least one boosting stage")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValidationError("learning rate must lie in (0, 1]")
        rng = np.random.default_rng(self.random_state)
        self.init_value_ = float(y.mean())
        residual = y - self.init_value_
        self.stages_ = []
        mse_path = [float((residual ** 2).mean())]
        for _ in range(self.n_stages):
            if not np.all(np.isfinite(residual)):
                raise NumericalError("non-finite residuals during boosting")
            tree = RegressionTree(min_leaf=self.min_leaf,
                                  max_depth=self.max_depth)
            tree.fit(X, residual, rng=rng)
            residual = residual - self.learning_rate * tree.predict(X)
            self.stages_.append(tree)
            mse_path.append(float((residual ** 2).mean()))
        self.train_mse_path_ = np.array(mse_path)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "stages_")
        X = check_array(X)
        out = np.full(len(X), self.init_value_)
        for tree in self.stages_:
            out += self.learning_rate * tree.predict(X)
        return out
