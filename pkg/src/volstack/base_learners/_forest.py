"""Random forest of CART trees: bagged rows, random feature subsets per split."""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_X_y, check_array, check_is_fitted

from ..errors import ValidationError
from ._tree import RegressionTree


class RandomForest(BaseEstimator, RegressorMixin):
    """Average of trees grown on i.i.d. row bootstraps.

    ``n_split_vars`` is the per-split random predictor count (the paper's
    N) and ``min_leaf`` the terminal-node occupancy floor (Obs).
    """

    def __init__(self, n_trees=500, n_split_vars=10, min_leaf=24,
                 max_depth=None, bootstrap=True, random_state=None):
        self.n_trees = n_trees
        self.n_split_vars = n_split_vars
        self.min_leaf = min_leaf
        self.max_depth = max_depth
        self.bootstrap = bootstrap
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        if self.n_trees < 1:
            raise ValidationError("need at least one tree")
        if not 1 <= self.n_split_vars <= X.shape[1]:
            raise ValidationError(
                f"n_split_vars={self.n_split_vars} exceeds the "
                f"{X.shape[1]} available predictors")
        seeds = np.random.SeedSequence(self.random_state).spawn(self.n_trees)
        self.trees_ = []
        n = len(y)
        for seq in seeds:
            rng = np.random.default_rng(seq)
            rows = rng.integers(0, n, size=n) if self.bootstrap \
                else np.arange(n)
            tree = RegressionTree(min_leaf=self.min_leaf,
                                  max_depth=self.max_depth,
                                  n_split_vars=self.n_split_vars)
            tree.fit(X[rows], y[rows], rng=rng)
            self.trees_.append(tree)
        self.n_features_in_ = X.shape[1]
        self.train_range_ = (float(y.min()), float(y.max()))
        return self

    def predict(self, X):
        check_is_fitted(self, "trees_")
        X = check_array(X)
        out = np.zeros(len(X))
        for tree in self.trees_:
            out += tree.predict(X)
        return out / len(self.trees_)
