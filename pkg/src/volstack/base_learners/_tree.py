"""CART regression tree with greedy variance-reduction splits."""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_X_y, check_array, check_is_fitted

from ..errors import ValidationError

_NO_FEATURE = -1


class RegressionTree(BaseEstimator, RegressorMixin):
    """Greedy least-squares regression tree.

    Splits maximize the reduction in summed squared error; leaves predict
    the mean of their rows and always keep at least ``min_leaf`` of them.
    When ``n_split_vars`` is set, every split considers a fresh uniform
    random subset of that many predictors (the random-forest device).
    Ties break toward the lowest feature index, then the lowest threshold,
    so rebuilds are deterministic.
    """

    def __init__(self, min_leaf=1, max_depth=None, n_split_vars=None,
                 random_state=None):
        self.min_leaf = min_leaf
        self.max_depth = max_depth
        self.n_split_vars = n_split_vars
        self.random_state = random_state

    def fit(self, X, y, rng=None):
        X, y = check_X_y(X, y, y_numeric=True)
        if self.min_leaf < 1:
            raise ValidationError("min_leaf must be >= 1")
        if len(y) < 2 * self.min_leaf:
            raise ValidationError(
                f"need >= {2 * self.min_leaf} rows to honor min_leaf="
                f"{self.min_leaf}, got {len(y)}")
        if self.n_split_vars is not None and not (
                1 <= self.n_split_vars <= X.shape[1]):
            raise ValidationError("n_split_vars must be in [1, n_features]")
        if rng is None:
            rng = np.random.default_rng(self.random_state)

        feature, threshold, left, right, value, count = [], [], [], [], [], []

        def new_node():
            feature.append(_NO_FEATURE)
            threshold.append(np.nan)
            left.append(-1)
            right.append(-1)
            value.append(0.0)
            count.append(0)
            return len(feature) - 1

        stack = [(new_node(), np.arange(len(y)), 0)]
        while stack:
            node, rows, depth = stack.pop()
            target = y[rows]
            value[node] = float(target.mean())
            count[node] = len(rows)
            if (len(rows) < 2 * self.min_leaf
                    or (self.max_depth is not None and depth >= self.max_depth)
                    or np.ptp(target) == 0.0):
                continue
            split = self._best_split(X, y, rows, rng)
            if split is None:
                continue
            j, thr = split
            feature[node] = j
            threshold[node] = thr
            go_left = X[rows, j] <= thr
            left[node] = new_node()
            right[node] = new_node()
            stack.append((left[node], rows[go_left], depth + 1))
            stack.append((right[node], rows[~go_left], depth + 1))

        self.feature_ = np.array(feature, dtype=np.intp)
        self.threshold_ = np.array(threshold)
        self.left_ = np.array(left, dtype=np.intp)
        self.right_ = np.array(right, dtype=np.intp)
        self.value_ = np.array(value)
        self.count_ = np.array(count, dtype=np.intp)
        self.n_features_in_ = X.shape[1]
        return self

    def _best_split(self, X, y, rows, rng):
        n = len(rows)
        if self.n_split_vars is not None and self.n_split_vars < X.shape[1]:
            candidates = np.sort(rng.choice(X.shape[1], size=self.n_split_vars,
                                            replace=False))
        else:
            candidates = np.arange(X.shape[1])
        best = None
        best_gain = 0.0
        target = y[rows]
        total = target.sum()
        sse_parent = float(((target - target.mean()) ** 2).sum())
        for j in candidates:
            order = np.argsort(X[rows, j], kind="stable")
            xs = X[rows[order], j]
            ys = target[order]
            csum = np.cumsum(ys)
            csum2 = np.cumsum(ys ** 2)
            k = np.arange(1, n)
            valid = (xs[:-1] < xs[1:]) & (k >= self.min_leaf) \
                & (n - k >= self.min_leaf)
            if not valid.any():
                continue
            left_sse = csum2[:-1] - csum[:-1] ** 2 / k
            right_sum = total - csum[:-1]
            right_sse = (csum2[-1] - csum2[:-1]) - right_sum ** 2 / (n - k)
            gain = np.where(valid, sse_parent - left_sse - right_sse, -np.inf)
            pos = int(np.argmax(gain))
            if gain[pos] > best_gain + 1e-12 * max(1.0, sse_parent):
                best_gain = gain[pos]
                best = (int(j), 0.5 * (xs[pos] + xs[pos + 1]))
        return best

    def predict(self, X):
        check_is_fitted(self, "feature_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValidationError(
                f"expected {self.n_features_in_} features, got {X.shape[1]}")
        node = np.zeros(len(X), dtype=np.intp)
        while True:
            internal = self.feature_[node] != _NO_FEATURE
            if not internal.any():
                break
            rows = np.flatnonzero(internal)
            cur = node[rows]
            go_left = X[rows, self.feature_[cur]] <= self.threshold_[cur]
            node[rows] = np.where(go_left, self.left_[cur], self.right_[cur])
        return self.value_[node]

    def leaf_counts(self):
        """Training rows assigned to each leaf (for the min_leaf invariant)."""
        check_is_fitted(self, "feature_")
        leaves = self.feature_ == _NO_FEATURE
        return self.count_[leaves]
