"""Feed-forward net with two sigmoid hidden layers and a linear output,
trained full-batch by ADAM on an RMSE + L2 objective.

Serves both as the second-level stacker and as the benchmark net core.
The exact gradient is exposed so tests can difference it against the
objective.
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_X_y, check_array, check_is_fitted

from .errors import NumericalError, ValidationError

RMSE_GUARD = 1e-12  # keeps the RMSE gradient finite at zero residual


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class FeedForwardNet(BaseEstimator, RegressorMixin):
    """Sigmoid-sigmoid-linear regressor (hidden sizes 20 and 10 by default).

    ``l2`` penalizes squared weights only (biases are free); the loss is
    sqrt(MSE + guard) + l2 * sum(W^2).  Batch size is always the full
    training set and the epoch count is fixed up front: no early stopping.
    ``hidden_activation="identity"`` swaps the sigmoids for identity maps
    (used to exercise the optimizer on a convex-like problem).
    """

    def __init__(self, hidden=(20, 10), learning_rate=0.01, l2=0.0,
                 epochs=10_000, beta1=0.9, beta2=0.999, adam_epsilon=1e-8,
                 hidden_activation="sigmoid", random_state=None):
        self.hidden = hidden
        self.learning_rate = learning_rate
        self.l2 = l2
        self.epochs = epochs
        self.beta1 = beta1
        self.beta2 = beta2
        self.adam_epsilon = adam_epsilon
        self.hidden_activation = hidden_activation
        self.random_state = random_state

    # ------------------------------------------------------------- topology

    def initialize(self, input_dim):
        """Glorot-uniform weights, zero biases, reproducible per seed."""
        if input_dim < 1:
            raise ValidationError("input dimension must be >= 1")
        if self.hidden_activation not in ("sigmoid", "identity"):
            raise ValidationError("hidden_activation must be sigmoid/identity")
        rng = np.random.default_rng(self.random_state)
        sizes = (input_dim,) + tuple(self.hidden) + (1,)
        self.weights_ = []
        self.biases_ = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            self.weights_.append(rng.uniform(-bound, bound,
                                             size=(fan_in, fan_out)))
            self.biases_.append(np.zeros(fan_out))
        self.n_features_in_ = input_dim
        return self

    def _act(self, z):
        return _sigmoid(z) if self.hidden_activation == "sigmoid" else z

    def _act_deriv(self, activated):
        if self.hidden_activation == "sigmoid":
            return activated * (1.0 - activated)
        return np.ones_like(activated)

    def _forward(self, X):
        activations = [X]
        for W, b in zip(self.weights_[:-1], self.biases_[:-1]):
            activations.append(self._act(activations[-1] @ W + b))
        out = activations[-1] @ self.weights_[-1] + self.biases_[-1]
        return activations, out[:, 0]

    def predict(self, X):
        check_is_fitted(self, "weights_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValidationError(
                f"expected {self.n_features_in_} inputs, got {X.shape[1]}")
        return self._forward(X)[1]

    # ------------------------------------------------------------- objective

    def loss(self, X, y):
        """RMSE (guarded) plus the L2 weight penalty at the current params."""
        with np.errstate(over="ignore", invalid="ignore"):
            _, pred = self._forward(np.asarray(X, dtype=float))
            rmse = np.sqrt(np.mean((pred - np.asarray(y)) ** 2) + RMSE_GUARD)
            return float(rmse + self.l2 * sum(float((W ** 2).sum())
                                              for W in self.weights_))

    def gradient(self, X, y):
        """Exact backprop gradient of :meth:`loss`, parameter-shaped
        (list of (dW, db) pairs, one per layer)."""
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValidationError(
                f"expected {self.n_features_in_} inputs, got {X.shape[1]}")
        with np.errstate(over="ignore", invalid="ignore"):
            activations, pred = self._forward(X)
            n = len(y)
            residual = pred - y
            rmse = np.sqrt(np.mean(residual ** 2) + RMSE_GUARD)
            delta = (residual / (n * rmse))[:, None]
            grads = []
            for layer in range(len(self.weights_) - 1, -1, -1):
                inputs = activations[layer]
                dW = inputs.T @ delta + 2.0 * self.l2 * self.weights_[layer]
                db = delta.sum(axis=0)
                if layer > 0:
                    delta = (delta @ self.weights_[layer].T) \
                        * self._act_deriv(activations[layer])
                grads.append((dW, db))
        return grads[::-1]

    # -------------------------------------------------------------- training

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        if self.epochs < 1 or self.learning_rate <= 0 or self.l2 < 0:
            raise ValidationError("need epochs >= 1, learning_rate > 0, l2 >= 0")
        self.initialize(X.shape[1])
        m_w = [np.zeros_like(W) for W in self.weights_]
        v_w = [np.zeros_like(W) for W in self.weights_]
        m_b = [np.zeros_like(b) for b in self.biases_]
        v_b = [np.zeros_like(b) for b in self.biases_]
        trace = np.empty(self.epochs + 1)
        b1, b2, eps = self.beta1, self.beta2, self.adam_epsilon
        for epoch in range(self.epochs):
            grads = self.gradient(X, y)
            trace[epoch] = self.loss(X, y)
            if not np.isfinite(trace[epoch]):
                raise NumericalError(
                    f"training diverged at epoch {epoch}: non-finite loss")
            t = epoch + 1
            c1 = 1.0 - b1 ** t
            c2 = 1.0 - b2 ** t
            for k, (dW, db) in enumerate(grads):
                m_w[k] = b1 * m_w[k] + (1 - b1) * dW
                v_w[k] = b2 * v_w[k] + (1 - b2) * dW ** 2
                self.weights_[k] -= self.learning_rate * (m_w[k] / c1) \
                    / (np.sqrt(v_w[k] / c2) + eps)
                m_b[k] = b1 * m_b[k] + (1 - b1) * db
                v_b[k] = b2 * v_b[k] + (1 - b2) * db ** 2
                self.biases_[k] -= self.learning_rate * (m_b[k] / c1) \
                    / (np.sqrt(v_b[k] / c2) + eps)
        trace[-1] = self.loss(X, y)
        if not np.isfinite(trace[-1]):
            raise NumericalError(
                f"training diverged at epoch {self.epochs}: non-finite loss")
        self.loss_trace_ = trace
        return self

    # ----------------------------------------------------- parameter vector

    def parameter_vector(self):
        """All parameters flattened (weights then bias per layer)."""
        check_is_fitted(self, "weights_")
        parts = []
        for W, b in zip(self.weights_, self.biases_):
            parts.append(W.ravel())
            parts.append(b)
        return np.concatenate(parts)

    def set_parameter_vector(self, vec):
        vec = np.asarray(vec, dtype=float)
        offset = 0
        for k, W in enumerate(self.weights_):
            self.weights_[k] = vec[offset: offset + W.size].reshape(W.shape)
            offset += W.size
            b = self.biases_[k]
            self.biases_[k] = vec[offset: offset + b.size].copy()
            offset += b.size
        if offset != len(vec):
            raise ValidationError("parameter vector has the wrong length")
        return self


def write_loss_trace(net, path):
    """Export the per-epoch loss trace as ``epoch,loss`` CSV."""
    check_is_fitted(net, "loss_trace_")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,loss\n")
        for epoch, loss in enumerate(net.loss_trace_):
            fh.write(f"{epoch},{loss:.12g}\n")
