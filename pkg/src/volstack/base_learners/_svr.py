"""Epsilon-insensitive support vector regression, RBF kernel, SMO solver.

The dual is solved in the doubled variable vector (alpha, alpha*) with the
maximal-violating-pair rule: at each step the most KKT-violating
ascent/descent pair is updated analytically, keeping the equality
constraint exact.  Convergence means the violation gap m - M falls below
``tol``.
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_X_y, check_array, check_is_fitted

from ..errors import ConvergenceError, ValidationError


def rbf_kernel(A, B, gamma):
    """k(u, v) = exp(-gamma * ||u - v||^2), dense Gram matrix."""
    sq = (np.sum(A ** 2, axis=1)[:, None] + np.sum(B ** 2, axis=1)[None, :]
          - 2.0 * A @ B.T)
    return np.exp(-gamma * np.maximum(sq, 0.0))


class SupportVectorRegression(BaseEstimator, RegressorMixin):
    """SVR with the epsilon-insensitive loss and an RBF kernel.

    Predictors are expected pre-scaled (the Gram matrix is dense and the
    RBF width is not normalized).  ``C`` boxes the dual coefficients.
    """

    def __init__(self, gamma=1e-4, epsilon=0.1, C=1.0, tol=1e-3,
                 max_iter=100_000):
        self.gamma = gamma
        self.epsilon = epsilon
        self.C = C
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        if self.gamma <= 0 or self.epsilon < 0 or self.C <= 0:
            raise ValidationError("need gamma > 0, epsilon >= 0, C > 0")
        n = len(y)
        K = rbf_kernel(X, X, self.gamma)
        beta = np.zeros(n)          # alpha - alpha*
        lam_a = np.zeros(n)         # alpha
        lam_s = np.zeros(n)         # alpha*
        u = np.zeros(n)             # K @ beta
        C, eps = self.C, self.epsilon

        gap = np.inf
        for _ in range(self.max_iter):
            # violation scores -a_t * grad_t for the two halves
            score_a = y - u - eps     # alpha half (a = +1)
            score_s = y - u + eps     # alpha* half (a = -1)
            up_a = lam_a < C          # alpha can rise
            up_s = lam_s > 0          # alpha* can fall
            low_a = lam_a > 0         # alpha can fall
            low_s = lam_s < C         # alpha* can rise

            m_val, m_idx, m_star = -np.inf, -1, False
            if up_a.any():
                i = int(np.argmax(np.where(up_a, score_a, -np.inf)))
                m_val, m_idx = score_a[i], i
            if up_s.any():
                i = int(np.argmax(np.where(up_s, score_s, -np.inf)))
                if score_s[i] > m_val:
                    m_val, m_idx, m_star = score_s[i], i, True
            mm_val, mm_idx, mm_star = np.inf, -1, False
            if low_a.any():
                i = int(np.argmin(np.where(low_a, score_a, np.inf)))
                mm_val, mm_idx = score_a[i], i
            if low_s.any():
                i = int(np.argmin(np.where(low_s, score_s, np.inf)))
                if score_s[i] < mm_val:
                    mm_val, mm_idx, mm_star = score_s[i], i, True

            gap = m_val - mm_val
            if gap < self.tol:
                break

            bi, bj = m_idx, mm_idx
            h = K[bi, bi] + K[bj, bj] - 2.0 * K[bi, bj]
            step = gap / max(h, 1e-12)
            # box limits: the i side moves "up", the j side moves "down"
            lim_i = (lam_s[bi] if m_star else C - lam_a[bi])
            lim_j = (C - lam_s[bj] if mm_star else lam_a[bj])
            step = min(step, lim_i, lim_j)
            if step <= 0:
                break
            if m_star:
                lam_s[bi] -= step
            else:
                lam_a[bi] += step
            if mm_star:
                lam_s[bj] += step
            else:
                lam_a[bj] -= step
            beta[bi] += step
            beta[bj] -= step
            u += step * (K[:, bi] - K[:, bj])
        else:
            raise ConvergenceError(
                f"SMO did not converge within {self.max_iter} updates",
                gap=float(gap))

        self.bias_ = float(0.5 * (m_val + mm_val)) if np.isfinite(m_val) \
            and np.isfinite(mm_val) else float(np.median(y - u))
        self.dual_objective_ = float(
            -0.5 * beta @ u + y @ beta - eps * (lam_a.sum() + lam_s.sum()))
        self.kkt_gap_ = float(gap)
        sv = np.abs(beta) > 0
        self.support_vectors_ = X[sv]
        self.dual_coef_ = beta[sv]
        self.alpha_ = lam_a
        self.alpha_star_ = lam_s
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "bias_")
        X = check_array(X)
        if len(self.dual_coef_) == 0:
            return np.full(len(X), self.bias_)
        K = rbf_kernel(X, self.support_vectors_, self.gamma)
        return K @ self.dual_coef_ + self.bias_
