"""Independent reference computations used by the test suites.

Everything here is deliberately written against the mathematical
definitions (dense QP, quadrature, plain finite differences) and shares no
code path with the implementations under test.
"""

import numpy as np


def svr_dual_projected_gradient(K, y, epsilon, C, iters=1_000_000):
    """Brute-force solution of the epsilon-SVR dual box QP.

    Plain projected gradient on the doubled vector (alpha, alpha*); each
    step is projected exactly onto the box intersected with the coupling
    hyperplane sum(alpha) - sum(alpha*) = 0 (piecewise-linear breakpoint
    search).  Returns (dual objective, beta).
    """
    n = len(y)
    lr = 1.0 / (2.0 * np.linalg.eigvalsh(K).max() + 1e-9)
    a = np.zeros(n)
    s = np.zeros(n)

    def project(va, vs):
        bp = np.sort(np.concatenate([va - C, va, -vs, C - vs]))
        ga = np.clip(va[None, :] - bp[:, None], 0.0, C).sum(axis=1)
        gs = np.clip(vs[None, :] + bp[:, None], 0.0, C).sum(axis=1)
        g = ga - gs  # nonincreasing, crosses zero inside the breakpoint hull
        hi = int(np.searchsorted(-g, 0.0, side="left"))
        hi = min(max(hi, 1), len(bp) - 1)
        lo = hi - 1
        g0, g1 = g[lo], g[hi]
        lam = bp[lo] if g0 == g1 else bp[lo] + (bp[hi] - bp[lo]) * g0 / (g0 - g1)
        return np.clip(va - lam, 0.0, C), np.clip(vs + lam, 0.0, C)

    for _ in range(iters):
        u = K @ (a - s)
        a, s = project(a - lr * (u - y + epsilon), s - lr * (y - u + epsilon))
    beta = a - s
    obj = -0.5 * beta @ K @ beta + y @ beta - epsilon * (a.sum() + s.sum())
    return float(obj), beta


def finite_difference_gradient(fun, params, step=1e-5):
    """Central finite differences of a scalar function of a flat vector."""
    grad = np.empty_like(params)
    for i in range(len(params)):
        up = params.copy()
        dn = params.copy()
        up[i] += step
        dn[i] -= step
        grad[i] = (fun(up) - fun(dn)) / (2.0 * step)
    return grad


def student_t_tail_expectation(nu, alpha, scale, quad_points=200_000):
    """E[-X | X <= q] for the zero-mean scaled Student-t via trapezoid
    quadrature over the lower tail (independent of any closed form)."""
    from scipy import stats
    q = stats.t.ppf(1.0 - alpha, nu) * scale
    lo = stats.t.ppf(1e-12, nu) * scale
    x = np.linspace(lo, q, quad_points)
    pdf = stats.t.pdf(x / scale, nu) / scale
    mass = np.trapezoid(pdf, x)
    mean = np.trapezoid(x * pdf, x) / mass
    return -mean


def abs_moment_student_t_standardized(nu, quad_points=400_001):
    """E|eps| for the unit-variance standardized Student-t, by quadrature."""
    from scipy import stats
    scale = np.sqrt((nu - 2.0) / nu)
    hi = stats.t.ppf(1.0 - 1e-13, nu) * scale
    x = np.linspace(0.0, hi, quad_points)
    pdf = stats.t.pdf(x / scale, nu) / scale
    return 2.0 * np.trapezoid(x * pdf, x)
