"""Independent reference computations used by the tests.

Nothing here imports the package's numerical kernels: disutilities are
re-evaluated from their defining formulas in extended precision, and
minimizers are found by grid search plus trisection.
"""
import numpy as np

from freqadmm.disutility import AsymmetricQuadratic, KinkedQuadratic, Quadratic

LD = np.longdouble


def f_ld(f, x):
    x = np.asarray(x, dtype=LD)
    if isinstance(f, Quadratic):
        return LD(0.5) * LD(f.q) * x * x
    if isinstance(f, KinkedQuadratic):
        q, eta = LD(f.q), LD(f.eta)
        const = -q * eta if f.raw else -2 * q * eta * eta
        return np.where(np.abs(x) <= eta, q * x * x, 3 * q * x * x + const)
    if isinstance(f, AsymmetricQuadratic):
        return np.where(x < 0, LD(0.5) * LD(f.q_minus) * x * x, LD(0.5) * LD(f.q_plus) * x * x)
    raise TypeError(f)


def grid_trisection_min(obj, a, b, grid=4001, iters=200):
    """Minimize a unimodal ``obj`` on ``[a, b]``: grid search then trisection."""
    xs = np.linspace(LD(a), LD(b), grid, dtype=LD)
    i = int(np.argmin(obj(xs)))
    lo, hi = xs[max(i - 1, 0)], xs[min(i + 1, grid - 1)]
    for _ in range(iters):
        m1 = lo + (hi - lo) / 3
        m2 = hi - (hi - lo) / 3
        if obj(m1) <= obj(m2):
            hi = m2
        else:
            lo = m1
    x = (lo + hi) / 2
    # the endpoints themselves may win when the minimum sits on the box edge
    cands = np.array([x, LD(a), LD(b)], dtype=LD)
    return float(cands[int(np.argmin(obj(cands)))])


def prox_oracle(f, a, b, y, rho, c, grid=4001):
    y, rho, c = LD(y), LD(rho), LD(c)
    return grid_trisection_min(lambda x: f_ld(f, x) + y * x + rho / 2 * (x - c) ** 2, a, b, grid)


def waterfill_projection(z, a, b, C, iters=100):
    """Euclidean projection of each row of ``z`` onto ``{a <= x <= b, sum(x) = C}``."""
    z = np.atleast_2d(z)
    lo = np.min(z - b, axis=1) - 1.0
    hi = np.max(z - a, axis=1) + 1.0
    for _ in range(iters):
        t = 0.5 * (lo + hi)
        over = np.clip(z - t[:, None], a, b).sum(axis=1) > C
        lo = np.where(over, t, lo)
        hi = np.where(over, hi, t)
    return np.clip(z - (0.5 * (lo + hi))[:, None], a, b)


def kkt_multiplier_interval(functions, x, a, b, subgradient_interval):
    """Intersection over loads of the prices ``y`` making ``x_i`` optimal.

    Load ``i`` is optimal for ``y`` iff ``-y`` lies in ``df_i(x_i) + N_[a_i,b_i](x_i)``.
    Returns ``(lo, hi)`` for ``y``; empty when ``lo > hi``.
    """
    lo, hi = -np.inf, np.inf
    for f, xi, ai, bi in zip(functions, x, a, b):
        g_lo, g_hi = subgradient_interval(f, xi)
        if xi <= ai:
            g_lo = -np.inf
        if xi >= bi:
            g_hi = np.inf
        # -y in [g_lo, g_hi]  <=>  y in [-g_hi, -g_lo]
        lo, hi = max(lo, -g_hi), min(hi, -g_lo)
    return lo, hi


def cvxpy_solve(functions, a, b, C):
    """Conic reformulation solved by an off-the-shelf solver."""
    import cvxpy as cp

    x = cp.Variable(len(functions))
    terms = []
    for i, f in enumerate(functions):
        if isinstance(f, Quadratic):
            terms.append(0.5 * f.q * cp.square(x[i]))
        elif isinstance(f, KinkedQuadratic):
            # q x^2 inside the kink, 3 q x^2 - 2 q eta^2 outside == their max
            terms.append(cp.maximum(f.q * cp.square(x[i]),
                                    3 * f.q * cp.square(x[i]) - 2 * f.q * f.eta**2))
        else:
            terms.append(0.5 * f.q_minus * cp.square(cp.neg(x[i]))
                         + 0.5 * f.q_plus * cp.square(cp.pos(x[i])))
    prob = cp.Problem(cp.Minimize(cp.sum(cp.hstack(terms))),
                      [x >= a, x <= b, cp.sum(x) == C])
    prob.solve(solver=cp.CLARABEL)
    return np.asarray(x.value, dtype=float), float(prob.value)
