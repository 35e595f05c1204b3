"""Per-agent update rules and the convergence certificates that go with them.

Three algorithms share one shape: each load holds a consumption change ``x``
and a price ``y`` and sees only its own estimate ``r_hat`` of the global
imbalance ``r = sum(x) - C``.

* DM-ADMM: ``y += rho*r_hat`` then a proximal step centred at ``x - r_hat``.
* PJ-ADMM: proximal-Jacobian variant with an extra ``tau/2 (x - x_prev)^2``
  term and a damped dual update applied after all primal updates.
* Dual ascent: ``y += gamma*r_hat`` then the plain best response. Smooth
  (quadratic) disutilities only.

Scalar functions operate on one :class:`AgentState`; :class:`LoadPopulation`
runs the same arithmetic vectorized over all loads, optionally split across
worker threads in contiguous chunks. Both paths produce identical floats.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .disutility import (
    Box,
    DisutilityFunction,
    PiecewiseQuadratic,
    Quadratic,
    strong_convexity_modulus,
)
from .errors import (
    AssumptionViolationError,
    NotStronglyConvexError,
    UnsupportedDisutilityError,
)
from .oracle import OracleSolution, ProblemInstance


@dataclass(frozen=True)
class AgentState:
    id: int
    x: float
    y: float
    box: Box
    f: DisutilityFunction


@dataclass(frozen=True)
class DMADMMParams:
    rho: float = 2.5e-3

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")


@dataclass(frozen=True)
class PJADMMParams:
    rho: float
    tau: float
    gamma: float = 0.5

    def __post_init__(self):
        if not self.rho > 0 or not self.tau > 0:
            raise ValueError("rho and tau must be positive")
        if not 0 < self.gamma < 2:
            raise ValueError(f"gamma must lie in (0, 2), got {self.gamma}")

    @classmethod
    def default(cls, rho: float, n: int) -> "PJADMMParams":
        """``tau = rho (n - 1)``, ``gamma = 0.5``."""
        return cls(rho=rho, tau=rho * max(n - 1, 1), gamma=0.5)


@dataclass(frozen=True)
class DualAscentParams:
    gamma: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")


@dataclass
class ConvergenceCertificate:
    xi: float
    rho_max: float
    lyapunov: list = field(default_factory=list)


def _value(r_hat) -> float:
    return float(getattr(r_hat, "value", r_hat))


def require_smooth(functions: Sequence[DisutilityFunction]) -> None:
    bad = [type(f).__name__ for f in functions if not isinstance(f, Quadratic)]
    if bad:
        raise UnsupportedDisutilityError(
            f"dual ascent needs continuously differentiable disutilities; got {sorted(set(bad))}"
        )


# -- scalar agent steps ---------------------------------------------------------

def dm_admm_step(agent: AgentState, r_hat, params: DMADMMParams) -> AgentState:
    r = _value(r_hat)
    pop = PiecewiseQuadratic([agent.f])
    x, y = dm_admm_update(pop, agent.box.a, agent.box.b,
                          np.array([agent.x]), np.array([agent.y]), np.array([r]), params.rho)
    return replace(agent, x=float(x[0]), y=float(y[0]))


def pj_admm_step(agent: AgentState, r_hat, params: PJADMMParams) -> AgentState:
    """Primal half of a PJ-ADMM iteration; the dual stays untouched.

    The caller applies :func:`pj_dual_update` once every agent has moved and
    the post-update residual is known.
    """
    r = _value(r_hat)
    pop = PiecewiseQuadratic([agent.f])
    x = pj_admm_primal(pop, agent.box.a, agent.box.b, np.array([agent.x]),
                       np.array([agent.y]), np.array([r]), params)
    return replace(agent, x=float(x[0]))


def pj_dual_update(agent: AgentState, r_hat_post, params: PJADMMParams) -> AgentState:
    return replace(agent, y=agent.y + params.gamma * params.rho * _value(r_hat_post))


def dual_ascent_step(agent: AgentState, r_hat, params: DualAscentParams) -> AgentState:
    require_smooth([agent.f])
    pop = PiecewiseQuadratic([agent.f])
    x, y = dual_ascent_update(pop, agent.box.a, agent.box.b, np.array([agent.y]),
                              np.array([_value(r_hat)]), params.gamma)
    return replace(agent, x=float(x[0]), y=float(y[0]))


# -- vectorized kernels -----------------------------------------------------------

def dm_admm_update(pop: PiecewiseQuadratic, a, b, x, y, r_hat, rho):
    y_new = y + rho * r_hat
    x_new = pop.prox(y_new, rho, x - r_hat, a, b)
    return x_new, y_new


def pj_admm_primal(pop: PiecewiseQuadratic, a, b, x, y, r_hat, params: PJADMMParams):
    # rho/2 (x - c)^2 + tau/2 (x - x_prev)^2 == (rho+tau)/2 (x - centre)^2 + const
    c = x - r_hat
    weight = params.rho + params.tau
    centre = (params.rho * c + params.tau * x) / weight
    return pop.prox(y, weight, centre, a, b)


def dual_ascent_update(pop: PiecewiseQuadratic, a, b, y, r_hat, gamma):
    y_new = y + gamma * r_hat
    return pop.best_response(y_new, a, b), y_new


class LoadPopulation:
    """All loads' models and bounds, with optional chunked parallel updates.

    Parameters
    ----------
    functions : sequence of DisutilityFunction
    boxes : sequence of Box
    workers : int
        Number of threads; agents are split into that many contiguous
        chunks. Per-agent arithmetic is elementwise, so the result does not
        depend on ``workers``.
    """

    def __init__(self, functions, boxes, workers: int = 1):
        self.functions = tuple(functions)
        self.boxes = tuple(boxes)
        self.pop = PiecewiseQuadratic(self.functions)
        self.a = np.array([bx.a for bx in self.boxes], dtype=float)
        self.b = np.array([bx.b for bx in self.boxes], dtype=float)
        self.workers = max(1, int(workers))
        self._chunks = [
            (sl, self.pop.take(sl))
            for sl in (slice(int(s[0]), int(s[-1]) + 1)
                       for s in np.array_split(np.arange(len(self.functions)), self.workers)
                       if len(s))
        ]

    @property
    def n(self) -> int:
        return len(self.functions)

    def _map(self, kernel, *arrays):
        """Run ``kernel(pop_chunk, a, b, *arrays_chunk)`` over the chunks and stitch."""
        if self.workers == 1:
            return kernel(self.pop, self.a, self.b, *arrays)

        def job(item):
            sl, sub = item
            return kernel(sub, self.a[sl], self.b[sl], *(arr[sl] for arr in arrays))

        with ThreadPoolExecutor(max_workers=self.workers) as ex:
            parts = list(ex.map(job, self._chunks))
        if isinstance(parts[0], tuple):
            return tuple(np.concatenate(p) for p in zip(*parts))
        return np.concatenate(parts)

    def dm_admm(self, x, y, r_hat, rho):
        return self._map(lambda p, a, b, x_, y_, r_: dm_admm_update(p, a, b, x_, y_, r_, rho),
                         x, y, r_hat)

    def pj_admm_primal(self, x, y, r_hat, params: PJADMMParams):
        return self._map(lambda p, a, b, x_, y_, r_: pj_admm_primal(p, a, b, x_, y_, r_, params),
                         x, y, r_hat)

    def dual_ascent(self, y, r_hat, gamma):
        return self._map(lambda p, a, b, y_, r_: dual_ascent_update(p, a, b, y_, r_, gamma),
                         y, r_hat)

    def objective(self, x) -> float:
        return float(self.pop.evaluate(x).sum())


# -- step-size bound and certificates ---------------------------------------------

def step_size_bound(xi: float, n: int) -> float:
    """Largest penalty for which the Lyapunov decrease is guaranteed.

    ``xi / (2 (n - 1))``; infinite for a single load.
    """
    if n <= 1:
        return math.inf
    return xi / (2.0 * (n - 1))


def strong_convexity_xi(p: ProblemInstance) -> float:
    """Constant ``xi`` with ``L(x*) <= L(x) - xi ||x - x*||^2`` for the Lagrangian.

    For a separable sum whose terms have moduli ``m_i`` this is
    ``min(m_i) / 2``.
    """
    moduli = [strong_convexity_modulus(f) for f in p.functions]
    if min(moduli) <= 0:
        raise NotStronglyConvexError("total disutility is not strongly convex")
    return 0.5 * min(moduli)


def common_dual(ys, atol: float = 1e-12) -> float:
    ys = np.asarray(ys, dtype=float)
    spread = float(ys.max() - ys.min()) if ys.size else 0.0
    if spread > atol:
        raise AssumptionViolationError(f"agents' duals differ by {spread:.3e}")
    return float(ys[0])


def lyapunov_from_arrays(x, y_ahead: float, sol: OracleSolution, rho: float, xi: float) -> float:
    dx = np.asarray(x, dtype=float) - sol.x_star
    return (y_ahead - sol.y_star) ** 2 / rho + (rho + xi) * float(dx @ dx)


def lyapunov_value(agents: Sequence[AgentState], sol: OracleSolution, rho: float, xi: float) -> float:
    """``(y - y*)^2 / rho + (rho + xi) ||x - x*||^2``.

    Each agent's ``y`` must already be one dual update ahead of its ``x``
    (the price ``y^{k+1}`` paired with ``x^k``), and all agents must share it.
    """
    y = common_dual([ag.y for ag in agents])
    return lyapunov_from_arrays([ag.x for ag in agents], y, sol, rho, xi)


def prop1_slack(pop: PiecewiseQuadratic, x_prev, x_next, y_next2: float,
                r_prev: float, r_next: float, rho: float, sol: OracleSolution) -> float:
    """Right-hand minus left-hand side of the per-iteration objective bound.

    With ``p = sum f(x_next)``::

        p - p* <= -y_next2 r_next - rho (r_prev - r_next) r_next
                  - rho sum (x_prev - x_next)(x* - x_next)

    Non-negative whenever ``x_next`` came from a noiseless DM-ADMM step.
    """
    p_next = float(pop.evaluate(x_next).sum())
    rhs = (-y_next2 * r_next - rho * (r_prev - r_next) * r_next
           - rho * float(np.dot(x_prev - x_next, sol.x_star - x_next)))
    return rhs - (p_next - sol.p_star)
