"""Centralized ground truth for the load-control problem.

Minimize ``sum_i f_i(x_i)`` subject to ``a_i <= x_i <= b_i`` and
``sum_i x_i = C``. The problem has a single coupling constraint, so the
optimum is found by bisection on its multiplier: each load's best response
to a price ``y`` is non-increasing in ``y``, and so is their sum.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .disutility import Box, DisutilityFunction, PiecewiseQuadratic
from .errors import InfeasibleError, NotStronglyConvexError, SolverError


@dataclass(frozen=True)
class ProblemInstance:
    functions: tuple
    boxes: tuple
    C: float

    def __post_init__(self):
        object.__setattr__(self, "functions", tuple(self.functions))
        object.__setattr__(self, "boxes", tuple(self.boxes))
        if len(self.functions) < 1:
            raise ValueError("need at least one load")
        if len(self.functions) != len(self.boxes):
            raise ValueError("functions and boxes differ in length")

    @property
    def n(self) -> int:
        return len(self.functions)

    @property
    def lower(self) -> np.ndarray:
        return np.array([bx.a for bx in self.boxes], dtype=float)

    @property
    def upper(self) -> np.ndarray:
        return np.array([bx.b for bx in self.boxes], dtype=float)

    def population(self) -> PiecewiseQuadratic:
        return PiecewiseQuadratic(self.functions)

    def check_feasible(self) -> None:
        lo, hi = self.lower.sum(), self.upper.sum()
        if not lo <= self.C <= hi:
            raise InfeasibleError(f"C={self.C} outside [{lo}, {hi}]")


@dataclass(frozen=True)
class OracleSolution:
    x_star: np.ndarray
    y_star: float
    p_star: float

    def to_dict(self) -> dict:
        return {"x_star": [float(v) for v in self.x_star],
                "y_star": float(self.y_star),
                "p_star": float(self.p_star)}


def best_response(f: DisutilityFunction, box: Box, y: float) -> float:
    """Argmin over ``box`` of ``f(x) + y x``."""
    pop = PiecewiseQuadratic([f])
    if pop.strong_convexity_modulus()[0] <= 0:
        raise NotStronglyConvexError("best response needs a strongly convex disutility")
    return float(pop.best_response(np.array([y]), box.a, box.b)[0])


def _bisect_edge(phi, lo: float, hi: float, go_right, max_iter: int = 400) -> tuple[float, float]:
    # shrink [lo, hi] keeping go_right(phi(lo)) true and go_right(phi(hi)) false
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if go_right(phi(mid)):
            lo = mid
        else:
            hi = mid
    return lo, hi


def solve(p: ProblemInstance, tol: float = 1e-9, max_doublings: int = 60) -> OracleSolution:
    """Solve the load-control problem exactly up to ``tol`` MW of imbalance.

    Both edges of the optimal multiplier set ``{y : phi(y) = 0}`` are
    located to machine precision and the midpoint is returned, so flat
    stretches of ``phi`` resolve deterministically.

    Raises
    ------
    InfeasibleError
        If ``C`` lies outside ``[sum(a), sum(b)]``.
    SolverError
        If no sign change is bracketed, or the final imbalance exceeds ``tol``.
    """
    p.check_feasible()
    pop = p.population()
    if np.any(pop.strong_convexity_modulus() <= 0):
        raise NotStronglyConvexError("oracle needs strongly convex disutilities")
    a, b = p.lower, p.upper

    def phi(y):
        return float(pop.best_response(np.full(p.n, y), a, b).sum() - p.C)

    g_a = np.abs(np.concatenate(pop.subgradient_interval(a)))
    g_b = np.abs(np.concatenate(pop.subgradient_interval(b)))
    G = float(max(g_a.max(), g_b.max())) + 1.0
    for _ in range(max_doublings):
        if phi(-G) >= 0 and phi(G) <= 0:
            break
        G *= 2.0
    else:
        raise SolverError("could not bracket the optimal multiplier")

    # left edge: sup{y : phi(y) > 0}; right edge: inf{y : phi(y) < 0}.
    # phi(-G) == 0 means every load sits at its upper bound for all lower
    # prices, so that side of the optimal set is unbounded; use the finite edge.
    y_left = _bisect_edge(phi, -G, G, lambda v: v > 0)[1] if phi(-G) > 0 else None
    y_right = _bisect_edge(phi, -G, G, lambda v: v >= 0)[0] if phi(G) < 0 else None
    if y_left is None and y_right is None:
        y_star = 0.0  # degenerate boxes: every price is optimal
    elif y_left is None:
        y_star = y_right
    elif y_right is None:
        y_star = y_left
    else:
        y_star = 0.5 * (y_left + y_right)
    x_star = pop.best_response(np.full(p.n, y_star), a, b)
    imbalance = abs(float(x_star.sum()) - p.C)
    if imbalance > tol:
        raise SolverError(f"oracle imbalance {imbalance:.3e} exceeds tol {tol:.1e}")
    return OracleSolution(x_star=x_star, y_star=y_star, p_star=float(pop.evaluate(x_star).sum()))
