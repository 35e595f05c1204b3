"""Scalar convex disutility models and their box-constrained proximal step.

All three built-in models are piecewise quadratic with zero linear terms and
breakpoints ``left <= 0 <= right``::

    f(x) = 0.5*h_left*x**2  + k_left    x <= left
           0.5*h_mid*x**2               left <= x <= right
           0.5*h_right*x**2 + k_right   x >= right

That shared shape lets every operation run vectorized over a population of
loads through :class:`PiecewiseQuadratic`; the per-load functions below are
thin wrappers over length-one arrays.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .errors import NotStronglyConvexError, SolverError


@dataclass(frozen=True)
class Quadratic:
    """``f(x) = q x^2 / 2``."""

    q: float

    def __post_init__(self):
        if not self.q > 0:
            raise ValueError(f"curvature must be positive, got q={self.q}")


@dataclass(frozen=True)
class KinkedQuadratic:
    """``q x^2`` inside ``|x| <= eta``, ``3 q x^2 - 2 q eta^2`` outside.

    With ``raw=True`` the outer constant is ``-q*eta`` instead, which is
    discontinuous at ``|x| = eta`` unless ``eta = 1/2``. The raw form is kept
    only for side-by-side comparison; it is not convex in general and the
    subgradient and modulus queries refuse it.
    """

    q: float
    eta: float
    raw: bool = False

    def __post_init__(self):
        if not self.q > 0:
            raise ValueError(f"curvature must be positive, got q={self.q}")
        if not self.eta >= 0:
            raise ValueError(f"kink threshold must be non-negative, got eta={self.eta}")


@dataclass(frozen=True)
class AsymmetricQuadratic:
    """``q_minus x^2 / 2`` for ``x < 0`` and ``q_plus x^2 / 2`` for ``x >= 0``."""

    q_minus: float
    q_plus: float

    def __post_init__(self):
        if not (self.q_minus > 0 and self.q_plus > 0):
            raise ValueError(
                f"curvatures must be positive, got q_minus={self.q_minus}, q_plus={self.q_plus}"
            )


DisutilityFunction = Union[Quadratic, KinkedQuadratic, AsymmetricQuadratic]


@dataclass(frozen=True)
class Box:
    """Closed interval ``[a, b]`` in MW."""

    a: float
    b: float

    def __post_init__(self):
        if not self.a <= self.b:
            raise ValueError(f"empty box [{self.a}, {self.b}]")


def _piece_params(f: DisutilityFunction) -> tuple[float, ...]:
    # (left, right, h_left, h_mid, h_right, k_left, k_right)
    if isinstance(f, Quadratic):
        return (0.0, 0.0, f.q, f.q, f.q, 0.0, 0.0)
    if isinstance(f, KinkedQuadratic):
        k = -f.q * f.eta if f.raw else -2.0 * f.q * f.eta**2
        return (-f.eta, f.eta, 6.0 * f.q, 2.0 * f.q, 6.0 * f.q, k, k)
    if isinstance(f, AsymmetricQuadratic):
        # middle piece is the single point 0, where both sides agree
        return (0.0, 0.0, f.q_minus, f.q_plus, f.q_plus, 0.0, 0.0)
    raise TypeError(f"unknown disutility type {type(f).__name__}")


class PiecewiseQuadratic:
    """Vectorized view of a population of disutility functions.

    Parameters
    ----------
    functions : sequence of DisutilityFunction
        One function per load, in agent order.
    """

    def __init__(self, functions: Sequence[DisutilityFunction]):
        self.functions = tuple(functions)
        params = np.array([_piece_params(f) for f in self.functions], dtype=float).reshape(-1, 7)
        (self.left, self.right, self.h_left, self.h_mid, self.h_right,
         self.k_left, self.k_right) = params.T.copy()
        self.convex = np.array(
            [not (isinstance(f, KinkedQuadratic) and f.raw) for f in self.functions], dtype=bool
        )

    def __len__(self):
        return len(self.functions)

    def take(self, idx) -> "PiecewiseQuadratic":
        idx = np.arange(len(self))[idx]
        return PiecewiseQuadratic([self.functions[i] for i in idx])

    def _pieces(self):
        inf = np.full_like(self.left, np.inf)
        return (
            (-inf, self.left, self.h_left, self.k_left),
            (self.left, self.right, self.h_mid, np.zeros_like(self.left)),
            (self.right, inf, self.h_right, self.k_right),
        )

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        vl = 0.5 * self.h_left * x * x + self.k_left
        vm = 0.5 * self.h_mid * x * x
        vr = 0.5 * self.h_right * x * x + self.k_right
        out = np.where(x < self.left, vl, np.where(x > self.right, vr, vm))
        # at a breakpoint take the lower adjacent value (lower semi-continuous hull)
        out = np.where(x == self.left, np.minimum(vl, vm), out)
        out = np.where(x == self.right, np.minimum(vr, vm), out)
        return out

    def subgradient_interval(self, x):
        if not self.convex.all():
            raise ValueError("raw kinked disutility is not convex; subdifferential undefined")
        x = np.asarray(x, dtype=float)
        gl = self.h_left * x
        gm = self.h_mid * x
        gr = self.h_right * x
        g = np.where(x < self.left, gl, np.where(x > self.right, gr, gm))
        lo = np.where(x == self.left, gl, g)
        hi = np.where(x == self.right, gr, g)
        return lo, hi

    def strong_convexity_modulus(self):
        if not self.convex.all():
            raise ValueError("raw kinked disutility is not convex")
        degenerate_mid = self.left == self.right
        mid = np.where(degenerate_mid, np.inf, self.h_mid)
        return np.minimum(np.minimum(self.h_left, self.h_right), mid)

    def prox(self, y, rho, c, a, b):
        """Minimize ``f(x) + y x + rho/2 (x - c)^2`` over ``[a, b]``, elementwise.

        Each piece's stationary point is clipped to the piece intersected
        with the box; the lowest-objective candidate wins. ``rho = 0`` gives
        the plain best response to price ``y``.
        """
        y, rho, c, a, b = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (y, rho, c, a, b)))
        xs, vals = [], []
        for lo_p, hi_p, h, k in self._pieces():
            lo = np.maximum(lo_p, a)
            hi = np.minimum(hi_p, b)
            valid = lo <= hi
            s = (rho * c - y) / (h + rho)
            x = np.clip(s, lo, np.where(valid, hi, lo))
            v = 0.5 * h * x * x + k + y * x + 0.5 * rho * (x - c) ** 2
            xs.append(x)
            vals.append(np.where(valid, v, np.inf))
        xs = np.stack(xs)
        best = np.argmin(np.stack(vals), axis=0)
        return np.take_along_axis(xs, best[None, ...], axis=0)[0]

    def best_response(self, y, a, b):
        return self.prox(y, 0.0, 0.0, a, b)


def _single(f: DisutilityFunction) -> PiecewiseQuadratic:
    return PiecewiseQuadratic([f])


def evaluate(f: DisutilityFunction, x: float) -> float:
    """Disutility of a consumption change ``x`` (MW)."""
    return float(_single(f).evaluate(np.array([x]))[0])


def subgradient_interval(f: DisutilityFunction, x: float) -> tuple[float, float]:
    """Closed subdifferential of ``f`` at ``x`` as ``(g_lo, g_hi)``."""
    lo, hi = _single(f).subgradient_interval(np.array([x]))
    return float(lo[0]), float(hi[0])


def strong_convexity_modulus(f: DisutilityFunction) -> float:
    """Largest ``m`` such that ``f(x) - m x^2 / 2`` is convex."""
    return float(_single(f).strong_convexity_modulus()[0])


def prox_step(f: DisutilityFunction, box: Box, y: float, rho: float, c: float) -> float:
    """Argmin over ``box`` of ``f(x) + y x + rho/2 (x - c)^2``.

    This is the primal update of one load, with ``c = x_prev - r_hat``.
    """
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho}")
    return float(_single(f).prox(np.array([y]), rho, c, box.a, box.b)[0])


def prox_step_bisection(
    subgradient: Callable[[float], tuple[float, float]],
    box: Box,
    y: float,
    rho: float,
    c: float,
    tol: float = 1e-13,
    max_iter: int = 200,
) -> float:
    """Generic proximal step by bisection on the monotone optimality map.

    Works for any convex scalar disutility given through its subdifferential
    ``subgradient(x) -> (g_lo, g_hi)``. Slower than :func:`prox_step`, which
    uses closed forms for the built-in models.

    Raises
    ------
    SolverError
        If the bracket does not shrink below ``tol`` within ``max_iter`` steps.
    """
    def interval(x):
        g_lo, g_hi = subgradient(x)
        shift = y + rho * (x - c)
        return g_lo + shift, g_hi + shift

    lo, hi = box.a, box.b
    if interval(lo)[0] >= 0:
        return lo
    if interval(hi)[1] <= 0:
        return hi
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        g_lo, g_hi = interval(mid)
        if g_hi < 0:
            lo = mid
        elif g_lo > 0:
            hi = mid
        else:
            return mid
        if hi - lo <= tol * max(1.0, abs(lo), abs(hi)):
            return 0.5 * (lo + hi)
    raise SolverError(f"prox bisection did not converge in {max_iter} iterations")
