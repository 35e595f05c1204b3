"""Single-machine micro-grid with governor primary control.

Two states, frequency deviation ``dw`` (Hz) and governor power ``p_gov`` (MW)::

    M d(dw)/dt   = -D dw + p_gov + w
    Tg d(p_gov)/dt = -p_gov - dw / R

where ``w = (g - g0) + sum(x) + zeta`` is the external power surplus: scheduled
generation change, total load reduction, and process noise. With the sign
convention ``C = g0 - g`` the loads' residual is ``r = sum(x) - C`` and
``w = r + zeta``, so a generation deficit drives ``dw`` negative.

The continuous model is discretized either by forward Euler (default) or by
an exact zero-order hold through the matrix exponential.
"""
from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .errors import ConfigError


@dataclass(frozen=True)
class GridParams:
    T: float = 0.1
    M: float = 10.0
    D: float = 1.0
    R: float = 0.05
    T_g: float = 5.0
    omega0: float = 60.0
    sigma_zeta: float = 0.1
    sigma_delta: float = 1e-3
    discretization: str = "euler"

    def __post_init__(self):
        for name in ("T", "M", "D", "R", "T_g"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"grid parameter {name} must be positive")
        if self.sigma_zeta < 0 or self.sigma_delta < 0:
            raise ConfigError("noise standard deviations must be non-negative")
        if self.discretization not in ("euler", "exact"):
            raise ConfigError(f"unknown discretization {self.discretization!r}")

    def continuous(self) -> tuple[np.ndarray, np.ndarray]:
        A = np.array([[-self.D / self.M, 1.0 / self.M],
                      [-1.0 / (self.R * self.T_g), -1.0 / self.T_g]])
        B = np.array([1.0 / self.M, 0.0])
        return A, B

    def discrete(self) -> tuple[np.ndarray, np.ndarray]:
        """``(A_d, B_d)`` with ``s+ = A_d s + B_d w`` for ``s = (dw, p_gov)``."""
        A, B = self.continuous()
        if self.discretization == "euler":
            return np.eye(2) + self.T * A, self.T * B
        # augmented-matrix zero-order hold
        aug = np.zeros((3, 3))
        aug[:2, :2] = A
        aug[:2, 2] = B
        E = expm(aug * self.T)
        return E[:2, :2], E[:2, 2]


@dataclass(frozen=True)
class GridState:
    delta_omega: float = 0.0
    p_gov: float = 0.0
    k: int = 0


@dataclass(frozen=True)
class GenerationSchedule:
    """Piecewise-constant, right-continuous generation ``g(t)`` in MW."""

    breakpoints: tuple = ((0.0, 200.0), (20.0, 190.0), (50.0, 170.0))
    g0: float = field(default=200.0)

    def __post_init__(self):
        bps = tuple((float(t), float(g)) for t, g in self.breakpoints)
        if not bps or bps[0][0] != 0.0:
            raise ConfigError("schedule must start at t = 0")
        if any(t1 <= t0 for (t0, _), (t1, _) in zip(bps, bps[1:])):
            raise ConfigError("schedule breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", bps)

    @property
    def times(self) -> list[float]:
        return [t for t, _ in self.breakpoints]

    def balance_constant(self, t: float) -> float:
        return self.g0 - scheduled_generation(self, t)


def scheduled_generation(sched: GenerationSchedule, t: float) -> float:
    if t < 0:
        raise ValueError("time must be non-negative")
    i = bisect_right(sched.times, t + 1e-9) - 1
    return sched.breakpoints[i][1]


def grid_step(state: GridState, params: GridParams, total_x: float, g: float,
              g0: float, zeta: float = 0.0) -> GridState:
    """Advance the grid by one interval ``T``."""
    A, B = params.discrete()
    w = (g - g0) + total_x + zeta
    dw, pg = state.delta_omega, state.p_gov
    return GridState(
        delta_omega=A[0, 0] * dw + A[0, 1] * pg + B[0] * w,
        p_gov=A[1, 0] * dw + A[1, 1] * pg + B[1] * w,
        k=state.k + 1,
    )


def measure_frequency(state: GridState, delta_i, params: GridParams | None = None,
                      omega0: float | None = None):
    """Local frequency reading ``omega0 + dw + delta_i`` (Hz).

    ``delta_i`` may be an array of per-load noise draws.
    """
    if omega0 is None:
        omega0 = params.omega0 if params is not None else 60.0
    return omega0 + state.delta_omega + delta_i


def steady_state_deviation(params: GridParams, C: float) -> float:
    """Generator-only steady-state ``dw`` after a sustained deficit ``C``."""
    return -C / (params.D + 1.0 / params.R)
