"""Per-load estimation of the imbalance ``r = sum(x) - C`` from frequency readings.

Each load knows the grid model (public) and its own readings, nothing else.
From two consecutive deviations it inverts the frequency equation for the
external surplus ``w``::

    dw[k+1] = A00 dw[k] + A01 p_gov[k] + B0 w[k]
    w[k]    = (dw[k+1] - A00 dw[k]) / B0 - (A01 / B0) p_gov[k]

The governor state is not measured, so every load runs its own copy of the
governor recursion driven by its own readings. Without noise that copy is
exact and ``w[k] = r[k]``; with noise the error is zero-mean.

The estimate produced after reading ``omega[k+1]`` refers to ``r[k]``: a
one-step delay.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .grid import GridParams


@dataclass(frozen=True)
class ResidualEstimate:
    value: float
    k_ref: int
    agent: int

    def __float__(self):
        return float(self.value)


@dataclass
class EstimatorState:
    """Local memory of one or more loads (arrays are indexed by load)."""

    n: int = 1
    smoothing: float = 0.0
    prev: np.ndarray | None = None
    p_gov_hat: np.ndarray = field(default=None)
    k: int = 0

    def __post_init__(self):
        if not 0.0 <= self.smoothing < 1.0:
            raise ConfigError(f"smoothing factor must lie in [0, 1), got {self.smoothing}")
        if self.p_gov_hat is None:
            self.p_gov_hat = np.zeros(self.n)


def _model(params: GridParams):
    A, B = params.discrete()
    if B[0] == 0:
        raise ConfigError("frequency equation does not depend on the input; cannot invert")
    return A, B


def governor_contribution(p_gov_hat, params: GridParams):
    """Share of the one-step frequency change explained by the governor (MW)."""
    A, B = _model(params)
    return (A[0, 1] / B[0]) * np.asarray(p_gov_hat)


def estimate_residual(est: EstimatorState, omega_hat_now, omega_hat_prev, params: GridParams):
    """Invert one step of the frequency dynamics; updates ``est.p_gov_hat``.

    ``omega_hat_prev`` is ``None`` on the very first reading, in which case
    the estimate is zero by convention. Returns an array of per-load values.
    """
    now = np.asarray(omega_hat_now, dtype=float) - params.omega0
    if omega_hat_prev is None:
        return np.zeros_like(now)
    prev = np.asarray(omega_hat_prev, dtype=float) - params.omega0
    A, B = _model(params)
    w = (now - A[0, 0] * prev) / B[0] - governor_contribution(est.p_gov_hat, params)
    est.p_gov_hat = A[1, 0] * prev + A[1, 1] * est.p_gov_hat + B[1] * w
    return w


class ResidualEstimator:
    """Stateful wrapper: feed readings in time order, get delayed residuals out.

    Parameters
    ----------
    n : int
        Number of loads served (independent, one state slot each).
    params : GridParams
        The grid model every load knows.
    smoothing : float
        Exponential smoothing factor applied to readings before inversion;
        0 disables it. Any positive value breaks noiseless exactness.
    """

    def __init__(self, n: int, params: GridParams, smoothing: float = 0.0):
        _model(params)
        self.params = params
        self.state = EstimatorState(n=n, smoothing=smoothing)

    def step(self, omega_hat) -> np.ndarray:
        reading = np.asarray(omega_hat, dtype=float)
        st = self.state
        if st.smoothing and st.prev is not None:
            reading = st.smoothing * st.prev + (1.0 - st.smoothing) * reading
        r_hat = estimate_residual(st, reading, st.prev, self.params)
        st.prev = reading
        st.k += 1
        return r_hat

    def estimates(self, omega_hat) -> list[ResidualEstimate]:
        """Like :meth:`step` but wrapped per load, tagged with the referenced index."""
        k_ref = self.state.k - 1
        values = self.step(omega_hat)
        return [ResidualEstimate(float(v), k_ref, i) for i, v in enumerate(values)]
