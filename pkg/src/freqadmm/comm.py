"""1D-grid neighbour communication used to average out estimation noise.

Agents are indexed from 0. Agent ``i`` talks to every ``j`` with
``|i - j| <= n0`` (itself included) and replaces its own value by the plain
mean over that neighbourhood.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CommGraph:
    n: int
    n0: int = 2
    mode: str = "grid1d"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("graph needs at least one node")
        if self.n0 < 0:
            raise ValueError("n0 must be non-negative")
        if self.mode not in ("none", "grid1d"):
            raise ValueError(f"unknown comm mode {self.mode!r}")


def neighbors(g: CommGraph, i: int) -> range:
    if not 0 <= i < g.n:
        raise IndexError(f"agent {i} out of range for n={g.n}")
    if g.mode == "none":
        return range(i, i + 1)
    return range(max(0, i - g.n0), min(g.n - 1, i + g.n0) + 1)


def average_neighborhood(g: CommGraph, i: int, values) -> float:
    return float(average_all(g, values)[i])


def average_all(g: CommGraph, values) -> np.ndarray:
    """Neighbourhood mean for every agent at once.

    Deviations are summed relative to the first value in each window, so
    equal inputs come back bitwise unchanged, and agents sharing a window
    get bitwise identical outputs.
    """
    values = np.asarray(values, dtype=float)
    if values.shape != (g.n,):
        raise ValueError(f"expected {g.n} values, got shape {values.shape}")
    if g.mode == "none" or g.n0 == 0:
        return values.copy()
    idx = np.arange(g.n)
    lo = np.maximum(0, idx - g.n0)
    hi = np.minimum(g.n - 1, idx + g.n0)
    width = min(2 * g.n0 + 1, g.n)
    cols = lo[:, None] + np.arange(width)[None, :]
    mask = cols <= hi[:, None]
    ref = values[lo]
    dev = np.where(mask, values[np.minimum(cols, g.n - 1)] - ref[:, None], 0.0)
    return ref + dev.sum(axis=1) / (hi - lo + 1)
