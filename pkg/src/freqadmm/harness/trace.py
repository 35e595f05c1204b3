"""Simulation trace container and its CSV format."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

TRACE_COLUMNS = ("k", "t_s", "omega_hz", "g_mw", "sum_x_mw", "r_mw", "p_obj", "v_lyap")


@dataclass
class Trace:
    """Per-step record of a closed-loop run.

    The eight CSV columns are stored as arrays of length ``steps + 1``.
    ``r_hat_error[k, i]`` is load ``i``'s raw estimate of ``r[k]`` minus the
    truth and ``r_used_error`` the same after neighbour averaging; both have
    one row per executed update. ``x`` holds per-load iterates when recorded.
    """

    k: np.ndarray
    t_s: np.ndarray
    omega_hz: np.ndarray
    g_mw: np.ndarray
    sum_x_mw: np.ndarray
    r_mw: np.ndarray
    p_obj: np.ndarray
    v_lyap: np.ndarray
    r_hat_error: np.ndarray | None = None
    r_used_error: np.ndarray | None = None
    x: np.ndarray | None = None
    label: str = ""
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.k)

    def columns(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in TRACE_COLUMNS}

    def truncated(self, length: int) -> "Trace":
        cols = {name: arr[:length] for name, arr in self.columns().items()}
        return Trace(**cols, label=self.label, meta=dict(self.meta))

    def same_as(self, other: "Trace") -> bool:
        """Bitwise equality of every recorded array."""
        names = TRACE_COLUMNS + ("r_hat_error", "r_used_error", "x")
        for name in names:
            a, b = getattr(self, name), getattr(other, name)
            if (a is None) != (b is None):
                return False
            if a is not None and (a.shape != b.shape or a.tobytes() != b.tobytes()):
                return False
        return True


def write_trace_csv(trace: Trace, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        cols = trace.columns()
        for row in zip(*cols.values()):
            w.writerow([int(row[0])] + [repr(float(v)) for v in row[1:]])
    return path


def read_trace_csv(path) -> Trace:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != TRACE_COLUMNS:
            raise ValueError(f"unexpected trace header {header}")
        rows = [r for r in reader]
    data = np.array(rows, dtype=float).reshape(-1, len(TRACE_COLUMNS))
    cols = {name: data[:, j] for j, name in enumerate(TRACE_COLUMNS)}
    cols["k"] = cols["k"].astype(int)
    return Trace(**cols)
