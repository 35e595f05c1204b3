"""Summary reductions over a closed-loop trace."""
from __future__ import annotations

import numpy as np

from .trace import Trace


def _windows(t: np.ndarray, starts) -> list[tuple[float, float, np.ndarray]]:
    edges = [s for s in starts if s <= t[-1]] + [np.inf]
    out = []
    for lo, hi in zip(edges, edges[1:]):
        mask = (t >= lo - 1e-9) & (t < hi - 1e-9)
        if mask.any():
            out.append((lo, hi, mask))
    return out


def compute_metrics(trace: Trace, breakpoints=(0.0,), omega0: float | None = None,
                    settle_s: float = 2.0) -> dict:
    """Frequency and disutility summaries, one entry per schedule window.

    Per window: the largest ``|dw|``; the steady-state ``|dw|`` as the mean
    deviation over the last ``settle_s`` seconds; and the overshoot, the
    largest rise of ``dw`` above that steady value after the nadir.

    Raises
    ------
    ValueError
        On an empty trace.
    """
    if len(trace) == 0:
        raise ValueError("cannot summarize an empty trace")
    t = np.asarray(trace.t_s, dtype=float)
    if omega0 is None:
        omega0 = float(trace.omega_hz[0])
    dw = np.asarray(trace.omega_hz, dtype=float) - omega0
    windows = []
    for lo, hi, mask in _windows(t, breakpoints):
        tw, dww = t[mask], dw[mask]
        settle = tw >= tw[-1] - settle_s
        steady = float(dww[settle].mean())
        nadir = int(np.argmin(dww))
        windows.append({
            "t_start_s": float(lo),
            "t_end_s": float(min(hi, t[-1])),
            "max_abs_dw_hz": float(np.abs(dww).max()),
            "steady_abs_dw_hz": abs(steady),
            "overshoot_hz": max(0.0, float(dww[nadir:].max()) - steady),
            "final_disutility": float(trace.p_obj[mask][-1]),
            "final_abs_residual_mw": float(abs(trace.r_mw[mask][-1])),
        })
    return {
        "label": trace.label,
        "max_abs_dw_hz": float(np.abs(dw).max()),
        "max_overshoot_hz": max(w["overshoot_hz"] for w in windows),
        "final_disutility": float(trace.p_obj[-1]),
        "windows": windows,
    }
