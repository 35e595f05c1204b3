"""Figure rendering for simulation traces and convergence reports.

Figures are written straight to files with the non-interactive Agg backend.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.2,
    "axes.grid": True,
    "grid.alpha": 0.3,
}

COLORS = {"none": "tab:red", "dmadmm": "tab:blue", "pjadmm": "tab:green", "dual": "tab:orange"}


def _color(label: str):
    return COLORS.get(label.split()[0], None)


def plot_traces(traces, path, breakpoints=(), title: str | None = None) -> Path:
    """System frequency (top) and total disutility (bottom) for each trace."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context(STYLE):
        fig, (ax_f, ax_p) = plt.subplots(2, 1, figsize=(6.0, 5.0), sharex=True)
        for tr in traces:
            label = tr.label or "trace"
            ax_f.plot(tr.t_s, tr.omega_hz, label=label, color=_color(label))
            ax_p.plot(tr.t_s, tr.p_obj, label=label, color=_color(label))
        for t in breakpoints:
            if t > 0:
                for ax in (ax_f, ax_p):
                    ax.axvline(t, color="0.6", lw=0.8, ls=":")
        ax_f.set_ylabel("frequency [Hz]")
        ax_p.set_ylabel("total disutility")
        ax_p.set_xlabel("time [s]")
        ax_f.legend(loc="lower left")
        if title:
            ax_f.set_title(title)
        fig.tight_layout()
        fig.savefig(path, dpi=150)
        plt.close(fig)
    return path


def plot_convergence(report, path) -> Path:
    """Residual, iterate error and Lyapunov value against iteration, log scale."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tiny = np.finfo(float).tiny
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6.0, 3.5))
        k = np.arange(len(report.residuals))
        ax.semilogy(k, np.abs(report.residuals) + tiny, label="|r|")
        ax.semilogy(k, report.x_errors + tiny, label="||x - x*||")
        ax.semilogy(k, report.p_errors + tiny, label="|p - p*|")
        if len(report.lyapunov):
            ax.semilogy(np.arange(len(report.lyapunov)), report.lyapunov + tiny, label="V", ls="--")
        ax.set_xlabel("iteration")
        ax.legend()
        ax.set_title(f"{report.algorithm}, n={report.n}, rho={report.rho:.3g}"
                     f" (bound {report.rho_max:.3g})")
        fig.tight_layout()
        fig.savefig(path, dpi=150)
        plt.close(fig)
    return path
