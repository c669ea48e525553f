"""PNG figures for the full report.

Rendering uses the Agg backend with fixed sizes, fonts and no embedded
software tag, so identical data gives identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["spectrum_figure", "trajectory_figure", "profile_figure", "save"]

_STYLE = {"figure.dpi": 100, "font.size": 9, "axes.grid": True}


def save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, format="png", metadata={"Software": None})
    plt.close(fig)
    return path


def spectrum_figure(eigenvalues, kernel_mask, path, count: int = 12) -> Path:
    """Smallest eigenvalues by real part; kernel ones marked separately."""
    lam = np.asarray(eigenvalues)[:count]
    mask = np.asarray(kernel_mask)[:count]
    idx = np.arange(len(lam))
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.semilogy(idx[~mask], lam.real[~mask], "o", label="stable")
        ax.semilogy(idx[mask], np.maximum(np.abs(lam[mask]), 1e-16), "x", label="kernel (|lambda|)")
        ax.set_xlabel("index")
        ax.set_ylabel("Re lambda")
        ax.legend()
        fig.tight_layout()
        return save(fig, path)


def trajectory_figure(times, distance, area, omega, sigma_fit, path) -> Path:
    """Distance to the equilibria on a log scale and relative area drift."""
    t = np.asarray(times)
    d = np.asarray(distance)
    a = np.asarray(area)
    with plt.rc_context(_STYLE):
        fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(5, 5), sharex=True)
        ax1.semilogy(t, d, label="distance")
        ax1.semilogy(t, d[0] * np.exp(-omega * t), "--", label=f"rate {omega:.4g} (linear)")
        if np.isfinite(sigma_fit):
            ax1.semilogy(t, d[0] * np.exp(-sigma_fit * t), ":", label=f"rate {sigma_fit:.4g} (fit)")
        ax1.set_ylabel("L2 distance")
        ax1.legend()
        ax2.plot(t, (a - a[0]) / a[0])
        ax2.set_xlabel("t")
        ax2.set_ylabel("relative area drift")
        fig.tight_layout()
        return save(fig, path)


def profile_figure(x, initial, final, equilibrium, path) -> Path:
    """Initial, final and limiting equilibrium height fields."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.plot(x, initial, label="initial")
        ax.plot(x, final, label="final")
        ax.plot(x, equilibrium, "--", label="nearest equilibrium")
        ax.set_xlabel("x")
        ax.set_ylabel("height")
        ax.legend()
        fig.tight_layout()
        return save(fig, path)
