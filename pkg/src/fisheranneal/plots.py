"""Figure rendering for simulation reports.

All figures are written to files (SVG by default) next to the CSV output;
nothing is shown interactively.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_divergence_plot(times, kls, path, l1s=None, title=None) -> None:
    """Log-log KL trace with a dotted 1/t guide line for rate comparison."""
    times = np.asarray(times, dtype=float)
    kls = np.asarray(kls, dtype=float)
    keep = np.isfinite(kls) & (kls > 0) & (times > 0)

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    if keep.any():
        ax.loglog(times[keep], kls[keep], marker=".", lw=1.2, label="KL")
        t_ref = times[keep]
        anchor = kls[keep][0] * t_ref[0]
        ax.loglog(t_ref, anchor / t_ref, ls=":", color="k", label=r"$t^{-1}$")
    if l1s is not None:
        l1s = np.asarray(l1s, dtype=float)
        k2 = np.isfinite(l1s) & (l1s > 0) & (times > 0)
        if k2.any():
            ax.loglog(times[k2], l1s[k2], marker=".", lw=1.0, alpha=0.7, label="L1")
    ax.set_xlabel("t")
    ax.set_ylabel("divergence")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(loc="best")
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)


def save_comparison_plot(times, series_a, series_b, labels, path, ylabel,
                         title=None) -> None:
    """Two traces on shared time axis (drift-race style figure)."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(times, series_a, lw=1.4, label=labels[0])
    ax.plot(times, series_b, lw=1.4, ls="--", label=labels[1])
    ax.set_xlabel("t")
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best")
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)
